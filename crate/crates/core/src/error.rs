use thiserror::Error;

pub type Result<T, E = BihermError> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum BihermError {
    #[error("two-form is degenerate (|det| = {det:.3e})")]
    DegenerateForm { det: f64 },

    #[error("metric is singular or not positive definite (min eigenvalue {min_eigenvalue:.3e})")]
    SingularMetric { min_eigenvalue: f64 },

    #[error("group closure exceeded {cap} elements; generators do not span a finite group")]
    NotFinite { cap: usize },

    #[error("radial time is ambiguous at this point: {reason}")]
    AmbiguousRadialTime { reason: String },

    #[error(
        "potential is not plurisubharmonic (min eigenvalue {min_eigenvalue:.3e}); \
         reduce |lambda|, positivity only holds for lambda sufficiently small"
    )]
    NotPlurisubharmonic { min_eigenvalue: f64 },

    #[error("step size underflow at t = {t:.6e} (h = {h:.3e})")]
    StepSizeUnderflow { t: f64, h: f64 },

    #[error("(1,1)-part of the deformed form is not positive (margin {margin:.3e})")]
    NotPositive { margin: f64 },

    #[error("group constraint violated: {0}")]
    ConstraintViolation(String),

    #[error("classification refused: {0}")]
    Refused(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),
}
