//! Exterior algebra, jets and finite differences on R^4 = C^2.

pub mod calculus;
pub mod forms;
pub mod jet;

pub use calculus::{
    default_step, exterior_derivative_one, exterior_derivative_two, nijenhuis, nijenhuis_max,
    DiffScheme, NijenhuisTensor,
};
pub use forms::{
    acs_from_form_pair, fundamental_form, hodge_star, invariant_part, metric_from_form,
    min_eigenvalue, wedge_one_two, wedge_to_volume, Endomorphism4, OneFormAtPoint, RealPoint4,
    ThreeFormAtPoint, TwoFormAtPoint,
};
pub use jet::{ComplexJet, Jet, JetScalar};
