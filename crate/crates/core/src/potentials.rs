//! Radial time and the LCK potential on C^2 \ {0}.
//!
//! The contraction `gamma_0` is embedded in a one-parameter group `phi_t`
//! with `phi_1 = gamma_0`. The radial time `r(z)` is the unique time with
//! `|phi_{-r}(z)| = 1`, and the potential is `f = a^r` with `a = |alpha||beta|`,
//! so `f(gamma_0 z) = a f(z)`.
//!
//! For `lambda = 0` the group is diagonal, `phi_t = (alpha^t z1, beta^t z2)`.
//! For `lambda != 0` (so `alpha = beta^m`) it is the shear flow
//! `phi_t = (beta^{mt} (z1 + t lambda_hat z2^m), beta^t z2)` with
//! `lambda_hat = lambda beta^{-m}`.

use nalgebra::Matrix4;
use num_complex::Complex64;

use crate::error::{BihermError, Result};
use crate::groups::{apply_group_element, ContractionParams, GroupElement, Unitary2};
use crate::kernel::forms::{ddc_from_hessian, metric_from_form, min_eigenvalue};
use crate::kernel::{ComplexJet, Endomorphism4, Jet, JetScalar, RealPoint4, TwoFormAtPoint};
use crate::stats::ResidualStats;

/// Root-finding target for `|phi_{-r}(z)|^2 - 1`.
pub const RADIAL_ROOT_TOL: f64 = 1e-13;
const SCAN_POINTS: usize = 64;
const MAX_BRACKET_DOUBLINGS: usize = 60;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum FlowKind {
    /// `log_alpha = ln|alpha| + i arg_alpha`, likewise for beta.
    Diagonal { log_alpha: Complex64, log_beta: Complex64 },
    Shear { log_beta: Complex64, m: u32, lambda_hat: Complex64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FlowSpec {
    pub kind: FlowKind,
    /// `a = |alpha||beta|`, the factor by which `gamma_0` rescales `f`.
    pub multiplier: f64,
}

impl FlowSpec {
    pub fn from_contraction(cp: &ContractionParams) -> Self {
        let log_alpha = Complex64::new(cp.alpha.norm().ln(), cp.arg_alpha);
        let log_beta = Complex64::new(cp.beta.norm().ln(), cp.arg_beta);
        let kind = if cp.has_shear() {
            FlowKind::Shear { log_beta, m: cp.m, lambda_hat: cp.lambda / cp.beta.powu(cp.m) }
        } else {
            FlowKind::Diagonal { log_alpha, log_beta }
        };
        Self { kind, multiplier: cp.alpha.norm() * cp.beta.norm() }
    }

    pub fn diagonal(alpha: Complex64, beta: Complex64) -> Self {
        Self::from_contraction(&ContractionParams::diagonal(alpha, beta))
    }

    pub fn shear(beta: Complex64, m: u32, lambda: Complex64) -> Self {
        Self::from_contraction(&ContractionParams::resonant(beta, m, lambda))
    }

    pub fn log_multiplier(&self) -> f64 {
        self.multiplier.ln()
    }

    pub fn flow_apply(&self, t: f64, z: &RealPoint4) -> RealPoint4 {
        let (z1, z2) = z.to_complex();
        match self.kind {
            FlowKind::Diagonal { log_alpha, log_beta } => {
                RealPoint4::from_complex((log_alpha * t).exp() * z1, (log_beta * t).exp() * z2)
            }
            FlowKind::Shear { log_beta, m, lambda_hat } => {
                let w1 = (log_beta * (m as f64 * t)).exp() * (z1 + lambda_hat * t * z2.powu(m));
                RealPoint4::from_complex(w1, (log_beta * t).exp() * z2)
            }
        }
    }

    /// `G(r) = |phi_{-r}(z)|^2 - 1` and `dG/dr`.
    fn radial_residual(&self, r: f64, z1: Complex64, z2: Complex64) -> (f64, f64) {
        match self.kind {
            FlowKind::Diagonal { log_alpha, log_beta } => {
                let (ca, cb) = (-2.0 * log_alpha.re, -2.0 * log_beta.re);
                let (ea, eb) = ((ca * r).exp(), (cb * r).exp());
                let (a, b) = (z1.norm_sqr(), z2.norm_sqr());
                (a * ea + b * eb - 1.0, a * ca * ea + b * cb * eb)
            }
            FlowKind::Shear { log_beta, m, lambda_hat } => {
                let cb = -2.0 * log_beta.re;
                let shear = lambda_hat * z2.powu(m);
                let w = z1 - shear * r;
                let (e1, e2) = ((m as f64 * cb * r).exp(), (cb * r).exp());
                let ww = w.norm_sqr();
                let dww = 2.0 * (w.conj() * -shear).re;
                let b = z2.norm_sqr();
                (e1 * ww + b * e2 - 1.0, m as f64 * cb * e1 * ww + e1 * dww + b * cb * e2)
            }
        }
    }

    /// The same residual as a jet in `(r, x1, y1, x2, y2)`.
    fn radial_residual_jet(&self, r: f64, z: &RealPoint4) -> Jet<5> {
        let [rj, x1, y1, x2, y2] = Jet::<5>::variables([r, z.coords[0], z.coords[1], z.coords[2], z.coords[3]]);
        match self.kind {
            FlowKind::Diagonal { log_alpha, log_beta } => {
                let (ca, cb) = (-2.0 * log_alpha.re, -2.0 * log_beta.re);
                (x1.square() + y1.square()) * (rj * ca).exp() + (x2.square() + y2.square()) * (rj * cb).exp() - 1.0
            }
            FlowKind::Shear { log_beta, m, lambda_hat } => {
                let cb = -2.0 * log_beta.re;
                let z2 = ComplexJet::new(x2, y2);
                let shear = z2.powu(m).scale(lambda_hat);
                let w = ComplexJet::new(x1 - shear.re * rj, y1 - shear.im * rj);
                w.norm_sqr() * (rj * (m as f64 * cb)).exp() + z2.norm_sqr() * (rj * cb).exp() - 1.0
            }
        }
    }

    fn needs_scan(&self) -> bool {
        matches!(self.kind, FlowKind::Shear { .. })
    }
}

fn ambiguous(reason: impl Into<String>) -> BihermError {
    BihermError::AmbiguousRadialTime { reason: reason.into() }
}

/// Scalar radial time: bracket, scan for extra sign changes, then safeguarded
/// Newton.
pub fn radial_time_value(spec: &FlowSpec, z: &RealPoint4) -> Result<f64> {
    if !(z.norm_sqr() > 0.0) || z.coords.iter().any(|c| !c.is_finite()) {
        return Err(ambiguous("point is the origin or not finite"));
    }
    let (z1, z2) = z.to_complex();
    let g = |r: f64| spec.radial_residual(r, z1, z2);

    let (mut lo, mut hi) = (-1.0, 1.0);
    let mut n = 0;
    while g(lo).0 > 0.0 {
        lo *= 2.0;
        n += 1;
        if n > MAX_BRACKET_DOUBLINGS {
            return Err(ambiguous("no lower bracket"));
        }
    }
    n = 0;
    while g(hi).0 < 0.0 {
        hi *= 2.0;
        n += 1;
        if n > MAX_BRACKET_DOUBLINGS {
            return Err(ambiguous("no upper bracket"));
        }
    }

    if spec.needs_scan() {
        let mut changes = 0;
        let mut prev = g(lo).0;
        for k in 1..=SCAN_POINTS {
            let r = lo + (hi - lo) * k as f64 / SCAN_POINTS as f64;
            let cur = g(r).0;
            if (prev < 0.0 && cur >= 0.0) || (prev >= 0.0 && cur < 0.0) {
                changes += 1;
            }
            prev = cur;
        }
        if changes >= 2 {
            return Err(ambiguous(format!("{changes} sign changes of |phi_(-r)(z)|^2 - 1")));
        }
    }

    let (mut a, mut b) = (lo, hi);
    let mut x = 0.5 * (a + b);
    for _ in 0..200 {
        let (gx, dgx) = g(x);
        if gx.abs() < RADIAL_ROOT_TOL {
            break;
        }
        if gx < 0.0 {
            a = x;
        } else {
            b = x;
        }
        let newton = x - gx / dgx;
        x = if dgx > 0.0 && newton > a && newton < b { newton } else { 0.5 * (a + b) };
        if b - a < 1e-15 * (1.0 + x.abs()) {
            break;
        }
    }
    let (gx, dgx) = g(x);
    if !(dgx > 0.0) {
        return Err(ambiguous(format!("dG/dr = {dgx:.3e} <= 0 at the root")));
    }
    // One polishing step from the converged iterate.
    Ok(x - gx / dgx)
}

/// Radial time with gradient and Hessian, obtained by implicit
/// differentiation of `G(r(z), z) = 0`.
pub fn radial_time(spec: &FlowSpec, z: &RealPoint4) -> Result<JetScalar> {
    let r = radial_time_value(spec, z)?;
    let g = spec.radial_residual_jet(r, z);
    let gr = g.grad[0];
    if !(gr > 0.0) {
        return Err(ambiguous(format!("dG/dr = {gr:.3e} <= 0 at the root")));
    }
    let mut out = JetScalar::constant(r);
    for i in 0..4 {
        out.grad[i] = -g.grad[i + 1] / gr;
    }
    for i in 0..4 {
        for j in 0..4 {
            let (ri, rj) = (out.grad[i], out.grad[j]);
            let num = g.hess[(i + 1, j + 1)] + g.hess[(i + 1, 0)] * rj + g.hess[(j + 1, 0)] * ri + g.hess[(0, 0)] * ri * rj;
            out.hess[(i, j)] = -num / gr;
        }
    }
    Ok(out)
}

/// `f = exp(ln(a) r)` as a jet.
pub fn potential_jet(spec: &FlowSpec, z: &RealPoint4) -> Result<JetScalar> {
    let r = radial_time(spec, z)?;
    Ok((r * spec.log_multiplier()).exp())
}

#[derive(Debug, Clone, Copy)]
pub struct PotentialEval {
    pub r: JetScalar,
    pub f: JetScalar,
    pub ddc_f: TwoFormAtPoint,
    /// `F = dd^c f / f`.
    pub lck_form: TwoFormAtPoint,
    /// Smallest eigenvalue of the metric `dd^c f (., J0 .)`.
    pub min_metric_eigenvalue: f64,
}

impl PotentialEval {
    pub fn lck_metric(&self) -> Matrix4<f64> {
        metric_from_form(&self.lck_form, &Endomorphism4::j0())
    }
}

pub fn potential(spec: &FlowSpec, z: &RealPoint4) -> Result<PotentialEval> {
    let r = radial_time(spec, z)?;
    let f = (r * spec.log_multiplier()).exp();
    let ddc_f = ddc_from_hessian(&f.hess);
    let min_eig = min_eigenvalue(&metric_from_form(&ddc_f, &Endomorphism4::j0()));
    if !(min_eig > 0.0) {
        return Err(BihermError::NotPlurisubharmonic { min_eigenvalue: min_eig });
    }
    Ok(PotentialEval { r, f, ddc_f, lck_form: ddc_f * (1.0 / f.value), min_metric_eigenvalue: min_eig })
}

/// `max |f(gamma z) - a f(z)| / f(z)` over the samples.
pub fn verify_rescaling(
    spec: &FlowSpec,
    gamma: impl Fn(&RealPoint4) -> RealPoint4,
    samples: &[RealPoint4],
) -> Result<ResidualStats> {
    let mut res = Vec::with_capacity(samples.len());
    for z in samples {
        let f = potential_jet(spec, z)?.value;
        let fg = potential_jet(spec, &gamma(z))?.value;
        res.push((fg - spec.multiplier * f).abs() / f);
    }
    Ok(ResidualStats::from_values(&res))
}

/// `max |f(h z) - f(z)| / f(z)` over samples and group elements.
pub fn verify_h_invariance(spec: &FlowSpec, group: &[Unitary2], samples: &[RealPoint4]) -> Result<ResidualStats> {
    let cp = ContractionParams::diagonal(Complex64::new(0.5, 0.0), Complex64::new(0.5, 0.0));
    let mut res = Vec::with_capacity(samples.len() * group.len());
    for z in samples {
        let f = potential_jet(spec, z)?.value;
        for h in group {
            let hz = apply_group_element(&cp, &GroupElement::Unitary(*h), z);
            res.push((potential_jet(spec, &hz)?.value - f).abs() / f);
        }
    }
    Ok(ResidualStats::from_values(&res))
}
