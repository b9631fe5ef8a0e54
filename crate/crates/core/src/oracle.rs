//! Closed-form oracles for the integrator, the shear flow, the potential
//! and the induced complex structure.

use nalgebra::Matrix4;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::deformation::{integrate_flow, quotient_triple};
use crate::error::Result;
use crate::groups::{fundamental_annulus_sample, ContractionParams};
use crate::kernel::{Endomorphism4, RealPoint4};
use crate::ode::DEFAULT_ODE_TOL;
use crate::potentials::{potential_jet, FlowSpec};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleResult {
    pub name: String,
    pub samples: usize,
    pub max_residual: f64,
    pub tolerance: f64,
    pub pass: bool,
}

impl OracleResult {
    fn new(name: &str, samples: usize, max_residual: f64, tolerance: f64) -> Self {
        Self { name: name.into(), samples, max_residual, tolerance, pass: max_residual < tolerance }
    }
}

/// `z1(t) = cos 2t z1 + sin 2t conj(z2)`, `z2(t) = cos 2t z2 - sin 2t conj(z1)`:
/// the flow of `f = |z|^2`.
pub fn rotation_flow(t: f64, x: &RealPoint4) -> RealPoint4 {
    let (z1, z2) = x.to_complex();
    let (c2, s2) = ((2.0 * t).cos(), (2.0 * t).sin());
    RealPoint4::from_complex(z1 * c2 + z2.conj() * s2, z2 * c2 - z1.conj() * s2)
}

fn case_a() -> ContractionParams {
    let alpha = Complex64::from_polar(0.5, 0.4);
    ContractionParams::diagonal(alpha, alpha.conj())
}

/// Integrator against the closed-form rotation at `t = 0.3`.
pub fn rotation_oracle(seed: u64, n: usize) -> Result<OracleResult> {
    let cp = case_a();
    let spec = FlowSpec::from_contraction(&cp);
    let mut worst = 0.0f64;
    for p in fundamental_annulus_sample(seed, &cp, n) {
        let s = integrate_flow(&spec, 0.3, &p, DEFAULT_ODE_TOL)?;
        worst = worst.max((s.x_t.to_vector() - rotation_flow(0.3, &p).to_vector()).amax());
    }
    Ok(OracleResult::new("rotation_flow", n, worst, 1e-9))
}

/// `phi_s o phi_t = phi_{s+t}` and `phi_1 = gamma_0` for the shear flow
/// with `beta = 0.6, m = 1, lambda = 0.1`, relative to `1 + |rhs|`.
pub fn shear_group_law_oracle(seed: u64, n: usize) -> OracleResult {
    let cp = ContractionParams::resonant(Complex64::new(0.6, 0.0), 1, Complex64::new(0.1, 0.0));
    let spec = FlowSpec::from_contraction(&cp);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0.0f64;
    for _ in 0..n {
        let z = RealPoint4::new(
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
        );
        let (s, t) = (rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0));
        let lhs = spec.flow_apply(s, &spec.flow_apply(t, &z)).to_vector();
        let rhs = spec.flow_apply(s + t, &z).to_vector();
        worst = worst.max((lhs - rhs).amax() / (1.0 + rhs.amax()));
        let g = cp.apply(&z).to_vector();
        worst = worst.max((spec.flow_apply(1.0, &z).to_vector() - g).amax() / (1.0 + g.amax()));
    }
    OracleResult::new("shear_group_law", n, worst, 1e-12)
}

/// `f = |z|^2` when `|alpha| = |beta|`.
pub fn squared_norm_oracle(seed: u64, n: usize) -> Result<OracleResult> {
    let cp = case_a();
    let spec = FlowSpec::from_contraction(&cp);
    let mut worst = 0.0f64;
    for z in fundamental_annulus_sample(seed, &cp, n) {
        worst = worst.max((potential_jet(&spec, &z)?.value - z.norm_sqr()).abs());
    }
    Ok(OracleResult::new("squared_norm_potential", n, worst, 1e-12))
}

/// In case (a) the flow preserves `Phi0`, so the induced structure is
/// `D^-1 J0 D` with `D` the flow differential.
pub fn pullback_structure_oracle(seed: u64, n: usize) -> Result<OracleResult> {
    let cp = case_a();
    let spec = FlowSpec::from_contraction(&cp);
    let j0 = Endomorphism4::j0().mat;
    let mut worst = 0.0f64;
    for p in fundamental_annulus_sample(seed, &cp, n) {
        let s = integrate_flow(&spec, 0.05, &p, DEFAULT_ODE_TOL)?;
        let d_inv: Matrix4<f64> = s.d.try_inverse().unwrap_or_else(|| Matrix4::from_element(f64::NAN));
        let expect = d_inv * j0 * s.d;
        let j = quotient_triple(&spec, &s)?.j_minus()?;
        worst = worst.max((j.mat - expect).amax());
    }
    Ok(OracleResult::new("pullback_structure", n, worst, 1e-8))
}

/// All oracles, 100 points each.
pub fn run_oracles(seed: u64) -> Result<Vec<OracleResult>> {
    Ok(vec![
        rotation_oracle(seed, 100)?,
        shear_group_law_oracle(seed, 100),
        squared_norm_oracle(seed, 100)?,
        pullback_structure_oracle(seed, 100)?,
    ])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_oracle_passes() {
        for r in run_oracles(3).unwrap() {
            assert!(r.pass, "{r:?}");
        }
    }

    #[test]
    fn rotation_is_periodic() {
        let p = RealPoint4::new(0.3, -0.1, 0.7, 0.2);
        let q = rotation_flow(std::f64::consts::PI, &p);
        assert!((p.to_vector() - q.to_vector()).amax() < 1e-14);
    }
}
