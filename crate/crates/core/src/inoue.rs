//! The canonical-bundle weight on Inoue surfaces `(H x C) / Gamma`.
//!
//! Generators are affine, `(w, z) -> (alpha w + a, beta z + b w + c)`. The
//! weight `Im(w)^k` (`k = 1` for `S_M`, `k = 2` for `S+-`) satisfies
//! `weight(gamma x) = |alpha beta|^2 weight(x)`, so it defines a hermitian
//! metric on the canonical bundle. Its curvature is a nonnegative multiple
//! of `i dw ^ dw-bar`, which forces positive canonical degree.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{BihermError, Result};
use crate::groups::ComplexJson;
use crate::kernel::forms::{ddc_from_hessian, metric_from_form, min_eigenvalue};
use crate::kernel::{Endomorphism4, JetScalar, RealPoint4, TwoFormAtPoint};
use crate::stats::ResidualStats;

const CONSTRAINT_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum InoueFamily {
    #[serde(rename = "S_M")]
    SM,
    #[serde(rename = "S_plus")]
    SPlus,
    #[serde(rename = "S_minus")]
    SMinus,
}

impl InoueFamily {
    /// Exponent `k` of the weight `Im(w)^k`.
    pub fn exponent(self) -> i32 {
        match self {
            InoueFamily::SM => 1,
            InoueFamily::SPlus | InoueFamily::SMinus => 2,
        }
    }
}

/// `(w, z) -> (alpha w + a, beta z + b w + c)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InoueGenerator {
    pub alpha: ComplexJson,
    #[serde(default)]
    pub a: ComplexJson,
    pub beta: ComplexJson,
    #[serde(default)]
    pub b: ComplexJson,
    #[serde(default)]
    pub c: ComplexJson,
}

fn cj(re: f64, im: f64) -> ComplexJson {
    ComplexJson { re, im }
}

impl InoueGenerator {
    pub fn scaling(alpha: f64, beta: Complex64) -> Self {
        Self { alpha: cj(alpha, 0.0), a: cj(0.0, 0.0), beta: beta.into(), b: cj(0.0, 0.0), c: cj(0.0, 0.0) }
    }

    pub fn affine(alpha: f64, a: f64, beta: Complex64, b: Complex64, c: Complex64) -> Self {
        Self { alpha: cj(alpha, 0.0), a: cj(a, 0.0), beta: beta.into(), b: b.into(), c: c.into() }
    }

    pub fn apply(&self, w: Complex64, z: Complex64) -> (Complex64, Complex64) {
        let (alpha, a, beta, b, c): (Complex64, Complex64, Complex64, Complex64, Complex64) =
            (self.alpha.into(), self.a.into(), self.beta.into(), self.b.into(), self.c.into());
        (alpha * w + a, beta * z + b * w + c)
    }

    /// Determinant of the holomorphic Jacobian, `alpha beta`.
    pub fn jacobian_det(&self) -> Complex64 {
        Complex64::from(self.alpha) * Complex64::from(self.beta)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InoueGroupData {
    pub family: InoueFamily,
    pub generators: Vec<InoueGenerator>,
}

fn violation(i: usize, what: String) -> BihermError {
    BihermError::ConstraintViolation(format!("generator {i}: {what}"))
}

impl InoueGroupData {
    /// Checks the family constraints on every generator.
    pub fn validate(&self) -> Result<()> {
        if self.generators.is_empty() {
            return Err(BihermError::InvalidInput("no generators".into()));
        }
        for (i, g) in self.generators.iter().enumerate() {
            let real = |name: &str, z: ComplexJson| -> Result<()> {
                if z.im.abs() > CONSTRAINT_TOL || !z.re.is_finite() {
                    return Err(violation(i, format!("{name} = {}{:+}i must be real", z.re, z.im)));
                }
                Ok(())
            };
            real("alpha", g.alpha)?;
            real("a", g.a)?;
            if !(g.alpha.re > 0.0) {
                return Err(violation(i, format!("alpha = {} must be positive", g.alpha.re)));
            }
            let beta = Complex64::from(g.beta);
            match self.family {
                InoueFamily::SM => {
                    if Complex64::from(g.b).norm() > CONSTRAINT_TOL {
                        return Err(violation(i, "S_M generators have no w-term in z".into()));
                    }
                    let law = g.alpha.re * beta.norm_sqr();
                    if (law - 1.0).abs() > CONSTRAINT_TOL {
                        return Err(violation(i, format!("alpha |beta|^2 = {law} != 1")));
                    }
                }
                InoueFamily::SPlus | InoueFamily::SMinus => {
                    real("beta", g.beta)?;
                    real("b", g.b)?;
                    real("c", g.c)?;
                    if (beta.re.abs() - 1.0).abs() > CONSTRAINT_TOL {
                        return Err(violation(i, format!("beta = {} must be +1 or -1", beta.re)));
                    }
                }
            }
        }
        Ok(())
    }

    /// `gamma_0 = (alpha w, beta z)` and three translations.
    pub fn example_sm() -> Self {
        let beta = Complex64::from_polar(0.5, 0.7);
        Self {
            family: InoueFamily::SM,
            generators: vec![
                InoueGenerator::scaling(4.0, beta),
                InoueGenerator::affine(1.0, 1.0, Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0), Complex64::new(0.3, 0.2)),
                InoueGenerator::affine(1.0, -0.4, Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0), Complex64::new(-0.1, 0.5)),
                InoueGenerator::affine(1.0, 2.5, Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0), Complex64::new(0.7, -0.3)),
            ],
        }
    }

    /// `gamma_0 = (alpha w, -z + t)` and three shears.
    pub fn example_s_minus() -> Self {
        let r = |x: f64| Complex64::new(x, 0.0);
        Self {
            family: InoueFamily::SMinus,
            generators: vec![
                InoueGenerator::affine(3.0, 0.0, r(-1.0), r(0.0), r(0.25)),
                InoueGenerator::affine(1.0, 1.0, r(1.0), r(0.5), r(0.1)),
                InoueGenerator::affine(1.0, 0.3, r(1.0), r(-1.2), r(0.0)),
                InoueGenerator::affine(1.0, -2.0, r(1.0), r(0.0), r(0.8)),
            ],
        }
    }
}

/// A point of `H x C`, `Im(w) > 0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InouePoint {
    pub w: Complex64,
    pub z: Complex64,
}

impl InouePoint {
    pub fn real(&self) -> RealPoint4 {
        RealPoint4::from_complex(self.w, self.z)
    }
}

/// `Im(w)` log-uniform in `[0.1, 10]`, `Re(w)` uniform in `[-1, 1]`, `z`
/// uniform in the unit disk.
pub fn sample_points(seed: u64, n: usize) -> Vec<InouePoint> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| {
            let v = 10f64.powf(rng.random_range(-1.0..1.0));
            let u = rng.random_range(-1.0..1.0);
            let rho = rng.random_range(0.0f64..1.0).sqrt();
            let phase = rng.random_range(0.0..std::f64::consts::TAU);
            InouePoint { w: Complex64::new(u, v), z: Complex64::from_polar(rho, phase) }
        })
        .collect()
}

pub fn weight(family: InoueFamily, p: &InouePoint) -> f64 {
    p.w.im.powi(family.exponent())
}

/// Relative residuals of `weight(gamma x) = |det D gamma|^2 weight(x)`
/// without checking the family constraints.
pub fn weight_invariance_residuals(data: &InoueGroupData, samples: &[InouePoint]) -> ResidualStats {
    let mut res = Vec::with_capacity(samples.len() * data.generators.len());
    for p in samples {
        let w0 = weight(data.family, p);
        for g in &data.generators {
            let (w, z) = g.apply(p.w, p.z);
            let lhs = weight(data.family, &InouePoint { w, z });
            let rhs = g.jacobian_det().norm_sqr() * w0;
            res.push((lhs - rhs).abs() / rhs.abs());
        }
    }
    ResidualStats::from_values(&res)
}

pub fn verify_weight_invariance(data: &InoueGroupData, samples: &[InouePoint]) -> Result<ResidualStats> {
    data.validate()?;
    Ok(weight_invariance_residuals(data, samples))
}

/// Curvature of the weight metric at a point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Curvature {
    /// Coefficient `kappa` in `kappa i dw ^ dw-bar`, normalized as the
    /// w-plane Laplacian of `-log(weight)`; this is `k / Im(w)^2`.
    pub coefficient: f64,
    /// The real form `-i ddbar log(weight)` with the standard Wirtinger
    /// operators, equal to `(kappa / 2) du ^ dv`.
    pub form: TwoFormAtPoint,
}

/// Computed from the jet of `-log(weight)` in `(u, v, x, y)`.
pub fn curvature_form(family: InoueFamily, p: &InouePoint) -> Result<Curvature> {
    if !(p.w.im > 0.0) {
        return Err(BihermError::InvalidInput(format!("Im(w) = {} is not positive", p.w.im)));
    }
    let [_, v, _, _] = JetScalar::variables(p.real().coords);
    let psi = -(v.ln() * family.exponent() as f64);
    let coefficient = psi.hess[(0, 0)] + psi.hess[(1, 1)];
    Ok(Curvature { coefficient, form: ddc_from_hessian(&psi.hess) * 0.5 })
}

/// Closed form `k / Im(w)^2`.
pub fn curvature_coefficient(family: InoueFamily, p: &InouePoint) -> f64 {
    family.exponent() as f64 / (p.w.im * p.w.im)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InoueVerdict {
    pub family: InoueFamily,
    pub exponent: i32,
    pub samples: usize,
    pub weight_invariance: ResidualStats,
    /// Relative deviation of the jet coefficient from `k / Im(w)^2`.
    pub curvature_match: ResidualStats,
    pub min_coefficient: f64,
    pub max_coefficient: f64,
    /// Smallest eigenvalue of the curvature form paired with `J0`; zero up
    /// to rounding since the form is degenerate in `z`.
    pub min_form_eigenvalue: f64,
    pub canonical_degree_positive: bool,
    pub verdict: String,
}

/// Runs both checks and states the conclusion if they pass.
pub fn degree_sign_report(data: &InoueGroupData, samples: &[InouePoint]) -> Result<InoueVerdict> {
    let invariance = verify_weight_invariance(data, samples)?;
    let j0 = Endomorphism4::j0();
    let mut matches = Vec::with_capacity(samples.len());
    let (mut lo, mut hi, mut min_eig) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY);
    for p in samples {
        let c = curvature_form(data.family, p)?;
        let exact = curvature_coefficient(data.family, p);
        matches.push((c.coefficient - exact).abs() / exact);
        lo = lo.min(c.coefficient);
        hi = hi.max(c.coefficient);
        min_eig = min_eig.min(min_eigenvalue(&metric_from_form(&c.form, &j0)));
    }
    let curvature_match = ResidualStats::from_values(&matches);
    let nonnegative = min_eig >= -1e-12 * hi.abs();
    let positive = nonnegative && lo > 0.0 && invariance.passes(1e-10) && curvature_match.passes(1e-8);
    let verdict = if positive {
        "canonical degree positive => no bihermitian structure".to_string()
    } else {
        "inconclusive: the weight checks did not pass".to_string()
    };
    Ok(InoueVerdict {
        family: data.family,
        exponent: data.family.exponent(),
        samples: samples.len(),
        weight_invariance: invariance,
        curvature_match,
        min_coefficient: lo,
        max_coefficient: hi,
        min_form_eigenvalue: min_eig,
        canonical_degree_positive: positive,
        verdict,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::forms::wedge_to_volume;
    use crate::kernel::fundamental_form;
    use nalgebra::Matrix4;

    fn pt(u: f64, v: f64) -> InouePoint {
        InouePoint { w: Complex64::new(u, v), z: Complex64::new(0.2, -0.1) }
    }

    #[test]
    fn scaling_generator_by_substitution() {
        // alpha = 4, |beta|^2 = 1/4: Im(4w) = 4 Im(w) and |alpha beta|^2 = 16/4.
        let g = InoueGenerator::scaling(4.0, Complex64::new(0.0, 0.5));
        let p = pt(0.3, 1.7);
        let (w, _) = g.apply(p.w, p.z);
        assert_eq!(w.im, 4.0 * 1.7);
        assert!((g.jacobian_det().norm_sqr() - 4.0).abs() < 1e-15);
        let data = InoueGroupData { family: InoueFamily::SM, generators: vec![g] };
        assert!(verify_weight_invariance(&data, &sample_points(1, 100)).unwrap().max < 1e-12);
    }

    #[test]
    fn translations_and_shears_preserve_the_weight() {
        let r = |x: f64| Complex64::new(x, 0.0);
        let tr = InoueGroupData {
            family: InoueFamily::SM,
            generators: vec![InoueGenerator::affine(1.0, 0.7, r(1.0), r(0.0), Complex64::new(0.1, 2.0))],
        };
        assert!(verify_weight_invariance(&tr, &sample_points(2, 100)).unwrap().max < 1e-12);
        let sh = InoueGroupData { family: InoueFamily::SPlus, generators: vec![InoueGenerator::affine(1.0, 0.5, r(1.0), r(1.3), r(-0.4))] };
        assert!(verify_weight_invariance(&sh, &sample_points(3, 100)).unwrap().max < 1e-12);
    }

    #[test]
    fn examples_pass_and_bad_constraints_are_refused() {
        for d in [InoueGroupData::example_sm(), InoueGroupData::example_s_minus()] {
            let v = degree_sign_report(&d, &sample_points(4, 100)).unwrap();
            assert!(v.weight_invariance.max < 1e-10);
            assert!(v.curvature_match.max < 1e-8);
            assert!(v.canonical_degree_positive);
        }
        let mut bad = InoueGroupData::example_sm();
        bad.generators[0].alpha = cj(3.0, 0.0);
        assert!(matches!(degree_sign_report(&bad, &sample_points(4, 10)), Err(BihermError::ConstraintViolation(_))));
        // The law genuinely fails for such a generator.
        assert!(weight_invariance_residuals(&bad, &sample_points(4, 10)).max > 1e-2);
        let mut bad = InoueGroupData::example_s_minus();
        bad.generators[1].b = cj(0.0, 1.0);
        assert!(bad.validate().is_err());
    }

    #[test]
    fn curvature_examples() {
        let c = curvature_form(InoueFamily::SM, &pt(0.0, 1.0)).unwrap();
        assert!((c.coefficient - 1.0).abs() < 1e-15);
        let c2 = curvature_form(InoueFamily::SPlus, &pt(0.0, 2.0)).unwrap();
        assert!((c2.coefficient - 0.5).abs() < 1e-15);
        let shifted = curvature_form(InoueFamily::SPlus, &pt(5.0, 2.0)).unwrap();
        assert_eq!(shifted.coefficient, c2.coefficient);
        // (kappa / 2) du ^ dv and nothing in z.
        let expect = TwoFormAtPoint::from_components([0.5, 0.0, 0.0, 0.0, 0.0, 0.0]);
        assert!((c.form - expect).max_abs() < 1e-15);
        assert!(curvature_form(InoueFamily::SM, &pt(0.0, -1.0)).is_err());
    }

    #[test]
    fn curvature_pairs_nonnegatively_with_positive_forms() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let j0 = Endomorphism4::j0();
        for p in sample_points(5, 100) {
            let c = curvature_form(InoueFamily::SMinus, &p).unwrap();
            let a = Matrix4::from_fn(|_, _| rng.random_range(-1.0..1.0));
            // Hermitian metric for J0: average a positive matrix over J0.
            let s = a * a.transpose() + Matrix4::identity() * 0.1;
            let g = (s + j0.mat.transpose() * s * j0.mat) * 0.5;
            let omega = fundamental_form(&g, &j0);
            assert!(wedge_to_volume(&c.form, &omega) >= 0.0);
        }
    }

    #[test]
    fn json_round_trip() {
        let d = InoueGroupData::example_sm();
        let s = serde_json::to_string(&d).unwrap();
        assert!(s.contains("\"S_M\""));
        let back: InoueGroupData = serde_json::from_str(&s).unwrap();
        assert_eq!(back, d);
    }
}
