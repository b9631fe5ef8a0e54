//! Fundamental groups of Hopf surfaces in Kato normal form.
//!
//! `Gamma = <gamma_0> x| H` with the contraction
//! `gamma_0(z1, z2) = (alpha z1 + lambda z2^m, beta z2)` and `H` a finite
//! subgroup of `U(2)`. This module validates such data, decides whether the
//! canonical bundle is of real type, and sorts admissible groups into the three
//! families that carry strongly bihermitian metrics.

use std::fmt;

use nalgebra::{Matrix2, Matrix4};
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal, Uniform};
use serde::{Deserialize, Serialize};

use crate::error::{BihermError, Result};
use crate::kernel::forms::{realify, RealPoint4};
use crate::potentials::FlowSpec;

/// Absolute tolerance for unitarity, reality and positivity tests on inputs.
pub const PARAM_TOL: f64 = 1e-10;
/// Frobenius distance under which two group elements are identified.
pub const ELEMENT_MATCH_TOL: f64 = 1e-8;
pub const DEFAULT_CLOSURE_CAP: usize = 1000;

pub type Unitary2 = Matrix2<Complex64>;

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ContractionParams {
    pub alpha: Complex64,
    pub beta: Complex64,
    pub lambda: Complex64,
    pub m: u32,
    /// Arguments used for the real powers `alpha^t`, `beta^t`.
    pub arg_alpha: f64,
    pub arg_beta: f64,
}

impl ContractionParams {
    /// Principal-branch parameters with `lambda = 0`, `m = 1`.
    pub fn diagonal(alpha: Complex64, beta: Complex64) -> Self {
        Self { alpha, beta, lambda: c(0.0, 0.0), m: 1, arg_alpha: alpha.arg(), arg_beta: beta.arg() }
    }

    /// Resonant contraction with `alpha = beta^m`.
    pub fn resonant(beta: Complex64, m: u32, lambda: Complex64) -> Self {
        let alpha = beta.powu(m);
        Self { alpha, beta, lambda, m, arg_alpha: alpha.arg(), arg_beta: beta.arg() }
    }

    pub fn has_shear(&self) -> bool {
        self.lambda.norm() > PARAM_TOL
    }

    /// Checks `0 < |alpha| <= |beta| < 1`, `lambda (alpha - beta^m) = 0` and the
    /// branch choices; the error string is the human-readable reason.
    pub fn validate(&self) -> std::result::Result<(), String> {
        let (na, nb) = (self.alpha.norm(), self.beta.norm());
        let finite = [self.alpha, self.beta, self.lambda]
            .iter()
            .all(|z| z.re.is_finite() && z.im.is_finite())
            && self.arg_alpha.is_finite()
            && self.arg_beta.is_finite();
        if !finite {
            return Err("parameters must be finite".into());
        }
        if self.m == 0 {
            return Err("m must be a positive integer".into());
        }
        if !(na > 0.0) {
            return Err("contraction requires 0 < |alpha|".into());
        }
        if na > nb + PARAM_TOL {
            return Err(format!("contraction requires |alpha| <= |beta| (|alpha| = {na}, |beta| = {nb})"));
        }
        if !(nb < 1.0) {
            return Err(format!("contraction requires |beta| < 1 (|beta| = {nb})"));
        }
        let resonance = self.lambda * (self.alpha - self.beta.powu(self.m));
        if resonance.norm() > PARAM_TOL {
            return Err("normal form requires lambda * (alpha - beta^m) = 0".into());
        }
        for (name, z, arg) in [("alpha", self.alpha, self.arg_alpha), ("beta", self.beta, self.arg_beta)] {
            let phase = Complex64::from_polar(1.0, arg);
            if (phase - z / z.norm()).norm() > PARAM_TOL {
                return Err(format!("arg_{name} = {arg} is not an argument of {name}"));
            }
        }
        Ok(())
    }

    pub fn apply(&self, z: &RealPoint4) -> RealPoint4 {
        let (z1, z2) = z.to_complex();
        RealPoint4::from_complex(self.alpha * z1 + self.lambda * z2.powu(self.m), self.beta * z2)
    }

    pub fn apply_inverse(&self, z: &RealPoint4) -> RealPoint4 {
        let (w1, w2) = z.to_complex();
        let z2 = w2 / self.beta;
        RealPoint4::from_complex((w1 - self.lambda * z2.powu(self.m)) / self.alpha, z2)
    }

    pub fn holomorphic_jacobian(&self, z: &RealPoint4) -> Matrix2<Complex64> {
        let (_, z2) = z.to_complex();
        let shear = if self.m == 0 {
            c(0.0, 0.0)
        } else {
            self.lambda * (self.m as f64) * z2.powu(self.m - 1)
        };
        Matrix2::new(self.alpha, shear, c(0.0, 0.0), self.beta)
    }

    /// `gamma_0^* (dz1 ^ dz2) = (alpha beta) dz1 ^ dz2`.
    pub fn canonical_multiplier(&self) -> Complex64 {
        self.alpha * self.beta
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct HopfGroupData {
    pub contraction: ContractionParams,
    pub h_generators: Vec<Unitary2>,
}

/// An element of `Gamma` given by its normal-form description.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum GroupElement {
    /// `gamma_0^n`.
    ContractionPower(i32),
    Unitary(Unitary2),
}

pub fn apply_group_element(params: &ContractionParams, g: &GroupElement, z: &RealPoint4) -> RealPoint4 {
    match g {
        GroupElement::ContractionPower(n) => {
            let mut p = *z;
            for _ in 0..n.unsigned_abs() {
                p = if *n > 0 { params.apply(&p) } else { params.apply_inverse(&p) };
            }
            p
        }
        GroupElement::Unitary(h) => {
            let (z1, z2) = z.to_complex();
            let v = h * nalgebra::Vector2::new(z1, z2);
            RealPoint4::from_complex(v[0], v[1])
        }
    }
}

pub fn holomorphic_jacobian(params: &ContractionParams, g: &GroupElement, z: &RealPoint4) -> Matrix2<Complex64> {
    match g {
        GroupElement::ContractionPower(n) => {
            let mut p = *z;
            let mut jac = Matrix2::identity();
            for _ in 0..n.unsigned_abs() {
                if *n > 0 {
                    jac = params.holomorphic_jacobian(&p) * jac;
                    p = params.apply(&p);
                } else {
                    let q = params.apply_inverse(&p);
                    let inv = params
                        .holomorphic_jacobian(&q)
                        .try_inverse()
                        .expect("contraction Jacobian is invertible");
                    jac = inv * jac;
                    p = q;
                }
            }
            jac
        }
        GroupElement::Unitary(h) => *h,
    }
}

/// Real 4x4 differential of the group element at `z`.
pub fn jacobian(params: &ContractionParams, g: &GroupElement, z: &RealPoint4) -> Matrix4<f64> {
    realify(&holomorphic_jacobian(params, g, z))
}

/// Multiplier of `dz1 ^ dz2` under pullback: `(alpha beta)^n` or `det h`.
pub fn canonical_multiplier(params: &ContractionParams, g: &GroupElement) -> Complex64 {
    match g {
        GroupElement::ContractionPower(n) => params.canonical_multiplier().powi(*n),
        GroupElement::Unitary(h) => h.determinant(),
    }
}

pub fn is_unitary(h: &Unitary2, tol: f64) -> bool {
    (h.adjoint() * h - Matrix2::identity()).iter().all(|z| z.norm() <= tol)
}

fn frobenius_distance(a: &Unitary2, b: &Unitary2) -> f64 {
    (a - b).iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// Closes the generator set under multiplication. The identity comes first.
pub fn group_closure(gens: &[Unitary2], cap: usize) -> Result<Vec<Unitary2>> {
    let mut elements = vec![Unitary2::identity()];
    let mut frontier = 0;
    while frontier < elements.len() {
        let current = elements[frontier];
        frontier += 1;
        for g in gens {
            let product = g * current;
            if !elements.iter().any(|e| frobenius_distance(e, &product) < ELEMENT_MATCH_TOL) {
                if elements.len() >= cap {
                    return Err(BihermError::NotFinite { cap });
                }
                elements.push(product);
            }
        }
    }
    Ok(elements)
}

#[derive(Debug, Clone, Serialize)]
pub struct RealTypeReport {
    pub is_real_type: bool,
    pub alpha_beta: [f64; 2],
    pub max_det_defect: f64,
    pub group_order: usize,
    pub reasons: Vec<String>,
}

/// The canonical bundle is of real type iff `alpha beta` is a positive real
/// and every element of `H` has determinant one.
pub fn real_type_check(data: &HopfGroupData) -> Result<RealTypeReport> {
    let closure = group_closure(&data.h_generators, DEFAULT_CLOSURE_CAP)?;
    let ab = data.contraction.canonical_multiplier();
    let mut reasons = Vec::new();
    if ab.im.abs() > PARAM_TOL || ab.re <= 0.0 {
        reasons.push(format!("alpha*beta = {ab} is not a positive real"));
    }
    let max_det_defect = closure
        .iter()
        .map(|h| (h.determinant() - c(1.0, 0.0)).norm())
        .fold(0.0, f64::max);
    if max_det_defect > PARAM_TOL {
        reasons.push("H not in SU(2)".to_string());
    }
    Ok(RealTypeReport {
        is_real_type: reasons.is_empty(),
        alpha_beta: [ab.re, ab.im],
        max_det_defect,
        group_order: closure.len(),
        reasons,
    })
}

/// Classification outcome with machine-readable reasons.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "case")]
pub enum CaseLabel {
    #[serde(rename = "A")]
    CaseA,
    #[serde(rename = "B")]
    CaseB { a: f64, ell: usize },
    #[serde(rename = "C")]
    CaseC { a: f64, ell: usize, k: u32, m: u32 },
    NotRealType { reason: String },
    Invalid { reason: String },
}

impl CaseLabel {
    pub fn is_admissible(&self) -> bool {
        matches!(self, CaseLabel::CaseA | CaseLabel::CaseB { .. } | CaseLabel::CaseC { .. })
    }

    pub fn short_name(&self) -> &'static str {
        match self {
            CaseLabel::CaseA => "A",
            CaseLabel::CaseB { .. } => "B",
            CaseLabel::CaseC { .. } => "C",
            CaseLabel::NotRealType { .. } => "NotRealType",
            CaseLabel::Invalid { .. } => "Invalid",
        }
    }
}

impl fmt::Display for CaseLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CaseLabel::CaseA => write!(f, "case (a)"),
            CaseLabel::CaseB { a, ell } => write!(f, "case (b), a = {a}, ell = {ell}"),
            CaseLabel::CaseC { a, ell, k, m } => write!(f, "case (c), a = {a}, ell = {ell}, m = {m} = {k}*{ell} - 1"),
            CaseLabel::NotRealType { reason } => write!(f, "canonical bundle not of real type: {reason}"),
            CaseLabel::Invalid { reason } => write!(f, "invalid group data: {reason}"),
        }
    }
}

fn is_diagonal(h: &Unitary2) -> bool {
    h[(0, 1)].norm() <= PARAM_TOL && h[(1, 0)].norm() <= PARAM_TOL
}

/// For a finite diagonal group, returns `(ell, eps)` with `H` generated by
/// `diag(eps, eps^-1)`, or `None` if it is not cyclic.
fn cyclic_diagonal_generator(closure: &[Unitary2]) -> Option<(usize, Complex64)> {
    let ell = closure.len();
    closure.iter().find_map(|h| {
        let mut p = Unitary2::identity();
        for k in 1..=ell {
            p *= h;
            if frobenius_distance(&p, &Unitary2::identity()) < ELEMENT_MATCH_TOL {
                return (k == ell).then_some((ell, h[(0, 0)]));
            }
        }
        None
    })
}

pub fn classify(data: &HopfGroupData) -> CaseLabel {
    let invalid = |reason: String| CaseLabel::Invalid { reason };
    let cp = &data.contraction;
    if let Err(reason) = cp.validate() {
        return invalid(reason);
    }
    if let Some(i) = data.h_generators.iter().position(|h| !is_unitary(h, PARAM_TOL)) {
        return invalid(format!("H[{i}] is not unitary"));
    }
    let closure = match group_closure(&data.h_generators, DEFAULT_CLOSURE_CAP) {
        Ok(cl) => cl,
        Err(e) => return invalid(format!("H is not a finite group: {e}")),
    };
    match real_type_check(data) {
        Ok(report) if !report.is_real_type => {
            return CaseLabel::NotRealType { reason: report.reasons.join("; ") }
        }
        Ok(_) => {}
        Err(e) => return invalid(e.to_string()),
    }

    let (na, nb) = (cp.alpha.norm(), cp.beta.norm());
    let a = na * nb;
    if !cp.has_shear() && (na - nb).abs() <= PARAM_TOL {
        return CaseLabel::CaseA;
    }

    // Cases (b) and (c): H must be a diagonal cyclic group diag(eps, eps^-1).
    if !closure.iter().all(is_diagonal) {
        return invalid("H must lie in U(1) x U(1) when |alpha| != |beta| or lambda != 0".into());
    }
    let Some((ell, eps)) = cyclic_diagonal_generator(&closure) else {
        return invalid("H is not cyclic".into());
    };

    if !cp.has_shear() {
        if !(na * na < a - PARAM_TOL && a < na - PARAM_TOL && na < 1.0) {
            return invalid(format!(
                "case (b) requires 0 < |alpha|^2 < a < |alpha| < 1 (|alpha|^2 = {}, a = {a}, |alpha| = {na})",
                na * na
            ));
        }
        return CaseLabel::CaseB { a, ell };
    }

    // lambda != 0: alpha = beta^m already enforced; H must commute with gamma_0.
    let probes = [
        RealPoint4::new(0.3, -0.2, 0.5, 0.4),
        RealPoint4::new(-0.1, 0.6, -0.7, 0.2),
    ];
    for h in &closure {
        let g = GroupElement::Unitary(*h);
        for z in &probes {
            let hg = apply_group_element(cp, &g, &cp.apply(z));
            let gh = cp.apply(&apply_group_element(cp, &g, z));
            let d: f64 = hg.coords.iter().zip(gh.coords).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
            if d > PARAM_TOL {
                return invalid(format!(
                    "H does not commute with gamma_0 (eps^(m+1) = {} != 1, so m != k*ell - 1)",
                    eps.powu(cp.m + 1)
                ));
            }
        }
    }
    if !(cp.m as usize + 1).is_multiple_of(ell) {
        return invalid(format!("m = {} is not of the form k*ell - 1 with ell = {ell}", cp.m));
    }
    CaseLabel::CaseC { a, ell, k: ((cp.m as usize + 1) / ell) as u32, m: cp.m }
}

/// Deterministic samples with radial time in `[0, 1)`: a uniform point `u` of
/// the unit sphere pushed by the generating flow for a uniform time `s`, so
/// that `r(phi_s(u)) = s`.
pub fn fundamental_annulus_sample(seed: u64, contraction: &ContractionParams, n: usize) -> Vec<RealPoint4> {
    let flow = FlowSpec::from_contraction(contraction);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let unit = Uniform::new(0.0, 1.0).expect("valid range");
    (0..n)
        .map(|_| {
            let v: [f64; 4] = std::array::from_fn(|_| StandardNormal.sample(&mut rng));
            let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
            let u = RealPoint4 { coords: v.map(|x| x / norm) };
            let s: f64 = unit.sample(&mut rng);
            flow.flow_apply(s, &u)
        })
        .collect()
}

/// `{"re": .., "im": ..}`; a missing `im` means zero.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
pub struct ComplexJson {
    pub re: f64,
    #[serde(default)]
    pub im: f64,
}

impl From<ComplexJson> for Complex64 {
    fn from(z: ComplexJson) -> Self {
        Complex64::new(z.re, z.im)
    }
}

impl From<Complex64> for ComplexJson {
    fn from(z: Complex64) -> Self {
        Self { re: z.re, im: z.im }
    }
}

fn default_m() -> u32 {
    1
}

/// JSON schema for Hopf group data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HopfGroupDocument {
    pub alpha: ComplexJson,
    pub beta: ComplexJson,
    #[serde(default)]
    pub lambda: ComplexJson,
    #[serde(default = "default_m")]
    pub m: u32,
    /// Generators of `H`, each four complex entries in row-major order.
    #[serde(rename = "H", default)]
    pub h: Vec<Vec<ComplexJson>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub arg_alpha: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub arg_beta: Option<f64>,
}

impl HopfGroupDocument {
    pub fn to_data(&self) -> Result<HopfGroupData> {
        let alpha: Complex64 = self.alpha.into();
        let beta: Complex64 = self.beta.into();
        let mut h_generators = Vec::with_capacity(self.h.len());
        for (i, entries) in self.h.iter().enumerate() {
            if entries.len() != 4 {
                return Err(BihermError::InvalidInput(format!(
                    "H[{i}]: expected 4 complex entries, found {}",
                    entries.len()
                )));
            }
            let e: Vec<Complex64> = entries.iter().map(|&z| z.into()).collect();
            h_generators.push(Matrix2::new(e[0], e[1], e[2], e[3]));
        }
        Ok(HopfGroupData {
            contraction: ContractionParams {
                alpha,
                beta,
                lambda: self.lambda.into(),
                m: self.m,
                arg_alpha: self.arg_alpha.unwrap_or_else(|| alpha.arg()),
                arg_beta: self.arg_beta.unwrap_or_else(|| beta.arg()),
            },
            h_generators,
        })
    }

    pub fn from_data(data: &HopfGroupData) -> Self {
        let cp = &data.contraction;
        Self {
            alpha: cp.alpha.into(),
            beta: cp.beta.into(),
            lambda: cp.lambda.into(),
            m: cp.m,
            h: data
                .h_generators
                .iter()
                .map(|h| vec![h[(0, 0)].into(), h[(0, 1)].into(), h[(1, 0)].into(), h[(1, 1)].into()])
                .collect(),
            arg_alpha: Some(cp.arg_alpha),
            arg_beta: Some(cp.arg_beta),
        }
    }
}

/// `diag(eps, eps^-1)` with `eps = exp(2 pi i / ell)`.
pub fn cyclic_generator(ell: usize) -> Unitary2 {
    let eps = Complex64::from_polar(1.0, 2.0 * std::f64::consts::PI / ell as f64);
    Matrix2::new(eps, c(0.0, 0.0), c(0.0, 0.0), eps.inv())
}

pub fn diag_unitary(a: Complex64, b: Complex64) -> Unitary2 {
    Matrix2::new(a, c(0.0, 0.0), c(0.0, 0.0), b)
}
