//! Assembly of the bihermitian structure from the deformed forms, and the
//! residual checks that certify it at sample points.
//!
//! At a point the structure is `J+ = J0`, `J- = J(Phi/f, Psi_-^t/f)` and
//! `g = F(., J0 .)` with `F` the `J0`-invariant part of `Psi_-^t/f`. This `g`
//! differs from the metric whose forms are exactly `Phi/f, Psi/f, Psi_-^t/f`
//! by the conformal factor `1 - p^2`; every identity checked here is
//! conformally invariant.
//!
//! Derivatives come from a memoized finite-difference lattice over the whole
//! point pipeline. The ODE is replayed along the step sequence chosen at the
//! centre so that the pipeline is a smooth function on the stencil.

use std::cell::RefCell;
use std::collections::{BTreeMap, HashMap};
use std::ops::{Add, Mul, Sub};

use nalgebra::{Matrix4, Vector4};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::deformation::{
    default_t_grid, flow_residuals, integrate_flow_with_schedule, lck_slope, positivity_sweep, quotient_from_parts,
    replay_flow, select_t_star, QuotientTriple,
};
use crate::error::{BihermError, Result};
use crate::groups::{classify, fundamental_annulus_sample, jacobian, CaseLabel, GroupElement, HopfGroupData, HopfGroupDocument};
use crate::kernel::calculus::{
    d_one_form_from_partials, d_two_form_from_partials, lattice_partials, nijenhuis_from_partials, nijenhuis_max,
    DiffScheme, Lattice,
};
use crate::kernel::forms::{fundamental_form, hodge_star, min_eigenvalue, wedge_one_two, wedge_to_volume};
use crate::kernel::{Endomorphism4, OneFormAtPoint, RealPoint4, ThreeFormAtPoint, TwoFormAtPoint};
use crate::ode::DEFAULT_ODE_TOL;
use crate::parallel::{map_ordered, Execution};
use crate::potentials::{potential, potential_jet, FlowSpec};
use crate::stats::ResidualStats;
use crate::tolerances::Tolerances;

pub const SCHEMA_VERSION: u32 = 1;
pub const DEFAULT_SAMPLES: usize = 200;
pub const DEFAULT_SEED: u64 = 7;
pub const DEFAULT_FD_STEP: f64 = 1e-3;

macro_rules! linear_struct {
    ($name:ident { $($f:ident),* $(,)? }) => {
        impl Add for $name {
            type Output = Self;
            fn add(self, r: Self) -> Self {
                Self { $($f: self.$f + r.$f),* }
            }
        }
        impl Sub for $name {
            type Output = Self;
            fn sub(self, r: Self) -> Self {
                Self { $($f: self.$f - r.$f),* }
            }
        }
        impl Mul<f64> for $name {
            type Output = Self;
            fn mul(self, s: f64) -> Self {
                Self { $($f: self.$f * s),* }
            }
        }
    };
}

/// Everything the checks need at one point, before any differentiation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PointFields {
    pub g: Matrix4<f64>,
    pub g_inv: Matrix4<f64>,
    pub sqrt_det: f64,
    pub j_plus: Matrix4<f64>,
    pub j_minus: Matrix4<f64>,
    pub p: f64,
    pub phi_q: TwoFormAtPoint,
    pub psi_plus_q: TwoFormAtPoint,
    pub psi_minus_q: TwoFormAtPoint,
    pub tau: OneFormAtPoint,
    pub f_plus: TwoFormAtPoint,
    pub f_minus: TwoFormAtPoint,
    pub phi_g: TwoFormAtPoint,
    pub psi_plus_g: TwoFormAtPoint,
    pub psi_minus_g: TwoFormAtPoint,
    /// `sqrt(det g) F+^{ij}`, the density whose divergence gives `delta F+`.
    pub s_plus: Matrix4<f64>,
    pub s_minus: Matrix4<f64>,
}

linear_struct!(PointFields {
    g, g_inv, sqrt_det, j_plus, j_minus, p, phi_q, psi_plus_q, psi_minus_q, tau,
    f_plus, f_minus, phi_g, psi_plus_g, psi_minus_g, s_plus, s_minus,
});

impl PointFields {
    /// Derived forms of a hermitian pair `(g, J+)`, `(g, J-)` by their
    /// defining formulas.
    pub fn from_structure(
        g: Matrix4<f64>,
        j_plus: Matrix4<f64>,
        j_minus: Matrix4<f64>,
        q: &QuotientTriple,
    ) -> Result<Self> {
        let min_eig = min_eigenvalue(&g);
        if !(min_eig > 0.0) {
            return Err(BihermError::SingularMetric { min_eigenvalue: min_eig });
        }
        let g_inv = g.try_inverse().ok_or(BihermError::SingularMetric { min_eigenvalue: min_eig })?;
        let sqrt_det = g.determinant().sqrt();
        let (jp, jm) = (Endomorphism4::new(j_plus), Endomorphism4::new(j_minus));
        let f_plus = fundamental_form(&g, &jp);
        let f_minus = fundamental_form(&g, &jm);
        let bracket = j_plus * j_minus - j_minus * j_plus;
        let phi_g = TwoFormAtPoint::from_matrix(&(bracket.transpose() * g * 0.5));
        let psi_plus_g = TwoFormAtPoint::from_matrix(&-(j_plus.transpose() * phi_g.matrix()));
        let psi_minus_g = TwoFormAtPoint::from_matrix(&-(j_minus.transpose() * phi_g.matrix()));
        let raise = |f: &TwoFormAtPoint| g_inv * f.matrix() * g_inv.transpose() * sqrt_det;
        Ok(Self {
            g,
            g_inv,
            sqrt_det,
            j_plus,
            j_minus,
            p: -0.25 * (j_plus * j_minus).trace(),
            phi_q: q.phi,
            psi_plus_q: q.psi_plus,
            psi_minus_q: q.psi_minus,
            tau: q.tau,
            f_plus,
            f_minus,
            phi_g,
            psi_plus_g,
            psi_minus_g,
            s_plus: raise(&f_plus),
            s_minus: raise(&f_minus),
        })
    }
}

/// Builds the structure from the quotient forms: `J+ = J0`,
/// `J- = J(Phi, Psi_-)`, `g = (Psi_-)^{1,1}(., J0 .)`.
pub fn assemble_structure(q: &QuotientTriple) -> Result<PointFields> {
    let margin = q.positivity_margin();
    if !(margin > 0.0) {
        return Err(BihermError::NotPositive { margin });
    }
    let j0 = Endomorphism4::j0();
    let g = crate::kernel::metric_from_form(&q.psi_minus_11(), &j0);
    PointFields::from_structure(g, j0.mat, q.j_minus()?.mat, q)
}

/// First-derivative data: Lee forms and the densities whose divergence gives
/// their codifferentials.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LeeData {
    pub theta_plus: Vector4<f64>,
    pub theta_minus: Vector4<f64>,
    /// `sqrt(det g) g^{ij} theta_j`.
    pub w_plus: Vector4<f64>,
    pub w_minus: Vector4<f64>,
}

linear_struct!(LeeData { theta_plus, theta_minus, w_plus, w_minus });

/// `(delta F)^j = -(1/sqrt g) d_i (sqrt g F^{ij})`, lowered with `g`, then
/// `theta = J(delta F)` with `(J a)(X) = -a(J X)`.
fn lee_form(fields: &PointFields, div_density: [Matrix4<f64>; 4], j: &Matrix4<f64>) -> Vector4<f64> {
    let mut div = Vector4::zeros();
    for (i, ds) in div_density.iter().enumerate() {
        div += ds.row(i).transpose();
    }
    let delta_up = -div / fields.sqrt_det;
    let delta = fields.g * delta_up;
    -(j.transpose() * delta)
}

fn lee_data(fields: &PointFields, partials: &[PointFields; 4]) -> LeeData {
    let theta_plus = lee_form(fields, partials.map(|d| d.s_plus), &fields.j_plus);
    let theta_minus = lee_form(fields, partials.map(|d| d.s_minus), &fields.j_minus);
    let w = |t: &Vector4<f64>| fields.g_inv * t * fields.sqrt_det;
    LeeData { theta_plus, theta_minus, w_plus: w(&theta_plus), w_minus: w(&theta_minus) }
}

/// Memoized two-layer stencil around one point.
pub struct Stencil<'a> {
    lattice: Lattice<'a, PointFields>,
    lee_cache: RefCell<HashMap<[i32; 4], LeeData>>,
}

const CENTER: [i32; 4] = [0; 4];

impl<'a> Stencil<'a> {
    pub fn new(x: RealPoint4, h: f64, eval: impl Fn(&RealPoint4) -> Result<PointFields> + 'a) -> Self {
        Self { lattice: Lattice::new(x, h, eval), lee_cache: RefCell::new(HashMap::new()) }
    }

    pub fn fields(&self, o: [i32; 4]) -> Result<PointFields> {
        self.lattice.at(o)
    }

    pub fn field_partials(&self, o: [i32; 4]) -> Result<[PointFields; 4]> {
        lattice_partials(&|q| self.lattice.at(q), o, self.lattice.unit(), DiffScheme::Richardson)
    }

    pub fn lee(&self, o: [i32; 4]) -> Result<LeeData> {
        if let Some(v) = self.lee_cache.borrow().get(&o) {
            return Ok(*v);
        }
        let v = lee_data(&self.fields(o)?, &self.field_partials(o)?);
        self.lee_cache.borrow_mut().insert(o, v);
        Ok(v)
    }

    pub fn lee_partials(&self, o: [i32; 4]) -> Result<[LeeData; 4]> {
        lattice_partials(&|q| self.lee(q), o, self.lattice.unit(), DiffScheme::Richardson)
    }

    pub fn evaluations(&self) -> usize {
        self.lattice.evaluations()
    }
}

/// The assembled structure at a point, with its Lee forms.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BihermitianSample {
    pub x: RealPoint4,
    pub t: f64,
    pub fields: PointFields,
    pub theta_plus: OneFormAtPoint,
    pub theta_minus: OneFormAtPoint,
    /// `(theta+ + theta-)/2 + d log(1 - p^2)`.
    pub tau_g: OneFormAtPoint,
}

/// Residuals keyed by identity name.
pub type Residuals = BTreeMap<&'static str, f64>;

fn mmax(m: &Matrix4<f64>) -> f64 {
    m.amax()
}

/// Identities that follow from the assembly by linear algebra.
pub fn check_pointwise_algebra(s: &PointFields) -> Result<Residuals> {
    let id = Matrix4::identity();
    let (jp, jm, g, p) = (s.j_plus, s.j_minus, s.g, s.p);
    let gs = mmax(&g);
    let one_m_p2 = 1.0 - p * p;
    let vol = s.sqrt_det;
    let predicted = 2.0 * one_m_p2 * vol;
    let mut r = Residuals::new();
    r.insert("j_minus_square", mmax(&(jm * jm + id)).max(mmax(&(jp * jp + id))));
    r.insert(
        "g_orthogonality",
        (mmax(&(jp.transpose() * g * jp - g)).max(mmax(&(jm.transpose() * g * jm - g)))) / gs,
    );
    r.insert("anticommutator", mmax(&(jp * jm + jm * jp + id * (2.0 * p))));
    r.insert(
        "f_exchange",
        ((s.f_plus - s.f_minus * p - s.psi_minus_g).max_abs())
            .max((s.f_minus - s.f_plus * p + s.psi_plus_g).max_abs())
            / gs,
    );
    let sq = |b: &TwoFormAtPoint| (wedge_to_volume(b, b) - predicted).abs() / predicted.abs();
    r.insert("wedge_squares", sq(&s.phi_g).max(sq(&s.psi_plus_g)).max(sq(&s.psi_minus_g)));
    r.insert(
        "phi_psi_orthogonality",
        wedge_to_volume(&s.phi_g, &s.psi_plus_g).abs().max(wedge_to_volume(&s.phi_g, &s.psi_minus_g).abs())
            / predicted.abs(),
    );
    r.insert(
        "psi_plus_psi_minus",
        (wedge_to_volume(&s.psi_plus_g, &s.psi_minus_g) - p * wedge_to_volume(&s.phi_g, &s.phi_g)).abs()
            / predicted.abs(),
    );
    let psi11 = crate::kernel::invariant_part(&s.psi_minus_g, &Endomorphism4::new(jp));
    r.insert("psi_minus_11", (psi11 - s.f_plus * one_m_p2).max_abs() / (one_m_p2 * s.f_plus.max_abs()));
    let mut sd: f64 = 0.0;
    for b in [s.f_plus, s.f_minus, s.phi_g, s.psi_plus_g, s.psi_minus_g] {
        sd = sd.max((hodge_star(&g, &b)? - b).max_abs() / b.max_abs());
    }
    r.insert("self_duality", sd);
    let scale = one_m_p2 * s.phi_q.max_abs();
    r.insert(
        "quotient_reconstruction",
        ((s.phi_g - s.phi_q * one_m_p2).max_abs())
            .max((s.psi_plus_g - s.psi_plus_q * one_m_p2).max_abs())
            .max((s.psi_minus_g - s.psi_minus_q * one_m_p2).max_abs())
            / scale,
    );
    r.insert("angle_abs", p.abs());
    Ok(r)
}

fn one(v: Vector4<f64>) -> OneFormAtPoint {
    OneFormAtPoint { coeff: v }
}

/// `|dB - a ^ B|` relative to `|dB| + |a||B|`.
fn conformal_closure(db: &ThreeFormAtPoint, a: &OneFormAtPoint, b: &TwoFormAtPoint) -> f64 {
    (*db - wedge_one_two(a, b)).max_abs() / (db.max_abs() + a.max_abs() * b.max_abs())
}

/// `max |dOmega(Z_a, conj Z_b, conj Z_c)|` for `Omega = Phi + i Psi_-` and
/// `Z_a = e_a - i J- e_a`, relative to the same sum with absolute values.
pub fn type_12_residual(d_phi: &ThreeFormAtPoint, d_psi: &ThreeFormAtPoint, j: &Matrix4<f64>) -> f64 {
    let z: Vec<[Complex64; 4]> =
        (0..4).map(|a| std::array::from_fn(|i| Complex64::new(if i == a { 1.0 } else { 0.0 }, -j[(i, a)]))).collect();
    let t = |i: usize, jj: usize, k: usize| Complex64::new(d_phi.component(i, jj, k), d_psi.component(i, jj, k));
    let (mut worst, mut scale) = (0.0f64, 0.0f64);
    for a in 0..4 {
        for b in 0..4 {
            for c in 0..4 {
                let (mut s, mut sa) = (Complex64::new(0.0, 0.0), 0.0);
                for i in 0..4 {
                    for jj in 0..4 {
                        for k in 0..4 {
                            let term = t(i, jj, k) * z[a][i] * z[b][jj].conj() * z[c][k].conj();
                            s += term;
                            sa += term.norm();
                        }
                    }
                }
                worst = worst.max(s.norm());
                scale = scale.max(sa);
            }
        }
    }
    if scale == 0.0 { 0.0 } else { worst / scale }
}

/// Identities that need one or two derivative layers, evaluated at the
/// stencil centre. Also returns the assembled sample.
pub fn check_differential_identities(st: &Stencil, x: RealPoint4, t: f64) -> Result<(Residuals, BihermitianSample)> {
    let c = st.fields(CENTER)?;
    let d = st.field_partials(CENTER)?;
    let lee = st.lee(CENTER)?;
    let dl = st.lee_partials(CENTER)?;
    let mut r = Residuals::new();

    let d2 = |sel: fn(&PointFields) -> TwoFormAtPoint| d_two_form_from_partials(&d.map(|p| sel(&p)));
    r.insert("d_phi_quotient", conformal_closure(&d2(|p| p.phi_q), &c.tau, &c.phi_q));
    r.insert("d_psi_plus_quotient", conformal_closure(&d2(|p| p.psi_plus_q), &c.tau, &c.psi_plus_q));
    r.insert("d_psi_minus_quotient", conformal_closure(&d2(|p| p.psi_minus_q), &c.tau, &c.psi_minus_q));

    let (tp, tm) = (one(lee.theta_plus), one(lee.theta_minus));
    r.insert(
        "lee_form_definition",
        conformal_closure(&d2(|p| p.f_plus), &tp, &c.f_plus).max(conformal_closure(&d2(|p| p.f_minus), &tm, &c.f_minus)),
    );

    let one_m_p2 = 1.0 - c.p * c.p;
    let dp = Vector4::from_fn(|i, _| d[i].p);
    let dlog = one(dp * (-2.0 * c.p / one_m_p2));
    let tau_g = (tp + tm) * 0.5 + dlog;
    r.insert(
        "d_omega",
        conformal_closure(&d2(|p| p.phi_g), &tau_g, &c.phi_g)
            .max(conformal_closure(&d2(|p| p.psi_plus_g), &tau_g, &c.psi_plus_g))
            .max(conformal_closure(&d2(|p| p.psi_minus_g), &tau_g, &c.psi_minus_g)),
    );

    let div = |sel: fn(&LeeData) -> Vector4<f64>| -(0..4).map(|i| sel(&dl[i])[i]).sum::<f64>() / c.sqrt_det;
    let (delta_p, delta_m) = (div(|l| l.w_plus), div(|l| l.w_minus));
    let norm2 = |v: &Vector4<f64>| v.dot(&(c.g_inv * v));
    let (np, nm) = (norm2(&lee.theta_plus), norm2(&lee.theta_minus));
    let lhs = 2.0 * delta_p + np;
    let rhs = 2.0 * delta_m + nm;
    r.insert("lee_scalar", (lhs - rhs).abs() / (2.0 * delta_p.abs() + np + 2.0 * delta_m.abs() + nm));

    let d_theta_p = d_one_form_from_partials(&dl.map(|l| one(l.theta_plus)));
    let d_theta_m = d_one_form_from_partials(&dl.map(|l| one(l.theta_minus)));
    let d_sum = d_theta_p + d_theta_m;
    let scale = d_theta_p.max_abs() + d_theta_m.max_abs() + tp.max_abs().powi(2) + tm.max_abs().powi(2);
    let selfdual = (d_sum + hodge_star(&c.g, &d_sum)?) * 0.5;
    r.insert("selfdual_d_lee_sum", selfdual.max_abs() / scale);
    r.insert("lee_sum_closed", d_sum.max_abs() / scale);

    let dj = d.map(|p| p.j_minus);
    r.insert("nijenhuis_minus", nijenhuis_max(&nijenhuis_from_partials(&Endomorphism4::new(c.j_minus), &dj)));
    r.insert("type_12_minus", type_12_residual(&d2(|p| p.phi_q), &d2(|p| p.psi_minus_q), &c.j_minus));

    let sample = BihermitianSample { x, t, fields: c, theta_plus: tp, theta_minus: tm, tau_g };
    Ok((r, sample))
}

/// Max Nijenhuis component of a `J` field at `x`, Richardson step `h`.
pub fn check_integrability(
    j_field: &dyn Fn(&RealPoint4) -> Result<Endomorphism4>,
    x: &RealPoint4,
    h: f64,
) -> Result<f64> {
    let lattice = Lattice::new(*x, h, |p: &RealPoint4| j_field(p).map(|j| j.mat));
    let dj = lattice_partials(&|o| lattice.at(o), CENTER, lattice.unit(), DiffScheme::Richardson)?;
    Ok(nijenhuis_max(&nijenhuis_from_partials(&Endomorphism4::new(lattice.at(CENTER)?), &dj)))
}

/// Point pipeline: potential, deformation, quotient forms, assembly.
#[derive(Debug, Clone)]
pub struct Pipeline {
    pub spec: FlowSpec,
    pub t: f64,
    pub ode_tol: f64,
    /// Coefficient of `omega0` added to `Psi_-^t/f`; zero except for
    /// injected-error tests.
    pub psi_minus_perturbation: f64,
}

impl Pipeline {
    fn finish(&self, f: &crate::kernel::JetScalar, state: &crate::deformation::DeformationState) -> Result<PointFields> {
        let mut q = quotient_from_parts(f, state);
        if self.psi_minus_perturbation != 0.0 {
            q.psi_minus = q.psi_minus + TwoFormAtPoint::omega0() * self.psi_minus_perturbation;
        }
        assemble_structure(&q)
    }

    /// Fields at `x` with a fresh adaptive solve; returns the step sequence.
    pub fn fields_adaptive(&self, x: &RealPoint4) -> Result<(PointFields, Vec<f64>)> {
        let f = potential_jet(&self.spec, x)?;
        let (state, steps) = integrate_flow_with_schedule(&self.spec, self.t, x, self.ode_tol)?;
        Ok((self.finish(&f, &state)?, steps))
    }

    pub fn fields_replay(&self, x: &RealPoint4, steps: &[f64]) -> Result<PointFields> {
        let f = potential_jet(&self.spec, x)?;
        self.finish(&f, &replay_flow(&self.spec, x, steps)?)
    }
}

/// Compares `g` and `J-` at `gamma x` with the pushforward of their values
/// at `x`. Returns `(metric residual, J- residual)`, both relative.
pub fn check_gamma_equivariance(
    pipeline: &Pipeline,
    data: &HopfGroupData,
    at_x: &PointFields,
    x: &RealPoint4,
    elements: &[GroupElement],
) -> Result<(f64, f64)> {
    let cp = &data.contraction;
    let (mut rg, mut rj) = (0.0f64, 0.0f64);
    for el in elements {
        let y = crate::groups::apply_group_element(cp, el, x);
        let (at_y, _) = pipeline.fields_adaptive(&y)?;
        let dg = jacobian(cp, el, x);
        rg = rg.max(mmax(&(dg.transpose() * at_y.g * dg - at_x.g)) / mmax(&at_x.g));
        rj = rj.max(mmax(&(at_y.j_minus * dg - dg * at_x.j_minus)) / (mmax(&at_x.j_minus) * mmax(&dg)));
    }
    Ok((rg, rj))
}

/// Inputs of a certificate run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CertificateConfig {
    pub group: HopfGroupDocument,
    /// Deformation time; `None` selects `t*` from `t_grid`.
    #[serde(default)]
    pub t: Option<f64>,
    #[serde(default = "default_t_grid")]
    pub t_grid: Vec<f64>,
    #[serde(default = "default_samples")]
    pub samples: usize,
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default = "default_ode_tol")]
    pub ode_tol: f64,
    #[serde(default = "default_fd_step")]
    pub fd_step: f64,
    #[serde(default)]
    pub tolerances: Tolerances,
    #[serde(skip)]
    pub execution: Execution,
    #[serde(skip)]
    pub psi_minus_perturbation: f64,
}

fn default_samples() -> usize {
    DEFAULT_SAMPLES
}
fn default_seed() -> u64 {
    DEFAULT_SEED
}
fn default_ode_tol() -> f64 {
    DEFAULT_ODE_TOL
}
fn default_fd_step() -> f64 {
    DEFAULT_FD_STEP
}

impl CertificateConfig {
    pub fn new(group: HopfGroupDocument) -> Self {
        Self {
            group,
            t: None,
            t_grid: default_t_grid(),
            samples: DEFAULT_SAMPLES,
            seed: DEFAULT_SEED,
            ode_tol: DEFAULT_ODE_TOL,
            fd_step: DEFAULT_FD_STEP,
            tolerances: Tolerances::default(),
            execution: Execution::default(),
            psi_minus_perturbation: 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(BihermError::InvalidInput(m));
        if self.samples == 0 {
            return bad("samples must be positive".into());
        }
        if !(self.ode_tol > 0.0 && self.ode_tol.is_finite()) {
            return bad(format!("ode_tol must be positive, got {}", self.ode_tol));
        }
        if !(self.fd_step > 0.0 && self.fd_step.is_finite()) {
            return bad(format!("fd_step must be positive, got {}", self.fd_step));
        }
        if let Some(t) = self.t {
            if !t.is_finite() {
                return bad("t must be finite".into());
            }
        }
        Ok(())
    }
}

/// `sha256("blob <len>\0" + content)`, hex encoded.
pub fn content_hash(content: &[u8]) -> String {
    let mut h = Sha256::new();
    h.update(format!("blob {}\0", content.len()).as_bytes());
    h.update(content);
    hex::encode(h.finalize())
}

pub fn config_hash(cfg: &CertificateConfig) -> String {
    content_hash(serde_json::to_string(cfg).expect("config serializes").as_bytes())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Conventions {
    pub frame: String,
    pub orientation: String,
    pub ddc: String,
    pub fundamental_form: String,
    pub complex_structure_on_forms: String,
    pub codifferential: String,
    pub metric_normalization: String,
}

impl Default for Conventions {
    fn default() -> Self {
        Self {
            frame: "(x1, y1, x2, y2), z_k = x_k + i y_k".into(),
            orientation: "dx1^dy1^dx2^dy2".into(),
            ddc: "d^c = i(dbar - d), dd^c f = 2i ddbar f, dd^c |z|^2 = 4 omega0".into(),
            fundamental_form: "F(X, Y) = g(J X, Y)".into(),
            complex_structure_on_forms: "(J a)(X) = -a(J X)".into(),
            codifferential: "(delta F)^j = -(1/sqrt g) d_i (sqrt g F^ij); theta = J(delta F) satisfies dF = theta ^ F".into(),
            metric_normalization: "g = (Psi_-/f)^{1,1}(., J0 .), conformal to the metric of the quotient forms by 1 - p^2".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IdentityReport {
    pub max: f64,
    pub mean: f64,
    pub q95: f64,
    pub tier: String,
    pub tolerance: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExcludedSample {
    pub index: usize,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CertificateReport {
    pub schema_version: u32,
    pub params: HopfGroupDocument,
    pub case: CaseLabel,
    pub t: f64,
    /// `"given"` or `"t_star"`.
    pub t_source: String,
    pub n: usize,
    pub seed: u64,
    pub ode_tol: f64,
    pub fd_step: f64,
    pub tolerances: Tolerances,
    pub conventions: Conventions,
    pub config_hash: String,
    pub identities: BTreeMap<String, IdentityReport>,
    pub p_min: f64,
    pub p_max: f64,
    pub min_margin: f64,
    pub accepted_samples: usize,
    pub excluded_samples: Vec<ExcludedSample>,
    pub pass: bool,
}

/// Identity name and tolerance tier. `angle_abs` is checked against 1.
pub const IDENTITY_TIERS: [(&str, &str); 26] = [
    ("j_minus_square", "algebraic"),
    ("g_orthogonality", "algebraic"),
    ("anticommutator", "algebraic"),
    ("f_exchange", "algebraic"),
    ("wedge_squares", "algebraic"),
    ("phi_psi_orthogonality", "algebraic"),
    ("psi_plus_psi_minus", "algebraic"),
    ("psi_minus_11", "algebraic"),
    ("self_duality", "algebraic"),
    ("quotient_reconstruction", "algebraic"),
    ("angle_abs", "unit"),
    ("flow_potential", "flow"),
    ("flow_symplectic", "flow"),
    ("flow_wedge", "flow"),
    ("d_phi_quotient", "first_derivative"),
    ("d_psi_plus_quotient", "first_derivative"),
    ("d_psi_minus_quotient", "first_derivative"),
    ("lee_form_definition", "first_derivative"),
    ("d_omega", "second_derivative"),
    ("selfdual_d_lee_sum", "second_derivative"),
    ("lee_sum_closed", "second_derivative"),
    ("lee_scalar", "lee_scalar"),
    ("nijenhuis_minus", "integrability"),
    ("type_12_minus", "type_12"),
    ("gamma_metric", "equivariance"),
    ("gamma_j_minus", "equivariance"),
];

fn tier_tolerance(tol: &Tolerances, tier: &str) -> f64 {
    if tier == "unit" { 1.0 } else { tol.get(tier).expect("known tier") }
}

struct SampleOutcome {
    residuals: Residuals,
    p: f64,
    margin: f64,
}

fn certify_sample(
    pipeline: &Pipeline,
    data: &HopfGroupData,
    elements: &[GroupElement],
    x: &RealPoint4,
    fd_step: f64,
) -> Result<SampleOutcome> {
    let (center, steps) = pipeline.fields_adaptive(x)?;
    let h = fd_step * x.norm().max(1.0);
    let st = Stencil::new(*x, h, |y: &RealPoint4| pipeline.fields_replay(y, &steps));
    let mut residuals = check_pointwise_algebra(&center)?;
    let (diff, _) = check_differential_identities(&st, *x, pipeline.t)?;
    residuals.extend(diff);

    let state = crate::deformation::integrate_flow(&pipeline.spec, pipeline.t, x, pipeline.ode_tol)?;
    let fr = flow_residuals(&pipeline.spec, &state)?;
    residuals.insert("flow_potential", fr.potential);
    residuals.insert("flow_symplectic", fr.symplectic);
    residuals.insert("flow_wedge", fr.psi_square.max(fr.phi_psi));

    let (rg, rj) = check_gamma_equivariance(pipeline, data, &center, x, elements)?;
    residuals.insert("gamma_metric", rg);
    residuals.insert("gamma_j_minus", rj);
    let margin = min_eigenvalue(&center.g);
    Ok(SampleOutcome { residuals, p: center.p, margin })
}

/// Samples whose potential evaluates. A non-plurisubharmonic potential
/// anywhere invalidates the whole construction and is returned as an error.
pub fn plurisubharmonic_samples(spec: &FlowSpec, samples: &[RealPoint4], execution: Execution) -> Result<Vec<RealPoint4>> {
    let pots = map_ordered(samples, execution, |_, x| potential(spec, x).map(|_| ()));
    for r in &pots {
        if let Err(e @ BihermError::NotPlurisubharmonic { .. }) = r {
            return Err(e.clone());
        }
    }
    Ok(samples.iter().zip(&pots).filter(|(_, r)| r.is_ok()).map(|(x, _)| *x).collect())
}

/// The configured `t`, or `t*` selected from a positivity sweep over
/// `cfg.t_grid`. Returns the time and `"given"` or `"t_star"`.
pub fn resolve_time(spec: &FlowSpec, samples: &[RealPoint4], cfg: &CertificateConfig) -> Result<(f64, &'static str)> {
    if let Some(t) = cfg.t {
        return Ok((t, "given"));
    }
    let rows = positivity_sweep(spec, &cfg.t_grid, samples, cfg.ode_tol, cfg.execution)?;
    let slope = lck_slope(spec, samples)?;
    match select_t_star(&rows, slope) {
        Some(t) => Ok((t, "t_star")),
        None => {
            let worst = rows.iter().map(|r| r.min_margin).fold(f64::INFINITY, f64::min);
            Err(BihermError::NotPositive { margin: worst })
        }
    }
}

/// Runs every check on seeded fundamental-annulus samples without
/// classifying first. `case` is only echoed into the report.
pub fn certify(data: &HopfGroupData, case: CaseLabel, cfg: &CertificateConfig) -> Result<CertificateReport> {
    cfg.validate()?;
    let cp = &data.contraction;
    let spec = FlowSpec::from_contraction(cp);
    let samples = fundamental_annulus_sample(cfg.seed, cp, cfg.samples);
    let good = plurisubharmonic_samples(&spec, &samples, cfg.execution)?;
    let (t, t_source) = resolve_time(&spec, &good, cfg)?;

    let pipeline = Pipeline { spec, t, ode_tol: cfg.ode_tol, psi_minus_perturbation: cfg.psi_minus_perturbation };
    let mut elements = vec![GroupElement::ContractionPower(1)];
    elements.extend(data.h_generators.iter().map(|h| GroupElement::Unitary(*h)));

    let outcomes = map_ordered(&samples, cfg.execution, |_, x| certify_sample(&pipeline, data, &elements, x, cfg.fd_step));

    let mut per_identity: BTreeMap<&str, Vec<f64>> = BTreeMap::new();
    let mut excluded = Vec::new();
    let (mut p_min, mut p_max, mut min_margin) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY);
    for (index, o) in outcomes.into_iter().enumerate() {
        match o {
            Ok(o) => {
                for (k, v) in o.residuals {
                    per_identity.entry(k).or_default().push(v);
                }
                p_min = p_min.min(o.p);
                p_max = p_max.max(o.p);
                min_margin = min_margin.min(o.margin);
            }
            Err(e) => excluded.push(ExcludedSample { index, reason: e.to_string() }),
        }
    }
    let accepted = cfg.samples - excluded.len();

    let mut identities = BTreeMap::new();
    for (name, tier) in IDENTITY_TIERS {
        let tolerance = tier_tolerance(&cfg.tolerances, tier);
        let values = per_identity.remove(name).unwrap_or_default();
        let stats = ResidualStats::from_values(&values);
        identities.insert(
            name.to_string(),
            IdentityReport {
                max: stats.max,
                mean: stats.mean,
                q95: stats.q95,
                tier: tier.to_string(),
                tolerance,
                pass: accepted > 0 && stats.passes(tolerance),
            },
        );
    }
    let pass = accepted > 0 && identities.values().all(|r| r.pass);
    Ok(CertificateReport {
        schema_version: SCHEMA_VERSION,
        params: cfg.group.clone(),
        case,
        t,
        t_source: t_source.into(),
        n: cfg.samples,
        seed: cfg.seed,
        ode_tol: cfg.ode_tol,
        fd_step: cfg.fd_step,
        tolerances: cfg.tolerances,
        conventions: Conventions::default(),
        config_hash: config_hash(cfg),
        identities,
        p_min,
        p_max,
        min_margin,
        accepted_samples: accepted,
        excluded_samples: excluded,
        pass,
    })
}

/// Classifies the group data and certifies it if admissible.
pub fn run_certificate(cfg: &CertificateConfig) -> Result<CertificateReport> {
    let data = cfg.group.to_data()?;
    let case = classify(&data);
    if !case.is_admissible() {
        return Err(BihermError::Refused(case.to_string()));
    }
    certify(&data, case, cfg)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::deformation::{integrate_flow, quotient_triple};
    use crate::groups::{cyclic_generator, diag_unitary, ContractionParams};

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn pipeline(cp: &ContractionParams, t: f64) -> Pipeline {
        Pipeline { spec: FlowSpec::from_contraction(cp), t, ode_tol: 1e-10, psi_minus_perturbation: 0.0 }
    }

    fn case_b() -> ContractionParams {
        ContractionParams::diagonal(c(0.5, 0.0), c(0.6, 0.0))
    }

    #[test]
    fn zero_time_structure_is_degenerate() {
        let cp = case_b();
        let spec = FlowSpec::from_contraction(&cp);
        let x = RealPoint4::new(0.5, 0.2, -0.4, 0.3);
        let q = quotient_triple(&spec, &integrate_flow(&spec, 0.0, &x, 1e-10).unwrap()).unwrap();
        assert_eq!(q.j_minus().unwrap().mat, Endomorphism4::j0().mat);
        assert!((q.angle().unwrap() - 1.0).abs() < 1e-15);
        assert!(matches!(assemble_structure(&q), Err(BihermError::NotPositive { .. })));
    }

    #[test]
    fn j_minus_is_the_conjugated_standard_structure() {
        for cp in [ContractionParams::diagonal(c(0.5, 0.0), c(0.5, 0.0)), case_b()] {
            let spec = FlowSpec::from_contraction(&cp);
            for x in fundamental_annulus_sample(3, &cp, 20) {
                let s = integrate_flow(&spec, 0.1, &x, 1e-12).unwrap();
                let q = quotient_triple(&spec, &s).unwrap();
                let d_inv = s.d.try_inverse().unwrap();
                let oracle = d_inv * Endomorphism4::j0().mat * s.d;
                assert!((q.j_minus().unwrap().mat - oracle).amax() < 1e-8);
                let f = assemble_structure(&q).unwrap();
                assert!(f.p.abs() < 1.0);
            }
        }
    }

    #[test]
    fn pointwise_algebra_holds() {
        let cp = case_b();
        let pl = pipeline(&cp, 0.1);
        for x in fundamental_annulus_sample(5, &cp, 30) {
            let (f, _) = pl.fields_adaptive(&x).unwrap();
            let r = check_pointwise_algebra(&f).unwrap();
            for (k, v) in &r {
                if *k != "angle_abs" {
                    assert!(*v < 1e-9, "{k}: {v}");
                }
            }
            assert!(r["angle_abs"] < 1.0);
        }
    }

    #[test]
    fn perturbed_psi_minus_trips_the_algebra() {
        let cp = case_b();
        let mut pl = pipeline(&cp, 0.1);
        pl.psi_minus_perturbation = 1e-3;
        let x = fundamental_annulus_sample(5, &cp, 1)[0];
        let (f, _) = pl.fields_adaptive(&x).unwrap();
        let r = check_pointwise_algebra(&f).unwrap();
        assert!(r["j_minus_square"] > 1e-8, "{r:?}");
    }

    /// `g = e^phi * Id`, `J+ = J0`, `J- = J(omega0, Phi0)` constant: both Lee
    /// forms equal `d phi`.
    #[test]
    fn lee_forms_of_a_conformally_flat_pair() {
        let phi_fn = |p: &RealPoint4| 0.3 * p.coords[0] - 0.2 * p.coords[1] * p.coords[3] + 0.1 * p.coords[2].powi(2);
        let jm = crate::kernel::acs_from_form_pair(&TwoFormAtPoint::omega0(), &TwoFormAtPoint::phi0()).unwrap().mat;
        let jp = Endomorphism4::j0().mat;
        // J- must be g-orthogonal and preserve the orientation.
        assert!((jm * jm + Matrix4::identity()).amax() < 1e-15);
        let q = QuotientTriple {
            phi: TwoFormAtPoint::phi0(),
            psi_plus: TwoFormAtPoint::psi0(),
            psi_minus: TwoFormAtPoint::psi0(),
            tau: OneFormAtPoint::zero(),
        };
        let x = RealPoint4::new(0.4, 0.3, -0.2, 0.5);
        let eval = |p: &RealPoint4| PointFields::from_structure(Matrix4::identity() * phi_fn(p).exp(), jp, jm, &q);
        let st = Stencil::new(x, 1e-3, eval);
        let lee = st.lee(CENTER).unwrap();
        let grad = crate::kernel::calculus::gradient_fd(&phi_fn, &x, 1e-3);
        assert!((lee.theta_plus - grad).amax() < 1e-8, "{:?} vs {:?}", lee.theta_plus, grad);
        assert!((lee.theta_minus - grad).amax() < 1e-8);

        let flat = Stencil::new(x, 1e-3, |_: &RealPoint4| PointFields::from_structure(Matrix4::identity(), jp, jm, &q));
        let l0 = flat.lee(CENTER).unwrap();
        assert_eq!(l0.theta_plus.amax(), 0.0);
        assert_eq!(l0.theta_minus.amax(), 0.0);
    }

    #[test]
    fn differential_identities_case_b() {
        let cp = case_b();
        let pl = pipeline(&cp, 0.1);
        let tol = Tolerances::default();
        for x in fundamental_annulus_sample(8, &cp, 10) {
            let (_, steps) = pl.fields_adaptive(&x).unwrap();
            let st = Stencil::new(x, 1e-3, |y: &RealPoint4| pl.fields_replay(y, &steps));
            let (r, sample) = check_differential_identities(&st, x, 0.1).unwrap();
            for (name, tier) in IDENTITY_TIERS {
                if let Some(v) = r.get(name) {
                    assert!(*v < tier_tolerance(&tol, tier), "{name}: {v}");
                }
            }
            assert!(sample.fields.p < 1.0);
            assert!(st.evaluations() < 140);
        }
    }

    #[test]
    fn bump_field_is_not_integrable() {
        let e = Matrix4::new(0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0);
        let x0 = RealPoint4::new(0.3, 0.1, 0.2, -0.4);
        let bump = move |p: &RealPoint4| -> Result<Endomorphism4> {
            let r2: f64 = p.coords.iter().zip(x0.coords).map(|(a, b)| (a - b).powi(2)).sum();
            let a = Matrix4::identity() + e * (-r2).exp();
            let ai = a.try_inverse().unwrap();
            Ok(Endomorphism4::new(a * Endomorphism4::j0().mat * ai))
        };
        assert!(check_integrability(&bump, &x0.shifted(0, 0.3), 1e-3).unwrap() > 1e-2);
        let flat = |_: &RealPoint4| Ok(Endomorphism4::j0());
        assert_eq!(check_integrability(&flat, &x0, 1e-3).unwrap(), 0.0);
    }

    #[test]
    fn equivariance_detects_a_broken_constraint() {
        let cp = ContractionParams::resonant(c(0.6, 0.0), 1, c(0.1, 0.0));
        let pl = pipeline(&cp, 0.05);
        let good = HopfGroupData { contraction: cp, h_generators: vec![cyclic_generator(2)] };
        let bad = HopfGroupData { contraction: cp, h_generators: vec![diag_unitary(c(0.0, 1.0), c(0.0, -1.0))] };
        let x = fundamental_annulus_sample(2, &cp, 1)[0];
        let (f, _) = pl.fields_adaptive(&x).unwrap();
        let els = |d: &HopfGroupData| {
            let mut v = vec![GroupElement::ContractionPower(1)];
            v.extend(d.h_generators.iter().map(|h| GroupElement::Unitary(*h)));
            v
        };
        let (rg, rj) = check_gamma_equivariance(&pl, &good, &f, &x, &els(&good)).unwrap();
        assert!(rg < 1e-7 && rj < 1e-7, "{rg} {rj}");
        let (rg, rj) = check_gamma_equivariance(&pl, &bad, &f, &x, &els(&bad)).unwrap();
        assert!(rg.max(rj) > 1e-2, "{rg} {rj}");
    }

    #[test]
    fn hash_is_stable() {
        assert_eq!(content_hash(b""), "473a0f4c3be8a93681a267e3b1e9a7dcda1185436fe141f7749120a303721813");
    }
}
