//! The deformation `Psi_-^t = phi_t^* Psi`, where `phi_t` is the flow of the
//! field `X` with `i_X Phi = df` and `Phi = Re(dz1^dz2)`.
//!
//! Trajectories are integrated together with their Jacobian `D = D phi_t`,
//! which turns the pullback of the constant-coefficient form into `D^T Psi D`.

use nalgebra::{Matrix4, SVector, Vector4};
use serde::{Deserialize, Serialize};

use crate::error::{BihermError, Result};
use crate::kernel::forms::{acs_from_form_pair, invariant_part, metric_from_form, min_eigenvalue, wedge_to_volume};
use crate::kernel::{Endomorphism4, JetScalar, OneFormAtPoint, RealPoint4, TwoFormAtPoint};
use crate::ode;
use crate::parallel::{map_ordered, Execution};
use crate::potentials::{potential, potential_jet, FlowSpec};

type FlowVector = SVector<f64, 20>;

/// Hamiltonian field of `f` and its derivative, from the jet of `f`.
///
/// `i_X Phi0 = df` reads `Phi0^T X = grad f`, and `Phi0^{-1} = -Phi0`.
pub fn hamiltonian_from_jet(f: &JetScalar) -> (Vector4<f64>, Matrix4<f64>) {
    let phi = TwoFormAtPoint::phi0();
    let p = phi.matrix();
    (p * f.grad, p * f.hess)
}

pub fn hamiltonian_field(spec: &FlowSpec, z: &RealPoint4) -> Result<(Vector4<f64>, Matrix4<f64>)> {
    Ok(hamiltonian_from_jet(&potential_jet(spec, z)?))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DeformationState {
    pub t: f64,
    pub x: RealPoint4,
    /// `D phi_t` at `x`.
    pub d: Matrix4<f64>,
    pub x_t: RealPoint4,
}

fn pack(x: &RealPoint4, d: &Matrix4<f64>) -> FlowVector {
    let mut y = FlowVector::zeros();
    y.fixed_rows_mut::<4>(0).copy_from(&x.to_vector());
    y.fixed_rows_mut::<16>(4).copy_from_slice(d.as_slice());
    y
}

fn unpack(y: &FlowVector) -> (RealPoint4, Matrix4<f64>) {
    let x = RealPoint4::from_vector(&y.fixed_rows::<4>(0).into_owned());
    (x, Matrix4::from_column_slice(y.fixed_rows::<16>(4).as_slice()))
}

fn flow_rhs(spec: &FlowSpec) -> impl Fn(&FlowVector) -> Result<FlowVector> + '_ {
    move |y| {
        let (x, d) = unpack(y);
        let (field, dfield) = hamiltonian_field(spec, &x)?;
        Ok(pack(&RealPoint4::from_vector(&field), &(dfield * d)))
    }
}

/// Adaptive solve; also returns the accepted step sequence.
pub fn integrate_flow_with_schedule(
    spec: &FlowSpec,
    t: f64,
    x: &RealPoint4,
    ode_tol: f64,
) -> Result<(DeformationState, Vec<f64>)> {
    let sol = ode::integrate(flow_rhs(spec), pack(x, &Matrix4::identity()), t, ode_tol)?;
    let (x_t, d) = unpack(&sol.y);
    Ok((DeformationState { t, x: *x, d, x_t }, sol.steps))
}

pub fn integrate_flow(spec: &FlowSpec, t: f64, x: &RealPoint4, ode_tol: f64) -> Result<DeformationState> {
    Ok(integrate_flow_with_schedule(spec, t, x, ode_tol)?.0)
}

/// Integrates with a fixed step sequence, typically one recorded at a nearby
/// point, so that the result is a smooth function of `x`.
pub fn replay_flow(spec: &FlowSpec, x: &RealPoint4, steps: &[f64]) -> Result<DeformationState> {
    let y = ode::integrate_with_steps(flow_rhs(spec), pack(x, &Matrix4::identity()), steps)?;
    let (x_t, d) = unpack(&y);
    Ok(DeformationState { t: steps.iter().sum(), x: *x, d, x_t })
}

pub fn pullback_psi(state: &DeformationState) -> TwoFormAtPoint {
    TwoFormAtPoint::psi0().pullback(&state.d)
}

/// The forms divided by the potential, together with `tau = -d log f`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuotientTriple {
    pub phi: TwoFormAtPoint,
    pub psi_plus: TwoFormAtPoint,
    pub psi_minus: TwoFormAtPoint,
    pub tau: OneFormAtPoint,
}

pub fn quotient_from_parts(f: &JetScalar, state: &DeformationState) -> QuotientTriple {
    let s = 1.0 / f.value;
    QuotientTriple {
        phi: TwoFormAtPoint::phi0() * s,
        psi_plus: TwoFormAtPoint::psi0() * s,
        psi_minus: pullback_psi(state) * s,
        tau: OneFormAtPoint { coeff: -f.grad * s },
    }
}

pub fn quotient_triple(spec: &FlowSpec, state: &DeformationState) -> Result<QuotientTriple> {
    Ok(quotient_from_parts(&potential_jet(spec, &state.x)?, state))
}

impl QuotientTriple {
    pub fn psi_minus_11(&self) -> TwoFormAtPoint {
        invariant_part(&self.psi_minus, &Endomorphism4::j0())
    }

    /// Smallest eigenvalue of `(Psi_-)^{1,1}(., J0 .)`.
    pub fn positivity_margin(&self) -> f64 {
        let j0 = Endomorphism4::j0();
        min_eigenvalue(&metric_from_form(&self.psi_minus_11(), &j0))
    }

    pub fn j_minus(&self) -> Result<Endomorphism4> {
        acs_from_form_pair(&self.phi, &self.psi_minus)
    }

    /// `p = -tr(J0 J_-)/4`.
    pub fn angle(&self) -> Result<f64> {
        Ok(-0.25 * Endomorphism4::j0().compose(&self.j_minus()?).trace())
    }
}

/// Residuals of the flow invariants at one state.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FlowResiduals {
    /// `|f(phi_t x) - f(x)| / f(x)`.
    pub potential: f64,
    /// `max |D^T Phi0 D - Phi0|`.
    pub symplectic: f64,
    /// `|Psi_-^2 - Phi^2| / Phi^2` for the quotient forms.
    pub psi_square: f64,
    /// `|Phi ^ Psi_-| / Phi^2`.
    pub phi_psi: f64,
}

pub fn flow_residuals(spec: &FlowSpec, state: &DeformationState) -> Result<FlowResiduals> {
    let f0 = potential_jet(spec, &state.x)?.value;
    let ft = potential_jet(spec, &state.x_t)?.value;
    let phi0 = TwoFormAtPoint::phi0();
    let q = quotient_triple(spec, state)?;
    let vol = wedge_to_volume(&q.phi, &q.phi);
    Ok(FlowResiduals {
        potential: (ft - f0).abs() / f0,
        symplectic: (phi0.pullback(&state.d) - phi0).max_abs(),
        psi_square: (wedge_to_volume(&q.psi_minus, &q.psi_minus) - vol).abs() / vol.abs(),
        phi_psi: wedge_to_volume(&q.phi, &q.psi_minus).abs() / vol.abs(),
    })
}

/// Central difference of `t -> Psi_-^t / f` at `t = 0`, compared with
/// `dd^c f / f`. Returns the relative residual.
pub fn t_zero_derivative_check(spec: &FlowSpec, x: &RealPoint4, h_t: f64, ode_tol: f64) -> Result<f64> {
    let plus = quotient_triple(spec, &integrate_flow(spec, h_t, x, ode_tol)?)?;
    let minus = quotient_triple(spec, &integrate_flow(spec, -h_t, x, ode_tol)?)?;
    let derivative = (plus.psi_minus - minus.psi_minus) * (0.5 / h_t);
    let lck = potential(spec, x)?.lck_form;
    Ok((derivative - lck).max_abs() / lck.max_abs())
}

/// One row of a positivity sweep.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub t: f64,
    pub min_margin: f64,
    pub argmin_sample_index: usize,
    pub p_min: f64,
    pub p_max: f64,
}

/// Margin and angle at every (t, sample) pair. Grid times are sorted and
/// deduplicated first; failures of individual samples abort the sweep.
pub fn positivity_sweep(
    spec: &FlowSpec,
    t_grid: &[f64],
    samples: &[RealPoint4],
    ode_tol: f64,
    execution: Execution,
) -> Result<Vec<SweepRow>> {
    let grid = canonical_grid(t_grid)?;
    let per_sample = map_ordered(samples, execution, |_, x| -> Result<Vec<(f64, f64)>> {
        let f = potential_jet(spec, x)?;
        grid.iter()
            .map(|&t| {
                let q = quotient_from_parts(&f, &integrate_flow(spec, t, x, ode_tol)?);
                Ok((q.positivity_margin(), q.angle()?))
            })
            .collect()
    });
    let per_sample: Vec<Vec<(f64, f64)>> = per_sample.into_iter().collect::<Result<_>>()?;
    Ok(grid
        .iter()
        .enumerate()
        .map(|(k, &t)| {
            let mut row = SweepRow { t, min_margin: f64::INFINITY, argmin_sample_index: 0, p_min: f64::INFINITY, p_max: f64::NEG_INFINITY };
            for (i, vals) in per_sample.iter().enumerate() {
                let (m, p) = vals[k];
                if m < row.min_margin {
                    row.min_margin = m;
                    row.argmin_sample_index = i;
                }
                row.p_min = row.p_min.min(p);
                row.p_max = row.p_max.max(p);
            }
            row
        })
        .collect())
}

pub fn canonical_grid(t_grid: &[f64]) -> Result<Vec<f64>> {
    if t_grid.iter().any(|t| !t.is_finite()) {
        return Err(BihermError::InvalidInput("t grid contains a non-finite value".into()));
    }
    let mut grid = t_grid.to_vec();
    grid.sort_by(f64::total_cmp);
    grid.dedup();
    Ok(grid)
}

/// Default grid `0.01, 0.02, ..., 0.2` for selecting `t*`.
pub fn default_t_grid() -> Vec<f64> {
    (1..=20).map(|k| k as f64 / 100.0).collect()
}

/// Smallest eigenvalue of the metric of `dd^c f / f` over the samples: the
/// slope of the margin at `t = 0`.
pub fn lck_slope(spec: &FlowSpec, samples: &[RealPoint4]) -> Result<f64> {
    let mut slope = f64::INFINITY;
    for x in samples {
        let p = potential(spec, x)?;
        slope = slope.min(p.min_metric_eigenvalue / p.f.value);
    }
    Ok(slope)
}

/// Largest positive grid time whose margin is at least a tenth of the
/// linear prediction `t * slope`.
pub fn select_t_star(rows: &[SweepRow], slope: f64) -> Option<f64> {
    rows.iter()
        .filter(|r| r.t > 0.0 && r.min_margin >= 0.1 * r.t * slope)
        .map(|r| r.t)
        .fold(None, |acc: Option<f64>, t| Some(acc.map_or(t, |a| a.max(t))))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::groups::{fundamental_annulus_sample, ContractionParams};
    use num_complex::Complex64;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    fn case_a() -> (FlowSpec, ContractionParams) {
        let cp = ContractionParams::diagonal(c(0.5), c(0.5));
        (FlowSpec::from_contraction(&cp), cp)
    }

    fn case_b() -> (FlowSpec, ContractionParams) {
        let cp = ContractionParams::diagonal(c(0.5), c(0.6));
        (FlowSpec::from_contraction(&cp), cp)
    }

    fn case_c() -> (FlowSpec, ContractionParams) {
        let cp = ContractionParams::resonant(c(0.6), 1, c(0.1));
        (FlowSpec::from_contraction(&cp), cp)
    }

    /// `z1(t) = cos 2t z1 + sin 2t conj(z2)`, `z2(t) = cos 2t z2 - sin 2t conj(z1)`.
    fn rotation(t: f64, x: &RealPoint4) -> RealPoint4 {
        let (z1, z2) = x.to_complex();
        let (c2, s2) = ((2.0 * t).cos(), (2.0 * t).sin());
        RealPoint4::from_complex(z1 * c2 + z2.conj() * s2, z2 * c2 - z1.conj() * s2)
    }

    #[test]
    fn field_examples() {
        let (spec, _) = case_a();
        let (x, _) = hamiltonian_field(&spec, &RealPoint4::new(1.0, 0.0, 0.0, 0.0)).unwrap();
        assert!((x - Vector4::new(0.0, 0.0, -2.0, 0.0)).amax() < 1e-12);

        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..20 {
            let p = RealPoint4::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
            let f = potential_jet(&spec, &p).unwrap();
            let (x, _) = hamiltonian_from_jet(&f);
            // i_X Phi0 = df
            let contracted = TwoFormAtPoint::phi0().matrix().transpose() * x;
            assert!((contracted - f.grad).amax() < 1e-12);
            let (z1, z2) = p.to_complex();
            let expect = RealPoint4::from_complex(z2.conj() * 2.0, -z1.conj() * 2.0);
            assert!((x - expect.to_vector()).amax() < 1e-11);
        }

        let mut flat = JetScalar::constant(1.0);
        flat.hess = Matrix4::identity();
        let (x, _) = hamiltonian_from_jet(&flat);
        assert_eq!(x, Vector4::zeros());
    }

    #[test]
    fn rotation_is_the_flow_of_the_field() {
        // d/dt of the closed form at t = 0 is the field.
        let (spec, _) = case_a();
        let p = RealPoint4::new(0.3, -0.2, 0.5, 0.1);
        let h = 1e-5;
        let a = rotation(h, &p).to_vector();
        let b = rotation(-h, &p).to_vector();
        let (x, _) = hamiltonian_field(&spec, &p).unwrap();
        assert!(((a - b) / (2.0 * h) - x).amax() < 1e-8);
    }

    #[test]
    fn integrator_matches_rotation_closed_form() {
        let (spec, cp) = case_a();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for p in fundamental_annulus_sample(rng.random(), &cp, 100) {
            let s = integrate_flow(&spec, 0.3, &p, ode::DEFAULT_ODE_TOL).unwrap();
            let expect = rotation(0.3, &p);
            assert!((s.x_t.to_vector() - expect.to_vector()).amax() < 1e-9);
            // Psi pulled back by the rotation: cos 4t Psi0 + sin 4t omega0.
            let oracle = TwoFormAtPoint::psi0() * (1.2f64).cos() + TwoFormAtPoint::omega0() * (1.2f64).sin();
            assert!((pullback_psi(&s) - oracle).max_abs() < 1e-9);
        }
    }

    #[test]
    fn zero_time_is_identity() {
        let (spec, _) = case_b();
        let p = RealPoint4::new(0.4, 0.1, 0.3, -0.6);
        let s = integrate_flow(&spec, 0.0, &p, 1e-10).unwrap();
        assert_eq!(s.x_t, p);
        assert_eq!(s.d, Matrix4::identity());
        assert_eq!(pullback_psi(&s), TwoFormAtPoint::psi0());
        let q = quotient_triple(&spec, &s).unwrap();
        assert_eq!(q.psi_minus_11().max_abs(), 0.0);
        assert_eq!(q.positivity_margin(), 0.0);
    }

    #[test]
    fn flow_invariants_hold() {
        for (spec, cp) in [case_a(), case_b(), case_c()] {
            for p in fundamental_annulus_sample(5, &cp, 20) {
                for t in [0.01, 0.05, 0.2, 0.5] {
                    let s = integrate_flow(&spec, t, &p, 1e-10).unwrap();
                    let r = flow_residuals(&spec, &s).unwrap();
                    assert!(r.potential < 1e-8, "{r:?}");
                    assert!(r.symplectic < 10.0 * 1e-10 * (1.0 + t) * 10.0, "{r:?}");
                    assert!(r.psi_square < 1e-7 && r.phi_psi < 1e-7, "{r:?}");
                    assert!(s.d.determinant() > 0.0);
                }
            }
        }
    }

    #[test]
    fn flow_group_law() {
        let (spec, cp) = case_b();
        for p in fundamental_annulus_sample(9, &cp, 10) {
            let a = integrate_flow(&spec, 0.07, &p, 1e-10).unwrap();
            let b = integrate_flow(&spec, 0.05, &a.x_t, 1e-10).unwrap();
            let direct = integrate_flow(&spec, 0.12, &p, 1e-10).unwrap();
            assert!((b.x_t.to_vector() - direct.x_t.to_vector()).amax() < 1e-9);
            assert!((b.d * a.d - direct.d).amax() < 1e-9);
        }
    }

    #[test]
    fn replay_matches_adaptive_solution() {
        let (spec, cp) = case_c();
        let p = fundamental_annulus_sample(1, &cp, 1)[0];
        let (s, steps) = integrate_flow_with_schedule(&spec, 0.1, &p, 1e-10).unwrap();
        let r = replay_flow(&spec, &p, &steps).unwrap();
        assert_eq!(s.x_t, r.x_t);
        assert_eq!(s.d, r.d);
    }

    #[test]
    fn time_derivative_is_the_lck_form() {
        let (spec, _) = case_a();
        let x = RealPoint4::new(0.6, 0.0, 0.0, 0.8);
        assert!(t_zero_derivative_check(&spec, &x, 1e-4, 1e-12).unwrap() < 1e-5);
        let lck = potential(&spec, &x).unwrap().lck_form;
        assert!((lck - TwoFormAtPoint::omega0() * 4.0).max_abs() < 1e-12);
        let (spec, cp) = case_b();
        for x in fundamental_annulus_sample(4, &cp, 50) {
            assert!(t_zero_derivative_check(&spec, &x, 1e-4, 1e-12).unwrap() < 1e-5);
        }
    }

    #[test]
    fn sweep_behaviour() {
        let (spec, cp) = case_b();
        let samples = fundamental_annulus_sample(7, &cp, 20);
        let rows = positivity_sweep(&spec, &[0.1, 0.0, 0.05, 0.01, 0.05], &samples, 1e-10, Execution::Sequential).unwrap();
        let ts: Vec<f64> = rows.iter().map(|r| r.t).collect();
        assert_eq!(ts, vec![0.0, 0.01, 0.05, 0.1]);
        assert_eq!(rows[0].min_margin, 0.0);
        assert!((rows[0].p_min - 1.0).abs() < 1e-12 && (rows[0].p_max - 1.0).abs() < 1e-12);
        let slope = lck_slope(&spec, &samples).unwrap();
        for r in &rows[1..] {
            assert!(r.min_margin > 0.0);
            assert!(r.p_max < 1.0);
        }
        // Nearly linear at the start.
        assert!((rows[1].min_margin / 0.01 / slope - 1.0).abs() < 0.2);
        let par = positivity_sweep(&spec, &[0.1, 0.0, 0.05, 0.01], &samples, 1e-10, Execution::Parallel).unwrap();
        assert_eq!(rows, par);
        assert_eq!(select_t_star(&rows, slope), Some(0.1));
    }

    #[test]
    fn large_time_is_reported_not_asserted() {
        let (spec, _) = case_a();
        let x = RealPoint4::new(0.6, 0.0, 0.0, 0.8);
        // Psi_-^t = cos 4t Psi0 + sin 4t omega0, so the margin follows sin 4t.
        let rows = positivity_sweep(&spec, &[1.0], &[x], 1e-10, Execution::Sequential).unwrap();
        assert!((rows[0].min_margin - (4.0f64).sin()).abs() < 1e-8);
        assert!(rows[0].min_margin < 0.0);
    }
}
