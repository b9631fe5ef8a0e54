//! Dormand–Prince 5(4) for autonomous systems on `R^N`.
//!
//! `integrate` is the adaptive solver. It also returns the accepted step
//! sequence, which `integrate_with_steps` can replay verbatim at nearby
//! initial conditions so that the end point depends smoothly on them.

use nalgebra::SVector;

use crate::error::{BihermError, Result};

pub const DEFAULT_ODE_TOL: f64 = 1e-10;
const MIN_STEP: f64 = 1e-12;
const MAX_STEPS: usize = 1_000_000;

const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
const B5: [f64; 7] = [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0, 0.0];
const B4: [f64; 7] = [
    5179.0 / 57600.0,
    0.0,
    7571.0 / 16695.0,
    393.0 / 640.0,
    -92097.0 / 339200.0,
    187.0 / 2100.0,
    1.0 / 40.0,
];

/// Result of an adaptive solve.
#[derive(Debug, Clone)]
pub struct Solution<const N: usize> {
    pub y: SVector<f64, N>,
    /// Signed accepted steps, summing to the requested time.
    pub steps: Vec<f64>,
    pub rejected: usize,
}

fn dp_step<const N: usize>(
    rhs: &mut impl FnMut(&SVector<f64, N>) -> Result<SVector<f64, N>>,
    y: &SVector<f64, N>,
    h: f64,
) -> Result<(SVector<f64, N>, SVector<f64, N>)> {
    let mut k: [SVector<f64, N>; 7] = [SVector::zeros(); 7];
    k[0] = rhs(y)?;
    for s in 1..7 {
        let mut ys = *y;
        for (j, kj) in k.iter().enumerate().take(s) {
            if A[s][j] != 0.0 {
                ys += kj * (h * A[s][j]);
            }
        }
        k[s] = rhs(&ys)?;
    }
    let mut y5 = *y;
    let mut err = SVector::zeros();
    for s in 0..7 {
        y5 += k[s] * (h * B5[s]);
        err += k[s] * (h * (B5[s] - B4[s]));
    }
    Ok((y5, err))
}

/// Adaptive integration from time 0 to `t` with mixed absolute/relative
/// tolerance `tol` on every component.
pub fn integrate<const N: usize>(
    mut rhs: impl FnMut(&SVector<f64, N>) -> Result<SVector<f64, N>>,
    y0: SVector<f64, N>,
    t: f64,
    tol: f64,
) -> Result<Solution<N>> {
    let mut sol = Solution { y: y0, steps: Vec::new(), rejected: 0 };
    if t == 0.0 {
        return Ok(sol);
    }
    let dir = t.signum();
    let mut done = 0.0;
    let mut h = (0.01f64).min(t.abs());
    while done < t.abs() {
        if sol.steps.len() + sol.rejected > MAX_STEPS {
            return Err(BihermError::StepSizeUnderflow { t: done * dir, h });
        }
        let last = h >= t.abs() - done;
        let step = if last { t.abs() - done } else { h };
        let (y_new, err) = dp_step(&mut rhs, &sol.y, step * dir)?;
        let mut e = 0.0f64;
        for i in 0..N {
            let sc = tol * (1.0 + sol.y[i].abs().max(y_new[i].abs()));
            e = e.max(err[i].abs() / sc);
        }
        if !e.is_finite() {
            e = f64::INFINITY;
        }
        if e <= 1.0 {
            sol.y = y_new;
            sol.steps.push(step * dir);
            done = if last { t.abs() } else { done + step };
        } else {
            sol.rejected += 1;
        }
        let factor = if e == 0.0 { 5.0 } else { (0.9 * e.powf(-0.2)).clamp(0.2, 5.0) };
        h = step * factor;
        if h < MIN_STEP * (1.0 + t.abs()) && done < t.abs() {
            return Err(BihermError::StepSizeUnderflow { t: done * dir, h });
        }
    }
    Ok(sol)
}

/// Replays a fixed step sequence without error control.
pub fn integrate_with_steps<const N: usize>(
    mut rhs: impl FnMut(&SVector<f64, N>) -> Result<SVector<f64, N>>,
    y0: SVector<f64, N>,
    steps: &[f64],
) -> Result<SVector<f64, N>> {
    let mut y = y0;
    for &h in steps {
        y = dp_step(&mut rhs, &y, h)?.0;
    }
    Ok(y)
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::Vector2;

    fn harmonic(y: &Vector2<f64>) -> Result<Vector2<f64>> {
        Ok(Vector2::new(y[1], -y[0]))
    }

    #[test]
    fn harmonic_oscillator_matches_closed_form() {
        for t in [0.3, -0.7, 2.5] {
            let sol = integrate(harmonic, Vector2::new(1.0, 0.0), t, 1e-10).unwrap();
            assert!((sol.y[0] - t.cos()).abs() < 1e-9);
            assert!((sol.y[1] + t.sin()).abs() < 1e-9);
            assert!((sol.steps.iter().sum::<f64>() - t).abs() < 1e-14);
        }
    }

    #[test]
    fn zero_time_is_identity() {
        let sol = integrate(harmonic, Vector2::new(0.3, 0.4), 0.0, 1e-10).unwrap();
        assert_eq!(sol.y, Vector2::new(0.3, 0.4));
        assert!(sol.steps.is_empty());
    }

    #[test]
    fn replay_reproduces_the_adaptive_solution() {
        let sol = integrate(harmonic, Vector2::new(1.0, 0.5), 1.3, 1e-10).unwrap();
        let y = integrate_with_steps(harmonic, Vector2::new(1.0, 0.5), &sol.steps).unwrap();
        assert_eq!(y, sol.y);
    }

    #[test]
    fn exponential_growth_rate() {
        let sol = integrate(|y: &SVector<f64, 1>| Ok(*y * 2.0), SVector::<f64, 1>::new(1.0), 1.0, 1e-12).unwrap();
        assert!((sol.y[0] - 2f64.exp()).abs() < 1e-10 * 2f64.exp());
    }

    #[test]
    fn blow_up_underflows() {
        // y' = y^2 with y(0) = 1 blows up at t = 1.
        let r = integrate(|y: &SVector<f64, 1>| Ok(SVector::<f64, 1>::new(y[0] * y[0])), SVector::<f64, 1>::new(1.0), 2.0, 1e-10);
        assert!(matches!(r, Err(BihermError::StepSizeUnderflow { .. })));
    }
}
