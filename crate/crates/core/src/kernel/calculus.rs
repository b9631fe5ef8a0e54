//! Finite-difference calculus for sampled tensor fields.
//!
//! Derivatives are central differences, optionally Richardson-extrapolated
//! from steps `h` and `h/2`, which cancels the `O(h^2)` term.

use std::cell::RefCell;
use std::collections::HashMap;
use std::ops::{Add, Mul, Sub};

use nalgebra::{Matrix4, Vector4};

use super::forms::{Endomorphism4, OneFormAtPoint, RealPoint4, ThreeFormAtPoint, TwoFormAtPoint};
use crate::error::Result;

/// Values that can be combined linearly by a difference stencil.
pub trait FieldValue: Clone + Add<Output = Self> + Sub<Output = Self> + Mul<f64, Output = Self> {}

impl<T> FieldValue for T where T: Clone + Add<Output = T> + Sub<Output = T> + Mul<f64, Output = T> {}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DiffScheme {
    Central,
    Richardson,
}

/// Default step `1e-3 * max(1, |x|)`.
pub fn default_step(x: &RealPoint4) -> f64 {
    1e-3 * x.norm().max(1.0)
}

fn central<T: FieldValue>(field: &impl Fn(&RealPoint4) -> T, x: &RealPoint4, axis: usize, h: f64) -> T {
    (field(&x.shifted(axis, h)) - field(&x.shifted(axis, -h))) * (0.5 / h)
}

/// `d field / d x_axis` at `x`.
pub fn partial<T: FieldValue>(
    field: &impl Fn(&RealPoint4) -> T,
    x: &RealPoint4,
    axis: usize,
    h: f64,
    scheme: DiffScheme,
) -> T {
    match scheme {
        DiffScheme::Central => central(field, x, axis, h),
        DiffScheme::Richardson => {
            richardson(central(field, x, axis, 0.5 * h), central(field, x, axis, h))
        }
    }
}

/// `(4 D(h/2) - D(h)) / 3`.
pub fn richardson<T: FieldValue>(half_step: T, full_step: T) -> T {
    (half_step * 4.0 - full_step) * (1.0 / 3.0)
}

fn partials<T: FieldValue>(
    field: &impl Fn(&RealPoint4) -> T,
    x: &RealPoint4,
    h: f64,
    scheme: DiffScheme,
) -> [T; 4] {
    std::array::from_fn(|axis| partial(field, x, axis, h, scheme))
}

pub fn gradient_fd(field: &impl Fn(&RealPoint4) -> f64, x: &RealPoint4, h: f64) -> Vector4<f64> {
    Vector4::from(partials(field, x, h, DiffScheme::Richardson))
}

pub fn hessian_fd(field: &impl Fn(&RealPoint4) -> f64, x: &RealPoint4, h: f64) -> Matrix4<f64> {
    let grad = |p: &RealPoint4| gradient_fd(field, p, h);
    let cols = partials(&grad, x, h, DiffScheme::Richardson);
    let m = Matrix4::from_columns(&cols);
    (m + m.transpose()) * 0.5
}

/// `(dB)_{ijk} = d_i B_jk + d_j B_ki + d_k B_ij` from the four partials.
pub fn d_two_form_from_partials(dp: &[TwoFormAtPoint; 4]) -> ThreeFormAtPoint {
    let mut out = [0.0; 4];
    for (n, (i, j, k)) in ThreeFormAtPoint::TRIPLES.iter().enumerate() {
        let (i, j, k) = (*i, *j, *k);
        out[n] = dp[i].get(j, k) + dp[j].get(k, i) + dp[k].get(i, j);
    }
    ThreeFormAtPoint { coeff: out }
}

/// `(da)_{ij} = d_i a_j - d_j a_i`.
pub fn d_one_form_from_partials(dp: &[OneFormAtPoint; 4]) -> TwoFormAtPoint {
    let m = Matrix4::from_fn(|i, j| dp[i].coeff[j] - dp[j].coeff[i]);
    TwoFormAtPoint::from_matrix(&m)
}

pub fn exterior_derivative_two(
    field: &impl Fn(&RealPoint4) -> TwoFormAtPoint,
    x: &RealPoint4,
    h: f64,
    scheme: DiffScheme,
) -> ThreeFormAtPoint {
    d_two_form_from_partials(&partials(field, x, h, scheme))
}

pub fn exterior_derivative_one(
    field: &impl Fn(&RealPoint4) -> OneFormAtPoint,
    x: &RealPoint4,
    h: f64,
    scheme: DiffScheme,
) -> TwoFormAtPoint {
    d_one_form_from_partials(&partials(field, x, h, scheme))
}

/// `n[i][j][k]` is the `e_k` component of `N(e_i, e_j)`.
pub type NijenhuisTensor = [[[f64; 4]; 4]; 4];

/// `N(u,v) = [Ju,Jv] - J[Ju,v] - J[u,Jv] - [u,v]` on coordinate fields, given
/// `J` and its partial derivatives `dj[a] = d_a J`.
pub fn nijenhuis_from_partials(j: &Endomorphism4, dj: &[Matrix4<f64>; 4]) -> NijenhuisTensor {
    let jm = &j.mat;
    let mut n = [[[0.0; 4]; 4]; 4];
    for i in 0..4 {
        for jj in 0..4 {
            for k in 0..4 {
                let mut s = 0.0;
                for a in 0..4 {
                    s += jm[(a, i)] * dj[a][(k, jj)] - jm[(a, jj)] * dj[a][(k, i)];
                    s += jm[(k, a)] * (dj[jj][(a, i)] - dj[i][(a, jj)]);
                }
                n[i][jj][k] = s;
            }
        }
    }
    n
}

pub fn nijenhuis(
    field: &impl Fn(&RealPoint4) -> Endomorphism4,
    x: &RealPoint4,
    h: f64,
) -> NijenhuisTensor {
    let mats = |p: &RealPoint4| field(p).mat;
    let dj = partials(&mats, x, h, DiffScheme::Richardson);
    nijenhuis_from_partials(&field(x), &dj)
}

pub fn nijenhuis_max(n: &NijenhuisTensor) -> f64 {
    n.iter().flatten().flatten().fold(0.0, |acc, v| acc.max(v.abs()))
}

type PointEval<'a, T> = Box<dyn Fn(&RealPoint4) -> Result<T> + 'a>;

/// Memoized evaluation of a field on the lattice `origin + unit * offset`.
///
/// Steps are whole multiples of `unit`: the Richardson pair uses 2 units (h)
/// and 1 unit (h/2), so nested derivatives reuse evaluations.
pub struct Lattice<'a, T> {
    origin: RealPoint4,
    unit: f64,
    eval: PointEval<'a, T>,
    cache: RefCell<HashMap<[i32; 4], T>>,
}

impl<'a, T: Clone> Lattice<'a, T> {
    /// `h` is the full step; the lattice unit is `h / 2`.
    pub fn new(origin: RealPoint4, h: f64, eval: impl Fn(&RealPoint4) -> Result<T> + 'a) -> Self {
        Self { origin, unit: 0.5 * h, eval: Box::new(eval), cache: RefCell::new(HashMap::new()) }
    }

    pub fn unit(&self) -> f64 {
        self.unit
    }

    pub fn point(&self, offset: [i32; 4]) -> RealPoint4 {
        let d = offset.map(|o| o as f64 * self.unit);
        self.origin.offset(&d)
    }

    pub fn at(&self, offset: [i32; 4]) -> Result<T> {
        if let Some(v) = self.cache.borrow().get(&offset) {
            return Ok(v.clone());
        }
        let v = (self.eval)(&self.point(offset))?;
        self.cache.borrow_mut().insert(offset, v.clone());
        Ok(v)
    }

    pub fn evaluations(&self) -> usize {
        self.cache.borrow().len()
    }
}

pub fn shift(offset: [i32; 4], axis: usize, by: i32) -> [i32; 4] {
    let mut o = offset;
    o[axis] += by;
    o
}

/// Partial derivative of a lattice-sampled quantity `q` at `offset`.
pub fn lattice_partial<T: FieldValue>(
    q: &impl Fn([i32; 4]) -> Result<T>,
    offset: [i32; 4],
    axis: usize,
    unit: f64,
    scheme: DiffScheme,
) -> Result<T> {
    let diff = |s: i32| -> Result<T> {
        let plus = q(shift(offset, axis, s))?;
        let minus = q(shift(offset, axis, -s))?;
        Ok((plus - minus) * (0.5 / (s as f64 * unit)))
    };
    match scheme {
        DiffScheme::Central => diff(2),
        DiffScheme::Richardson => Ok(richardson(diff(1)?, diff(2)?)),
    }
}

pub fn lattice_partials<T: FieldValue>(
    q: &impl Fn([i32; 4]) -> Result<T>,
    offset: [i32; 4],
    unit: f64,
    scheme: DiffScheme,
) -> Result<[T; 4]> {
    let v: Vec<T> =
        (0..4).map(|a| lattice_partial(q, offset, a, unit, scheme)).collect::<Result<_>>()?;
    Ok(v.try_into().unwrap_or_else(|_| unreachable!()))
}
