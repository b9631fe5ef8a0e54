//! Second-order forward-mode jets: value, gradient and Hessian.

use std::ops::{Add, Div, Mul, Neg, Sub};

use nalgebra::{SMatrix, SVector};

/// A scalar together with its gradient and Hessian in `N` variables.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Jet<const N: usize> {
    pub value: f64,
    pub grad: SVector<f64, N>,
    pub hess: SMatrix<f64, N, N>,
}

/// Jet on R^4, the carrier for potentials and radial times.
pub type JetScalar = Jet<4>;

impl<const N: usize> Jet<N> {
    pub fn constant(value: f64) -> Self {
        Self { value, grad: SVector::zeros(), hess: SMatrix::zeros() }
    }

    /// The coordinate function `x_i` evaluated at `value`.
    pub fn variable(value: f64, i: usize) -> Self {
        let mut grad = SVector::zeros();
        grad[i] = 1.0;
        Self { value, grad, hess: SMatrix::zeros() }
    }

    /// Seeds all `N` coordinates at the point `x`.
    pub fn variables(x: [f64; N]) -> [Self; N] {
        std::array::from_fn(|i| Self::variable(x[i], i))
    }

    /// Applies a scalar function given its value and first two derivatives at
    /// `self.value`.
    pub fn chain(&self, f0: f64, f1: f64, f2: f64) -> Self {
        Self {
            value: f0,
            grad: self.grad * f1,
            hess: self.hess * f1 + (self.grad * self.grad.transpose()) * f2,
        }
    }

    pub fn exp(&self) -> Self {
        let e = self.value.exp();
        self.chain(e, e, e)
    }

    pub fn ln(&self) -> Self {
        let v = self.value;
        self.chain(v.ln(), 1.0 / v, -1.0 / (v * v))
    }

    pub fn sqrt(&self) -> Self {
        let s = self.value.sqrt();
        self.chain(s, 0.5 / s, -0.25 / (s * s * s))
    }

    pub fn recip(&self) -> Self {
        let v = self.value;
        self.chain(1.0 / v, -1.0 / (v * v), 2.0 / (v * v * v))
    }

    pub fn powf(&self, p: f64) -> Self {
        let v = self.value;
        self.chain(v.powf(p), p * v.powf(p - 1.0), p * (p - 1.0) * v.powf(p - 2.0))
    }

    pub fn square(&self) -> Self {
        *self * *self
    }
}

impl<const N: usize> Add for Jet<N> {
    type Output = Self;
    fn add(self, rhs: Self) -> Self {
        Self { value: self.value + rhs.value, grad: self.grad + rhs.grad, hess: self.hess + rhs.hess }
    }
}

impl<const N: usize> Sub for Jet<N> {
    type Output = Self;
    fn sub(self, rhs: Self) -> Self {
        Self { value: self.value - rhs.value, grad: self.grad - rhs.grad, hess: self.hess - rhs.hess }
    }
}

impl<const N: usize> Mul for Jet<N> {
    type Output = Self;
    fn mul(self, rhs: Self) -> Self {
        let cross = self.grad * rhs.grad.transpose();
        Self {
            value: self.value * rhs.value,
            grad: self.grad * rhs.value + rhs.grad * self.value,
            hess: self.hess * rhs.value + rhs.hess * self.value + (cross + cross.transpose()),
        }
    }
}

impl<const N: usize> Div for Jet<N> {
    type Output = Self;
    #[allow(clippy::suspicious_arithmetic_impl)]
    fn div(self, rhs: Self) -> Self {
        self * rhs.recip()
    }
}

impl<const N: usize> Neg for Jet<N> {
    type Output = Self;
    fn neg(self) -> Self {
        Self { value: -self.value, grad: -self.grad, hess: -self.hess }
    }
}

impl<const N: usize> Add<f64> for Jet<N> {
    type Output = Self;
    fn add(self, c: f64) -> Self {
        Self { value: self.value + c, ..self }
    }
}

impl<const N: usize> Sub<f64> for Jet<N> {
    type Output = Self;
    fn sub(self, c: f64) -> Self {
        Self { value: self.value - c, ..self }
    }
}

impl<const N: usize> Mul<f64> for Jet<N> {
    type Output = Self;
    fn mul(self, c: f64) -> Self {
        Self { value: self.value * c, grad: self.grad * c, hess: self.hess * c }
    }
}

/// Complex number with jet-valued real and imaginary parts.
#[derive(Debug, Clone, Copy)]
pub struct ComplexJet<const N: usize> {
    pub re: Jet<N>,
    pub im: Jet<N>,
}

impl<const N: usize> ComplexJet<N> {
    pub fn new(re: Jet<N>, im: Jet<N>) -> Self {
        Self { re, im }
    }

    pub fn mul(&self, other: &Self) -> Self {
        Self {
            re: self.re * other.re - self.im * other.im,
            im: self.re * other.im + self.im * other.re,
        }
    }

    pub fn scale(&self, c: num_complex::Complex64) -> Self {
        Self { re: self.re * c.re - self.im * c.im, im: self.re * c.im + self.im * c.re }
    }

    pub fn sub(&self, other: &Self) -> Self {
        Self { re: self.re - other.re, im: self.im - other.im }
    }

    pub fn norm_sqr(&self) -> Jet<N> {
        self.re.square() + self.im.square()
    }

    pub fn powu(&self, m: u32) -> Self {
        let mut out = Self { re: Jet::constant(1.0), im: Jet::constant(0.0) };
        for _ in 0..m {
            out = out.mul(self);
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::calculus::{gradient_fd, hessian_fd};
    use crate::kernel::RealPoint4;
    use proptest::prelude::*;

    fn composite(x: [JetScalar; 4]) -> JetScalar {
        let [a, b, c, d] = x;
        let s = (a * a + b * b + c * c + d * d).sqrt();
        let e = (a * b * 0.3).exp();
        let l = (c * c + d * 0.5 + 2.0).ln();
        (s * e + l) / (b * b + 1.5) + (a + 3.0).powf(1.7)
    }

    fn composite_f64(p: &RealPoint4) -> f64 {
        composite(JetScalar::variables(p.coords)).value
    }

    proptest! {
        #[test]
        fn jet_derivatives_match_richardson_differences(
            a in 0.2f64..1.0, b in -1.0f64..1.0, c in -1.0f64..1.0, d in -1.0f64..1.0
        ) {
            let p = RealPoint4::new(a, b, c, d);
            let jet = composite(JetScalar::variables(p.coords));
            let g = gradient_fd(&composite_f64, &p, 1e-3);
            let h = hessian_fd(&composite_f64, &p, 1e-3);
            let gscale = 1.0 + jet.grad.amax();
            let hscale = 1.0 + jet.hess.amax();
            prop_assert!((jet.grad - g).amax() / gscale < 1e-6);
            prop_assert!((jet.hess - h).amax() / hscale < 1e-6);
            prop_assert!((jet.hess - jet.hess.transpose()).amax() <= 1e-15 * hscale);
        }
    }

    #[test]
    fn product_rule_on_constants() {
        let [x, y, _, _] = JetScalar::variables([2.0, 3.0, 0.0, 0.0]);
        let p = x * y;
        assert_eq!(p.value, 6.0);
        assert_eq!(p.grad[0], 3.0);
        assert_eq!(p.grad[1], 2.0);
        assert_eq!(p.hess[(0, 1)], 1.0);
        assert_eq!(p.hess[(1, 0)], 1.0);
        assert_eq!(p.hess[(0, 0)], 0.0);
    }

    #[test]
    fn complex_power_matches_expansion() {
        let [x, y] = Jet::<2>::variables([0.3, -0.7]);
        let z = ComplexJet::new(x, y);
        let z3 = z.powu(3);
        let expect = num_complex::Complex64::new(0.3, -0.7).powu(3);
        assert!((z3.re.value - expect.re).abs() < 1e-15);
        assert!((z3.im.value - expect.im).abs() < 1e-15);
    }
}
