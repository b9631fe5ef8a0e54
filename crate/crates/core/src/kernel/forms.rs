//! Pointwise exterior algebra on R^4 = C^2.
//!
//! The frame is fixed once and for all as `(x1, y1, x2, y2)` with
//! `z_k = x_k + i y_k`, and the volume form is `dx1^dy1^dx2^dy2` (the complex
//! orientation). A two-form `B` is stored as the antisymmetric matrix
//! `B[i][j] = B(e_i, e_j)`; an endomorphism acts on column vectors, so
//! `mat[k][j]` is the `e_k` component of `A e_j`.

use std::ops::{Add, Mul, Neg, Sub};

use nalgebra::{Matrix4, SymmetricEigen, Vector4};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{BihermError, Result};

/// Determinants below this are treated as zero when inverting forms.
pub const DEGENERACY_EPS: f64 = 1e-14;

/// A point of C^2 \ {0} in real coordinates `(x1, y1, x2, y2)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RealPoint4 {
    pub coords: [f64; 4],
}

impl RealPoint4 {
    pub fn new(x1: f64, y1: f64, x2: f64, y2: f64) -> Self {
        Self { coords: [x1, y1, x2, y2] }
    }

    pub fn from_complex(z1: Complex64, z2: Complex64) -> Self {
        Self::new(z1.re, z1.im, z2.re, z2.im)
    }

    pub fn from_vector(v: &Vector4<f64>) -> Self {
        Self { coords: [v[0], v[1], v[2], v[3]] }
    }

    pub fn to_complex(&self) -> (Complex64, Complex64) {
        let c = self.coords;
        (Complex64::new(c[0], c[1]), Complex64::new(c[2], c[3]))
    }

    pub fn to_vector(&self) -> Vector4<f64> {
        Vector4::from(self.coords)
    }

    pub fn norm_sqr(&self) -> f64 {
        self.coords.iter().map(|c| c * c).sum()
    }

    pub fn norm(&self) -> f64 {
        self.norm_sqr().sqrt()
    }

    /// `self + s * e_axis`.
    pub fn shifted(&self, axis: usize, s: f64) -> Self {
        let mut c = self.coords;
        c[axis] += s;
        Self { coords: c }
    }

    pub fn offset(&self, delta: &[f64; 4]) -> Self {
        let mut c = self.coords;
        for (ci, di) in c.iter_mut().zip(delta) {
            *ci += di;
        }
        Self { coords: c }
    }
}

/// Sign of the permutation `(i, j, k, l)` of `(0, 1, 2, 3)`, zero on repeats.
pub fn levi_civita(idx: [usize; 4]) -> f64 {
    let mut sign = 1.0;
    for a in 0..4 {
        for b in (a + 1)..4 {
            if idx[a] == idx[b] {
                return 0.0;
            }
            if idx[a] > idx[b] {
                sign = -sign;
            }
        }
    }
    sign
}

fn max_abs(m: &Matrix4<f64>) -> f64 {
    m.iter().fold(0.0, |acc, v| acc.max(v.abs()))
}

/// Real 2-form at a point, stored as an exactly antisymmetric matrix.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TwoFormAtPoint {
    coeff: Matrix4<f64>,
}

impl TwoFormAtPoint {
    pub fn zero() -> Self {
        Self { coeff: Matrix4::zeros() }
    }

    /// Builds a form from its six components `B[i][j]`, `i < j`, in the order
    /// `01, 02, 03, 12, 13, 23`.
    pub fn from_components(c: [f64; 6]) -> Self {
        let mut coeff = Matrix4::zeros();
        for (n, (i, j)) in Self::PAIRS.iter().enumerate() {
            coeff[(*i, *j)] = c[n];
            coeff[(*j, *i)] = -c[n];
        }
        Self { coeff }
    }

    /// Index pairs `i < j` in component order.
    pub const PAIRS: [(usize, usize); 6] = [(0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3)];

    /// Antisymmetric part of an arbitrary matrix (exactly antisymmetric result).
    pub fn from_matrix(m: &Matrix4<f64>) -> Self {
        let mut c = [0.0; 6];
        for (n, (i, j)) in Self::PAIRS.iter().enumerate() {
            c[n] = 0.5 * (m[(*i, *j)] - m[(*j, *i)]);
        }
        Self::from_components(c)
    }

    pub fn components(&self) -> [f64; 6] {
        let mut c = [0.0; 6];
        for (n, (i, j)) in Self::PAIRS.iter().enumerate() {
            c[n] = self.coeff[(*i, *j)];
        }
        c
    }

    pub fn matrix(&self) -> &Matrix4<f64> {
        &self.coeff
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.coeff[(i, j)]
    }

    /// `dx1^dx2 - dy1^dy2 = Re(dz1^dz2)`.
    pub fn phi0() -> Self {
        Self::from_components([0.0, 1.0, 0.0, 0.0, -1.0, 0.0])
    }

    /// `dx1^dy2 + dy1^dx2 = Im(dz1^dz2)`.
    pub fn psi0() -> Self {
        Self::from_components([0.0, 0.0, 1.0, 1.0, 0.0, 0.0])
    }

    /// `dx1^dy1 + dx2^dy2`, the flat Kahler form.
    pub fn omega0() -> Self {
        Self::from_components([1.0, 0.0, 0.0, 0.0, 0.0, 1.0])
    }

    pub fn eval(&self, u: &Vector4<f64>, v: &Vector4<f64>) -> f64 {
        u.dot(&(self.coeff * v))
    }

    /// `D^T B D`, the pullback along a linear map with matrix `D`.
    pub fn pullback(&self, d: &Matrix4<f64>) -> Self {
        Self::from_matrix(&(d.transpose() * self.coeff * d))
    }

    pub fn max_abs(&self) -> f64 {
        max_abs(&self.coeff)
    }

    pub fn determinant(&self) -> f64 {
        self.coeff.determinant()
    }

    /// Map from vectors to one-forms, `u -> B(u, .)`, returned as a matrix
    /// acting on column vectors.
    fn flat_map(&self) -> Matrix4<f64> {
        self.coeff.transpose()
    }
}

impl Add for TwoFormAtPoint {
    type Output = Self;
    fn add(self, rhs: Self) -> Self {
        Self { coeff: self.coeff + rhs.coeff }
    }
}

impl Sub for TwoFormAtPoint {
    type Output = Self;
    fn sub(self, rhs: Self) -> Self {
        Self { coeff: self.coeff - rhs.coeff }
    }
}

impl Mul<f64> for TwoFormAtPoint {
    type Output = Self;
    fn mul(self, s: f64) -> Self {
        Self { coeff: self.coeff * s }
    }
}

impl Neg for TwoFormAtPoint {
    type Output = Self;
    fn neg(self) -> Self {
        Self { coeff: -self.coeff }
    }
}

/// Real 1-form at a point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OneFormAtPoint {
    pub coeff: Vector4<f64>,
}

impl OneFormAtPoint {
    pub fn new(c: [f64; 4]) -> Self {
        Self { coeff: Vector4::from(c) }
    }

    pub fn zero() -> Self {
        Self { coeff: Vector4::zeros() }
    }

    pub fn max_abs(&self) -> f64 {
        self.coeff.iter().fold(0.0, |acc, v| acc.max(v.abs()))
    }

    /// `(J a)(X) = -a(J X)`.
    pub fn apply_complex_structure(&self, j: &Endomorphism4) -> Self {
        Self { coeff: -(j.mat.transpose() * self.coeff) }
    }

    pub fn wedge(&self, other: &OneFormAtPoint) -> TwoFormAtPoint {
        let m = self.coeff * other.coeff.transpose();
        TwoFormAtPoint::from_matrix(&(m * 2.0))
    }
}

impl Add for OneFormAtPoint {
    type Output = Self;
    fn add(self, rhs: Self) -> Self {
        Self { coeff: self.coeff + rhs.coeff }
    }
}

impl Sub for OneFormAtPoint {
    type Output = Self;
    fn sub(self, rhs: Self) -> Self {
        Self { coeff: self.coeff - rhs.coeff }
    }
}

impl Mul<f64> for OneFormAtPoint {
    type Output = Self;
    fn mul(self, s: f64) -> Self {
        Self { coeff: self.coeff * s }
    }
}

/// Real 3-form, components ordered `012, 013, 023, 123`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThreeFormAtPoint {
    pub coeff: [f64; 4],
}

impl ThreeFormAtPoint {
    pub const TRIPLES: [(usize, usize, usize); 4] = [(0, 1, 2), (0, 1, 3), (0, 2, 3), (1, 2, 3)];

    pub fn zero() -> Self {
        Self { coeff: [0.0; 4] }
    }

    pub fn max_abs(&self) -> f64 {
        self.coeff.iter().fold(0.0, |acc, v| acc.max(v.abs()))
    }

    /// Full antisymmetric evaluation on basis vectors `T(e_i, e_j, e_k)`.
    pub fn component(&self, i: usize, j: usize, k: usize) -> f64 {
        if i == j || j == k || i == k {
            return 0.0;
        }
        let missing = 6 - i - j - k;
        let slot = 3 - missing;
        let sign = levi_civita([i, j, k, missing]) * levi_civita(sorted_with_last(missing));
        sign * self.coeff[slot]
    }
}

// Sorted triple followed by the missing index, as a permutation of 0..4.
fn sorted_with_last(missing: usize) -> [usize; 4] {
    let mut out = [0; 4];
    let mut n = 0;
    for a in 0..4 {
        if a != missing {
            out[n] = a;
            n += 1;
        }
    }
    out[3] = missing;
    out
}

impl Add for ThreeFormAtPoint {
    type Output = Self;
    fn add(self, rhs: Self) -> Self {
        let mut c = self.coeff;
        for (a, b) in c.iter_mut().zip(rhs.coeff) {
            *a += b;
        }
        Self { coeff: c }
    }
}

impl Sub for ThreeFormAtPoint {
    type Output = Self;
    fn sub(self, rhs: Self) -> Self {
        self + rhs * -1.0
    }
}

impl Mul<f64> for ThreeFormAtPoint {
    type Output = Self;
    fn mul(self, s: f64) -> Self {
        Self { coeff: self.coeff.map(|c| c * s) }
    }
}

/// `a ^ B` for a 1-form `a` and a 2-form `B`.
pub fn wedge_one_two(a: &OneFormAtPoint, b: &TwoFormAtPoint) -> ThreeFormAtPoint {
    let mut out = [0.0; 4];
    for (n, (i, j, k)) in ThreeFormAtPoint::TRIPLES.iter().enumerate() {
        let (i, j, k) = (*i, *j, *k);
        out[n] = a.coeff[i] * b.get(j, k) + a.coeff[j] * b.get(k, i) + a.coeff[k] * b.get(i, j);
    }
    ThreeFormAtPoint { coeff: out }
}

/// The scalar `s` with `B ^ C = s dx1^dy1^dx2^dy2`.
pub fn wedge_to_volume(b: &TwoFormAtPoint, c: &TwoFormAtPoint) -> f64 {
    let (b, c) = (b.matrix(), c.matrix());
    b[(0, 1)] * c[(2, 3)] + b[(2, 3)] * c[(0, 1)] - b[(0, 2)] * c[(1, 3)] - b[(1, 3)] * c[(0, 2)]
        + b[(0, 3)] * c[(1, 2)]
        + b[(1, 2)] * c[(0, 3)]
}

/// Linear endomorphism of the tangent space.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Endomorphism4 {
    pub mat: Matrix4<f64>,
}

impl Endomorphism4 {
    pub fn new(mat: Matrix4<f64>) -> Self {
        Self { mat }
    }

    pub fn identity() -> Self {
        Self { mat: Matrix4::identity() }
    }

    /// Multiplication by `i`: `d/dx_k -> d/dy_k`, `d/dy_k -> -d/dx_k`.
    pub fn j0() -> Self {
        #[rustfmt::skip]
        let mat = Matrix4::new(
            0.0, -1.0, 0.0, 0.0,
            1.0, 0.0, 0.0, 0.0,
            0.0, 0.0, 0.0, -1.0,
            0.0, 0.0, 1.0, 0.0,
        );
        Self { mat }
    }

    pub fn compose(&self, other: &Endomorphism4) -> Self {
        Self { mat: self.mat * other.mat }
    }

    pub fn trace(&self) -> f64 {
        self.mat.trace()
    }

    pub fn max_abs(&self) -> f64 {
        max_abs(&self.mat)
    }

    /// `|A^2 + Id|_max`.
    pub fn acs_defect(&self) -> f64 {
        max_abs(&(self.mat * self.mat + Matrix4::identity()))
    }
}

impl Add for Endomorphism4 {
    type Output = Self;
    fn add(self, rhs: Self) -> Self {
        Self { mat: self.mat + rhs.mat }
    }
}

impl Sub for Endomorphism4 {
    type Output = Self;
    fn sub(self, rhs: Self) -> Self {
        Self { mat: self.mat - rhs.mat }
    }
}

impl Mul<f64> for Endomorphism4 {
    type Output = Self;
    fn mul(self, s: f64) -> Self {
        Self { mat: self.mat * s }
    }
}

/// Solves `Psi(u, v) = -Phi(J u, v)` for `J`, i.e. `J = -Phi^-1 Psi` in
/// matrix form.
pub fn acs_from_form_pair(phi: &TwoFormAtPoint, psi: &TwoFormAtPoint) -> Result<Endomorphism4> {
    let det = phi.determinant();
    if det.abs() < DEGENERACY_EPS {
        return Err(BihermError::DegenerateForm { det });
    }
    let inv = phi.flat_map().try_inverse().ok_or(BihermError::DegenerateForm { det })?;
    // Psi(u,.) = -Phi(Ju,.)  <=>  Psi^T u = -Phi^T J u
    Ok(Endomorphism4 { mat: -(inv * psi.flat_map()) })
}

/// `B^{1,1}(u, v) = (B(u, v) + B(Ju, Jv)) / 2`.
pub fn invariant_part(b: &TwoFormAtPoint, j: &Endomorphism4) -> TwoFormAtPoint {
    let rotated = j.mat.transpose() * b.matrix() * j.mat;
    TwoFormAtPoint::from_matrix(&((b.matrix() + rotated) * 0.5))
}

/// `g(u, v) = F(u, J v)`; symmetrized, no definiteness asserted.
pub fn metric_from_form(f: &TwoFormAtPoint, j: &Endomorphism4) -> Matrix4<f64> {
    let g = f.matrix() * j.mat;
    (g + g.transpose()) * 0.5
}

/// Fundamental form `F(u, v) = g(J u, v)`.
pub fn fundamental_form(g: &Matrix4<f64>, j: &Endomorphism4) -> TwoFormAtPoint {
    TwoFormAtPoint::from_matrix(&(j.mat.transpose() * g))
}

pub fn min_eigenvalue(sym: &Matrix4<f64>) -> f64 {
    SymmetricEigen::new(*sym)
        .eigenvalues
        .iter()
        .fold(f64::INFINITY, |acc, v| acc.min(*v))
}

/// `dd^c f` from the Hessian of `f`, with `d^c = i(dbar - d)` so that
/// `dd^c f = 2i ddbar f` and `dd^c |z|^2 = 4 omega0`.
pub fn ddc_from_hessian(hess: &Matrix4<f64>) -> TwoFormAtPoint {
    let j = Endomorphism4::j0().mat;
    let hj = hess * j;
    TwoFormAtPoint::from_matrix(&(-(hj - hj.transpose())))
}

/// Hodge star on 2-forms for a positive definite metric `g` and the complex
/// orientation.
pub fn hodge_star(g: &Matrix4<f64>, b: &TwoFormAtPoint) -> Result<TwoFormAtPoint> {
    let min_eig = min_eigenvalue(g);
    if !(min_eig > 0.0) {
        return Err(BihermError::SingularMetric { min_eigenvalue: min_eig });
    }
    let ginv = g.try_inverse().ok_or(BihermError::SingularMetric { min_eigenvalue: min_eig })?;
    let raised = ginv * b.matrix() * ginv.transpose();
    let vol = g.determinant().sqrt();
    let mut c = [0.0; 6];
    for (n, (i, j)) in TwoFormAtPoint::PAIRS.iter().enumerate() {
        let mut s = 0.0;
        for k in 0..4 {
            for l in 0..4 {
                if k != l {
                    s += raised[(k, l)] * levi_civita([k, l, *i, *j]);
                }
            }
        }
        c[n] = 0.5 * vol * s;
    }
    Ok(TwoFormAtPoint::from_components(c))
}

/// Pointwise inner product of 2-forms, `<B, C>_g = 1/2 B_ij C^ij`.
pub fn two_form_inner(g_inv: &Matrix4<f64>, b: &TwoFormAtPoint, c: &TwoFormAtPoint) -> f64 {
    let raised = g_inv * c.matrix() * g_inv.transpose();
    0.5 * b.matrix().component_mul(&raised).sum()
}

/// Real 4x4 matrix of the complex-linear map `z -> A z`.
pub fn realify(a: &nalgebra::Matrix2<Complex64>) -> Matrix4<f64> {
    let mut m = Matrix4::zeros();
    for r in 0..2 {
        for c in 0..2 {
            let z = a[(r, c)];
            m[(2 * r, 2 * c)] = z.re;
            m[(2 * r, 2 * c + 1)] = -z.im;
            m[(2 * r + 1, 2 * c)] = z.im;
            m[(2 * r + 1, 2 * c + 1)] = z.re;
        }
    }
    m
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_form(rng: &mut ChaCha8Rng) -> TwoFormAtPoint {
        let mut c = [0.0; 6];
        for v in &mut c {
            *v = rng.random_range(-1.0..1.0);
        }
        TwoFormAtPoint::from_components(c)
    }

    fn random_spd(rng: &mut ChaCha8Rng) -> Matrix4<f64> {
        let a = Matrix4::from_fn(|_, _| rng.random_range(-1.0..1.0));
        a * a.transpose() + Matrix4::identity() * 0.5
    }

    // Brute force: (B^C)(e0,e1,e2,e3) = sum over permutations / (2!2!), with
    // B = 1/2 B_ij e^i^e^j.
    fn wedge_by_permutations(b: &TwoFormAtPoint, c: &TwoFormAtPoint) -> f64 {
        let mut s = 0.0;
        for i in 0..4 {
            for j in 0..4 {
                for k in 0..4 {
                    for l in 0..4 {
                        let e = levi_civita([i, j, k, l]);
                        if e != 0.0 {
                            s += e * b.get(i, j) * c.get(k, l);
                        }
                    }
                }
            }
        }
        s / 4.0
    }

    #[test]
    fn wedge_examples() {
        let (phi, psi, omega) = (TwoFormAtPoint::phi0(), TwoFormAtPoint::psi0(), TwoFormAtPoint::omega0());
        assert_eq!(wedge_to_volume(&phi, &phi), 2.0);
        assert_eq!(wedge_to_volume(&phi, &psi), 0.0);
        assert_eq!(wedge_to_volume(&omega, &omega), 2.0);
        assert_eq!(wedge_by_permutations(&phi, &phi), 2.0);
    }

    #[test]
    fn wedge_matches_permutation_sum() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..100 {
            let (b, c) = (random_form(&mut rng), random_form(&mut rng));
            let w = wedge_to_volume(&b, &c);
            assert!((w - wedge_to_volume(&c, &b)).abs() < 1e-15);
            assert!((w - wedge_by_permutations(&b, &c)).abs() < 1e-14);
        }
    }

    #[test]
    fn acs_examples() {
        let (phi, psi) = (TwoFormAtPoint::phi0(), TwoFormAtPoint::psi0());
        let j = acs_from_form_pair(&phi, &psi).unwrap();
        assert!((j.mat - Endomorphism4::j0().mat).abs().max() < 1e-15);
        let jm = acs_from_form_pair(&phi, &(-psi)).unwrap();
        assert!((jm.mat + Endomorphism4::j0().mat).abs().max() < 1e-15);
        assert!(matches!(
            acs_from_form_pair(&TwoFormAtPoint::zero(), &psi),
            Err(BihermError::DegenerateForm { .. })
        ));
    }

    #[test]
    fn acs_is_equivariant_under_phi_symplectic_maps() {
        // Phi0-symplectic maps: exp of Phi0^-1 S for symmetric S.
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let phi = TwoFormAtPoint::phi0();
        for _ in 0..20 {
            let s = Matrix4::from_fn(|_, _| rng.random_range(-0.3..0.3));
            let s = s + s.transpose();
            let gen = phi.matrix().try_inverse().unwrap() * s;
            let d = gen.exp();
            assert!((d.transpose() * phi.matrix() * d - phi.matrix()).abs().max() < 1e-12);
            let psi_d = TwoFormAtPoint::psi0().pullback(&d);
            let j = acs_from_form_pair(&phi, &psi_d).unwrap();
            let expected = d.try_inverse().unwrap() * Endomorphism4::j0().mat * d;
            assert!((j.mat - expected).abs().max() < 1e-10);
        }
    }

    #[test]
    fn acs_reencodes_psi() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..100 {
            let (phi, psi) = (random_form(&mut rng), random_form(&mut rng));
            if phi.determinant().abs() < 1e-3 {
                continue;
            }
            let j = acs_from_form_pair(&phi, &psi).unwrap();
            let back = TwoFormAtPoint::from_matrix(&(-(j.mat.transpose() * phi.matrix())));
            assert!((back - psi).max_abs() < 1e-12);
        }
    }

    #[test]
    fn invariant_part_examples() {
        let j0 = Endomorphism4::j0();
        let (psi, omega) = (TwoFormAtPoint::psi0(), TwoFormAtPoint::omega0());
        assert_eq!(invariant_part(&psi, &j0).max_abs(), 0.0);
        assert_eq!(invariant_part(&omega, &j0), omega);
        assert_eq!(invariant_part(&(psi + omega), &j0), omega);
    }

    #[test]
    fn invariant_part_is_idempotent() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let j0 = Endomorphism4::j0();
        for _ in 0..50 {
            let b = random_form(&mut rng);
            let once = invariant_part(&b, &j0);
            assert_eq!(invariant_part(&once, &j0), once);
        }
    }

    #[test]
    fn metric_examples() {
        let (omega, j0) = (TwoFormAtPoint::omega0(), Endomorphism4::j0());
        assert_eq!(metric_from_form(&omega, &j0), Matrix4::identity());
        assert_eq!(metric_from_form(&(omega * 4.0), &j0), Matrix4::identity() * 4.0);
        let neg = metric_from_form(&omega, &Endomorphism4 { mat: -j0.mat });
        assert_eq!(neg, -Matrix4::identity());
        assert!((min_eigenvalue(&neg) + 1.0).abs() < 1e-14);
        assert_eq!(fundamental_form(&Matrix4::identity(), &j0), omega);
    }

    #[test]
    fn hodge_star_examples() {
        let id = Matrix4::identity();
        let e01 = TwoFormAtPoint::from_components([1.0, 0.0, 0.0, 0.0, 0.0, 0.0]);
        let e23 = TwoFormAtPoint::from_components([0.0, 0.0, 0.0, 0.0, 0.0, 1.0]);
        assert!((hodge_star(&id, &e01).unwrap() - e23).max_abs() < 1e-15);
        let phi = TwoFormAtPoint::phi0();
        assert!((hodge_star(&id, &phi).unwrap() - phi).max_abs() < 1e-15);
        assert!((hodge_star(&(id * 4.0), &phi).unwrap() - phi).max_abs() < 1e-14);
        for b in [TwoFormAtPoint::psi0(), TwoFormAtPoint::omega0()] {
            assert!((hodge_star(&id, &b).unwrap() - b).max_abs() < 1e-15);
        }
        assert!(matches!(hodge_star(&-id, &phi), Err(BihermError::SingularMetric { .. })));
    }

    #[test]
    fn hodge_star_is_an_involution() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..1000 {
            let g = random_spd(&mut rng);
            let b = random_form(&mut rng);
            let twice = hodge_star(&g, &hodge_star(&g, &b).unwrap()).unwrap();
            assert!((twice - b).max_abs() < 1e-10 * (1.0 + b.max_abs()));
        }
    }

    #[test]
    fn hodge_star_defines_the_inner_product() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        for _ in 0..50 {
            let g = random_spd(&mut rng);
            let (b, c) = (random_form(&mut rng), random_form(&mut rng));
            let lhs = wedge_to_volume(&b, &hodge_star(&g, &c).unwrap());
            let rhs = two_form_inner(&g.try_inverse().unwrap(), &b, &c) * g.determinant().sqrt();
            assert!((lhs - rhs).abs() < 1e-10);
        }
    }

    #[test]
    fn three_form_components_are_antisymmetric() {
        let t = ThreeFormAtPoint { coeff: [1.0, 2.0, 3.0, 4.0] };
        assert_eq!(t.component(0, 1, 2), 1.0);
        assert_eq!(t.component(1, 0, 2), -1.0);
        assert_eq!(t.component(2, 0, 1), 1.0);
        assert_eq!(t.component(1, 2, 3), 4.0);
        assert_eq!(t.component(3, 2, 1), -4.0);
        assert_eq!(t.component(0, 3, 2), -3.0);
        assert_eq!(t.component(0, 0, 2), 0.0);
    }

    #[test]
    fn one_form_wedge_matches_definition() {
        let a = OneFormAtPoint::new([1.0, 0.0, 0.0, 0.0]);
        let b = OneFormAtPoint::new([0.0, 1.0, 0.0, 0.0]);
        let w = a.wedge(&b);
        assert_eq!(w.get(0, 1), 1.0);
        assert_eq!(w.get(1, 0), -1.0);
    }

    #[test]
    fn realify_matches_multiplication_by_i() {
        let i = nalgebra::Matrix2::from_diagonal_element(Complex64::new(0.0, 1.0));
        assert_eq!(realify(&i), Endomorphism4::j0().mat);
    }
}
