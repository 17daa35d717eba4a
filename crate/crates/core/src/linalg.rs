//! Small dense complex matrices for rank-n attenuation and transport.

use std::ops::{Add, AddAssign, Index, IndexMut, Mul, Neg, Sub};

use num_complex::Complex64;
use smallvec::{smallvec, SmallVec};

pub type C64 = Complex64;

pub const ZERO: C64 = C64::new(0.0, 0.0);
pub const ONE: C64 = C64::new(1.0, 0.0);
pub const I: C64 = C64::new(0.0, 1.0);

/// Row-major n×n complex matrix. Rank 1 and 2 live inline.
#[derive(Clone, Debug, PartialEq)]
pub struct CMat {
    n: usize,
    a: SmallVec<[C64; 4]>,
}

impl CMat {
    pub fn zeros(n: usize) -> Self {
        CMat {
            n,
            a: smallvec![ZERO; n * n],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n);
        for i in 0..n {
            m[(i, i)] = ONE;
        }
        m
    }

    pub fn scalar(n: usize, z: C64) -> Self {
        let mut m = Self::zeros(n);
        for i in 0..n {
            m[(i, i)] = z;
        }
        m
    }

    pub fn from_rows(rows: &[&[C64]]) -> Self {
        let n = rows.len();
        let mut m = Self::zeros(n);
        for (i, r) in rows.iter().enumerate() {
            assert_eq!(r.len(), n, "matrix must be square");
            for (j, &v) in r.iter().enumerate() {
                m[(i, j)] = v;
            }
        }
        m
    }

    pub fn from_slice(n: usize, data: &[C64]) -> Self {
        assert_eq!(data.len(), n * n);
        CMat {
            n,
            a: SmallVec::from_slice(data),
        }
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn as_slice(&self) -> &[C64] {
        &self.a
    }

    pub fn as_mut_slice(&mut self) -> &mut [C64] {
        &mut self.a
    }

    pub fn adjoint(&self) -> Self {
        let n = self.n;
        let mut m = Self::zeros(n);
        for i in 0..n {
            for j in 0..n {
                m[(i, j)] = self[(j, i)].conj();
            }
        }
        m
    }

    pub fn scale(&self, z: C64) -> Self {
        CMat {
            n: self.n,
            a: self.a.iter().map(|v| v * z).collect(),
        }
    }

    pub fn scale_re(&self, s: f64) -> Self {
        CMat {
            n: self.n,
            a: self.a.iter().map(|v| v * s).collect(),
        }
    }

    /// `self += s * other`
    #[inline]
    pub fn axpy(&mut self, s: f64, other: &CMat) {
        for (a, b) in self.a.iter_mut().zip(other.a.iter()) {
            *a += b * s;
        }
    }

    /// Maximum absolute row sum.
    pub fn norm_inf(&self) -> f64 {
        (0..self.n)
            .map(|i| (0..self.n).map(|j| self[(i, j)].norm()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    pub fn max_abs(&self) -> f64 {
        self.a.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }

    pub fn frobenius(&self) -> f64 {
        self.a.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn trace(&self) -> C64 {
        (0..self.n).map(|i| self[(i, i)]).sum()
    }

    pub fn is_zero(&self) -> bool {
        self.a.iter().all(|v| *v == ZERO)
    }

    /// ‖U*U − Id‖∞.
    pub fn unitarity_defect(&self) -> f64 {
        (&(&self.adjoint() * self) - &CMat::identity(self.n)).norm_inf()
    }

    /// ‖M + M*‖∞.
    pub fn skew_defect(&self) -> f64 {
        (self + &self.adjoint()).norm_inf()
    }

    /// Nearest unitary matrix (polar factor), for matrices already close to U(n).
    pub fn polar_unitary(&self) -> Self {
        if self.n == 1 {
            let z = self.a[0];
            return CMat::from_slice(1, &[z / z.norm()]);
        }
        // Newton–Schulz: X ← X (3I − X*X)/2, quadratically convergent near U(n).
        let id3 = CMat::scalar(self.n, C64::new(3.0, 0.0));
        let mut x = self.clone();
        for _ in 0..6 {
            let g = &x.adjoint() * &x;
            let next = (&x * &(&id3 - &g)).scale_re(0.5);
            let done = (&next - &x).max_abs() < 1e-16;
            x = next;
            if done {
                break;
            }
        }
        x
    }

    #[inline]
    pub fn mul_vec(&self, v: &[C64], out: &mut [C64]) {
        let n = self.n;
        for i in 0..n {
            let mut s = ZERO;
            for j in 0..n {
                s += self.a[i * n + j] * v[j];
            }
            out[i] = s;
        }
    }

    /// Adds `self * v` into `out`.
    #[inline]
    pub fn mul_vec_acc(&self, v: &[C64], out: &mut [C64]) {
        let n = self.n;
        for i in 0..n {
            let mut s = ZERO;
            for j in 0..n {
                s += self.a[i * n + j] * v[j];
            }
            out[i] += s;
        }
    }

    /// Adds `self^H * v` into `out`.
    #[inline]
    pub fn adj_mul_vec_acc(&self, v: &[C64], out: &mut [C64]) {
        let n = self.n;
        for j in 0..n {
            let mut s = ZERO;
            for i in 0..n {
                s += self.a[i * n + j].conj() * v[i];
            }
            out[j] += s;
        }
    }

    /// Matrix exponential by scaling and squaring with a Taylor kernel.
    pub fn exp(&self) -> Self {
        let norm = self.norm_inf();
        let mut k = 0;
        while norm / f64::powi(2.0, k) > 0.25 {
            k += 1;
        }
        let a = self.scale_re(f64::powi(2.0, -k));
        let mut term = CMat::identity(self.n);
        let mut sum = term.clone();
        for j in 1..20 {
            term = (&term * &a).scale_re(1.0 / j as f64);
            sum = &sum + &term;
        }
        for _ in 0..k {
            sum = &sum * &sum;
        }
        sum
    }
}

impl Index<(usize, usize)> for CMat {
    type Output = C64;
    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &C64 {
        &self.a[i * self.n + j]
    }
}

impl IndexMut<(usize, usize)> for CMat {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut C64 {
        &mut self.a[i * self.n + j]
    }
}

impl Mul for &CMat {
    type Output = CMat;
    #[inline]
    fn mul(self, rhs: &CMat) -> CMat {
        let n = self.n;
        debug_assert_eq!(n, rhs.n);
        if n == 1 {
            return CMat::from_slice(1, &[self.a[0] * rhs.a[0]]);
        }
        let mut out = CMat::zeros(n);
        for i in 0..n {
            for k in 0..n {
                let a = self.a[i * n + k];
                for j in 0..n {
                    out.a[i * n + j] += a * rhs.a[k * n + j];
                }
            }
        }
        out
    }
}

impl Add for &CMat {
    type Output = CMat;
    #[inline]
    fn add(self, rhs: &CMat) -> CMat {
        CMat {
            n: self.n,
            a: self
                .a
                .iter()
                .zip(rhs.a.iter())
                .map(|(a, b)| a + b)
                .collect(),
        }
    }
}

impl Sub for &CMat {
    type Output = CMat;
    #[inline]
    fn sub(self, rhs: &CMat) -> CMat {
        CMat {
            n: self.n,
            a: self
                .a
                .iter()
                .zip(rhs.a.iter())
                .map(|(a, b)| a - b)
                .collect(),
        }
    }
}

impl Neg for &CMat {
    type Output = CMat;
    fn neg(self) -> CMat {
        CMat {
            n: self.n,
            a: self.a.iter().map(|a| -a).collect(),
        }
    }
}

impl AddAssign<&CMat> for CMat {
    #[inline]
    fn add_assign(&mut self, rhs: &CMat) {
        for (a, b) in self.a.iter_mut().zip(rhs.a.iter()) {
            *a += b;
        }
    }
}

/// Hermitian inner product Σ a_i conj(b_i).
#[inline]
pub fn dot(a: &[C64], b: &[C64]) -> C64 {
    a.iter().zip(b).map(|(x, y)| x * y.conj()).sum()
}

/// Σ w_i a_i conj(b_i) over blocks of size `n` with one weight per block.
pub fn weighted_dot(a: &[C64], b: &[C64], w: &[f64], n: usize) -> C64 {
    let mut s = ZERO;
    for (k, &wk) in w.iter().enumerate() {
        for c in 0..n {
            s += a[k * n + c] * b[k * n + c].conj() * wk;
        }
    }
    s
}

pub fn weighted_norm(a: &[C64], w: &[f64], n: usize) -> f64 {
    weighted_dot(a, a, w, n).re.max(0.0).sqrt()
}

pub fn norm2(a: &[C64]) -> f64 {
    a.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt()
}

pub fn max_abs(a: &[C64]) -> f64 {
    a.iter().map(|v| v.norm()).fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    #[test]
    fn exp_of_skew_is_unitary() {
        let s = CMat::from_rows(&[&[c(0.0, 0.7), c(0.3, -0.2)], &[c(-0.3, -0.2), c(0.0, -1.1)]]);
        assert!(s.skew_defect() < 1e-15);
        let u = s.exp();
        assert!(u.unitarity_defect() < 1e-13);
        // scalar check
        let e = CMat::scalar(1, c(0.0, 2.0)).exp();
        assert!((e[(0, 0)] - c(2f64.cos(), 2f64.sin())).norm() < 1e-14);
    }

    #[test]
    fn polar_projection_restores_unitarity() {
        let s = CMat::from_rows(&[&[c(0.0, 0.4), c(0.1, 0.5)], &[c(-0.1, 0.5), c(0.0, 0.2)]]);
        let mut u = s.exp();
        u[(0, 1)] += c(1e-7, -2e-7);
        u[(1, 1)] += c(3e-7, 0.0);
        assert!(u.unitarity_defect() > 1e-8);
        let p = u.polar_unitary();
        assert!(p.unitarity_defect() < 1e-14);
        assert!((&p - &u).max_abs() < 1e-6);
    }

    #[test]
    fn adjoint_products() {
        let a = CMat::from_rows(&[&[c(1.0, 2.0), c(0.0, 1.0)], &[c(3.0, 0.0), c(-1.0, 1.0)]]);
        let v = [c(0.5, -1.0), c(2.0, 0.25)];
        let w = [c(-1.0, 0.5), c(0.3, 0.2)];
        let mut av = [ZERO; 2];
        a.mul_vec(&v, &mut av);
        let mut ahw = [ZERO; 2];
        a.adj_mul_vec_acc(&w, &mut ahw);
        assert!((dot(&av, &w) - dot(&v, &ahw)).norm() < 1e-14);
    }
}
