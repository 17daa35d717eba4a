//! Conjugate gradients on the normal equations (CGLS form).
//!
//! Minimizes ‖Lx − b‖ in a weighted norm Σ w_r|·|², with x measured in Σ w_d|·|².
//! The iteration runs on B = W_r^{1/2} L W_d^{−1/2}, which needs only L and its
//! plain conjugate transpose.

use serde::Serialize;

use crate::error::Result;
use crate::linalg::{C64, ZERO};

/// A linear map with its conjugate transpose in the unweighted inner products.
pub trait LinearMap: Sync {
    fn dim_in(&self) -> usize;
    fn dim_out(&self) -> usize;
    fn apply(&self, x: &[C64]) -> Result<Vec<C64>>;
    fn apply_adjoint(&self, y: &[C64]) -> Result<Vec<C64>>;
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct CgneOptions {
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for CgneOptions {
    fn default() -> Self {
        CgneOptions {
            tol: 1e-3,
            max_iter: 500,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct CgneReport {
    /// Final relative weighted residual ‖Lx − b‖/‖b‖.
    pub residual: f64,
    pub iterations: usize,
    pub converged: bool,
    pub history: Vec<f64>,
}

fn norm2(v: &[C64]) -> f64 {
    v.iter().map(C64::norm_sqr).sum()
}

/// Returns the unweighted solution x and the report.
pub fn cgne(
    l: &dyn LinearMap,
    b: &[C64],
    wr: &[f64],
    wd: &[f64],
    opts: CgneOptions,
) -> Result<(Vec<C64>, CgneReport)> {
    let nin = l.dim_in();
    let sr: Vec<f64> = wr.iter().map(|w| w.sqrt()).collect();
    let sd: Vec<f64> = wd.iter().map(|w| 1.0 / w.sqrt()).collect();
    let bmap = |y: &[C64]| -> Result<Vec<C64>> {
        let x: Vec<C64> = y.iter().zip(&sd).map(|(v, s)| v * s).collect();
        let mut out = l.apply(&x)?;
        out.iter_mut().zip(&sr).for_each(|(v, s)| *v *= s);
        Ok(out)
    };
    let bmap_t = |r: &[C64]| -> Result<Vec<C64>> {
        let z: Vec<C64> = r.iter().zip(&sr).map(|(v, s)| v * s).collect();
        let mut out = l.apply_adjoint(&z)?;
        out.iter_mut().zip(&sd).for_each(|(v, s)| *v *= s);
        Ok(out)
    };
    let mut r: Vec<C64> = b.iter().zip(&sr).map(|(v, s)| v * s).collect();
    let bnorm = norm2(&r).sqrt();
    let mut y = vec![ZERO; nin];
    let mut history = vec![1.0];
    if bnorm == 0.0 {
        return Ok((
            y,
            CgneReport {
                residual: 0.0,
                iterations: 0,
                converged: true,
                history: vec![0.0],
            },
        ));
    }
    let mut s = bmap_t(&r)?;
    let mut p = s.clone();
    let mut gamma = norm2(&s);
    let mut it = 0;
    let mut rel = 1.0;
    while it < opts.max_iter && rel > opts.tol && gamma > 0.0 {
        let q = bmap(&p)?;
        let qq = norm2(&q);
        if qq == 0.0 {
            break;
        }
        let alpha = gamma / qq;
        y.iter_mut().zip(&p).for_each(|(a, b)| *a += b * alpha);
        r.iter_mut().zip(&q).for_each(|(a, b)| *a -= b * alpha);
        s = bmap_t(&r)?;
        let g2 = norm2(&s);
        let beta = g2 / gamma;
        gamma = g2;
        p.iter_mut().zip(&s).for_each(|(a, b)| *a = b + *a * beta);
        it += 1;
        rel = norm2(&r).sqrt() / bnorm;
        history.push(rel);
    }
    let x: Vec<C64> = y.iter().zip(&sd).map(|(v, s)| v * s).collect();
    Ok((
        x,
        CgneReport {
            residual: rel,
            iterations: it,
            converged: rel <= opts.tol,
            history,
        },
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    struct Dense {
        m: usize,
        n: usize,
        a: Vec<C64>,
    }

    impl LinearMap for Dense {
        fn dim_in(&self) -> usize {
            self.n
        }
        fn dim_out(&self) -> usize {
            self.m
        }
        fn apply(&self, x: &[C64]) -> Result<Vec<C64>> {
            Ok((0..self.m)
                .map(|i| (0..self.n).map(|j| self.a[i * self.n + j] * x[j]).sum())
                .collect())
        }
        fn apply_adjoint(&self, y: &[C64]) -> Result<Vec<C64>> {
            Ok((0..self.n)
                .map(|j| {
                    (0..self.m)
                        .map(|i| self.a[i * self.n + j].conj() * y[i])
                        .sum()
                })
                .collect())
        }
    }

    #[test]
    fn solves_consistent_and_reports_inconsistent_systems() {
        let a = vec![
            C64::new(2.0, 0.0),
            C64::new(0.0, 1.0),
            C64::new(1.0, 0.0),
            C64::new(3.0, 0.0),
            C64::new(0.0, 0.0),
            C64::new(1.0, -1.0),
        ];
        let l = Dense { m: 3, n: 2, a };
        let x0 = [C64::new(1.0, 2.0), C64::new(-0.5, 0.3)];
        let b = l.apply(&x0).unwrap();
        let (x, rep) = cgne(
            &l,
            &b,
            &[1.0, 2.0, 0.5],
            &[3.0, 1.0],
            CgneOptions {
                tol: 1e-12,
                max_iter: 10,
            },
        )
        .unwrap();
        assert!(rep.converged);
        assert!((x[0] - x0[0]).norm() < 1e-10 && (x[1] - x0[1]).norm() < 1e-10);
        // b far from the range: CGNE stalls at the least-squares residual
        let b2 = vec![C64::new(1.0, 0.0), C64::new(-2.0, 0.0), C64::new(5.0, 1.0)];
        let (_, rep) = cgne(
            &l,
            &b2,
            &[1.0; 3],
            &[1.0; 2],
            CgneOptions {
                tol: 1e-12,
                max_iter: 10,
            },
        )
        .unwrap();
        assert!(!rep.converged && rep.residual > 0.1);
        let (x, rep) = cgne(&l, &[ZERO; 3], &[1.0; 3], &[1.0; 2], CgneOptions::default()).unwrap();
        assert!(rep.converged && x.iter().all(|v| *v == ZERO));
    }
}
