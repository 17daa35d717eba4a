//! Discretizations: the masked spatial grid on the disk, the fiber angles, the
//! inward boundary grid (uniform s × Gauss–Legendre φ) and the full boundary
//! fiber grid.
//!
//! Spatial stencils that reach outside the disk read ghost nodes. Each ghost
//! value is a fixed linear combination of nearby disk nodes (a local
//! least-squares polynomial), so every grid operator stays an explicit linear
//! map of the disk values with an exact transpose.

use std::f64::consts::{FRAC_PI_2, PI, TAU};

use nalgebra::DMatrix;

use crate::linalg::{C64, ZERO};

const PAD: usize = 3;
const GHOST_DEGREE: usize = 5;
const GHOST_NEIGHBOURS: usize = 56;
/// (offset, weight·12h) of the fourth-order central first derivative.
const CENTRAL4: [(isize, f64); 4] = [(-2, 1.0), (-1, -8.0), (1, 8.0), (2, -1.0)];

/// Gauss–Legendre nodes and weights on [−1, 1].
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    for i in 0..n {
        let mut z = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, z);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * z * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            if n == 1 {
                p0 = 1.0;
                p1 = z;
            }
            dp = n as f64 * (z * p1 - p0) / (z * z - 1.0);
            let dz = p1 / dp;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        x[n - 1 - i] = z;
        w[n - 1 - i] = 2.0 / ((1.0 - z * z) * dp * dp);
    }
    (x, w)
}

/// Lagrange weights of `nodes` at `t`.
#[inline]
pub fn lagrange4(nodes: &[f64; 4], t: f64) -> [f64; 4] {
    let mut w = [1.0; 4];
    for i in 0..4 {
        for j in 0..4 {
            if i != j {
                w[i] *= (t - nodes[j]) / (nodes[i] - nodes[j]);
            }
        }
    }
    w
}

/// Cubic Lagrange weights on the uniform stencil {−1, 0, 1, 2} at fraction f ∈ [0, 1).
#[inline]
pub fn cubic_uniform(f: f64) -> [f64; 4] {
    [
        -f * (f - 1.0) * (f - 2.0) / 6.0,
        (f + 1.0) * (f - 1.0) * (f - 2.0) / 2.0,
        -(f + 1.0) * f * (f - 2.0) / 2.0,
        (f + 1.0) * f * (f - 1.0) / 6.0,
    ]
}

#[derive(Debug, Clone)]
struct Ghost {
    lin: usize,
    weights: Vec<(u32, f64)>,
}

/// N×N nodes on [−1, 1]², restricted to the closed disk.
#[derive(Debug, Clone)]
pub struct SpatialGrid {
    pub n: usize,
    pub h: f64,
    width: usize,
    /// Padded linear index of each disk node.
    lin: Vec<usize>,
    pub xy: Vec<[f64; 2]>,
    node_of: Vec<i32>,
    ghosts: Vec<Ghost>,
}

/// Interpolation stencil: padded base index and tensor weights.
#[derive(Debug, Clone, Copy)]
pub struct Stencil {
    base: usize,
    wx: [f64; 4],
    wy: [f64; 4],
}

impl SpatialGrid {
    pub fn new(n: usize) -> Self {
        let h = 2.0 / (n - 1) as f64;
        let width = n + 2 * PAD;
        let coord = |p: usize| -1.0 + (p as f64 - PAD as f64) * h;
        let mut lin = Vec::new();
        let mut xy = Vec::new();
        let mut node_of = vec![-1i32; width * width];
        for j in 0..width {
            for i in 0..width {
                let (x, y) = (coord(i), coord(j));
                if x * x + y * y <= 1.0 + 1e-12 {
                    node_of[j * width + i] = lin.len() as i32;
                    lin.push(j * width + i);
                    xy.push([x, y]);
                }
            }
        }
        let mut grid = SpatialGrid {
            n,
            h,
            width,
            lin,
            xy,
            node_of,
            ghosts: Vec::new(),
        };
        grid.build_ghosts();
        grid
    }

    fn coord(&self, p: usize) -> f64 {
        -1.0 + (p as f64 - PAD as f64) * self.h
    }

    fn build_ghosts(&mut self) {
        let w = self.width;
        let reach = 1.0 + 3.0 * self.h;
        let terms: Vec<(usize, usize)> = (0..=GHOST_DEGREE)
            .flat_map(|d| (0..=d).map(move |a| (d - a, a)))
            .collect();
        let mut ghosts = Vec::new();
        for j in 0..w {
            for i in 0..w {
                let l = j * w + i;
                if self.node_of[l] >= 0 {
                    continue;
                }
                let (gx, gy) = (self.coord(i), self.coord(j));
                if gx.hypot(gy) > reach {
                    continue;
                }
                let mut near: Vec<(f64, usize)> = self
                    .xy
                    .iter()
                    .enumerate()
                    .filter_map(|(k, p)| {
                        let d = (p[0] - gx).hypot(p[1] - gy);
                        (d < 10.0 * self.h).then_some((d, k))
                    })
                    .collect();
                near.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap().then(a.1.cmp(&b.1)));
                near.truncate(GHOST_NEIGHBOURS);
                let scale = near.last().map_or(self.h, |p| p.0);
                let v = DMatrix::from_fn(near.len(), terms.len(), |r, c| {
                    let p = self.xy[near[r].1];
                    let (u, t) = ((p[0] - gx) / scale, (p[1] - gy) / scale);
                    u.powi(terms[c].0 as i32) * t.powi(terms[c].1 as i32)
                });
                // value at the ghost is the constant coefficient: e₀ᵀ V⁺
                let svd = v.clone().svd(true, true);
                let pinv = svd.pseudo_inverse(1e-13).expect("svd with vectors");
                let weights = near
                    .iter()
                    .enumerate()
                    .map(|(r, &(_, k))| (k as u32, pinv[(0, r)]))
                    .collect();
                ghosts.push(Ghost { lin: l, weights });
            }
        }
        self.ghosts = ghosts;
    }

    pub fn len(&self) -> usize {
        self.lin.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lin.is_empty()
    }

    /// Trapezoid cell weight h² per node.
    pub fn cell_area(&self) -> f64 {
        self.h * self.h
    }

    /// Padded array with `nc` components per node, ghosts filled.
    pub fn extend(&self, vals: &[C64], nc: usize) -> Vec<C64> {
        let w = self.width;
        let mut ext = vec![ZERO; w * w * nc];
        for (k, &l) in self.lin.iter().enumerate() {
            ext[l * nc..(l + 1) * nc].copy_from_slice(&vals[k * nc..(k + 1) * nc]);
        }
        for g in &self.ghosts {
            for c in 0..nc {
                let mut s = ZERO;
                for &(k, wt) in &g.weights {
                    s += vals[k as usize * nc + c] * wt;
                }
                ext[g.lin * nc + c] = s;
            }
        }
        ext
    }

    /// Transpose of [`extend`](Self::extend).
    pub fn extend_adjoint(&self, ext: &[C64], nc: usize) -> Vec<C64> {
        let mut vals = vec![ZERO; self.len() * nc];
        for (k, &l) in self.lin.iter().enumerate() {
            vals[k * nc..(k + 1) * nc].copy_from_slice(&ext[l * nc..(l + 1) * nc]);
        }
        for g in &self.ghosts {
            for c in 0..nc {
                let e = ext[g.lin * nc + c];
                if e == ZERO {
                    continue;
                }
                for &(k, wt) in &g.weights {
                    vals[k as usize * nc + c] += e * wt;
                }
            }
        }
        vals
    }

    /// Fourth-order central derivatives (∂x, ∂y) at the disk nodes.
    pub fn gradient(&self, vals: &[C64], nc: usize) -> (Vec<C64>, Vec<C64>) {
        let ext = self.extend(vals, nc);
        self.gradient_ext(&ext, nc)
    }

    pub fn gradient_ext(&self, ext: &[C64], nc: usize) -> (Vec<C64>, Vec<C64>) {
        let w = self.width as isize;
        let inv = 1.0 / (12.0 * self.h);
        let mut dx = vec![ZERO; self.len() * nc];
        let mut dy = vec![ZERO; self.len() * nc];
        for (k, &l) in self.lin.iter().enumerate() {
            for c in 0..nc {
                let at = |o: isize| ext[(l as isize + o) as usize * nc + c];
                let (mut sx, mut sy) = (ZERO, ZERO);
                for &(o, cf) in &CENTRAL4 {
                    sx += at(o) * cf;
                    sy += at(o * w) * cf;
                }
                dx[k * nc + c] = sx * inv;
                dy[k * nc + c] = sy * inv;
            }
        }
        (dx, dy)
    }

    /// Transpose of [`gradient`](Self::gradient): returns Dxᵀ gx + Dyᵀ gy.
    pub fn gradient_adjoint(&self, gx: &[C64], gy: &[C64], nc: usize) -> Vec<C64> {
        let w = self.width as isize;
        let inv = 1.0 / (12.0 * self.h);
        let mut ext = vec![ZERO; self.padded_len() * nc];
        for (k, &l) in self.lin.iter().enumerate() {
            for c in 0..nc {
                let a = gx[k * nc + c] * inv;
                let b = gy[k * nc + c] * inv;
                for &(o, cf) in &CENTRAL4 {
                    ext[(l as isize + o) as usize * nc + c] += a * cf;
                    ext[(l as isize + o * w) as usize * nc + c] += b * cf;
                }
            }
        }
        self.extend_adjoint(&ext, nc)
    }

    /// Bicubic stencil at (x, y); the point must lie in the closed disk.
    #[inline]
    pub fn stencil(&self, x: f64, y: f64) -> Stencil {
        let fx = (x + 1.0) / self.h + PAD as f64;
        let fy = (y + 1.0) / self.h + PAD as f64;
        let ix = (fx.floor() as usize).clamp(1, self.width - 3);
        let iy = (fy.floor() as usize).clamp(1, self.width - 3);
        Stencil {
            base: (iy - 1) * self.width + (ix - 1),
            wx: cubic_uniform(fx - ix as f64),
            wy: cubic_uniform(fy - iy as f64),
        }
    }

    #[inline]
    pub fn interp(&self, ext: &[C64], nc: usize, st: &Stencil, out: &mut [C64]) {
        out[..nc].fill(ZERO);
        for b in 0..4 {
            let row = st.base + b * self.width;
            for a in 0..4 {
                let w = st.wx[a] * st.wy[b];
                let off = (row + a) * nc;
                for c in 0..nc {
                    out[c] += ext[off + c] * w;
                }
            }
        }
    }

    /// Adds the transpose of [`interp`](Self::interp) applied to `v` into `ext`.
    #[inline]
    pub fn interp_adjoint(&self, ext: &mut [C64], nc: usize, st: &Stencil, v: &[C64]) {
        for b in 0..4 {
            let row = st.base + b * self.width;
            for a in 0..4 {
                let w = st.wx[a] * st.wy[b];
                let off = (row + a) * nc;
                for c in 0..nc {
                    ext[off + c] += v[c] * w;
                }
            }
        }
    }

    pub fn padded_len(&self) -> usize {
        self.width * self.width
    }

    /// Samples `f` at the disk nodes.
    pub fn sample(&self, nc: usize, f: impl Fn(f64, f64, &mut [C64])) -> Vec<C64> {
        let mut out = vec![ZERO; self.len() * nc];
        for (k, p) in self.xy.iter().enumerate() {
            f(p[0], p[1], &mut out[k * nc..(k + 1) * nc]);
        }
        out
    }
}

/// Uniform fiber angles θ_l = 2πl/N.
pub fn fiber_angles(ntheta: usize) -> Vec<f64> {
    (0..ntheta)
        .map(|l| TAU * l as f64 / ntheta as f64)
        .collect()
}

/// Stencil on the inward boundary grid.
#[derive(Debug, Clone, Copy)]
pub struct BStencil {
    pub i: [u16; 4],
    pub wi: [f64; 4],
    pub j0: u16,
    pub wj: [f64; 4],
}

/// Inward boundary grid: s_i = 2πi/N_s and Gauss–Legendre φ_j in (−π/2, π/2).
#[derive(Debug, Clone)]
pub struct BoundaryGrid {
    pub ns: usize,
    pub nphi: usize,
    pub s: Vec<f64>,
    pub phi: Vec<f64>,
    /// Gauss weights in φ (sum π).
    pub wphi: Vec<f64>,
}

impl BoundaryGrid {
    pub fn new(ns: usize, nphi: usize) -> Self {
        let (x, w) = gauss_legendre(nphi);
        BoundaryGrid {
            ns,
            nphi,
            s: (0..ns).map(|i| TAU * i as f64 / ns as f64).collect(),
            phi: x.iter().map(|t| t * FRAC_PI_2).collect(),
            wphi: w.iter().map(|v| v * FRAC_PI_2).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.ns * self.nphi
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    #[inline]
    pub fn index(&self, i: usize, j: usize) -> usize {
        i * self.nphi + j
    }

    pub fn ds(&self) -> f64 {
        TAU / self.ns as f64
    }

    /// ∂₊ points in storage order.
    pub fn points(&self) -> impl Iterator<Item = (usize, f64, f64)> + '_ {
        (0..self.ns).flat_map(move |i| {
            (0..self.nphi).map(move |j| (self.index(i, j), self.s[i], self.phi[j]))
        })
    }

    /// μ quadrature weights cos φ e^{σ(s)} Δs w_j, given e^{σ} per s node.
    pub fn mu_weights(&self, esig: &[f64]) -> Vec<f64> {
        let ds = self.ds();
        let mut w = vec![0.0; self.len()];
        for i in 0..self.ns {
            for j in 0..self.nphi {
                w[self.index(i, j)] = self.phi[j].cos() * esig[i] * ds * self.wphi[j];
            }
        }
        w
    }

    /// Periodic cubic in s, cubic Lagrange on the Gauss nodes in φ.
    pub fn stencil(&self, s: f64, phi: f64) -> BStencil {
        let ds = self.ds();
        let fs = s.rem_euclid(TAU) / ds;
        let i0 = fs.floor();
        let f = fs - i0;
        let i0 = i0 as isize;
        let ns = self.ns as isize;
        let i = [
            (i0 - 1).rem_euclid(ns) as u16,
            i0.rem_euclid(ns) as u16,
            (i0 + 1).rem_euclid(ns) as u16,
            (i0 + 2).rem_euclid(ns) as u16,
        ];
        let wi = cubic_uniform(f);
        let k = self.phi.partition_point(|&p| p <= phi);
        let j0 = (k as isize - 2).clamp(0, self.nphi as isize - 4) as usize;
        let nodes = [
            self.phi[j0],
            self.phi[j0 + 1],
            self.phi[j0 + 2],
            self.phi[j0 + 3],
        ];
        BStencil {
            i,
            wi,
            j0: j0 as u16,
            wj: lagrange4(&nodes, phi),
        }
    }

    #[inline]
    pub fn interp(&self, vals: &[C64], nc: usize, st: &BStencil, out: &mut [C64]) {
        out[..nc].fill(ZERO);
        for a in 0..4 {
            for b in 0..4 {
                let w = st.wi[a] * st.wj[b];
                let off = self.index(st.i[a] as usize, st.j0 as usize + b) * nc;
                for c in 0..nc {
                    out[c] += vals[off + c] * w;
                }
            }
        }
    }

    #[inline]
    pub fn interp_adjoint(&self, acc: &mut [C64], nc: usize, st: &BStencil, v: &[C64]) {
        for a in 0..4 {
            for b in 0..4 {
                let w = st.wi[a] * st.wj[b];
                let off = self.index(st.i[a] as usize, st.j0 as usize + b) * nc;
                for c in 0..nc {
                    acc[off + c] += v[c] * w;
                }
            }
        }
    }
}

/// Full fiber over the boundary: ψ_j = −π + (j + ½)2π/N measured from the
/// inward normal, so θ = s + π + ψ. Never hits exact tangency.
pub fn boundary_fiber_angles(n: usize) -> Vec<f64> {
    (0..n)
        .map(|j| -PI + (j as f64 + 0.5) * TAU / n as f64)
        .collect()
}

/// Polar product rule on the unit disk: Gauss–Legendre in r (weight r dr),
/// uniform in angle. Exact for polynomials of moderate degree.
#[derive(Debug, Clone)]
pub struct DiskQuadrature {
    pub pts: Vec<[f64; 2]>,
    /// Euclidean area weights, summing to π.
    pub w: Vec<f64>,
}

impl DiskQuadrature {
    pub fn new(nr: usize, nangle: usize) -> Self {
        let (x, wx) = gauss_legendre(nr);
        let mut pts = Vec::with_capacity(nr * nangle);
        let mut w = Vec::with_capacity(nr * nangle);
        let da = TAU / nangle as f64;
        for (t, wt) in x.iter().zip(&wx) {
            let r = 0.5 * (t + 1.0);
            for k in 0..nangle {
                let a = (k as f64 + 0.5) * da;
                pts.push([r * a.cos(), r * a.sin()]);
                w.push(0.5 * wt * r * da);
            }
        }
        DiskQuadrature { pts, w }
    }

    pub fn len(&self) -> usize {
        self.pts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pts.is_empty()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gauss_legendre_integrates_polynomials() {
        let (x, w) = gauss_legendre(8);
        let total: f64 = w.iter().sum();
        assert!((total - 2.0).abs() < 1e-14);
        let i14: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(14)).sum();
        assert!((i14 - 2.0 / 15.0).abs() < 1e-14);
        assert!(x.windows(2).all(|p| p[0] < p[1]));
    }

    fn analytic(x: f64, y: f64) -> C64 {
        C64::new(
            (1.3 * x - 0.7 * y).sin() + 0.5 * x * y,
            (0.8 * x + 1.1 * y).cos(),
        )
    }

    #[test]
    fn ghost_extension_and_gradient_are_fourth_order() {
        let mut errs = Vec::new();
        for n in [32, 64] {
            let g = SpatialGrid::new(n);
            let vals = g.sample(1, |x, y, o| o[0] = analytic(x, y));
            let (dx, _) = g.gradient(&vals, 1);
            let mut e: f64 = 0.0;
            for (k, p) in g.xy.iter().enumerate() {
                let (x, y) = (p[0], p[1]);
                let exact = C64::new(
                    1.3 * (1.3 * x - 0.7 * y).cos() + 0.5 * y,
                    -0.8 * (0.8 * x + 1.1 * y).sin(),
                );
                e = e.max((dx[k] - exact).norm());
            }
            errs.push(e);
        }
        assert!(errs[1] < 5e-6, "{errs:?}");
        assert!(errs[0] / errs[1] > 10.0, "{errs:?}");
    }

    #[test]
    fn interpolation_near_boundary() {
        let g = SpatialGrid::new(64);
        let vals = g.sample(1, |x, y, o| o[0] = analytic(x, y));
        let ext = g.extend(&vals, 1);
        let mut e: f64 = 0.0;
        for k in 0..200 {
            let a = k as f64 * 0.0314;
            let r = 1.0 - 0.37 * (k % 7) as f64 / 7.0;
            let (x, y) = (r * a.cos(), r * a.sin());
            let mut out = [ZERO];
            g.interp(&ext, 1, &g.stencil(x, y), &mut out);
            e = e.max((out[0] - analytic(x, y)).norm());
        }
        assert!(e < 1e-6, "{e}");
    }

    #[test]
    fn transposes_are_exact() {
        let g = SpatialGrid::new(20);
        let m = g.len();
        let u: Vec<C64> = (0..m)
            .map(|k| C64::new((k as f64).sin(), (k as f64 * 0.3).cos()))
            .collect();
        let vx: Vec<C64> = (0..m)
            .map(|k| C64::new((k as f64 * 0.7).cos(), 0.2))
            .collect();
        let vy: Vec<C64> = (0..m)
            .map(|k| C64::new(0.1, (k as f64 * 1.7).sin()))
            .collect();
        let (dx, dy) = g.gradient(&u, 1);
        let lhs = crate::linalg::dot(&dx, &vx) + crate::linalg::dot(&dy, &vy);
        let adj = g.gradient_adjoint(&vx, &vy, 1);
        let rhs = crate::linalg::dot(&u, &adj);
        assert!((lhs - rhs).norm() < 1e-10 * lhs.norm().max(1.0));

        let ext = g.extend(&u, 1);
        let st = g.stencil(0.93, -0.31);
        let mut out = [ZERO];
        g.interp(&ext, 1, &st, &mut out);
        let v = [C64::new(0.4, -1.2)];
        let mut acc = vec![ZERO; g.padded_len()];
        g.interp_adjoint(&mut acc, 1, &st, &v);
        let back = g.extend_adjoint(&acc, 1);
        let a = out[0] * v[0].conj();
        let b = crate::linalg::dot(&u, &back);
        assert!((a - b).norm() < 1e-12);
    }

    #[test]
    fn boundary_interpolation() {
        let b = BoundaryGrid::new(64, 32);
        let f = |s: f64, p: f64| C64::new((2.0 * s).cos() * p.sin() + 0.3 * p * p, (s - p).sin());
        let vals: Vec<C64> = b.points().map(|(_, s, p)| f(s, p)).collect();
        let mut e: f64 = 0.0;
        for k in 0..100 {
            let s = k as f64 * 0.0731;
            let p = -1.5 + 3.0 * (k as f64 / 99.0);
            let mut out = [ZERO];
            b.interp(&vals, 1, &b.stencil(s, p), &mut out);
            e = e.max((out[0] - f(s, p)).norm());
        }
        assert!(e < 1e-4, "{e}");
        let w = b.mu_weights(&vec![1.0; 64]);
        // ∫∫ cos φ dφ ds = 4π
        assert!((w.iter().sum::<f64>() - 4.0 * PI).abs() < 1e-12);
    }

    #[test]
    fn disk_quadrature_moments() {
        let q = DiskQuadrature::new(12, 32);
        let total: f64 = q.w.iter().sum();
        assert!((total - PI).abs() < 1e-13);
        let r4: f64 = q
            .pts
            .iter()
            .zip(&q.w)
            .map(|(p, w)| (p[0] * p[0] + p[1] * p[1]).powi(2) * w)
            .sum();
        assert!((r4 - PI / 3.0).abs() < 1e-13);
        let x2y2: f64 = q
            .pts
            .iter()
            .zip(&q.w)
            .map(|(p, w)| p[0] * p[0] * p[1] * p[1] * w)
            .sum();
        assert!((x2y2 - PI / 24.0).abs() < 1e-13);
    }
}
