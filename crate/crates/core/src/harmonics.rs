//! Fiberwise Fourier analysis on SM: modes, the Hilbert transform, the
//! Guillemin–Kazhdan operators η± and their twisted versions μ±, and the
//! commutator identity [H, G_μ + A + Φ]u = (X⊥ + ⋆A)u₀ + ((X⊥ + ⋆A)u)₀.
//!
//! Mode normalization: û_k = (1/2π)∫ u e^{−ikθ} dθ, so u = Σ û_k e^{ikθ}.

use std::f64::consts::TAU;
use std::sync::Arc;

use rustfft::{Fft, FftPlanner};

use crate::error::{MagrayError, Result};
use crate::functions::{BandFn, SmFunction};
use crate::grid::{fiber_angles, SpatialGrid};
use crate::linalg::{CMat, C64, I, ZERO};
use crate::scene::Scene;

/// C^n values on (disk nodes) × (uniform fiber angles), layout [node][θ][comp].
#[derive(Debug, Clone, PartialEq)]
pub struct FiberGridFn {
    pub nodes: usize,
    pub ntheta: usize,
    pub nc: usize,
    pub data: Vec<C64>,
}

/// Fourier coefficients, layout [node][k index][comp] with k in FFT order.
#[derive(Debug, Clone)]
pub struct FiberModes {
    pub nodes: usize,
    pub ntheta: usize,
    pub nc: usize,
    pub data: Vec<C64>,
}

/// k for FFT index `idx`, in [−N/2, N/2).
#[inline]
pub fn mode_of_index(idx: usize, n: usize) -> i32 {
    if idx < n / 2 {
        idx as i32
    } else {
        idx as i32 - n as i32
    }
}

#[inline]
pub fn index_of_mode(k: i32, n: usize) -> usize {
    k.rem_euclid(n as i32) as usize
}

struct Plans {
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
}

fn plans(n: usize) -> Plans {
    let mut p = FftPlanner::new();
    Plans {
        fwd: p.plan_fft_forward(n),
        inv: p.plan_fft_inverse(n),
    }
}

/// Applies `f` to every fiber line (fixed node and component) in place.
fn for_each_line(
    data: &mut [C64],
    nodes: usize,
    nt: usize,
    nc: usize,
    mut f: impl FnMut(&mut [C64]),
) {
    let mut buf = vec![ZERO; nt];
    for node in 0..nodes {
        let base = node * nt * nc;
        for c in 0..nc {
            for l in 0..nt {
                buf[l] = data[base + l * nc + c];
            }
            f(&mut buf);
            for l in 0..nt {
                data[base + l * nc + c] = buf[l];
            }
        }
    }
}

impl FiberGridFn {
    pub fn zeros(nodes: usize, ntheta: usize, nc: usize) -> Self {
        FiberGridFn {
            nodes,
            ntheta,
            nc,
            data: vec![ZERO; nodes * ntheta * nc],
        }
    }

    /// Samples an SM function at the grid nodes and angles 2πl/N.
    pub fn sample(grid: &SpatialGrid, ntheta: usize, f: &dyn SmFunction) -> Self {
        let nc = f.rank();
        let th = fiber_angles(ntheta);
        let mut out = Self::zeros(grid.len(), ntheta, nc);
        for (k, p) in grid.xy.iter().enumerate() {
            for (l, &t) in th.iter().enumerate() {
                let o = (k * ntheta + l) * nc;
                f.eval(p[0], p[1], t, &mut out.data[o..o + nc]);
            }
        }
        out
    }

    #[inline]
    pub fn at(&self, node: usize, l: usize) -> &[C64] {
        let o = (node * self.ntheta + l) * self.nc;
        &self.data[o..o + self.nc]
    }

    #[inline]
    pub fn at_mut(&mut self, node: usize, l: usize) -> &mut [C64] {
        let o = (node * self.ntheta + l) * self.nc;
        &mut self.data[o..o + self.nc]
    }

    pub fn modes(&self) -> FiberModes {
        let p = plans(self.ntheta);
        let mut data = self.data.clone();
        let s = 1.0 / self.ntheta as f64;
        for_each_line(&mut data, self.nodes, self.ntheta, self.nc, |b| {
            p.fwd.process(b);
            b.iter_mut().for_each(|v| *v *= s);
        });
        FiberModes {
            nodes: self.nodes,
            ntheta: self.ntheta,
            nc: self.nc,
            data,
        }
    }

    /// Multiplies mode k by m(k) for every k.
    pub fn mode_multiplier(&self, m: impl Fn(i32) -> C64) -> Self {
        let mut modes = self.modes();
        let nt = self.ntheta;
        for node in 0..self.nodes {
            for idx in 0..nt {
                let f = m(mode_of_index(idx, nt));
                for c in 0..self.nc {
                    modes.data[(node * nt + idx) * self.nc + c] *= f;
                }
            }
        }
        modes.synthesize()
    }

    /// H u: mode k times −sgn(k) i.
    pub fn hilbert(&self) -> Self {
        self.mode_multiplier(|k| -I * (k.signum() as f64))
    }

    /// Single-mode part u_k e^{ikθ}.
    pub fn project(&self, k: i32) -> Self {
        self.mode_multiplier(|j| if j == k { C64::new(1.0, 0.0) } else { ZERO })
    }

    /// Spectral ∂θ.
    pub fn d_theta(&self) -> Self {
        let nt = self.ntheta as i32;
        self.mode_multiplier(|k| {
            if k == -nt / 2 {
                ZERO
            } else {
                C64::new(0.0, k as f64)
            }
        })
    }

    /// max over nodes and components of |Σ|û_k|² − (1/N)Σ|u|²|, relative to the node energy.
    pub fn parseval_defect(&self) -> f64 {
        let m = self.modes();
        let mut worst: f64 = 0.0;
        for node in 0..self.nodes {
            for c in 0..self.nc {
                let mut a = 0.0;
                let mut b = 0.0;
                for l in 0..self.ntheta {
                    let o = (node * self.ntheta + l) * self.nc + c;
                    a += m.data[o].norm_sqr();
                    b += self.data[o].norm_sqr();
                }
                b /= self.ntheta as f64;
                worst = worst.max((a - b).abs() / b.max(1e-300));
            }
        }
        worst
    }

    /// Errors when content above |k| = N/2 − 1 − `margin` is not negligible.
    pub fn check_band(&self, margin: usize) -> Result<()> {
        let m = self.modes();
        let limit = self.ntheta / 2 - 1 - margin;
        let mut max_all: f64 = 0.0;
        let mut max_out: f64 = 0.0;
        let mut band = 0usize;
        for node in 0..self.nodes {
            for idx in 0..self.ntheta {
                let k = mode_of_index(idx, self.ntheta).unsigned_abs() as usize;
                for c in 0..self.nc {
                    let v = m.data[(node * self.ntheta + idx) * self.nc + c].norm();
                    max_all = max_all.max(v);
                    if k > limit {
                        max_out = max_out.max(v);
                        if v > 1e-12 {
                            band = band.max(k);
                        }
                    }
                }
            }
        }
        if max_out > 1e-11 * max_all.max(1e-300) {
            return Err(MagrayError::BandLimitExceeded { band, limit });
        }
        Ok(())
    }

    pub fn axpy(&mut self, a: C64, other: &FiberGridFn) {
        for (u, v) in self.data.iter_mut().zip(&other.data) {
            *u += v * a;
        }
    }

    pub fn max_abs(&self) -> f64 {
        crate::linalg::max_abs(&self.data)
    }

    /// Values at one fiber angle, layout [node][comp].
    fn slice_theta(&self, l: usize) -> Vec<C64> {
        let mut out = vec![ZERO; self.nodes * self.nc];
        for node in 0..self.nodes {
            out[node * self.nc..(node + 1) * self.nc].copy_from_slice(self.at(node, l));
        }
        out
    }

    /// Spatial gradient at every fiber angle.
    pub fn gradient(&self, grid: &SpatialGrid) -> (FiberGridFn, FiberGridFn) {
        let mut gx = Self::zeros(self.nodes, self.ntheta, self.nc);
        let mut gy = gx.clone();
        for l in 0..self.ntheta {
            let (dx, dy) = grid.gradient(&self.slice_theta(l), self.nc);
            for node in 0..self.nodes {
                let r = node * self.nc..(node + 1) * self.nc;
                gx.at_mut(node, l).copy_from_slice(&dx[r.clone()]);
                gy.at_mut(node, l).copy_from_slice(&dy[r]);
            }
        }
        (gx, gy)
    }
}

impl FiberModes {
    #[inline]
    pub fn mode(&self, node: usize, k: i32) -> &[C64] {
        let o = (node * self.ntheta + index_of_mode(k, self.ntheta)) * self.nc;
        &self.data[o..o + self.nc]
    }

    pub fn synthesize(mut self) -> FiberGridFn {
        let p = plans(self.ntheta);
        for_each_line(&mut self.data, self.nodes, self.ntheta, self.nc, |b| {
            p.inv.process(b)
        });
        FiberGridFn {
            nodes: self.nodes,
            ntheta: self.ntheta,
            nc: self.nc,
            data: self.data,
        }
    }

    /// Mode k as a function on the disk, layout [node][comp].
    pub fn mode_field(&self, k: i32) -> Vec<C64> {
        let mut out = vec![ZERO; self.nodes * self.nc];
        for node in 0..self.nodes {
            out[node * self.nc..(node + 1) * self.nc].copy_from_slice(self.mode(node, k));
        }
        out
    }
}

/// Frame derivatives of a sampled function: (Xu, X⊥u) with spectral ∂θ.
pub fn frame_derivatives(
    scene: &Scene,
    grid: &SpatialGrid,
    u: &FiberGridFn,
) -> (FiberGridFn, FiberGridFn) {
    let (gx, gy) = u.gradient(grid);
    let gt = u.d_theta();
    let th = fiber_angles(u.ntheta);
    let mut xu = FiberGridFn::zeros(u.nodes, u.ntheta, u.nc);
    let mut xp = xu.clone();
    for (node, p) in grid.xy.iter().enumerate() {
        let m = scene.metric(p[0], p[1]);
        let e = m.emsig;
        for (l, &t) in th.iter().enumerate() {
            let (s, c) = t.sin_cos();
            let (a, b, g) = (gx.at(node, l), gy.at(node, l), gt.at(node, l));
            let cx = e * (m.sy * c - m.sx * s);
            let cp = e * (m.sx * c + m.sy * s);
            for i in 0..u.nc {
                xu.at_mut(node, l)[i] = (a[i] * c + b[i] * s) * e + g[i] * cx;
                xp.at_mut(node, l)[i] = (a[i] * s - b[i] * c) * e + g[i] * cp;
            }
        }
    }
    (xu, xp)
}

/// A_{±1}(x, θ) = ½ e^{−σ}(A_x ∓ iA_y) e^{±iθ}.
fn connection_mode(scene: &Scene, x: f64, y: f64, theta: f64, sign: f64) -> CMat {
    let e = (-scene.sigma(x, y)).exp();
    let mut m = scene.ax(x, y);
    let ay = scene.ay(x, y).scale(C64::new(0.0, -sign));
    m += &ay;
    m.scale(C64::from_polar(0.5 * e, sign * theta))
}

#[derive(Debug, Clone)]
pub struct GkImages {
    pub eta_plus: FiberGridFn,
    pub eta_minus: FiberGridFn,
    pub mu_plus: FiberGridFn,
    pub mu_minus: FiberGridFn,
}

/// η± = ½(X ± iX⊥) and μ± = η± + A_{±1}.
pub fn gk_operators(scene: &Scene, grid: &SpatialGrid, u: &FiberGridFn) -> Result<GkImages> {
    u.check_band(1)?;
    let (xu, xp) = frame_derivatives(scene, grid, u);
    let mut eta_plus = xu.clone();
    eta_plus.axpy(I, &xp);
    eta_plus.data.iter_mut().for_each(|v| *v *= 0.5);
    let mut eta_minus = xu;
    eta_minus.axpy(-I, &xp);
    eta_minus.data.iter_mut().for_each(|v| *v *= 0.5);
    let mut mu_plus = eta_plus.clone();
    let mut mu_minus = eta_minus.clone();
    if scene.has_connection() {
        let th = fiber_angles(u.ntheta);
        for (node, p) in grid.xy.iter().enumerate() {
            for (l, &t) in th.iter().enumerate() {
                let v = u.at(node, l).to_vec();
                connection_mode(scene, p[0], p[1], t, 1.0).mul_vec_acc(&v, mu_plus.at_mut(node, l));
                connection_mode(scene, p[0], p[1], t, -1.0)
                    .mul_vec_acc(&v, mu_minus.at_mut(node, l));
            }
        }
    }
    Ok(GkImages {
        eta_plus,
        eta_minus,
        mu_plus,
        mu_minus,
    })
}

/// η₊ on one mode: e^{−σ}e^{i(k+1)θ}[∂z û − k(∂zσ)û]; η₋: e^{−σ}e^{i(k−1)θ}[∂z̄ û + k(∂z̄σ)û].
pub fn eta_on_mode(
    scene: &Scene,
    grid: &SpatialGrid,
    uk: &[C64],
    nc: usize,
    k: i32,
    plus: bool,
) -> Vec<C64> {
    let (dx, dy) = grid.gradient(uk, nc);
    let mut out = vec![ZERO; uk.len()];
    let sg = if plus { 1.0 } else { -1.0 };
    for (node, p) in grid.xy.iter().enumerate() {
        let m = scene.metric(p[0], p[1]);
        let dsig = C64::new(0.5 * m.sx, -0.5 * sg * m.sy);
        for c in 0..nc {
            let i = node * nc + c;
            let dz = (dx[i] - I * sg * dy[i]) * 0.5;
            out[i] = (dz - dsig * uk[i] * (sg * k as f64)) * m.emsig;
        }
    }
    out
}

/// Largest relative content of η±u_k outside modes k ± 1, over the modes of `u`.
pub fn eta_leakage(scene: &Scene, grid: &SpatialGrid, u: &FiberGridFn) -> Result<f64> {
    let modes = u.modes();
    let nt = u.ntheta as i32;
    let mut worst: f64 = 0.0;
    for k in -nt / 2 + 2..nt / 2 - 1 {
        if crate::linalg::max_abs(&modes.mode_field(k)) < 1e-14 {
            continue;
        }
        let uk = u.project(k);
        let g = gk_operators(scene, grid, &uk)?;
        for (img, target) in [(&g.eta_plus, k + 1), (&g.eta_minus, k - 1)] {
            let m = img.modes();
            let mut inside = 0.0;
            let mut outside = 0.0;
            for node in 0..u.nodes {
                for idx in 0..u.ntheta {
                    let e: f64 = m.data[(node * u.ntheta + idx) * u.nc..][..u.nc]
                        .iter()
                        .map(|v| v.norm_sqr())
                        .sum();
                    if mode_of_index(idx, u.ntheta) == target {
                        inside += e;
                    } else {
                        outside += e;
                    }
                }
            }
            worst = worst.max((outside / inside.max(1e-300)).sqrt());
        }
    }
    Ok(worst)
}

/// (G_μ + A + Φ)u on sampled data: X by finite differences, V spectrally.
pub fn apply_generator(scene: &Scene, grid: &SpatialGrid, u: &FiberGridFn) -> FiberGridFn {
    let (mut out, _) = frame_derivatives(scene, grid, u);
    let vt = u.d_theta();
    let th = fiber_angles(u.ntheta);
    for (node, p) in grid.xy.iter().enumerate() {
        let m = scene.metric(p[0], p[1]);
        for (l, &t) in th.iter().enumerate() {
            let g = vt.at(node, l).to_vec();
            let o = out.at_mut(node, l);
            for i in 0..u.nc {
                o[i] += g[i] * m.lambda;
            }
            if scene.has_attenuation() {
                let v = u.at(node, l).to_vec();
                scene
                    .attenuation(p[0], p[1], t, m.emsig)
                    .mul_vec_acc(&v, out.at_mut(node, l));
            }
        }
    }
    out
}

#[derive(Debug, Clone, Copy, serde::Serialize)]
pub struct CommutatorReport {
    pub sup: f64,
    pub l2: f64,
    /// sup of the right-hand side, for scale.
    pub scale: f64,
}

/// Residual of [H, G_μ + A + Φ]u = (X⊥ + ⋆A)u₀ + ((X⊥ + ⋆A)u)₀.
///
/// The left side is computed from samples of u (finite differences in space,
/// FFT in θ). The right side uses the exact derivatives of the analytic u.
pub fn commutator_residual(
    scene: &Scene,
    grid: &SpatialGrid,
    ntheta: usize,
    u: &BandFn,
) -> Result<CommutatorReport> {
    let nc = u.rank();
    if u.band() as usize + 2 > ntheta / 2 {
        return Err(MagrayError::BandLimitExceeded {
            band: u.band() as usize,
            limit: ntheta / 2 - 2,
        });
    }
    let us = FiberGridFn::sample(grid, ntheta, u);
    let lhs_a = apply_generator(scene, grid, &us).hilbert();
    let lhs_b = apply_generator(scene, grid, &us.hilbert());
    let th = fiber_angles(ntheta);
    let (mut sup, mut l2, mut scale) = (0.0f64, 0.0f64, 0.0f64);
    let mut v = vec![ZERO; nc];
    let mut gx = vec![ZERO; nc];
    let mut gy = vec![ZERO; nc];
    let mut gt = vec![ZERO; nc];
    let u0 = u.filter_modes(|k| k == 0);
    let mut w = vec![ZERO; ntheta * nc];
    for (node, p) in grid.xy.iter().enumerate() {
        let (x, y) = (p[0], p[1]);
        let m = scene.metric(x, y);
        let star = |t: f64| crate::geometry::star_connection(scene, x, y, t);
        // (X⊥ + ⋆A)u at every angle, then its fiber average
        for (l, &t) in th.iter().enumerate() {
            u.eval_with_derivatives(x, y, t, &mut v, &mut gx, &mut gy, &mut gt);
            let (s, c) = t.sin_cos();
            let cp = m.emsig * (m.sx * c + m.sy * s);
            let o = &mut w[l * nc..(l + 1) * nc];
            for i in 0..nc {
                o[i] = (gx[i] * s - gy[i] * c) * m.emsig + gt[i] * cp;
            }
            star(t).mul_vec_acc(&v, o);
        }
        let mut avg = vec![ZERO; nc];
        for l in 0..ntheta {
            for i in 0..nc {
                avg[i] += w[l * nc + i] / ntheta as f64;
            }
        }
        for (l, &t) in th.iter().enumerate() {
            u0.eval_with_derivatives(x, y, t, &mut v, &mut gx, &mut gy, &mut gt);
            let (s, c) = t.sin_cos();
            let mut rhs = avg.clone();
            for i in 0..nc {
                rhs[i] += (gx[i] * s - gy[i] * c) * m.emsig;
            }
            star(t).mul_vec_acc(&v, &mut rhs);
            let (a, b) = (lhs_a.at(node, l), lhs_b.at(node, l));
            for i in 0..nc {
                let r = (a[i] - b[i] - rhs[i]).norm();
                sup = sup.max(r);
                l2 += r * r;
                scale = scale.max(rhs[i].norm());
            }
        }
    }
    let cells = (grid.len() * ntheta) as f64;
    Ok(CommutatorReport {
        sup,
        l2: (l2 / cells).sqrt(),
        scale,
    })
}

/// Fiber angle spacing.
pub fn dtheta(ntheta: usize) -> f64 {
    TAU / ntheta as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::parse_expression;
    use crate::scene::SceneSpec;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn scene(sigma: &str, lambda: &str, ax: &str, ay: &str, phi: &str) -> Scene {
        Scene::from_spec(&SceneSpec::scalar(sigma, lambda, ax, ay, phi)).unwrap()
    }

    fn closure(
        f: impl Fn(f64, f64, f64) -> C64 + Sync,
    ) -> (usize, impl Fn(f64, f64, f64, &mut [C64]) + Sync) {
        (1, move |x, y, t, o: &mut [C64]| o[0] = f(x, y, t))
    }

    #[test]
    fn modes_of_simple_functions() {
        let g = SpatialGrid::new(12);
        let u = FiberGridFn::sample(&g, 16, &closure(|_, _, t| C64::new(t.cos(), 0.0)));
        let m = u.modes();
        for node in 0..g.len() {
            assert!((m.mode(node, 1)[0].re - 0.5).abs() < 1e-15);
            assert!((m.mode(node, -1)[0].re - 0.5).abs() < 1e-15);
            assert!(m.mode(node, 0)[0].norm() < 1e-15);
        }
        let h = u.hilbert();
        for node in 0..g.len() {
            for (l, t) in fiber_angles(16).into_iter().enumerate() {
                assert!((h.at(node, l)[0] - C64::new(t.sin(), 0.0)).norm() < 1e-14);
            }
        }
        let pure = FiberGridFn::sample(
            &g,
            16,
            &closure(|x, y, t| C64::from_polar(1.0 + x * y, 3.0 * t)),
        );
        let pm = pure.modes();
        for k in -8..8 {
            let e = crate::linalg::max_abs(&pm.mode_field(k));
            assert!(if k == 3 { e > 0.5 } else { e < 1e-14 });
        }
    }

    #[test]
    fn parseval_and_hilbert_square() {
        let g = SpatialGrid::new(10);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut u = FiberGridFn::zeros(g.len(), 32, 2);
        u.data
            .iter_mut()
            .for_each(|v| *v = C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)));
        assert!(u.parseval_defect() < 1e-13);
        let hh = u.hilbert().hilbert();
        let mut expect = u.project(0);
        expect.axpy(C64::new(-1.0, 0.0), &u);
        // H² = −Id + proj₀ away from the Nyquist mode, where the multiplier is (−sgn k·i)² = −1 too
        let diff = hh
            .data
            .iter()
            .zip(&expect.data)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max);
        assert!(diff < 1e-14, "{diff}");
    }

    #[test]
    fn eta_plus_of_x_is_half_e_itheta() {
        let s = scene("0", "0", "0", "0", "0");
        let g = SpatialGrid::new(16);
        let u = FiberGridFn::sample(&g, 16, &closure(|x, _, _| C64::new(x, 0.0)));
        let r = gk_operators(&s, &g, &u).unwrap();
        for node in 0..g.len() {
            for (l, t) in fiber_angles(16).into_iter().enumerate() {
                assert!((r.eta_plus.at(node, l)[0] - C64::from_polar(0.5, t)).norm() < 1e-12);
                assert!((r.eta_minus.at(node, l)[0] - C64::from_polar(0.5, -t)).norm() < 1e-12);
            }
        }
        let c = FiberGridFn::sample(&g, 16, &closure(|_, _, _| C64::new(2.0, 0.0)));
        let r = gk_operators(&s, &g, &c).unwrap();
        assert!(r.eta_plus.max_abs() < 1e-12 && r.eta_minus.max_abs() < 1e-12);
    }

    #[test]
    fn eta_mode_formula_matches_frame_formula() {
        let s = scene("0.2*x*y - 0.1*x^2", "0.3", "0", "0", "0");
        let g = SpatialGrid::new(24);
        let u = FiberGridFn::sample(
            &g,
            16,
            &closure(|x, y, t| C64::from_polar(1.0, -2.0 * t) * C64::new((x + y).sin(), x)),
        );
        let r = gk_operators(&s, &g, &u).unwrap();
        let m = u.modes().mode_field(-2);
        let ep = eta_on_mode(&s, &g, &m, 1, -2, true);
        let em = eta_on_mode(&s, &g, &m, 1, -2, false);
        let (rp, rm) = (
            r.eta_plus.modes().mode_field(-1),
            r.eta_minus.modes().mode_field(-3),
        );
        for i in 0..g.len() {
            assert!((ep[i] - rp[i]).norm() < 1e-11);
            assert!((em[i] - rm[i]).norm() < 1e-11);
        }
        assert!(eta_leakage(&s, &g, &u).unwrap() < 1e-10);
    }

    #[test]
    fn band_limit_is_enforced() {
        let g = SpatialGrid::new(10);
        let u = FiberGridFn::sample(&g, 8, &closure(|_, _, t| C64::from_polar(1.0, 3.0 * t)));
        let s = scene("0", "0", "0", "0", "0");
        assert!(matches!(
            gk_operators(&s, &g, &u),
            Err(MagrayError::BandLimitExceeded { .. })
        ));
    }

    #[test]
    fn commutator_for_position_function() {
        let s = scene("0", "0", "0", "0", "0");
        let g = SpatialGrid::new(32);
        let u = BandFn::scalar_field(vec![parse_expression("sin(x) + x*y^2").unwrap()]);
        let r = commutator_residual(&s, &g, 16, &u).unwrap();
        assert!(r.sup < 5e-6, "{r:?}");
    }

    #[test]
    fn commutator_with_full_attenuation_converges() {
        let s = scene(
            "0.1*x*y",
            "0.4 + 0.1*x",
            "i*0.3*y",
            "-i*0.2*x",
            "i*0.5*cos(x)",
        );
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let u = BandFn::random(1, &[-2, -1, 0, 1, 2], &mut rng, 1.0);
        let a = commutator_residual(&s, &SpatialGrid::new(32), 16, &u).unwrap();
        let b = commutator_residual(&s, &SpatialGrid::new(64), 16, &u).unwrap();
        assert!(b.sup < 1e-4, "{a:?} {b:?}");
        assert!(a.sup / b.sup > 8.0, "{a:?} {b:?}");
    }

    #[test]
    fn modes_two_only_kill_the_commutator() {
        // u with modes ±2 only: u₀ = 0 and (X⊥u)₀ = 0, so [H, G]u = 0
        let s = scene("0", "0", "0", "0", "0");
        let u = BandFn::new(
            1,
            vec![
                (2, vec![parse_expression("x*y").unwrap()]),
                (-2, vec![parse_expression("cos(y)").unwrap()]),
            ],
        );
        let g = SpatialGrid::new(32);
        let us = FiberGridFn::sample(&g, 16, &u);
        let a = apply_generator(&s, &g, &us).hilbert();
        let b = apply_generator(&s, &g, &us.hilbert());
        let d = a
            .data
            .iter()
            .zip(&b.data)
            .map(|(p, q)| (p - q).norm())
            .fold(0.0, f64::max);
        assert!(d < 1e-5, "{d}");
    }
}
