//! Attenuated transport along rays: U with G_μU + (A + Φ)U = 0 and U = Id on
//! ∂₊SM, the scattering data C = U|∂₋SM, the ray transform
//! I f = ∫₀^τ U⁻¹ f(φ_t) dt, the extensions w_ψ and w♯ = U w_ψ, and the boundary
//! operators Q, B and P = B H Q.
//!
//! A [`Workspace`] owns the grids of a scene and lazily caches three families
//! of traces: forward quadratures from every ∂₊ grid node, backward traces from
//! every (disk node, θ) and backward traces from every outward boundary fiber
//! node. All operators built on the caches are explicit linear maps.

use std::f64::consts::{FRAC_PI_2, PI, TAU};
use std::sync::OnceLock;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::Result;
use crate::flow::{inward_coords, wrap_pi, Direction, RaySample, Tracer};
use crate::functions::SmFunction;
use crate::grid::{
    boundary_fiber_angles, cubic_uniform, fiber_angles, BStencil, BoundaryGrid, SpatialGrid,
};
use crate::harmonics::FiberGridFn;
use crate::linalg::{CMat, C64, I, ZERO};
use crate::scene::Scene;

/// C^n values on the ∂₊ grid, layout [s][φ][comp].
#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryFn {
    pub ns: usize,
    pub nphi: usize,
    pub nc: usize,
    pub data: Vec<C64>,
}

impl BoundaryFn {
    pub fn zeros(ns: usize, nphi: usize, nc: usize) -> Self {
        BoundaryFn {
            ns,
            nphi,
            nc,
            data: vec![ZERO; ns * nphi * nc],
        }
    }

    pub fn from_fn(b: &BoundaryGrid, nc: usize, f: impl Fn(f64, f64, &mut [C64])) -> Self {
        let mut out = Self::zeros(b.ns, b.nphi, nc);
        for (idx, s, phi) in b.points() {
            f(s, phi, &mut out.data[idx * nc..(idx + 1) * nc]);
        }
        out
    }

    #[inline]
    pub fn at(&self, idx: usize) -> &[C64] {
        &self.data[idx * self.nc..(idx + 1) * self.nc]
    }

    pub fn axpy(&mut self, a: C64, o: &BoundaryFn) {
        for (u, v) in self.data.iter_mut().zip(&o.data) {
            *u += v * a;
        }
    }

    pub fn scaled(&self, a: C64) -> BoundaryFn {
        let mut out = self.clone();
        out.data.iter_mut().for_each(|v| *v *= a);
        out
    }
}

/// C^n values on the full boundary fiber: s_i × ψ_j with θ = s + π + ψ.
#[derive(Debug, Clone, PartialEq)]
pub struct FiberBoundaryFn {
    pub ns: usize,
    pub npsi: usize,
    pub nc: usize,
    pub data: Vec<C64>,
}

impl FiberBoundaryFn {
    pub fn zeros(ns: usize, npsi: usize, nc: usize) -> Self {
        FiberBoundaryFn {
            ns,
            npsi,
            nc,
            data: vec![ZERO; ns * npsi * nc],
        }
    }

    #[inline]
    pub fn at(&self, i: usize, j: usize) -> &[C64] {
        let o = (i * self.npsi + j) * self.nc;
        &self.data[o..o + self.nc]
    }

    /// Fiber Fourier coefficients in ψ, [s][k index][comp], FFT order.
    pub fn modes(&self) -> Vec<C64> {
        let n = self.npsi;
        let fft = rustfft::FftPlanner::new().plan_fft_forward(n);
        let d = TAU / n as f64;
        let mut out = vec![ZERO; self.data.len()];
        let mut buf = vec![ZERO; n];
        for i in 0..self.ns {
            for c in 0..self.nc {
                for j in 0..n {
                    buf[j] = self.data[(i * n + j) * self.nc + c];
                }
                fft.process(&mut buf);
                for (idx, v) in buf.iter().enumerate() {
                    let k = crate::harmonics::mode_of_index(idx, n) as f64;
                    // shift from ψ_0 = −π + Δ/2
                    out[(i * n + idx) * self.nc + c] =
                        v * C64::from_polar(1.0 / n as f64, k * (PI - 0.5 * d));
                }
            }
        }
        out
    }

    fn from_modes(ns: usize, npsi: usize, nc: usize, modes: &[C64]) -> Self {
        let mut out = Self::zeros(ns, npsi, nc);
        let psi = boundary_fiber_angles(npsi);
        for i in 0..ns {
            for (j, &p) in psi.iter().enumerate() {
                let o = (i * npsi + j) * nc;
                eval_series(
                    &modes[i * npsi * nc..(i + 1) * npsi * nc],
                    npsi,
                    nc,
                    p,
                    &mut out.data[o..o + nc],
                );
            }
        }
        out
    }

    /// Fibrewise Hilbert transform: mode k times −sgn(k) i.
    pub fn hilbert(&self) -> Self {
        let mut m = self.modes();
        let n = self.npsi;
        for i in 0..self.ns {
            for idx in 0..n {
                let k = crate::harmonics::mode_of_index(idx, n);
                let f = -I * k.signum() as f64;
                for c in 0..self.nc {
                    m[(i * n + idx) * self.nc + c] *= f;
                }
            }
        }
        Self::from_modes(self.ns, self.npsi, self.nc, &m)
    }
}

/// Σ_k a_k e^{ikψ} for one s-line of coefficients in FFT order.
fn eval_series(coef: &[C64], n: usize, nc: usize, psi: f64, out: &mut [C64]) {
    out[..nc].fill(ZERO);
    let step = C64::from_polar(1.0, psi);
    let mut e = C64::from_polar(1.0, -(n as f64 / 2.0) * psi);
    for k in -(n as i32) / 2..(n as i32) / 2 {
        let idx = crate::harmonics::index_of_mode(k, n);
        for c in 0..nc {
            out[c] += coef[idx * nc + c] * e;
        }
        e *= step;
    }
}

/// Quadrature of one forward ray from a ∂₊ node: Simpson on every RK4 step
/// with cubic-Hermite midpoints.
#[derive(Debug, Clone)]
pub struct RayQuad {
    pub pts: Vec<[f64; 3]>,
    pub w: Vec<f64>,
    /// U at the quadrature points; empty without attenuation.
    pub u: Vec<CMat>,
    pub exit: [f64; 3],
    pub tau: f64,
    /// Scattering data at the exit.
    pub c: CMat,
    pub unitarity_defect: f64,
    /// max ||v|_g − 1| over the traced nodes.
    pub speed_defect: f64,
    pub drift: f64,
}

#[derive(Debug, Clone)]
pub struct ForwardCache {
    pub rays: Vec<RayQuad>,
}

/// Stencil into the ∂₊ grid plus the matrix applied to the interpolated value.
#[derive(Debug, Clone)]
pub struct BackEntry {
    pub st: BStencil,
    /// None means the identity.
    pub u: Option<CMat>,
}

#[derive(Debug, Clone)]
pub struct BackMap {
    pub entries: Vec<BackEntry>,
}

#[derive(Debug, Clone, Serialize)]
pub struct ScatterEntry {
    pub s: f64,
    pub phi: f64,
    pub s_exit: f64,
    /// Exit angle from the outward normal.
    pub phi_exit: f64,
    pub tau: f64,
    #[serde(skip)]
    pub c: CMat,
}

/// Scene, grids and trace caches.
pub struct Workspace {
    pub scene: Scene,
    pub grid: SpatialGrid,
    pub bgrid: BoundaryGrid,
    pub ntheta: usize,
    pub npsi: usize,
    /// μ quadrature weights on the ∂₊ grid.
    pub mu: Vec<f64>,
    fwd: OnceLock<ForwardCache>,
    back: OnceLock<BackMap>,
    fiber: OnceLock<BackMap>,
}

fn midpoint_state(z0: &[f64; 3], d0: &[f64; 3], z1: &[f64; 3], d1: &[f64; 3], h: f64) -> [f64; 3] {
    let mut m = [0.0; 3];
    for i in 0..3 {
        m[i] = 0.5 * (z0[i] + z1[i]) + h / 8.0 * (d0[i] - d1[i]);
    }
    m
}

fn midpoint_mat(u0: &CMat, du0: &CMat, u1: &CMat, du1: &CMat, h: f64) -> CMat {
    let mut m = (u0 + u1).scale_re(0.5);
    m.axpy(h / 8.0, du0);
    m.axpy(-h / 8.0, du1);
    m
}

impl Workspace {
    pub fn new(scene: &Scene) -> Self {
        let g = scene.grid;
        let grid = SpatialGrid::new(g.nx);
        let bgrid = BoundaryGrid::new(g.ns, g.nphi);
        let esig: Vec<f64> = bgrid
            .s
            .iter()
            .map(|&s| scene.sigma(s.cos(), s.sin()).exp())
            .collect();
        let mu = bgrid.mu_weights(&esig);
        Workspace {
            scene: scene.clone(),
            grid,
            bgrid,
            ntheta: g.ntheta,
            npsi: g.ntheta,
            mu,
            fwd: OnceLock::new(),
            back: OnceLock::new(),
            fiber: OnceLock::new(),
        }
    }

    pub fn n(&self) -> usize {
        self.scene.n()
    }

    pub fn tracer(&self) -> Tracer<'_> {
        Tracer::new(&self.scene)
    }

    /// Inward state θ = s + π + φ at boundary parameter s.
    fn inward_state(s: f64, phi: f64) -> [f64; 3] {
        [s.cos(), s.sin(), s + PI + phi]
    }

    pub fn forward(&self) -> Result<&ForwardCache> {
        if let Some(c) = self.fwd.get() {
            return Ok(c);
        }
        let pts: Vec<(f64, f64)> = self.bgrid.points().map(|(_, s, p)| (s, p)).collect();
        let rays = pts
            .par_iter()
            .map(|&(s, phi)| self.forward_ray(s, phi))
            .collect::<std::result::Result<Vec<_>, _>>()?;
        Ok(self.fwd.get_or_init(|| ForwardCache { rays }))
    }

    fn forward_ray(
        &self,
        s: f64,
        phi: f64,
    ) -> std::result::Result<RayQuad, crate::flow::TrappedRay> {
        let tr = self.tracer();
        let ray = tr.trace(Self::inward_state(s, phi), Direction::Forward)?;
        let (pts, w, u) = simpson_quadrature(&ray);
        let last = ray.last();
        let c = last
            .u
            .as_ref()
            .map(|p| p.0.clone())
            .unwrap_or_else(|| CMat::identity(self.n()));
        Ok(RayQuad {
            exit: last.z,
            tau: ray.tau,
            c,
            unitarity_defect: ray.unitarity_defect(),
            speed_defect: ray.speed_defect(&self.scene),
            drift: ray.max_drift,
            pts,
            w,
            u,
        })
    }

    /// Backward trace from an interior state to ∂₊: stencil at the entry and U at the start.
    fn back_entry(&self, z: [f64; 3]) -> std::result::Result<BackEntry, crate::flow::TrappedRay> {
        let tr = self.tracer();
        let (node, _) = tr.endpoint(z, Direction::Backward)?;
        let b = inward_coords(&node.z);
        let phi = b.phi.clamp(-FRAC_PI_2, FRAC_PI_2);
        Ok(BackEntry {
            st: self.bgrid.stencil(b.s, phi),
            u: node.u.map(|(v, _)| v.adjoint()),
        })
    }

    /// Pixel-driven map: one entry per (disk node, θ_l).
    pub fn backmap(&self) -> Result<&BackMap> {
        if let Some(c) = self.back.get() {
            return Ok(c);
        }
        let th = fiber_angles(self.ntheta);
        let states: Vec<[f64; 3]> = self
            .grid
            .xy
            .iter()
            .flat_map(|p| th.iter().map(move |&t| [p[0], p[1], t]))
            .collect();
        let entries = states
            .par_iter()
            .map(|&z| self.back_entry(z))
            .collect::<std::result::Result<Vec<_>, _>>()?;
        Ok(self.back.get_or_init(|| BackMap { entries }))
    }

    /// Map from ∂₊ data to the full boundary fiber: Qw.
    pub fn fiber_map(&self) -> Result<&BackMap> {
        if let Some(c) = self.fiber.get() {
            return Ok(c);
        }
        let psi = boundary_fiber_angles(self.npsi);
        let pts: Vec<(f64, f64)> = self
            .bgrid
            .s
            .iter()
            .flat_map(|&s| psi.iter().map(move |&p| (s, p)))
            .collect();
        let entries = pts
            .par_iter()
            .map(|&(s, p)| {
                if p.abs() < FRAC_PI_2 {
                    Ok(BackEntry {
                        st: self.bgrid.stencil(s, p),
                        u: None,
                    })
                } else {
                    self.back_entry(Self::inward_state(s, p))
                }
            })
            .collect::<std::result::Result<Vec<_>, _>>()?;
        Ok(self.fiber.get_or_init(|| BackMap { entries }))
    }

    /// I f on the ∂₊ grid.
    pub fn ray_transform(&self, f: &dyn SmFunction) -> Result<BoundaryFn> {
        let fw = self.forward()?;
        let n = f.rank();
        let vals: Vec<Vec<C64>> = fw
            .rays
            .par_iter()
            .map(|r| {
                let mut acc = vec![ZERO; n];
                let mut v = vec![ZERO; n];
                for (q, p) in r.pts.iter().enumerate() {
                    f.eval(p[0], p[1], p[2], &mut v);
                    let wq = r.w[q];
                    if r.u.is_empty() {
                        for c in 0..n {
                            acc[c] += v[c] * wq;
                        }
                    } else {
                        let mut t = vec![ZERO; n];
                        r.u[q].adj_mul_vec_acc(&v, &mut t);
                        for c in 0..n {
                            acc[c] += t[c] * wq;
                        }
                    }
                }
                acc
            })
            .collect();
        Ok(BoundaryFn {
            ns: self.bgrid.ns,
            nphi: self.bgrid.nphi,
            nc: n,
            data: vals.concat(),
        })
    }

    /// Plain transpose of the ray-driven I⁰ acting on sampled 0-forms (no weights).
    pub fn ray_transform_zero_form_transpose(&self, h: &BoundaryFn) -> Result<Vec<C64>> {
        let fw = self.forward()?;
        let n = h.nc;
        let g = &self.grid;
        let ext = fw
            .rays
            .par_iter()
            .enumerate()
            .fold(
                || vec![ZERO; g.padded_len() * n],
                |mut acc, (r, ray)| {
                    let hr = h.at(r);
                    let mut v = vec![ZERO; n];
                    for (q, p) in ray.pts.iter().enumerate() {
                        v.fill(ZERO);
                        if ray.u.is_empty() {
                            v.copy_from_slice(hr);
                        } else {
                            ray.u[q].mul_vec_acc(hr, &mut v);
                        }
                        v.iter_mut().for_each(|x| *x *= ray.w[q]);
                        g.interp_adjoint(&mut acc, n, &g.stencil(p[0], p[1]), &v);
                    }
                    acc
                },
            )
            .reduce(
                || vec![ZERO; g.padded_len() * n],
                |mut a, b| {
                    a.iter_mut().zip(b).for_each(|(x, y)| *x += y);
                    a
                },
            );
        Ok(g.extend_adjoint(&ext, n))
    }

    fn interp_entry(&self, e: &BackEntry, w: &BoundaryFn, out: &mut [C64]) {
        let n = w.nc;
        match &e.u {
            None => self.bgrid.interp(&w.data, n, &e.st, out),
            Some(u) => {
                let mut t = [ZERO; 8];
                self.bgrid.interp(&w.data, n, &e.st, &mut t);
                u.mul_vec(&t[..n], &mut out[..n]);
            }
        }
    }

    /// w_ψ on the SM grid.
    pub fn psi_extension(&self, w: &BoundaryFn) -> Result<FiberGridFn> {
        let bm = self.backmap()?;
        let mut out = FiberGridFn::zeros(self.grid.len(), self.ntheta, w.nc);
        for (k, e) in bm.entries.iter().enumerate() {
            self.bgrid.interp(
                &w.data,
                w.nc,
                &e.st,
                &mut out.data[k * w.nc..(k + 1) * w.nc],
            );
        }
        Ok(out)
    }

    /// w♯ = U w_ψ on the SM grid.
    pub fn sharp_extension(&self, w: &BoundaryFn) -> Result<FiberGridFn> {
        let bm = self.backmap()?;
        let n = w.nc;
        let mut out = FiberGridFn::zeros(self.grid.len(), self.ntheta, n);
        out.data
            .par_chunks_mut(n)
            .zip(bm.entries.par_iter())
            .for_each(|(o, e)| self.interp_entry(e, w, o));
        Ok(out)
    }

    /// Transpose of [`sharp_extension`](Self::sharp_extension).
    pub fn sharp_extension_transpose(&self, g: &FiberGridFn) -> Result<BoundaryFn> {
        let bm = self.backmap()?;
        let n = g.nc;
        let mut acc = BoundaryFn::zeros(self.bgrid.ns, self.bgrid.nphi, n);
        let mut t = vec![ZERO; n];
        for (k, e) in bm.entries.iter().enumerate() {
            let v = &g.data[k * n..(k + 1) * n];
            match &e.u {
                None => self.bgrid.interp_adjoint(&mut acc.data, n, &e.st, v),
                Some(u) => {
                    t.fill(ZERO);
                    u.adj_mul_vec_acc(v, &mut t);
                    self.bgrid.interp_adjoint(&mut acc.data, n, &e.st, &t);
                }
            }
        }
        Ok(acc)
    }

    /// Q w: w on ∂₊SM and C·(w∘S⁻¹) on ∂₋SM.
    pub fn q_operator(&self, w: &BoundaryFn) -> Result<FiberBoundaryFn> {
        let fm = self.fiber_map()?;
        let n = w.nc;
        let mut out = FiberBoundaryFn::zeros(self.bgrid.ns, self.npsi, n);
        for (k, e) in fm.entries.iter().enumerate() {
            self.interp_entry(e, w, &mut out.data[k * n..(k + 1) * n]);
        }
        Ok(out)
    }

    /// Evaluates a full-fiber function from its ψ-modes at (s, ψ): periodic cubic in s.
    fn eval_fiber(&self, modes: &[C64], nc: usize, s: f64, psi: f64, out: &mut [C64]) {
        let ns = self.bgrid.ns;
        let n = self.npsi;
        let fs = s.rem_euclid(TAU) / self.bgrid.ds();
        let i0 = fs.floor();
        let w = cubic_uniform(fs - i0);
        out[..nc].fill(ZERO);
        let mut t = [ZERO; 8];
        for (a, wa) in w.iter().enumerate() {
            let i = (i0 as isize - 1 + a as isize).rem_euclid(ns as isize) as usize;
            eval_series(&modes[i * n * nc..(i + 1) * n * nc], n, nc, psi, &mut t);
            for c in 0..nc {
                out[c] += t[c] * *wa;
            }
        }
    }

    /// B a = C⁻¹ a∘S − a on the ∂₊ grid, for a given on the full boundary fiber.
    pub fn b_operator(&self, a: &FiberBoundaryFn) -> Result<BoundaryFn> {
        let fw = self.forward()?;
        let n = a.nc;
        let modes = a.modes();
        let npsi = self.npsi;
        let pts: Vec<(usize, f64, f64)> = self.bgrid.points().collect();
        let vals: Vec<Vec<C64>> = pts
            .par_iter()
            .map(|&(idx, s, phi)| {
                let r = &fw.rays[idx];
                let se = r.exit[1].atan2(r.exit[0]);
                let pe = wrap_pi(r.exit[2] - se - PI);
                let mut ex = vec![ZERO; n];
                self.eval_fiber(&modes, n, se, pe, &mut ex);
                let mut out = vec![ZERO; n];
                r.c.adj_mul_vec_acc(&ex, &mut out);
                let i = idx / self.bgrid.nphi;
                let mut en = vec![ZERO; n];
                eval_series(
                    &modes[i * npsi * n..(i + 1) * npsi * n],
                    npsi,
                    n,
                    phi,
                    &mut en,
                );
                for c in 0..n {
                    out[c] -= en[c];
                }
                let _ = s;
                out
            })
            .collect();
        Ok(BoundaryFn {
            ns: self.bgrid.ns,
            nphi: self.bgrid.nphi,
            nc: n,
            data: vals.concat(),
        })
    }

    /// P w = B H Q w.
    pub fn p_operator(&self, w: &BoundaryFn) -> Result<BoundaryFn> {
        self.b_operator(&self.q_operator(w)?.hilbert())
    }

    pub fn scattering_data(&self) -> Result<Vec<ScatterEntry>> {
        let fw = self.forward()?;
        Ok(self
            .bgrid
            .points()
            .map(|(idx, s, phi)| {
                let r = &fw.rays[idx];
                let e = crate::flow::outward_coords(&r.exit);
                ScatterEntry {
                    s,
                    phi,
                    s_exit: e.s,
                    phi_exit: e.phi,
                    tau: r.tau,
                    c: r.c.clone(),
                }
            })
            .collect())
    }

    /// ⟨a, b⟩ in L²(∂₊SM, μ).
    pub fn mu_dot(&self, a: &BoundaryFn, b: &BoundaryFn) -> C64 {
        crate::linalg::weighted_dot(&a.data, &b.data, &self.mu, a.nc)
    }

    pub fn mu_norm(&self, a: &BoundaryFn) -> f64 {
        crate::linalg::weighted_norm(&a.data, &self.mu, a.nc)
    }

    /// Extension data w = Ũ g: smooth boundary data obtained by restricting a
    /// transport solution from the disk of radius `radius` > 1 to ∂₊SM.
    ///
    /// `g(S, φ, out)` is given on the inward boundary of the larger disk.
    pub fn extension_data(
        &self,
        radius: f64,
        g: &(dyn Fn(f64, f64, &mut [C64]) + Sync),
    ) -> Result<BoundaryFn> {
        let n = self.n();
        let tr = self.tracer().with_radius(radius);
        let pts: Vec<(f64, f64)> = self.bgrid.points().map(|(_, s, p)| (s, p)).collect();
        let vals = pts
            .par_iter()
            .map(|&(s, phi)| {
                let (node, _) = tr.endpoint(Self::inward_state(s, phi), Direction::Backward)?;
                let big_s = node.z[1].atan2(node.z[0]);
                let big_phi = wrap_pi(node.z[2] - big_s - PI);
                let mut gv = vec![ZERO; n];
                g(big_s, big_phi, &mut gv);
                Ok(match node.u {
                    Some((v, _)) => {
                        let mut o = vec![ZERO; n];
                        v.adj_mul_vec_acc(&gv, &mut o);
                        o
                    }
                    None => gv,
                })
            })
            .collect::<std::result::Result<Vec<_>, crate::flow::TrappedRay>>()?;
        Ok(BoundaryFn {
            ns: self.bgrid.ns,
            nphi: self.bgrid.nphi,
            nc: n,
            data: vals.concat(),
        })
    }
}

/// Linear map g ↦ w = Ũ g from data on the inward boundary of the disk of
/// radius R > 1 to ∂₊SM of the unit disk. Its range consists of restrictions of
/// transport solutions on the larger disk, so Qw is smooth across the glancing set.
pub struct ExtensionMap {
    pub radius: f64,
    pub big: BoundaryGrid,
    /// μ-type weights on the outer grid.
    pub mu: Vec<f64>,
    entries: Vec<BackEntry>,
    n: usize,
    ns: usize,
    nphi: usize,
}

impl ExtensionMap {
    pub fn new(ws: &Workspace, radius: f64, ns: usize, nphi: usize) -> Result<Self> {
        let big = BoundaryGrid::new(ns, nphi);
        let tr = ws.tracer().with_radius(radius);
        let pts: Vec<(f64, f64)> = ws.bgrid.points().map(|(_, s, p)| (s, p)).collect();
        let entries = pts
            .par_iter()
            .map(|&(s, phi)| {
                let (node, _) =
                    tr.endpoint(Workspace::inward_state(s, phi), Direction::Backward)?;
                let big_s = node.z[1].atan2(node.z[0]);
                let big_phi = wrap_pi(node.z[2] - big_s - PI).clamp(-FRAC_PI_2, FRAC_PI_2);
                Ok(BackEntry {
                    st: big.stencil(big_s, big_phi),
                    u: node.u.map(|(v, _)| v.adjoint()),
                })
            })
            .collect::<std::result::Result<Vec<_>, crate::flow::TrappedRay>>()?;
        let esig: Vec<f64> = big
            .s
            .iter()
            .map(|&s| radius * ws.scene.sigma(radius * s.cos(), radius * s.sin()).exp())
            .collect();
        let mu = big.mu_weights(&esig);
        Ok(ExtensionMap {
            radius,
            mu,
            entries,
            n: ws.n(),
            ns: ws.bgrid.ns,
            nphi: ws.bgrid.nphi,
            big,
        })
    }

    pub fn zeros(&self) -> BoundaryFn {
        BoundaryFn::zeros(self.big.ns, self.big.nphi, self.n)
    }

    pub fn apply(&self, g: &BoundaryFn) -> BoundaryFn {
        let n = self.n;
        let mut out = BoundaryFn::zeros(self.ns, self.nphi, n);
        let mut t = vec![ZERO; n];
        for (k, e) in self.entries.iter().enumerate() {
            let o = &mut out.data[k * n..(k + 1) * n];
            match &e.u {
                None => self.big.interp(&g.data, n, &e.st, o),
                Some(u) => {
                    self.big.interp(&g.data, n, &e.st, &mut t);
                    u.mul_vec(&t, o);
                }
            }
        }
        out
    }

    pub fn transpose(&self, w: &BoundaryFn) -> BoundaryFn {
        let n = self.n;
        let mut acc = self.zeros();
        let mut t = vec![ZERO; n];
        for (k, e) in self.entries.iter().enumerate() {
            let v = &w.data[k * n..(k + 1) * n];
            match &e.u {
                None => self.big.interp_adjoint(&mut acc.data, n, &e.st, v),
                Some(u) => {
                    t.fill(ZERO);
                    u.adj_mul_vec_acc(v, &mut t);
                    self.big.interp_adjoint(&mut acc.data, n, &e.st, &t);
                }
            }
        }
        acc
    }
}

/// Simpson quadrature on every step of a traced ray (either direction), with
/// cubic-Hermite midpoints for the state and for U. Returns (points, |dt|
/// weights, U at the points); U is empty when the ray carries no transport.
pub fn simpson_quadrature(ray: &RaySample) -> (Vec<[f64; 3]>, Vec<f64>, Vec<CMat>) {
    let nn = ray.nodes.len();
    let with_u = ray.nodes[0].u.is_some();
    let mut pts = Vec::with_capacity(2 * nn);
    let mut w = Vec::with_capacity(2 * nn);
    let mut u = Vec::new();
    pts.push(ray.nodes[0].z);
    w.push(0.0);
    if with_u {
        u.push(ray.nodes[0].u.as_ref().unwrap().0.clone());
    }
    for k in 0..nn - 1 {
        let (a, b) = (&ray.nodes[k], &ray.nodes[k + 1]);
        let h = b.t - a.t;
        let ha = h.abs();
        let last = pts.len() - 1;
        w[last] += ha / 6.0;
        pts.push(midpoint_state(&a.z, &a.dz, &b.z, &b.dz, h));
        w.push(4.0 * ha / 6.0);
        pts.push(b.z);
        w.push(ha / 6.0);
        if with_u {
            let (ua, da) = a.u.as_ref().unwrap();
            let (ub, db) = b.u.as_ref().unwrap();
            u.push(midpoint_mat(ua, da, ub, db, h));
            u.push(ub.clone());
        }
    }
    (pts, w, u)
}

/// Fundamental solution along a given ray by RK4 on its own nodes, with
/// polar re-unitarization every 64 steps.
#[derive(Debug, Clone)]
pub struct TransportSolution {
    pub u: Vec<CMat>,
    pub max_drift: f64,
}

impl TransportSolution {
    pub fn unitarity_defect(&self) -> f64 {
        self.u
            .iter()
            .map(CMat::unitarity_defect)
            .fold(0.0, f64::max)
    }

    pub fn inverse(&self) -> Vec<CMat> {
        self.u.iter().map(CMat::adjoint).collect()
    }
}

pub fn solve_transport(scene: &Scene, ray: &RaySample) -> TransportSolution {
    let n = scene.n();
    let m_at = |z: &[f64; 3]| {
        let e = (-scene.sigma(z[0], z[1])).exp();
        scene.attenuation(z[0], z[1], z[2], e)
    };
    let mut u = CMat::identity(n);
    let mut out = vec![u.clone()];
    let mut drift: f64 = 0.0;
    for k in 0..ray.nodes.len().saturating_sub(1) {
        let (a, b) = (&ray.nodes[k], &ray.nodes[k + 1]);
        let h = b.t - a.t;
        let zm = midpoint_state(&a.z, &a.dz, &b.z, &b.dz, h);
        let (m0, mm, m1) = (m_at(&a.z), m_at(&zm), m_at(&b.z));
        let k1 = -&(&m0 * &u);
        let mut u2 = u.clone();
        u2.axpy(0.5 * h, &k1);
        let k2 = -&(&mm * &u2);
        let mut u3 = u.clone();
        u3.axpy(0.5 * h, &k2);
        let k3 = -&(&mm * &u3);
        let mut u4 = u.clone();
        u4.axpy(h, &k3);
        let k4 = -&(&m1 * &u4);
        u.axpy(h / 6.0, &k1);
        u.axpy(h / 3.0, &k2);
        u.axpy(h / 3.0, &k3);
        u.axpy(h / 6.0, &k4);
        if (k + 1) % 64 == 0 {
            drift = drift.max(u.unitarity_defect());
            u = u.polar_unitary();
        }
        out.push(u.clone());
    }
    TransportSolution {
        u: out,
        max_drift: drift,
    }
}

/// (w_ψ, w♯, Qw).
pub fn extend_boundary(
    ws: &Workspace,
    w: &BoundaryFn,
) -> Result<(FiberGridFn, FiberGridFn, FiberBoundaryFn)> {
    Ok((
        ws.psi_extension(w)?,
        ws.sharp_extension(w)?,
        ws.q_operator(w)?,
    ))
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct KernelReport {
    pub sup: f64,
    /// ‖I((G_μ + A + Φ)a) − B(a|∂)‖_μ.
    pub l2: f64,
    pub lhs_norm: f64,
    pub rhs_norm: f64,
}

/// Both sides of I((G_μ + A + Φ)a) = B(a|∂(SM)) for an analytic a. The
/// right side uses the exact boundary values of a at entry and exit.
pub fn kernel_transform_identity(
    ws: &Workspace,
    a: &crate::functions::BandFn,
) -> Result<KernelReport> {
    let lhs = ws.ray_transform(&crate::functions::GeneratorImage {
        scene: &ws.scene,
        u: a,
    })?;
    let fw = ws.forward()?;
    let n = a.rank();
    let mut rhs = BoundaryFn::zeros(ws.bgrid.ns, ws.bgrid.nphi, n);
    for (idx, s, phi) in ws.bgrid.points() {
        let r = &fw.rays[idx];
        let mut ex = vec![ZERO; n];
        a.eval(r.exit[0], r.exit[1], r.exit[2], &mut ex);
        let o = &mut rhs.data[idx * n..(idx + 1) * n];
        r.c.adj_mul_vec_acc(&ex, o);
        let z = Workspace::inward_state(s, phi);
        let mut en = vec![ZERO; n];
        a.eval(z[0], z[1], z[2], &mut en);
        for c in 0..n {
            o[c] -= en[c];
        }
    }
    let mut diff = lhs.clone();
    diff.axpy(C64::new(-1.0, 0.0), &rhs);
    Ok(KernelReport {
        sup: crate::linalg::max_abs(&diff.data),
        l2: ws.mu_norm(&diff),
        lhs_norm: ws.mu_norm(&lhs),
        rhs_norm: ws.mu_norm(&rhs),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::parse_expression;
    use crate::functions::{BandFn, OneForm, TensorField};
    use crate::scene::{GridParams, SceneSpec};

    fn scene(
        sigma: &str,
        lambda: &str,
        ax: &str,
        ay: &str,
        phi: &str,
        g: GridParams,
        dt: f64,
    ) -> Scene {
        Scene::from_spec(
            &SceneSpec::scalar(sigma, lambda, ax, ay, phi)
                .with_grid(g)
                .with_dt(dt),
        )
        .unwrap()
    }

    fn small() -> GridParams {
        GridParams {
            nx: 24,
            ntheta: 16,
            ns: 32,
            nphi: 16,
        }
    }

    #[test]
    fn chord_lengths_and_exact_forms() {
        let s = scene("0", "0", "0", "0", "0", small(), 0.01);
        let ws = Workspace::new(&s);
        let one = BandFn::scalar_field(vec![parse_expression("1").unwrap()]);
        let i0 = ws.ray_transform(&one).unwrap();
        for (idx, _, phi) in ws.bgrid.points() {
            assert!((i0.at(idx)[0].re - 2.0 * phi.cos()).abs() < 1e-9);
        }
        let dx = OneForm::new(
            vec![parse_expression("1").unwrap()],
            vec![parse_expression("0").unwrap()],
        )
        .to_band(&s);
        let i1 = ws.ray_transform(&dx).unwrap();
        let fw = ws.forward().unwrap();
        for (idx, sp, _) in ws.bgrid.points() {
            let expect = fw.rays[idx].exit[0] - sp.cos();
            assert!((i1.at(idx)[0].re - expect).abs() < 1e-9);
        }
    }

    #[test]
    fn constant_higgs_field_oracles() {
        let c = 0.7;
        let s = scene("0", "0", "0", "0", &format!("i*{c}"), small(), 0.01);
        let ws = Workspace::new(&s);
        let one = BandFn::scalar_field(vec![parse_expression("1").unwrap()]);
        let i0 = ws.ray_transform(&one).unwrap();
        let sd = ws.scattering_data().unwrap();
        let ic = C64::new(0.0, c);
        for (idx, _, phi) in ws.bgrid.points() {
            let tau = 2.0 * phi.cos();
            let expect = ((ic * tau).exp() - 1.0) / ic;
            assert!((i0.at(idx)[0] - expect).norm() < 1e-9);
            assert!((sd[idx].c[(0, 0)] - (-ic * tau).exp()).norm() < 1e-9);
        }
    }

    #[test]
    fn transport_solution_on_traced_nodes() {
        let s = scene(
            "0.1*x",
            "0.3",
            "i*0.2*y",
            "i*0.1",
            "i*0.4*x*y",
            small(),
            0.01,
        );
        let ray = Tracer::new(&s)
            .with_transport(false)
            .trace([1.0, 0.0, PI + 0.3], Direction::Forward)
            .unwrap();
        let sol = solve_transport(&s, &ray);
        assert!(sol.unitarity_defect() < 1e-8);
        let traced = Tracer::new(&s)
            .trace([1.0, 0.0, PI + 0.3], Direction::Forward)
            .unwrap();
        let last = traced.last().u.as_ref().unwrap().0.clone();
        assert!((&last - sol.u.last().unwrap()).max_abs() < 1e-6);
        let zero = scene("0", "0", "0", "0", "0", small(), 0.01);
        let sol = solve_transport(&zero, &ray);
        assert!(sol
            .u
            .iter()
            .all(|u| (u - &CMat::identity(1)).max_abs() == 0.0));
    }

    #[test]
    fn constants_extend_trivially() {
        let s = scene("0.1*x*y", "0.2", "0", "0", "0", small(), 0.02);
        let ws = Workspace::new(&s);
        let w = BoundaryFn::from_fn(&ws.bgrid, 1, |_, _, o| o[0] = C64::new(2.0, -1.0));
        let (psi, sharp, q) = extend_boundary(&ws, &w).unwrap();
        let c = C64::new(2.0, -1.0);
        assert!(psi
            .data
            .iter()
            .chain(&sharp.data)
            .all(|v| (v - c).norm() < 1e-12));
        assert!(q.data.iter().all(|v| (v - c).norm() < 1e-12));
        let p = ws.p_operator(&w).unwrap();
        assert!(crate::linalg::max_abs(&p.data) < 1e-12);
        let b = ws.b_operator(&q).unwrap();
        assert!(crate::linalg::max_abs(&b.data) < 1e-12);
    }

    #[test]
    fn kernel_identity_with_attenuation() {
        let s = scene(
            "0.1*x*y",
            "0.3",
            "i*0.2*y",
            "-i*0.1*x",
            "i*0.4*cos(y)",
            small(),
            0.01,
        );
        let ws = Workspace::new(&s);
        let a = BandFn::new(
            1,
            vec![
                (0, vec![parse_expression("sin(x) + i*y").unwrap()]),
                (1, vec![parse_expression("x*y").unwrap()]),
                (-2, vec![parse_expression("0.3*cos(x-y)").unwrap()]),
            ],
        );
        let r = kernel_transform_identity(&ws, &a).unwrap();
        assert!(r.l2 < 1e-6 * r.rhs_norm, "{r:?}");
        // vanishing boundary trace: the transform of (G+A+Φ)a is zero
        let b = TensorField::new(
            0,
            vec![vec![parse_expression("(1-x^2-y^2)*exp(x)").unwrap()]],
        )
        .to_band(&s);
        let r = kernel_transform_identity(&ws, &b).unwrap();
        assert!(r.lhs_norm < 1e-6 && r.rhs_norm < 1e-12, "{r:?}");
    }

    #[test]
    fn extension_map_transpose_and_values() {
        let s = scene("0.1*x", "0.2", "i*0.2*y", "0", "i*0.3", small(), 0.02);
        let ws = Workspace::new(&s);
        let e = ExtensionMap::new(&ws, 1.5, 24, 12).unwrap();
        let g = BoundaryFn::from_fn(&e.big, 1, |a, b, o| o[0] = C64::new(a.sin(), b));
        let w = BoundaryFn::from_fn(&ws.bgrid, 1, |a, b, o| o[0] = C64::new(b.cos(), a.cos()));
        let l = crate::linalg::dot(&e.apply(&g).data, &w.data);
        let r = crate::linalg::dot(&g.data, &e.transpose(&w).data);
        assert!((l - r).norm() < 1e-10 * l.norm());
        // constant data without attenuation stays constant
        let s0 = scene("0.1*x", "0.2", "0", "0", "0", small(), 0.02);
        let ws0 = Workspace::new(&s0);
        let e0 = ExtensionMap::new(&ws0, 1.5, 24, 12).unwrap();
        let one = BoundaryFn::from_fn(&e0.big, 1, |_, _, o| o[0] = C64::new(1.0, 0.0));
        assert!(e0.apply(&one).data.iter().all(|v| (v - 1.0).norm() < 1e-12));
    }

    #[test]
    fn extension_data_is_flow_invariant_without_attenuation() {
        // flat, no attenuation: w = g∘(backward exit at radius 1.5); g = cos θ is invariant
        let s = scene("0", "0", "0", "0", "0", small(), 0.02);
        let ws = Workspace::new(&s);
        let w = ws
            .extension_data(1.5, &|big_s, big_phi, o: &mut [C64]| {
                o[0] = C64::new((big_s + PI + big_phi).cos(), 0.0)
            })
            .unwrap();
        for (idx, sp, phi) in ws.bgrid.points() {
            assert!((w.at(idx)[0].re - (sp + PI + phi).cos()).abs() < 1e-9);
        }
    }
}
