//! Adjoint transforms (I⁰)* and (I¹)*, normal-operator symbol probes and the
//! least-squares solvers built on them.
//!
//! With u = U h_ψ on the SM grid:
//! (I⁰)*h = ∫ u dθ, paired with e^{2σ}dx dy, and
//! (I¹)*h = e^{σ}∫ (cos θ, sin θ) u dθ, a 1-form paired with the Euclidean
//! (conformally invariant) 1-form product. Equivalently 2π u₀ and π(u₋₁ + u₁).

use std::f64::consts::{PI, TAU};

use rayon::prelude::*;
use serde::Serialize;

use crate::calculus::GridCalculus;
use crate::error::{MagrayError, Result};
use crate::flow::{Direction, Tracer};
use crate::functions::{BandFn, GridField, TensorField};
use crate::grid::{fiber_angles, DiskQuadrature};
use crate::harmonics::FiberGridFn;
use crate::krylov::{cgne, CgneOptions, CgneReport, LinearMap};
use crate::linalg::{C64, ZERO};
use crate::scene::Scene;
use crate::transport::{simpson_quadrature, BoundaryFn, ExtensionMap, Workspace};

/// (I⁰)*h as [node][n] and (I¹)*h as [node][x comps, y comps].
#[derive(Debug, Clone)]
pub struct AdjointResult {
    pub f: Vec<C64>,
    pub omega: Vec<C64>,
}

fn esig_nodes(ws: &Workspace) -> Vec<f64> {
    ws.grid
        .xy
        .iter()
        .map(|p| ws.scene.sigma(p[0], p[1]).exp())
        .collect()
}

/// Fiber integrals of a sampled u: (∫u dθ, e^σ∫(cos, sin)u dθ).
fn fiber_integrals(u: &FiberGridFn, esig: &[f64]) -> AdjointResult {
    let (nt, n) = (u.ntheta, u.nc);
    let dth = TAU / nt as f64;
    let th = fiber_angles(nt);
    let mut f = vec![ZERO; u.nodes * n];
    let mut omega = vec![ZERO; u.nodes * 2 * n];
    for k in 0..u.nodes {
        for (l, t) in th.iter().enumerate() {
            let v = u.at(k, l);
            let (s, c) = t.sin_cos();
            for i in 0..n {
                f[k * n + i] += v[i] * dth;
                omega[k * 2 * n + i] += v[i] * (dth * c * esig[k]);
                omega[k * 2 * n + n + i] += v[i] * (dth * s * esig[k]);
            }
        }
    }
    AdjointResult { f, omega }
}

fn fiber_integrals_transpose(
    f: &[C64],
    omega: &[C64],
    nodes: usize,
    nt: usize,
    n: usize,
    esig: &[f64],
) -> FiberGridFn {
    let dth = TAU / nt as f64;
    let th = fiber_angles(nt);
    let mut u = FiberGridFn::zeros(nodes, nt, n);
    for k in 0..nodes {
        for (l, t) in th.iter().enumerate() {
            let (s, c) = t.sin_cos();
            let o = u.at_mut(k, l);
            for i in 0..n {
                o[i] = (f[k * n + i]
                    + (omega[k * 2 * n + i] * c + omega[k * 2 * n + n + i] * s) * esig[k])
                    * dth;
            }
        }
    }
    u
}

pub fn adjoint_transform(ws: &Workspace, h: &BoundaryFn) -> Result<AdjointResult> {
    let u = ws.sharp_extension(h)?;
    Ok(fiber_integrals(&u, &esig_nodes(ws)))
}

/// The same adjoints from fiber modes: 2π u₀ and ω_x ∓ iω_y = 2π e^σ u_{±1}.
pub fn adjoint_transform_modes(ws: &Workspace, h: &BoundaryFn) -> Result<AdjointResult> {
    let u = ws.sharp_extension(h)?;
    let m = u.modes();
    let esig = esig_nodes(ws);
    let n = h.nc;
    let mut f = vec![ZERO; u.nodes * n];
    let mut omega = vec![ZERO; u.nodes * 2 * n];
    let i = C64::new(0.0, 1.0);
    for k in 0..u.nodes {
        let (u0, u1, um1) = (m.mode(k, 0), m.mode(k, 1), m.mode(k, -1));
        for c in 0..n {
            f[k * n + c] = u0[c] * TAU;
            omega[k * 2 * n + c] = (u1[c] + um1[c]) * (PI * esig[k]);
            omega[k * 2 * n + n + c] = (u1[c] - um1[c]) * i * (PI * esig[k]);
        }
    }
    Ok(AdjointResult { f, omega })
}

/// max difference between the frame-integral and mode-projection adjoints.
pub fn adjoint_cross_check(ws: &Workspace, h: &BoundaryFn) -> Result<f64> {
    let a = adjoint_transform(ws, h)?;
    let b = adjoint_transform_modes(ws, h)?;
    let d = |x: &[C64], y: &[C64]| {
        x.iter()
            .zip(y)
            .map(|(p, q)| (p - q).norm())
            .fold(0.0, f64::max)
    };
    Ok(d(&a.f, &b.f).max(d(&a.omega, &b.omega)))
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct PairingReport {
    pub order: usize,
    pub lhs_re: f64,
    pub lhs_im: f64,
    /// |⟨I^k f, h⟩_μ − ⟨f, (I^k)*h⟩| / (‖f‖‖h‖).
    pub relative: f64,
}

/// Checks ⟨I^k f, h⟩_μ = ⟨f, (I^k)*h⟩ for k ∈ {0, 1}. The left side uses the
/// ray-driven forward transform of the analytic tensor; the right side the
/// grid adjoint integrated over the disk with a polar rule.
pub fn adjoint_pairing(
    ws: &Workspace,
    f: &TensorField,
    h: &BoundaryFn,
    quad: &DiskQuadrature,
) -> Result<PairingReport> {
    let k = f.order;
    if k > 1 {
        return Err(MagrayError::Invalid(
            "pairing is defined for orders 0 and 1".into(),
        ));
    }
    let n = f.rank();
    let band: BandFn = f.to_band(&ws.scene);
    let ihf = ws.ray_transform(&band)?;
    let lhs = ws.mu_dot(&ihf, h);
    let adj = adjoint_transform(ws, h)?;
    let (vals, nc) = if k == 0 {
        (adj.f, n)
    } else {
        (adj.omega, 2 * n)
    };
    let ext = ws.grid.extend(&vals, nc);
    let progs: Vec<Vec<_>> = f
        .comps
        .iter()
        .map(|c| c.iter().map(|e| e.compile()).collect())
        .collect();
    let mut rhs = ZERO;
    let mut fnorm = 0.0;
    let mut buf = vec![ZERO; nc];
    for (p, w) in quad.pts.iter().zip(&quad.w) {
        let (x, y) = (p[0], p[1]);
        ws.grid.interp(&ext, nc, &ws.grid.stencil(x, y), &mut buf);
        let wt = if k == 0 {
            w * (2.0 * ws.scene.sigma(x, y)).exp()
        } else {
            *w
        };
        for (j, comp) in progs.iter().enumerate() {
            for c in 0..n {
                let fv = comp[c].eval(x, y);
                rhs += fv * buf[j * n + c].conj() * wt;
                fnorm += fv.norm_sqr() * wt;
            }
        }
    }
    let scale = fnorm.sqrt() * ws.mu_norm(h);
    Ok(PairingReport {
        order: k,
        lhs_re: lhs.re,
        lhs_im: lhs.im,
        relative: (lhs - rhs).norm() / scale.max(f64::MIN_POSITIVE),
    })
}

/// w ↦ ((I⁰)*w, (I¹)*w), optionally precomposed with an extension map.
pub struct AdjointPairMap<'a> {
    ws: &'a Workspace,
    esig: Vec<f64>,
    ext: Option<&'a ExtensionMap>,
}

impl<'a> AdjointPairMap<'a> {
    pub fn new(ws: &'a Workspace, ext: Option<&'a ExtensionMap>) -> Self {
        AdjointPairMap {
            ws,
            esig: esig_nodes(ws),
            ext,
        }
    }

    fn boundary(&self, x: &[C64]) -> BoundaryFn {
        let n = self.ws.n();
        match self.ext {
            Some(e) => {
                let mut g = e.zeros();
                g.data.copy_from_slice(x);
                e.apply(&g)
            }
            None => BoundaryFn {
                ns: self.ws.bgrid.ns,
                nphi: self.ws.bgrid.nphi,
                nc: n,
                data: x.to_vec(),
            },
        }
    }

    /// Range weights: h²e^{2σ} for the function part, h² for the 1-form part.
    pub fn range_weights(&self) -> Vec<f64> {
        let n = self.ws.n();
        let a = self.ws.grid.cell_area();
        let mut w = Vec::with_capacity(self.dim_out());
        for e in &self.esig {
            w.extend(std::iter::repeat(a * e * e).take(n));
        }
        w.extend(std::iter::repeat(a).take(self.ws.grid.len() * 2 * n));
        w
    }

    pub fn domain_weights(&self) -> Vec<f64> {
        let n = self.ws.n();
        let mu = match self.ext {
            Some(e) => &e.mu,
            None => &self.ws.mu,
        };
        mu.iter()
            .flat_map(|m| std::iter::repeat(*m).take(n))
            .collect()
    }

    pub fn stack(&self, f: &[C64], omega: &[C64]) -> Vec<C64> {
        let mut v = f.to_vec();
        v.extend_from_slice(omega);
        v
    }

    pub fn to_boundary(&self, x: &[C64]) -> BoundaryFn {
        self.boundary(x)
    }
}

impl LinearMap for AdjointPairMap<'_> {
    fn dim_in(&self) -> usize {
        let n = self.ws.n();
        match self.ext {
            Some(e) => e.big.len() * n,
            None => self.ws.bgrid.len() * n,
        }
    }

    fn dim_out(&self) -> usize {
        self.ws.grid.len() * 3 * self.ws.n()
    }

    fn apply(&self, x: &[C64]) -> Result<Vec<C64>> {
        let r = adjoint_transform(self.ws, &self.boundary(x))?;
        Ok(self.stack(&r.f, &r.omega))
    }

    fn apply_adjoint(&self, y: &[C64]) -> Result<Vec<C64>> {
        let n = self.ws.n();
        let nodes = self.ws.grid.len();
        let (f, omega) = y.split_at(nodes * n);
        let u = fiber_integrals_transpose(f, omega, nodes, self.ws.ntheta, n, &self.esig);
        let w = self.ws.sharp_extension_transpose(&u)?;
        Ok(match self.ext {
            Some(e) => e.transpose(&w).data,
            None => w.data,
        })
    }
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct AdjointSolveOptions {
    pub cg: CgneOptions,
    /// c in the compatibility condition d_A*ω = cΦf.
    pub factor: f64,
}

impl Default for AdjointSolveOptions {
    fn default() -> Self {
        AdjointSolveOptions {
            cg: CgneOptions::default(),
            factor: 1.0,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct AdjointSolveReport {
    /// ‖d_A*ω − cΦf‖ / (‖d_A*ω‖ + ‖cΦf‖).
    pub compatibility: f64,
    pub factor: f64,
    pub cg: CgneReport,
}

/// Relative defect of d_A*ω = cΦf for grid samples.
pub fn compatibility_defect(ws: &Workspace, f: &[C64], omega: &[C64], factor: f64) -> f64 {
    let gc = GridCalculus::new(&ws.scene, &ws.grid);
    let ds = gc.d_a_star(omega);
    let mut pf = gc.phi_apply(f);
    pf.iter_mut().for_each(|v| *v *= factor);
    let diff: Vec<C64> = ds.iter().zip(&pf).map(|(a, b)| a - b).collect();
    let scale = gc.fn_norm(&ds) + gc.fn_norm(&pf);
    if scale == 0.0 {
        return 0.0;
    }
    gc.fn_norm(&diff) / scale
}

/// Finds w with (I⁰)*w = f and (I¹)*w = ω by CGNE. With an extension map the
/// unknown is the outer-disk data g and w = Ũg.
pub fn solve_adjoint_pair(
    ws: &Workspace,
    f: &[C64],
    omega: &[C64],
    ext: Option<&ExtensionMap>,
    opts: AdjointSolveOptions,
) -> Result<(BoundaryFn, AdjointSolveReport)> {
    let map = AdjointPairMap::new(ws, ext);
    let b = map.stack(f, omega);
    let (x, cg) = cgne(
        &map,
        &b,
        &map.range_weights(),
        &map.domain_weights(),
        opts.cg,
    )?;
    let w = map.to_boundary(&x);
    Ok((
        w,
        AdjointSolveReport {
            compatibility: compatibility_defect(ws, f, omega, opts.factor),
            factor: opts.factor,
            cg,
        },
    ))
}

/// I⁰ acting on grid 0-forms (bicubic interpolation), with its exact transpose.
pub struct ZeroFormTransform<'a> {
    ws: &'a Workspace,
}

impl<'a> ZeroFormTransform<'a> {
    pub fn new(ws: &'a Workspace) -> Self {
        ZeroFormTransform { ws }
    }

    pub fn domain_weights(&self) -> Vec<f64> {
        let a = self.ws.grid.cell_area();
        let n = self.ws.n();
        esig_nodes(self.ws)
            .iter()
            .flat_map(|e| std::iter::repeat(a * e * e).take(n))
            .collect()
    }

    pub fn range_weights(&self) -> Vec<f64> {
        let n = self.ws.n();
        self.ws
            .mu
            .iter()
            .flat_map(|m| std::iter::repeat(*m).take(n))
            .collect()
    }
}

impl LinearMap for ZeroFormTransform<'_> {
    fn dim_in(&self) -> usize {
        self.ws.grid.len() * self.ws.n()
    }

    fn dim_out(&self) -> usize {
        self.ws.bgrid.len() * self.ws.n()
    }

    fn apply(&self, x: &[C64]) -> Result<Vec<C64>> {
        let g = GridField::zero_form(&self.ws.grid, &self.ws.scene, x);
        Ok(self.ws.ray_transform(&g)?.data)
    }

    fn apply_adjoint(&self, y: &[C64]) -> Result<Vec<C64>> {
        let h = BoundaryFn {
            ns: self.ws.bgrid.ns,
            nphi: self.ws.bgrid.nphi,
            nc: self.ws.n(),
            data: y.to_vec(),
        };
        self.ws.ray_transform_zero_form_transpose(&h)
    }
}

/// Recovers a grid function f from data d ≈ I⁰f by CGNE, i.e. inverts N⁰⁰.
pub fn invert_zero_form(
    ws: &Workspace,
    data: &BoundaryFn,
    opts: CgneOptions,
) -> Result<(Vec<C64>, CgneReport)> {
    let map = ZeroFormTransform::new(ws);
    cgne(
        &map,
        &data.data,
        &map.range_weights(),
        &map.domain_weights(),
        opts,
    )
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct ProbeOptions {
    pub ntheta: usize,
    /// Spacing of the probe points inside the bump.
    pub spacing: f64,
    pub radius: f64,
    pub dt: f64,
}

impl Default for ProbeOptions {
    fn default() -> Self {
        ProbeOptions {
            ntheta: 128,
            spacing: 0.04,
            radius: 0.5,
            dt: 0.02,
        }
    }
}

/// Amplitudes of the four normal-operator blocks at κ and 2κ.
#[derive(Debug, Clone, Serialize)]
pub struct ProbeReport {
    pub kappa: f64,
    /// [block][frequency]: blocks 00, 01, 10, 11.
    pub amplitude: [[f64; 2]; 4],
    /// amplitude₀₀(κ) / amplitude₀₀(2κ).
    pub decay_00: f64,
    /// amplitude₁₁(κ) / amplitude₀₀(κ).
    pub ratio_11_00: f64,
    /// Off-diagonal amplitudes relative to block 00, [block 01, block 10][frequency].
    pub off_diagonal: [[f64; 2]; 2],
}

pub const BLOCK_NAMES: [&str; 4] = ["00", "01", "10", "11"];

/// Probes N = (I^{0,1})*I^{0,1} on e^{iκx}b(r) for the scalar input and on
/// e^{iκx}b(r)(dx − i dy) for the 1-form input. Each probe point integrates
/// over full lines through it, so no boundary interpolation is involved.
/// 1-form outputs are projected on (ω_x + iω_y)/2.
pub fn normal_probe(scene: &Scene, kappa: f64, opts: ProbeOptions) -> Result<ProbeReport> {
    let limit = PI * scene.grid.nx as f64 / 4.0;
    if 2.0 * kappa > limit || kappa <= 0.0 {
        return Err(MagrayError::FrequencyUnresolvable {
            kappa: 2.0 * kappa,
            limit,
        });
    }
    let r0 = opts.radius;
    let bump = move |x: f64, y: f64| {
        let q = (x * x + y * y) / (r0 * r0);
        if q >= 1.0 {
            0.0
        } else {
            (1.0 - q).powi(4)
        }
    };
    let m = (r0 / opts.spacing).floor() as i32;
    let pts: Vec<[f64; 2]> = (-m..=m)
        .flat_map(|i| (-m..=m).map(move |j| [i as f64 * opts.spacing, j as f64 * opts.spacing]))
        .filter(|p| p[0].hypot(p[1]) < r0)
        .collect();
    let tracer = Tracer::new(scene).with_dt(opts.dt);
    let th = fiber_angles(opts.ntheta);
    let dth = TAU / opts.ntheta as f64;
    let freqs = [kappa, 2.0 * kappa];
    // out[p][block][freq]
    let outs: Vec<[[C64; 2]; 4]> = pts
        .par_iter()
        .map(
            |p| -> std::result::Result<[[C64; 2]; 4], crate::flow::TrappedRay> {
                let mut acc = [[ZERO; 2]; 4];
                let es = scene.sigma(p[0], p[1]).exp();
                for &t in &th {
                    // J[input kind][freq], first component of U⁻¹ F with F = e₁ φ
                    let mut j = [[ZERO; 2]; 2];
                    for dir in [Direction::Forward, Direction::Backward] {
                        let ray = tracer.trace([p[0], p[1], t], dir)?;
                        let (qp, qw, qu) = simpson_quadrature(&ray);
                        for (q, z) in qp.iter().enumerate() {
                            let b = bump(z[0], z[1]);
                            if b == 0.0 {
                                continue;
                            }
                            let w = qw[q] * b;
                            let u11 = if qu.is_empty() {
                                C64::new(1.0, 0.0)
                            } else {
                                qu[q][(0, 0)].conj()
                            };
                            let one = C64::from_polar((-scene.sigma(z[0], z[1])).exp(), -z[2]);
                            for (fi, k) in freqs.iter().enumerate() {
                                let ph = C64::from_polar(w, k * z[0]) * u11;
                                j[0][fi] += ph;
                                j[1][fi] += ph * one;
                            }
                        }
                    }
                    let e = C64::from_polar(0.5 * es, t);
                    for fi in 0..2 {
                        acc[0][fi] += j[0][fi] * dth;
                        acc[1][fi] += j[1][fi] * dth;
                        acc[2][fi] += j[0][fi] * e * dth;
                        acc[3][fi] += j[1][fi] * e * dth;
                    }
                }
                Ok(acc)
            },
        )
        .collect::<std::result::Result<_, _>>()?;
    let wsum: f64 = pts.iter().map(|p| bump(p[0], p[1])).sum();
    let mut amplitude = [[0.0; 2]; 4];
    for b in 0..4 {
        for (fi, k) in freqs.iter().enumerate() {
            let s: C64 = pts
                .iter()
                .zip(&outs)
                .map(|(p, o)| o[b][fi] * C64::from_polar(bump(p[0], p[1]), -k * p[0]))
                .sum();
            amplitude[b][fi] = s.norm() / wsum;
        }
    }
    Ok(ProbeReport {
        kappa,
        decay_00: amplitude[0][0] / amplitude[0][1],
        ratio_11_00: amplitude[3][0] / amplitude[0][0],
        off_diagonal: [
            [
                amplitude[1][0] / amplitude[0][0],
                amplitude[1][1] / amplitude[0][1],
            ],
            [
                amplitude[2][0] / amplitude[0][0],
                amplitude[2][1] / amplitude[0][1],
            ],
        ],
        amplitude,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::parse_expression;
    use crate::scene::{GridParams, SceneSpec};

    fn ws(sigma: &str, lambda: &str, ax: &str, ay: &str, phi: &str, nx: usize) -> Workspace {
        let g = GridParams {
            nx,
            ntheta: 32,
            ns: 48,
            nphi: 24,
        };
        let s = Scene::from_spec(
            &SceneSpec::scalar(sigma, lambda, ax, ay, phi)
                .with_grid(g)
                .with_dt(0.02),
        )
        .unwrap();
        Workspace::new(&s)
    }

    #[test]
    fn constants_in_the_flat_case() {
        let w = ws("0", "0", "0", "0", "0", 24);
        let one = BoundaryFn::from_fn(&w.bgrid, 1, |_, _, o| o[0] = C64::new(1.0, 0.0));
        let a = adjoint_transform(&w, &one).unwrap();
        assert!(a.f.iter().all(|v| (v - TAU).norm() < 1e-12));
        assert!(a.omega.iter().all(|v| v.norm() < 1e-12));
        assert!(adjoint_cross_check(&w, &one).unwrap() < 1e-12);
    }

    #[test]
    fn transpose_of_pair_map_is_exact() {
        let w = ws("0.1*x", "0.2", "i*0.1*y", "0", "i*0.3", 20);
        let map = AdjointPairMap::new(&w, None);
        let x: Vec<C64> = (0..map.dim_in())
            .map(|k| C64::new((k as f64 * 0.37).sin(), (k as f64 * 0.11).cos()))
            .collect();
        let y: Vec<C64> = (0..map.dim_out())
            .map(|k| C64::new((k as f64 * 0.23).cos(), (k as f64 * 0.05).sin()))
            .collect();
        let l = crate::linalg::dot(&map.apply(&x).unwrap(), &y);
        let r = crate::linalg::dot(&x, &map.apply_adjoint(&y).unwrap());
        assert!((l - r).norm() < 1e-10 * l.norm());
        let z = ZeroFormTransform::new(&w);
        let x: Vec<C64> = (0..z.dim_in())
            .map(|k| C64::new((k as f64 * 0.37).sin(), 0.2))
            .collect();
        let y: Vec<C64> = (0..z.dim_out())
            .map(|k| C64::new((k as f64 * 0.23).cos(), -0.1))
            .collect();
        let l = crate::linalg::dot(&z.apply(&x).unwrap(), &y);
        let r = crate::linalg::dot(&x, &z.apply_adjoint(&y).unwrap());
        assert!((l - r).norm() < 1e-10 * l.norm());
    }

    #[test]
    fn pairing_closes_for_both_orders() {
        let w = ws("0.1*x*y", "0.3", "i*0.2*y", "-i*0.1", "i*0.4*x", 40);
        let q = DiskQuadrature::new(24, 64);
        let h = BoundaryFn::from_fn(&w.bgrid, 1, |s, phi, o| {
            o[0] = C64::new((2.0 * s).cos() + phi, phi.sin() * s.sin())
        });
        let f0 = TensorField::new(
            0,
            vec![vec![parse_expression("exp(x)*cos(y) + i*x*y").unwrap()]],
        );
        let r = adjoint_pairing(&w, &f0, &h, &q).unwrap();
        assert!(r.relative < 1e-3, "{r:?}");
        let f1 = TensorField::new(
            1,
            vec![
                vec![parse_expression("y^2 - i*x").unwrap()],
                vec![parse_expression("sin(x+y)").unwrap()],
            ],
        );
        let r = adjoint_pairing(&w, &f1, &h, &q).unwrap();
        assert!(r.relative < 1e-3, "{r:?}");
    }

    #[test]
    fn compatibility_factor_one() {
        let w = ws("0.1*x*y", "0.3", "i*0.2*y", "-i*0.1", "i*(0.5+0.3*x)", 40);
        let e = ExtensionMap::new(&w, 1.5, 48, 24).unwrap();
        let g = BoundaryFn::from_fn(&e.big, 1, |s, phi, o| {
            o[0] = C64::new(s.cos() + 0.5 * phi, (2.0 * s).sin())
        });
        let a = adjoint_transform(&w, &e.apply(&g)).unwrap();
        let c1 = compatibility_defect(&w, &a.f, &a.omega, 1.0);
        let c2 = compatibility_defect(&w, &a.f, &a.omega, 2.0);
        assert!(c1 < 1e-2 && c2 > 0.1, "{c1} {c2}");
    }

    #[test]
    fn probe_rejects_unresolvable_frequency() {
        let s = Scene::from_spec(&SceneSpec::default()).unwrap();
        assert!(matches!(
            normal_probe(&s, 200.0, ProbeOptions::default()),
            Err(MagrayError::FrequencyUnresolvable { .. })
        ));
    }
}
