//! Identity checks, the range characterization and the verification suite.

pub mod checks;
pub mod report;

use std::f64::consts::TAU;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::adjoint::{
    adjoint_transform, compatibility_defect, solve_adjoint_pair, AdjointSolveOptions,
    AdjointSolveReport,
};
use crate::calculus::{decompose_one_form, harmonic_forms, solve_beta, DiskBasis, GridCalculus};
use crate::error::Result;
use crate::expr::Expr;
use crate::functions::{GridField, OneForm, TensorField};
use crate::krylov::CgneOptions;
use crate::linalg::{C64, ZERO};
use crate::transport::{BoundaryFn, ExtensionMap, Workspace};

/// Radius of the outer disk used to produce smooth boundary data.
pub const EXTENSION_RADIUS: f64 = 1.5;

/// Extension map on the outer disk at the resolution of the ∂₊ grid.
pub fn extension_map(ws: &Workspace) -> Result<ExtensionMap> {
    ExtensionMap::new(ws, EXTENSION_RADIUS, ws.bgrid.ns, ws.bgrid.nphi)
}

/// Band-limited trigonometric data g(S, φ) on the inward boundary of a disk.
#[derive(Debug, Clone)]
pub struct TrigData {
    pub n: usize,
    /// (a, b, coefficient per component) for e^{iaS}e^{ibφ}.
    pub terms: Vec<(i32, i32, Vec<C64>)>,
}

impl TrigData {
    pub fn random(n: usize, band: i32, rng: &mut impl Rng) -> Self {
        let mut terms = Vec::new();
        for a in -band..=band {
            for b in -band..=band {
                let damp = 1.0 / (1.0 + (a * a + b * b) as f64);
                let c = (0..n)
                    .map(|_| C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)) * damp)
                    .collect();
                terms.push((a, b, c));
            }
        }
        TrigData { n, terms }
    }

    pub fn eval(&self, s: f64, phi: f64, out: &mut [C64]) {
        out[..self.n].fill(ZERO);
        for (a, b, c) in &self.terms {
            let e = C64::from_polar(1.0, *a as f64 * s + *b as f64 * phi);
            for i in 0..self.n {
                out[i] += c[i] * e;
            }
        }
    }
}

pub fn seeded(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Smooth random w on ∂₊SM: the restriction of a transport solution from the
/// disk of radius 1.5.
pub fn smooth_boundary_data(ws: &Workspace, band: i32, rng: &mut impl Rng) -> Result<BoundaryFn> {
    smooth_boundary_data_with(ws, &TrigData::random(ws.n(), band, rng))
}

pub fn smooth_boundary_data_with(ws: &Workspace, g: &TrigData) -> Result<BoundaryFn> {
    ws.extension_data(EXTENSION_RADIUS, &|s, phi, o| g.eval(s, phi, o))
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct RangeIdentityReport {
    /// ‖−2πPw − RHS‖_μ / ‖−2πPw‖_μ.
    pub residual: f64,
    pub lhs_norm: f64,
    pub rhs_norm: f64,
    /// Relative defect of d_A*(I¹)*w = cΦ(I⁰)*w for c = 1 and c = 2.
    pub compatibility: [f64; 2],
}

/// −2πPw against I⁰⋆d_A(I¹)*w + I¹⋆d_A(I⁰)*w.
pub fn range_identity_check(ws: &Workspace, w: &BoundaryFn) -> Result<RangeIdentityReport> {
    let mut lhs = ws.p_operator(w)?;
    lhs.data.iter_mut().for_each(|v| *v *= -TAU);
    let adj = adjoint_transform(ws, w)?;
    let gc = GridCalculus::new(&ws.scene, &ws.grid);
    let g0 = gc.star_d_a_one_form(&adj.omega);
    let g1 = gc.star_d_a(&adj.f);
    let mut rhs = ws.ray_transform(&GridField::zero_form(&ws.grid, &ws.scene, &g0))?;
    let r1 = ws.ray_transform(&GridField::one_form(&ws.grid, &ws.scene, &g1))?;
    rhs.axpy(C64::new(1.0, 0.0), &r1);
    let mut diff = lhs.clone();
    diff.axpy(C64::new(-1.0, 0.0), &rhs);
    let lhs_norm = ws.mu_norm(&lhs);
    Ok(RangeIdentityReport {
        residual: ws.mu_norm(&diff) / lhs_norm.max(f64::MIN_POSITIVE),
        lhs_norm,
        rhs_norm: ws.mu_norm(&rhs),
        compatibility: [
            compatibility_defect(ws, &adj.f, &adj.omega, 1.0),
            compatibility_defect(ws, &adj.f, &adj.omega, 2.0),
        ],
    })
}

/// Outcome of the constructive range-membership chain.
#[derive(Debug, Clone, Serialize)]
pub struct MembershipReport {
    /// ‖u − (I¹η − 2πPw)‖_μ / ‖u‖_μ.
    pub residual: f64,
    pub u_norm: f64,
    pub harmonic_dim: usize,
    pub decomposition_residual: f64,
    pub beta_residual: [f64; 2],
    pub adjoint: AdjointSolveReport,
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct MembershipOptions {
    pub degree: usize,
    pub solve: AdjointSolveOptions,
    /// Solve for outer-disk data g with w = Ũg instead of w directly.
    pub extension: bool,
}

impl Default for MembershipOptions {
    fn default() -> Self {
        MembershipOptions {
            degree: 12,
            solve: AdjointSolveOptions {
                cg: CgneOptions {
                    tol: 1e-4,
                    max_iter: 500,
                },
                ..Default::default()
            },
            extension: true,
        }
    }
}

/// Representation u = I¹η − 2πPw of u = I⁰f + I¹ω, built by decomposing
/// ω = d_Ap + ⋆d_Aa + η, solving ⋆d_Aβ = f − Φp, d_A*β = Φa, and finding w
/// with (I⁰)*w = a, (I¹)*w = β.
pub fn range_membership(
    ws: &Workspace,
    f: &[Expr],
    omega: &OneForm,
    opts: MembershipOptions,
) -> Result<(BoundaryFn, MembershipReport)> {
    let scene = &ws.scene;
    let n = ws.n();
    let u = {
        let band = TensorField::new(0, vec![f.to_vec()])
            .to_band(scene)
            .add(&omega.to_band(scene));
        ws.ray_transform(&band)?
    };
    let basis = Arc::new(DiskBasis::new(opts.degree));
    let harmonic = harmonic_forms(scene, &basis)?;
    let (ox, oy): (Vec<_>, Vec<_>) = (
        omega.ax.iter().map(Expr::compile).collect(),
        omega.ay.iter().map(Expr::compile).collect(),
    );
    let alpha = |x: f64, y: f64, o: &mut [C64]| {
        for c in 0..n {
            o[c] = ox[c].eval(x, y);
            o[n + c] = oy[c].eval(x, y);
        }
    };
    let dec = decompose_one_form(scene, &basis, &harmonic, &alpha)?;
    let fp: Vec<_> = f.iter().map(Expr::compile).collect();
    let rhs_f = |x: f64, y: f64, o: &mut [C64]| {
        let mut pv = vec![ZERO; n];
        dec.p.value(x, y, &mut pv);
        let mut t = vec![ZERO; n];
        scene.phi(x, y).mul_vec(&pv, &mut t);
        for c in 0..n {
            o[c] = fp[c].eval(x, y) - t[c];
        }
    };
    let rhs_a = |x: f64, y: f64, o: &mut [C64]| dec.a.value(x, y, o);
    let beta = solve_beta(scene, &basis, &rhs_f, &rhs_a, opts.solve.factor)?;
    let a_s = dec.a.sample(&ws.grid);
    let b_s = beta.beta.sample(&ws.grid);
    let ext = if opts.extension {
        Some(extension_map(ws)?)
    } else {
        None
    };
    let (w, adj) = solve_adjoint_pair(ws, &a_s, &b_s, ext.as_ref(), opts.solve)?;
    let mut rep = ws.p_operator(&w)?;
    rep.data.iter_mut().for_each(|v| *v *= -TAU);
    if harmonic.dim() > 0 {
        rep.axpy(C64::new(1.0, 0.0), &ws.ray_transform(&dec.eta)?);
    }
    let mut diff = u.clone();
    diff.axpy(C64::new(-1.0, 0.0), &rep);
    let u_norm = ws.mu_norm(&u);
    Ok((
        w,
        MembershipReport {
            residual: ws.mu_norm(&diff) / u_norm.max(f64::MIN_POSITIVE),
            u_norm,
            harmonic_dim: harmonic.dim(),
            decomposition_residual: dec.residual,
            beta_residual: [beta.curl_residual, beta.div_residual],
            adjoint: adj,
        },
    ))
}

#[cfg(test)]
mod tests {
    use super::checks::{transition_residual, Status};
    use super::report::{run_suite, DEFAULT_SEED};
    use super::*;
    use crate::functions::BandFn;
    use crate::scene::{GridParams, Scene, SceneSpec};

    const SMALL: GridParams = GridParams {
        nx: 24,
        ntheta: 16,
        ns: 24,
        nphi: 12,
    };

    fn small(lambda: &str) -> Scene {
        Scene::from_spec(&SceneSpec::scalar("0", lambda, "0", "0", "i*0.3").with_grid(SMALL))
            .unwrap()
    }

    #[test]
    fn empty_selection_passes() {
        let r = run_suite(&small("0"), &[], DEFAULT_SEED).unwrap();
        assert!(r.checks.is_empty() && r.simplicity.is_none() && r.passed());
    }

    #[test]
    fn unknown_check_is_an_error() {
        assert!(run_suite(&small("0"), &["nope"], DEFAULT_SEED).is_err());
    }

    #[test]
    fn non_simple_scene_skips_gated_checks() {
        let r = run_suite(&small("2"), &["pairing", "fiber"], DEFAULT_SEED).unwrap();
        assert!(!r.simplicity.as_ref().unwrap().simple);
        assert_eq!(r.checks[0].status, Status::Skipped);
        assert_eq!(r.checks[1].status, Status::Pass);
        assert!(r.passed());
    }

    #[test]
    fn reports_are_deterministic() {
        let s = small("0.2");
        let strip = |mut r: super::report::SuiteReport| {
            r.checks.iter_mut().for_each(|c| c.wall_time = 0.0);
            r.to_json().unwrap()
        };
        let a = strip(run_suite(&s, &["euclidean", "fiber"], 7).unwrap());
        let b = strip(run_suite(&s, &["euclidean", "fiber"], 7).unwrap());
        assert_eq!(a, b);
    }

    #[test]
    fn untwisted_transition_is_exact() {
        let ws = Workspace::new(&small("0.2"));
        let u = BandFn::random(1, &[-1, 0, 1], &mut seeded(3), 1.0);
        assert!(transition_residual(&ws, 0, &u).unwrap() < 1e-14);
    }

    #[test]
    fn trig_data_is_reproducible() {
        let a = TrigData::random(2, 2, &mut seeded(5));
        let b = TrigData::random(2, 2, &mut seeded(5));
        let (mut x, mut y) = ([ZERO; 2], [ZERO; 2]);
        a.eval(0.3, -0.4, &mut x);
        b.eval(0.3, -0.4, &mut y);
        assert_eq!(x, y);
    }

    #[test]
    fn zero_data_gives_zero_membership() {
        let ws = Workspace::new(&small("0.1"));
        let (w, rep) = range_membership(
            &ws,
            &[Expr::Num(0.0)],
            &OneForm::zero(1),
            MembershipOptions::default(),
        )
        .unwrap();
        assert_eq!(rep.u_norm, 0.0);
        assert!(w.data.iter().all(|v| v.norm() == 0.0));
    }
}
