//! Forms on the disk: the tensor-to-SM map, d_A, d_A*, ⋆d_A, the h-twist, gauge
//! transforms, A-harmonic forms and the two elliptic decompositions used by the
//! range characterization.
//!
//! Symbolic versions act on [`Expr`] components. Grid versions use the
//! fourth-order differences of [`SpatialGrid`]. The elliptic problems are solved
//! by weighted least squares over a polynomial space that is orthonormal on the
//! disk ([`DiskBasis`]); their solutions are [`PolyField`]s.

use std::f64::consts::PI;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::error::{MagrayError, Result};
use crate::expr::{Expr, Func, Var};
use crate::functions::{BandFn, OneForm, SmFunction, TensorField};
use crate::grid::{DiskQuadrature, SpatialGrid};
use crate::linalg::{CMat, C64, ONE, ZERO};
use crate::scene::{ExprMatrix, Scene};

/// f_m as a band-limited SM function; rejects tensors the fiber grid cannot resolve.
pub fn tensor_to_fn(scene: &Scene, f: &TensorField, ntheta: usize) -> Result<BandFn> {
    let limit = (ntheta / 2).saturating_sub(2);
    if f.order > limit {
        return Err(MagrayError::BandLimitExceeded {
            band: f.order,
            limit,
        });
    }
    Ok(f.to_band(scene))
}

fn mat_vec(m: &ExprMatrix, v: &[Expr]) -> Vec<Expr> {
    (0..m.n())
        .map(|i| {
            v.iter().enumerate().fold(Expr::Num(0.0), |acc, (j, e)| {
                Expr::add(acc, Expr::mul(m.get(i, j).clone(), e.clone()))
            })
        })
        .collect()
}

fn zip_with(a: &[Expr], b: &[Expr], f: fn(Expr, Expr) -> Expr) -> Vec<Expr> {
    a.iter()
        .zip(b)
        .map(|(x, y)| f(x.clone(), y.clone()))
        .collect()
}

fn scale_all(s: &Expr, v: &[Expr]) -> Vec<Expr> {
    v.iter().map(|e| Expr::mul(s.clone(), e.clone())).collect()
}

fn exp_sigma(scene: &Scene, k: f64) -> Expr {
    Expr::call(
        Func::Exp,
        Expr::mul(Expr::num(k), scene.sigma_expr().clone()),
    )
}

/// d_A f = df + A f.
pub fn d_a(scene: &Scene, f: &[Expr]) -> OneForm {
    let df = OneForm::exact(f);
    OneForm::new(
        zip_with(&df.ax, &mat_vec(scene.ax_expr(), f), Expr::add),
        zip_with(&df.ay, &mat_vec(scene.ay_expr(), f), Expr::add),
    )
}

/// Coefficient c of d_Aα = c dx∧dy.
pub fn d_a_one_form(scene: &Scene, a: &OneForm) -> Vec<Expr> {
    let curl = zip_with(
        &a.ay.iter().map(|e| e.diff(Var::X)).collect::<Vec<_>>(),
        &a.ax.iter().map(|e| e.diff(Var::Y)).collect::<Vec<_>>(),
        Expr::sub,
    );
    let wedge = zip_with(
        &mat_vec(scene.ax_expr(), &a.ay),
        &mat_vec(scene.ay_expr(), &a.ax),
        Expr::sub,
    );
    zip_with(&curl, &wedge, Expr::add)
}

/// ⋆d_Aα = e^{−2σ}(∂xα_y − ∂yα_x + A_xα_y − A_yα_x).
pub fn star_d_a_one_form(scene: &Scene, a: &OneForm) -> Vec<Expr> {
    scale_all(&exp_sigma(scene, -2.0), &d_a_one_form(scene, a))
}

/// ⋆d_A f for a function.
pub fn star_d_a(scene: &Scene, f: &[Expr]) -> OneForm {
    d_a(scene, f).star()
}

/// d_A*β = −⋆d_A⋆β = −e^{−2σ}(div β + A_xβ_x + A_yβ_y).
pub fn d_a_star(scene: &Scene, b: &OneForm) -> Vec<Expr> {
    let inner = d_a_one_form(scene, &b.star());
    scale_all(&Expr::neg(exp_sigma(scene, -2.0)), &inner)
}

/// F_A f, the curvature acting on a section.
pub fn curvature_apply(scene: &Scene, f: &[Expr]) -> Vec<Expr> {
    let ax = scene.ax_expr();
    let ay = scene.ay_expr();
    let f_a = ay
        .diff(Var::X)
        .add(&ax.diff(Var::Y).map(|e| Expr::neg(e.clone())))
        .add(&ax.mul(ay))
        .add(&ay.mul(ax).map(|e| Expr::neg(e.clone())));
    mat_vec(&f_a, f)
}

/// Sampled connection and metric data on a grid.
struct GridCoeffs {
    ax: Vec<CMat>,
    ay: Vec<CMat>,
    phi: Vec<CMat>,
    e2s: Vec<f64>,
}

impl GridCoeffs {
    fn new(scene: &Scene, grid: &SpatialGrid) -> Self {
        let mut c = GridCoeffs {
            ax: Vec::with_capacity(grid.len()),
            ay: Vec::with_capacity(grid.len()),
            phi: Vec::with_capacity(grid.len()),
            e2s: Vec::with_capacity(grid.len()),
        };
        for p in &grid.xy {
            c.ax.push(scene.ax(p[0], p[1]));
            c.ay.push(scene.ay(p[0], p[1]));
            c.phi.push(scene.phi(p[0], p[1]));
            c.e2s.push((2.0 * scene.sigma(p[0], p[1])).exp());
        }
        c
    }
}

/// Differential operators on sampled fields. Functions are [node][n]; 1-forms
/// are [node][x comps, y comps].
pub struct GridCalculus<'a> {
    pub grid: &'a SpatialGrid,
    pub n: usize,
    c: GridCoeffs,
}

impl<'a> GridCalculus<'a> {
    pub fn new(scene: &Scene, grid: &'a SpatialGrid) -> Self {
        GridCalculus {
            grid,
            n: scene.n(),
            c: GridCoeffs::new(scene, grid),
        }
    }

    pub fn d_a(&self, f: &[C64]) -> Vec<C64> {
        let n = self.n;
        let (dx, dy) = self.grid.gradient(f, n);
        let mut out = vec![ZERO; self.grid.len() * 2 * n];
        for k in 0..self.grid.len() {
            let o = &mut out[k * 2 * n..(k + 1) * 2 * n];
            o[..n].copy_from_slice(&dx[k * n..(k + 1) * n]);
            o[n..].copy_from_slice(&dy[k * n..(k + 1) * n]);
            let fk = &f[k * n..(k + 1) * n];
            self.c.ax[k].mul_vec_acc(fk, &mut o[..n]);
            self.c.ay[k].mul_vec_acc(fk, &mut o[n..]);
        }
        out
    }

    pub fn star_d_a(&self, f: &[C64]) -> Vec<C64> {
        let n = self.n;
        let mut w = self.d_a(f);
        for o in w.chunks_mut(2 * n) {
            for c in 0..n {
                let (x, y) = (o[c], o[n + c]);
                o[c] = -y;
                o[n + c] = x;
            }
        }
        w
    }

    /// ∂xα_y − ∂yα_x + A_xα_y − A_yα_x.
    fn d_a_two(&self, a: &[C64]) -> Vec<C64> {
        let n = self.n;
        let (dx, dy) = self.grid.gradient(a, 2 * n);
        let mut out = vec![ZERO; self.grid.len() * n];
        for k in 0..self.grid.len() {
            let o = &mut out[k * n..(k + 1) * n];
            let b = k * 2 * n;
            for c in 0..n {
                o[c] = dx[b + n + c] - dy[b + c];
            }
            let ak = &a[b..b + 2 * n];
            self.c.ax[k].mul_vec_acc(&ak[n..], o);
            let mut t = [ZERO; 8];
            self.c.ay[k].mul_vec_acc(&ak[..n], &mut t[..n]);
            for c in 0..n {
                o[c] -= t[c];
            }
        }
        out
    }

    pub fn star_d_a_one_form(&self, a: &[C64]) -> Vec<C64> {
        let n = self.n;
        let mut out = self.d_a_two(a);
        for (k, o) in out.chunks_mut(n).enumerate() {
            o.iter_mut().for_each(|v| *v /= self.c.e2s[k]);
        }
        out
    }

    pub fn d_a_star(&self, b: &[C64]) -> Vec<C64> {
        let n = self.n;
        let mut star = b.to_vec();
        for o in star.chunks_mut(2 * n) {
            for c in 0..n {
                let (x, y) = (o[c], o[n + c]);
                o[c] = -y;
                o[n + c] = x;
            }
        }
        let mut out = self.d_a_two(&star);
        for (k, o) in out.chunks_mut(n).enumerate() {
            o.iter_mut().for_each(|v| *v /= -self.c.e2s[k]);
        }
        out
    }

    /// Φf at every node.
    pub fn phi_apply(&self, f: &[C64]) -> Vec<C64> {
        let n = self.n;
        let mut out = vec![ZERO; f.len()];
        for (k, (o, v)) in out.chunks_mut(n).zip(f.chunks(n)).enumerate() {
            self.c.phi[k].mul_vec(v, o);
        }
        out
    }

    /// Discrete L²(M, dVol_g) norm of a function.
    pub fn fn_norm(&self, f: &[C64]) -> f64 {
        let n = self.n;
        let s: f64 = f
            .chunks(n)
            .zip(&self.c.e2s)
            .map(|(v, e)| v.iter().map(C64::norm_sqr).sum::<f64>() * e)
            .sum();
        (s * self.grid.cell_area()).sqrt()
    }

    /// Discrete L² norm of a 1-form (conformally invariant pairing).
    pub fn form_norm(&self, a: &[C64]) -> f64 {
        (a.iter().map(C64::norm_sqr).sum::<f64>() * self.grid.cell_area()).sqrt()
    }

    pub fn e2sigma(&self) -> &[f64] {
        &self.c.e2s
    }
}

/// The attenuation pair twisted by h^m with h = e^{iθ}:
/// (A − mA_h, Φ − mΦ_λ), A_h = −i(σ_y dx − σ_x dy), Φ_λ = −iλ.
pub fn twist(scene: &Scene, m: i32) -> Result<Scene> {
    let n = scene.n();
    let im = Expr::complex(C64::new(0.0, m as f64));
    let sx = scene.sigma_expr().diff(Var::X);
    let sy = scene.sigma_expr().diff(Var::Y);
    let ax = scene
        .ax_expr()
        .add_scalar_identity(&Expr::mul(im.clone(), sy));
    let ay = scene
        .ay_expr()
        .add_scalar_identity(&Expr::neg(Expr::mul(im.clone(), sx)));
    let phi = scene
        .phi_expr()
        .add_scalar_identity(&Expr::mul(im, scene.lambda_expr().clone()));
    debug_assert_eq!(ax.n(), n);
    Ok(scene.with_attenuation(ax, ay, phi)?)
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct TwistReport {
    /// sup |−h⁻¹G_μh − (A_h(v) + Φ_λ)| over sample points.
    pub identity_residual: f64,
}

/// Checks −h⁻¹G_μh = A_h + Φ_λ pointwise, with G_μh from a centred difference
/// along the flow.
pub fn twist_identity(scene: &Scene, pts: &[[f64; 3]]) -> TwistReport {
    let mut worst: f64 = 0.0;
    let eps = 1e-5;
    for z in pts {
        let f = crate::flow::flow_rhs(scene, z);
        let h = |s: f64| C64::from_polar(1.0, z[2] + s * f[2]);
        let gh = (h(eps) - h(-eps)) / (2.0 * eps);
        let lhs = -gh / h(0.0);
        let m = scene.metric(z[0], z[1]);
        let (s, c) = z[2].sin_cos();
        let a_h = C64::new(0.0, -1.0) * m.emsig * (m.sy * c - m.sx * s);
        let rhs = a_h + C64::new(0.0, -m.lambda);
        worst = worst.max((lhs - rhs).norm());
    }
    TwistReport {
        identity_residual: worst,
    }
}

/// Gauge G = exp(b·S) with S² = −Id skew-Hermitian and b real, vanishing on ∂M.
#[derive(Debug, Clone)]
pub struct Gauge {
    pub b: Expr,
    pub generator: CMat,
}

impl Gauge {
    pub fn new(b: Expr, generator: CMat) -> Result<Self> {
        let n = generator.n();
        let sq = &generator * &generator;
        if (&sq + &CMat::identity(n)).max_abs() > 1e-12 || generator.skew_defect() > 1e-12 {
            return Err(MagrayError::Invalid(
                "gauge generator must be skew-Hermitian with S² = −Id".into(),
            ));
        }
        Ok(Gauge { b, generator })
    }

    /// A random unit generator: i for n = 1, i(n̂·σ) for n = 2, i·diag(±1) otherwise.
    pub fn random_generator(n: usize, rng: &mut impl rand::Rng) -> CMat {
        match n {
            1 => CMat::scalar(1, C64::new(0.0, 1.0)),
            2 => {
                let v: [f64; 3] = [
                    rng.gen_range(-1.0..1.0),
                    rng.gen_range(-1.0..1.0),
                    rng.gen_range(-1.0..1.0),
                ];
                let r = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt().max(1e-3);
                let (a, b, c) = (v[0] / r, v[1] / r, v[2] / r);
                let i = C64::new(0.0, 1.0);
                CMat::from_rows(&[&[i * c, i * C64::new(a, -b)], &[i * C64::new(a, b), -i * c]])
            }
            _ => {
                let mut m = CMat::zeros(n);
                for k in 0..n {
                    m[(k, k)] = C64::new(0.0, if rng.gen_bool(0.5) { 1.0 } else { -1.0 });
                }
                m
            }
        }
    }

    fn const_matrix(m: &CMat) -> ExprMatrix {
        ExprMatrix::from_entries(
            m.n(),
            m.as_slice().iter().map(|z| Expr::complex(*z)).collect(),
        )
    }

    /// (G, G⁻¹) as expression matrices.
    pub fn matrices(&self) -> (ExprMatrix, ExprMatrix) {
        let n = self.generator.n();
        let s = Self::const_matrix(&self.generator);
        let cos = Expr::call(Func::Cos, self.b.clone());
        let sin = Expr::call(Func::Sin, self.b.clone());
        let g = s.scale(&sin).add_scalar_identity(&cos);
        let gi = s.scale(&Expr::neg(sin)).add_scalar_identity(&cos);
        debug_assert_eq!(g.n(), n);
        (g, gi)
    }

    /// (G⁻¹dG + G⁻¹AG, G⁻¹ΦG).
    pub fn apply(&self, scene: &Scene) -> Result<Scene> {
        let (g, gi) = self.matrices();
        let s = Self::const_matrix(&self.generator);
        let conj = |m: &ExprMatrix| gi.mul(m).mul(&g);
        let ax = s.scale(&self.b.diff(Var::X)).add(&conj(scene.ax_expr()));
        let ay = s.scale(&self.b.diff(Var::Y)).add(&conj(scene.ay_expr()));
        let phi = conj(scene.phi_expr());
        Ok(scene.with_attenuation(ax, ay, phi)?)
    }
}

/// Chebyshev products T_i(x)T_j(y), i + j ≤ degree, orthonormalized on the
/// unit disk against a polar quadrature.
#[derive(Debug, Clone)]
pub struct DiskBasis {
    pub degree: usize,
    terms: Vec<(usize, usize)>,
    /// Raw-to-orthonormal map: φ = b·R⁻¹.
    rinv: DMatrix<f64>,
    pub quad: DiskQuadrature,
}

/// Basis values and derivatives at one point.
#[derive(Debug, Clone)]
pub struct BasisEval {
    pub v: Vec<f64>,
    pub dx: Vec<f64>,
    pub dy: Vec<f64>,
}

fn chebyshev(x: f64, d: usize) -> (Vec<f64>, Vec<f64>) {
    let mut t = vec![0.0; d + 1];
    let mut dt = vec![0.0; d + 1];
    t[0] = 1.0;
    if d > 0 {
        t[1] = x;
        dt[1] = 1.0;
    }
    for k in 1..d {
        t[k + 1] = 2.0 * x * t[k] - t[k - 1];
        dt[k + 1] = 2.0 * t[k] + 2.0 * x * dt[k] - dt[k - 1];
    }
    (t, dt)
}

impl DiskBasis {
    pub fn new(degree: usize) -> Self {
        let terms: Vec<(usize, usize)> = (0..=degree)
            .flat_map(|d| (0..=d).map(move |j| (d - j, j)))
            .collect();
        let quad = DiskQuadrature::new(degree + 4, 2 * degree + 8);
        let nb = terms.len();
        let mut b = DMatrix::<f64>::zeros(quad.len(), nb);
        for (q, p) in quad.pts.iter().enumerate() {
            let (tx, _) = chebyshev(p[0], degree);
            let (ty, _) = chebyshev(p[1], degree);
            let sw = quad.w[q].sqrt();
            for (c, &(i, j)) in terms.iter().enumerate() {
                b[(q, c)] = sw * tx[i] * ty[j];
            }
        }
        let r = b.qr().r();
        let rinv = r
            .solve_upper_triangular(&DMatrix::identity(nb, nb))
            .expect("polynomials are independent on the disk");
        DiskBasis {
            degree,
            terms,
            rinv,
            quad,
        }
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    fn raw(&self, x: f64, y: f64) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
        let (tx, dtx) = chebyshev(x, self.degree);
        let (ty, dty) = chebyshev(y, self.degree);
        let mut v = Vec::with_capacity(self.len());
        let mut dx = Vec::with_capacity(self.len());
        let mut dy = Vec::with_capacity(self.len());
        for &(i, j) in &self.terms {
            v.push(tx[i] * ty[j]);
            dx.push(dtx[i] * ty[j]);
            dy.push(tx[i] * dty[j]);
        }
        (v, dx, dy)
    }

    /// Orthonormal basis at (x, y); `vanish` multiplies by 1 − r².
    pub fn eval(&self, x: f64, y: f64, vanish: bool) -> BasisEval {
        let (v, dx, dy) = self.raw(x, y);
        let map = |r: Vec<f64>| -> Vec<f64> {
            (0..self.len())
                .map(|c| (0..=c).map(|k| r[k] * self.rinv[(k, c)]).sum())
                .collect()
        };
        let (v, dx, dy) = (map(v), map(dx), map(dy));
        if !vanish {
            return BasisEval { v, dx, dy };
        }
        let w = 1.0 - x * x - y * y;
        BasisEval {
            dx: dx
                .iter()
                .zip(&v)
                .map(|(d, f)| w * d - 2.0 * x * f)
                .collect(),
            dy: dy
                .iter()
                .zip(&v)
                .map(|(d, f)| w * d - 2.0 * y * f)
                .collect(),
            v: v.iter().map(|f| w * f).collect(),
        }
    }

    fn to_raw(&self, orth: &[C64]) -> Vec<C64> {
        (0..self.len())
            .map(|k| (k..self.len()).map(|c| orth[c] * self.rinv[(k, c)]).sum())
            .collect()
    }
}

/// A polynomial function or 1-form on the disk, C^n-valued.
#[derive(Debug, Clone)]
pub struct PolyField {
    pub n: usize,
    pub one_form: bool,
    /// Multiplied by 1 − r² (vanishes on ∂M).
    pub vanish: bool,
    basis: Arc<DiskBasis>,
    /// Raw Chebyshev coefficients per component.
    coeffs: Vec<Vec<C64>>,
    /// e^{−σ} evaluator for the SM view of a 1-form.
    sigma: Option<crate::expr::Program>,
}

impl PolyField {
    fn from_orth(
        basis: &Arc<DiskBasis>,
        n: usize,
        one_form: bool,
        vanish: bool,
        orth: &[C64],
    ) -> Self {
        let nb = basis.len();
        let ncomp = if one_form { 2 * n } else { n };
        PolyField {
            n,
            one_form,
            vanish,
            basis: basis.clone(),
            coeffs: (0..ncomp)
                .map(|c| basis.to_raw(&orth[c * nb..(c + 1) * nb]))
                .collect(),
            sigma: None,
        }
    }

    pub fn zero(basis: &Arc<DiskBasis>, n: usize, one_form: bool) -> Self {
        let ncomp = if one_form { 2 * n } else { n };
        PolyField {
            n,
            one_form,
            vanish: false,
            basis: basis.clone(),
            coeffs: vec![vec![ZERO; basis.len()]; ncomp],
            sigma: None,
        }
    }

    /// Attaches the metric so the 1-form can be viewed as a function on SM.
    pub fn with_scene(mut self, scene: &Scene) -> Self {
        self.sigma = Some(scene.sigma_expr().compile());
        self
    }

    pub fn components(&self) -> usize {
        self.coeffs.len()
    }

    /// Values and gradients of every component at (x, y).
    pub fn eval_full(&self, x: f64, y: f64, val: &mut [C64], dx: &mut [C64], dy: &mut [C64]) {
        let (v, bx, by) = self.basis.raw(x, y);
        let w = if self.vanish {
            1.0 - x * x - y * y
        } else {
            1.0
        };
        for (c, co) in self.coeffs.iter().enumerate() {
            let (mut f, mut fx, mut fy) = (ZERO, ZERO, ZERO);
            for k in 0..co.len() {
                f += co[k] * v[k];
                fx += co[k] * bx[k];
                fy += co[k] * by[k];
            }
            if self.vanish {
                val[c] = f * w;
                dx[c] = fx * w - f * (2.0 * x);
                dy[c] = fy * w - f * (2.0 * y);
            } else {
                val[c] = f;
                dx[c] = fx;
                dy[c] = fy;
            }
        }
    }

    pub fn value(&self, x: f64, y: f64, out: &mut [C64]) {
        let m = self.components();
        let (mut a, mut b) = (vec![ZERO; m], vec![ZERO; m]);
        self.eval_full(x, y, out, &mut a, &mut b);
    }

    /// Samples on a grid ([node][comp]).
    pub fn sample(&self, grid: &SpatialGrid) -> Vec<C64> {
        grid.sample(self.components(), |x, y, o| self.value(x, y, o))
    }
}

impl SmFunction for PolyField {
    fn rank(&self) -> usize {
        self.n
    }

    fn eval(&self, x: f64, y: f64, theta: f64, out: &mut [C64]) {
        let mut v = [ZERO; 16];
        self.value(x, y, &mut v);
        if !self.one_form {
            out[..self.n].copy_from_slice(&v[..self.n]);
            return;
        }
        let e = self
            .sigma
            .as_ref()
            .map_or(1.0, |p| (-p.eval_re(x, y)).exp());
        let (s, c) = theta.sin_cos();
        for i in 0..self.n {
            out[i] = (v[i] * c + v[self.n + i] * s) * e;
        }
    }
}

/// Least squares with a tiny Tikhonov term, [A; εI]x ≈ [b; 0], solved by QR.
/// Picks a near-minimum-norm solution when A is rank deficient.
fn lstsq(a: DMatrix<C64>, b: DVector<C64>, rel_eps: f64) -> Result<DVector<C64>> {
    let (m, n) = a.shape();
    let cmax = (0..n).map(|j| a.column(j).norm()).fold(0.0, f64::max);
    let eps = rel_eps * cmax.max(f64::MIN_POSITIVE);
    let mut aug = DMatrix::<C64>::zeros(m + n, n);
    aug.rows_mut(0, m).copy_from(&a);
    for j in 0..n {
        aug[(m + j, j)] = C64::new(eps, 0.0);
    }
    let mut rhs = DVector::<C64>::zeros(m + n);
    rhs.rows_mut(0, m).copy_from(&b);
    let qr = aug.qr();
    let qtb = qr.q().adjoint() * rhs;
    qr.r()
        .solve_upper_triangular(&qtb)
        .ok_or_else(|| MagrayError::Invalid("singular least-squares system".into()))
}

/// Point data used when assembling a system.
struct PointData {
    x: f64,
    y: f64,
    sw: f64,
    ax: CMat,
    ay: CMat,
    phi: CMat,
    e2s: f64,
}

fn point_data(scene: &Scene, quad: &DiskQuadrature) -> Vec<PointData> {
    quad.pts
        .iter()
        .zip(&quad.w)
        .map(|(p, w)| PointData {
            x: p[0],
            y: p[1],
            sw: w.sqrt(),
            ax: scene.ax(p[0], p[1]),
            ay: scene.ay(p[0], p[1]),
            phi: scene.phi(p[0], p[1]),
            e2s: (2.0 * scene.sigma(p[0], p[1])).exp(),
        })
        .collect()
}

#[derive(Debug, Clone, Serialize)]
pub struct HarmonicBasis {
    #[serde(skip)]
    pub forms: Vec<PolyField>,
    /// Per form: (‖d_Aη‖, ‖d_A*η‖, ‖ȷ*η‖), each relative to ‖η‖.
    pub residuals: Vec<[f64; 3]>,
    pub singular_values: Vec<f64>,
}

impl HarmonicBasis {
    pub fn dim(&self) -> usize {
        self.forms.len()
    }
}

/// Fills row blocks for the operators d_A (as curl) and div_A on a 1-form unknown.
/// Returns (curl row block, div row block) entries through the callback
/// `put(eq, i, col, value)` for eq ∈ {0: curl, 1: div}.
fn one_form_ops(
    pd: &PointData,
    be: &BasisEval,
    n: usize,
    nb: usize,
    off: usize,
    mut put: impl FnMut(usize, usize, usize, C64),
) {
    // unknown layout: comp c in 0..2n (x comps then y comps), basis b: col = off + c*nb + b
    for b in 0..nb {
        for i in 0..n {
            // curl: ∂xβ_y − ∂yβ_x + (A_xβ_y − A_yβ_x)
            put(0, i, off + (n + i) * nb + b, C64::new(be.dx[b], 0.0));
            put(0, i, off + i * nb + b, C64::new(-be.dy[b], 0.0));
            // div: ∂xβ_x + ∂yβ_y + A_xβ_x + A_yβ_y
            put(1, i, off + i * nb + b, C64::new(be.dx[b], 0.0));
            put(1, i, off + (n + i) * nb + b, C64::new(be.dy[b], 0.0));
            for j in 0..n {
                let v = be.v[b];
                put(0, i, off + (n + j) * nb + b, pd.ax[(i, j)] * v);
                put(0, i, off + j * nb + b, -pd.ay[(i, j)] * v);
                put(1, i, off + j * nb + b, pd.ax[(i, j)] * v);
                put(1, i, off + (n + j) * nb + b, pd.ay[(i, j)] * v);
            }
        }
    }
}

/// Numerical nullspace of (d_A, d_A*, ȷ*) over polynomial 1-forms.
pub fn harmonic_forms(scene: &Scene, basis: &Arc<DiskBasis>) -> Result<HarmonicBasis> {
    let n = scene.n();
    let nb = basis.len();
    let pd = point_data(scene, &basis.quad);
    let nbd = 4 * basis.degree + 16;
    let rows = pd.len() * 2 * n + nbd * n;
    let cols = 2 * n * nb;
    let mut a = DMatrix::<C64>::zeros(rows, cols);
    for (q, p) in pd.iter().enumerate() {
        let be = basis.eval(p.x, p.y, false);
        one_form_ops(p, &be, n, nb, 0, |eq, i, col, v| {
            a[((q * 2 + eq) * n + i, col)] += v * p.sw;
        });
    }
    // tangential trace −sin t β_x + cos t β_y at boundary points, arc-length weights
    let base = pd.len() * 2 * n;
    let sw = (2.0 * PI / nbd as f64).sqrt();
    for k in 0..nbd {
        let t = 2.0 * PI * (k as f64 + 0.5) / nbd as f64;
        let be = basis.eval(t.cos(), t.sin(), false);
        for i in 0..n {
            for b in 0..nb {
                a[(base + k * n + i, i * nb + b)] += C64::new(-t.sin() * be.v[b] * sw, 0.0);
                a[(base + k * n + i, (n + i) * nb + b)] += C64::new(t.cos() * be.v[b] * sw, 0.0);
            }
        }
    }
    let svd = a.clone().svd(false, true);
    let sv: Vec<f64> = svd.singular_values.iter().cloned().collect();
    let smax = sv.iter().cloned().fold(0.0, f64::max);
    let thr = 1e-8 * smax;
    let vt = svd.v_t.expect("requested");
    let mut null_idx: Vec<usize> = (0..sv.len()).filter(|&k| sv[k] < thr).collect();
    let above = sv
        .iter()
        .cloned()
        .filter(|&s| s >= thr)
        .fold(f64::INFINITY, f64::min);
    let below = null_idx.iter().map(|&k| sv[k]).fold(0.0, f64::max);
    if above < 10.0 * thr || (below > 0.0 && below > thr / 10.0) {
        return Err(MagrayError::ResolutionTooCoarse {
            gap: above / thr.max(below),
        });
    }
    // columns beyond the row count never appear in the SVD: they are null directions
    let rank_dim = sv.len();
    null_idx.extend(rank_dim..cols);
    let mut forms = Vec::new();
    let mut residuals = Vec::new();
    for &k in &null_idx {
        let orth: Vec<C64> = (0..cols).map(|c| vt[(k, c)].conj()).collect();
        let v = DVector::from_vec(orth.clone());
        let r = &a * &v;
        let interior = r.rows(0, base).norm();
        let trace = r.rows(base, rows - base).norm();
        forms.push(PolyField::from_orth(basis, n, true, false, &orth).with_scene(scene));
        residuals.push([interior, interior, trace]);
    }
    let mut sorted = sv;
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    sorted.truncate(8);
    Ok(HarmonicBasis {
        forms,
        residuals,
        singular_values: sorted,
    })
}

/// α = d_A p + ⋆d_A a + η with p|∂M = 0 and η ∈ 𝔥_A.
#[derive(Debug, Clone)]
pub struct Decomposition {
    pub p: PolyField,
    pub a: PolyField,
    pub eta: PolyField,
    /// ‖d_A p + ⋆d_A a + η − α‖ / ‖α‖ over the quadrature.
    pub residual: f64,
}

/// A 1-form evaluated pointwise: (x, y) ↦ [x comps, y comps].
pub type FormFn<'a> = &'a (dyn Fn(f64, f64, &mut [C64]) + Sync);

pub fn decompose_one_form(
    scene: &Scene,
    basis: &Arc<DiskBasis>,
    harmonic: &HarmonicBasis,
    alpha: FormFn,
) -> Result<Decomposition> {
    let n = scene.n();
    let nb = basis.len();
    let nh = harmonic.dim();
    let pd = point_data(scene, &basis.quad);
    let rows = pd.len() * 2 * n;
    let cols = 2 * n * nb + nh;
    let (off_p, off_a, off_h) = (0, n * nb, 2 * n * nb);
    let mut m = DMatrix::<C64>::zeros(rows, cols);
    let mut rhs = DVector::<C64>::zeros(rows);
    let mut av = vec![ZERO; 2 * n];
    let mut hv = vec![ZERO; 2 * n];
    for (q, p) in pd.iter().enumerate() {
        let bp = basis.eval(p.x, p.y, true);
        let ba = basis.eval(p.x, p.y, false);
        alpha(p.x, p.y, &mut av);
        let rx = |i: usize| (q * 2) * n + i;
        let ry = |i: usize| (q * 2 + 1) * n + i;
        for i in 0..n {
            rhs[rx(i)] = av[i] * p.sw;
            rhs[ry(i)] = av[n + i] * p.sw;
            for b in 0..nb {
                // d_A p
                m[(rx(i), off_p + i * nb + b)] += C64::new(bp.dx[b] * p.sw, 0.0);
                m[(ry(i), off_p + i * nb + b)] += C64::new(bp.dy[b] * p.sw, 0.0);
                // ⋆d_A a = (−(a_y + A_y a), a_x + A_x a)
                m[(rx(i), off_a + i * nb + b)] += C64::new(-ba.dy[b] * p.sw, 0.0);
                m[(ry(i), off_a + i * nb + b)] += C64::new(ba.dx[b] * p.sw, 0.0);
                for j in 0..n {
                    m[(rx(i), off_p + j * nb + b)] += p.ax[(i, j)] * (bp.v[b] * p.sw);
                    m[(ry(i), off_p + j * nb + b)] += p.ay[(i, j)] * (bp.v[b] * p.sw);
                    m[(rx(i), off_a + j * nb + b)] -= p.ay[(i, j)] * (ba.v[b] * p.sw);
                    m[(ry(i), off_a + j * nb + b)] += p.ax[(i, j)] * (ba.v[b] * p.sw);
                }
            }
        }
        for (h, form) in harmonic.forms.iter().enumerate() {
            form.value(p.x, p.y, &mut hv);
            for i in 0..n {
                m[(rx(i), off_h + h)] += hv[i] * p.sw;
                m[(ry(i), off_h + h)] += hv[n + i] * p.sw;
            }
        }
    }
    let sol = lstsq(m.clone(), rhs.clone(), 1e-10)?;
    let residual = (&m * &sol - &rhs).norm() / rhs.norm().max(f64::MIN_POSITIVE);
    if residual > 1e-4 {
        return Err(MagrayError::SolverStalled {
            residual,
            iterations: 1,
        });
    }
    let s: Vec<C64> = sol.iter().cloned().collect();
    let mut eta = PolyField::zero(basis, n, true);
    for (h, form) in harmonic.forms.iter().enumerate() {
        for (c, co) in eta.coeffs.iter_mut().enumerate() {
            for (k, v) in co.iter_mut().enumerate() {
                *v += s[off_h + h] * form.coeffs[c][k];
            }
        }
    }
    Ok(Decomposition {
        p: PolyField::from_orth(basis, n, false, true, &s[off_p..off_p + n * nb]),
        a: PolyField::from_orth(basis, n, false, false, &s[off_a..off_a + n * nb]),
        eta: eta.with_scene(scene),
        residual,
    })
}

/// β with ⋆d_Aβ = f and d_A*β = c·Φa; min-norm least squares.
#[derive(Debug, Clone)]
pub struct BetaSolution {
    pub beta: PolyField,
    /// Relative residuals of the two constraints.
    pub curl_residual: f64,
    pub div_residual: f64,
}

/// A function evaluated pointwise.
pub type ValueFn<'a> = &'a (dyn Fn(f64, f64, &mut [C64]) + Sync);

pub fn solve_beta(
    scene: &Scene,
    basis: &Arc<DiskBasis>,
    f: ValueFn,
    a: ValueFn,
    factor: f64,
) -> Result<BetaSolution> {
    let n = scene.n();
    let nb = basis.len();
    let pd = point_data(scene, &basis.quad);
    let rows = pd.len() * 2 * n;
    let mut m = DMatrix::<C64>::zeros(rows, 2 * n * nb);
    let mut rhs = DVector::<C64>::zeros(rows);
    let mut fv = vec![ZERO; n];
    let mut avv = vec![ZERO; n];
    let mut pa = vec![ZERO; n];
    for (q, p) in pd.iter().enumerate() {
        let be = basis.eval(p.x, p.y, false);
        // e^{−2σ}curl_A β = f and −e^{−2σ}div_A β = cΦa, both in L²(dVol_g)
        let wc = p.sw / p.e2s.sqrt();
        let e = p.e2s.sqrt() * p.sw;
        one_form_ops(p, &be, n, nb, 0, |eq, i, col, v| {
            let s = if eq == 0 { wc } else { -wc };
            m[((q * 2 + eq) * n + i, col)] += v * s;
        });
        f(p.x, p.y, &mut fv);
        a(p.x, p.y, &mut avv);
        p.phi.mul_vec(&avv, &mut pa);
        for i in 0..n {
            rhs[(q * 2) * n + i] = fv[i] * e;
            rhs[(q * 2 + 1) * n + i] = pa[i] * (factor * e);
        }
    }
    let sol = lstsq(m.clone(), rhs.clone(), 1e-10)?;
    let r = &m * &sol - &rhs;
    let split = |v: &DVector<C64>, eq: usize| -> f64 {
        (0..pd.len())
            .flat_map(|q| (0..n).map(move |i| (q * 2 + eq) * n + i))
            .map(|k| v[k].norm_sqr())
            .sum::<f64>()
            .sqrt()
    };
    let tiny = 1e-300;
    let curl_residual = split(&r, 0) / split(&rhs, 0).max(tiny);
    let div_residual = split(&r, 1) / split(&rhs, 1).max(tiny);
    let rel = r.norm() / rhs.norm().max(tiny);
    if rhs.norm() > 0.0 && rel > 1e-4 {
        return Err(MagrayError::SolverStalled {
            residual: rel,
            iterations: 1,
        });
    }
    let s: Vec<C64> = sol.iter().cloned().collect();
    Ok(BetaSolution {
        beta: PolyField::from_orth(basis, n, true, false, &s).with_scene(scene),
        curl_residual: if rhs.norm() > 0.0 { curl_residual } else { 0.0 },
        div_residual: if rhs.norm() > 0.0 { div_residual } else { 0.0 },
    })
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct ModeIdentityReport {
    pub sup: f64,
    pub scale: f64,
}

/// ⋆d_Aα against 2i(μ₋α₁ − μ₊α₋₁), with the right side from the grid
/// Guillemin–Kazhdan operators and the left side symbolic.
pub fn star_d_a_mode_identity(
    scene: &Scene,
    grid: &SpatialGrid,
    ntheta: usize,
    alpha: &OneForm,
) -> Result<ModeIdentityReport> {
    let n = scene.n();
    let band = alpha.to_band(scene);
    let u = crate::harmonics::FiberGridFn::sample(grid, ntheta, &band);
    let a1 = u.project(1);
    let am1 = u.project(-1);
    let gk1 = crate::harmonics::gk_operators(scene, grid, &a1)?;
    let gkm1 = crate::harmonics::gk_operators(scene, grid, &am1)?;
    let lhs = star_d_a_one_form(scene, alpha);
    let progs: Vec<_> = lhs.iter().map(Expr::compile).collect();
    let mut rhs = gk1.mu_minus.clone();
    rhs.axpy(-ONE, &gkm1.mu_plus);
    let two_i = C64::new(0.0, 2.0);
    let mut sup: f64 = 0.0;
    let mut scale: f64 = 0.0;
    for (k, p) in grid.xy.iter().enumerate() {
        for l in 0..ntheta {
            let r = rhs.at(k, l);
            for c in 0..n {
                let l0 = progs[c].eval(p[0], p[1]);
                sup = sup.max((l0 - two_i * r[c]).norm());
                scale = scale.max(l0.norm());
            }
        }
    }
    Ok(ModeIdentityReport { sup, scale })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::parse_expression;
    use crate::scene::SceneSpec;

    fn p(s: &str) -> Expr {
        parse_expression(s).unwrap()
    }

    fn scene(sigma: &str, lambda: &str, ax: &str, ay: &str, phi: &str) -> Scene {
        Scene::from_spec(&SceneSpec::scalar(sigma, lambda, ax, ay, phi)).unwrap()
    }

    fn at(e: &Expr, x: f64, y: f64) -> C64 {
        e.eval(x, y)
    }

    #[test]
    fn symbolic_operators() {
        let flat = scene("0", "0", "0", "0", "0");
        let d = d_a_star(&flat, &OneForm::new(vec![p("0")], vec![p("x")]));
        assert!(at(&d[0], 0.3, 0.1).norm() < 1e-14);
        let d = d_a_star(&flat, &OneForm::exact(&[p("x^2+y^2")]));
        assert!((at(&d[0], 0.3, -0.2) + 4.0).norm() < 1e-13);
        let s = star_d_a_one_form(&flat, &OneForm::new(vec![p("-y")], vec![p("x")]));
        assert!((at(&s[0], 0.1, 0.7) - 2.0).norm() < 1e-14);
        let sc = scene("0", "0", "i", "0", "0");
        let d = d_a(&sc, &[p("1")]);
        assert!((at(&d.ax[0], 0.2, 0.2) - C64::new(0.0, 1.0)).norm() < 1e-15);
        assert!(at(&d.ay[0], 0.2, 0.2).norm() < 1e-15);
    }

    #[test]
    fn curvature_identity_for_matrix_connection() {
        let spec = SceneSpec {
            n: 2,
            sigma: "0.1*x".into(),
            ax: Some(vec![
                vec!["i*y".into(), "x".into()],
                vec!["-x".into(), "0".into()],
            ]),
            ay: Some(vec![
                vec!["0".into(), "i*0.3".into()],
                vec!["i*0.3".into(), "i*x*y".into()],
            ]),
            ..SceneSpec::default()
        };
        let sc = Scene::from_spec(&spec).unwrap();
        let f = [p("sin(x)+i*y"), p("x*y^2")];
        let lhs = d_a_one_form(&sc, &d_a(&sc, &f));
        let rhs = curvature_apply(&sc, &f);
        for (x, y) in [(0.1, 0.2), (-0.5, 0.3)] {
            for c in 0..2 {
                assert!((at(&lhs[c], x, y) - at(&rhs[c], x, y)).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn grid_operators_match_symbolic() {
        let sc = scene("0.2*x*y", "0", "i*0.3*y", "-i*0.2*x", "i*0.5");
        let grid = SpatialGrid::new(48);
        let gc = GridCalculus::new(&sc, &grid);
        let f = [p("sin(x)*cos(y) + i*x")];
        let beta = OneForm::new(vec![p("x*y")], vec![p("cos(x+y)")]);
        let fs = crate::functions::sample_exprs(&grid, &f);
        let bs = beta.sample(&grid);
        let check = |num: &[C64], exact: &[C64]| {
            let err = num
                .iter()
                .zip(exact)
                .map(|(a, b)| (a - b).norm())
                .fold(0.0, f64::max);
            assert!(err < 1e-5, "{err}");
        };
        check(&gc.d_a(&fs), &d_a(&sc, &f).sample(&grid));
        check(
            &gc.star_d_a_one_form(&bs),
            &crate::functions::sample_exprs(&grid, &star_d_a_one_form(&sc, &beta)),
        );
        check(
            &gc.d_a_star(&bs),
            &crate::functions::sample_exprs(&grid, &d_a_star(&sc, &beta)),
        );
    }

    #[test]
    fn adjointness_of_d_a() {
        // ⟨d_A f, β⟩ = ⟨f, d_A*β⟩ for f vanishing at the boundary
        let sc = scene("0.1*y", "0", "i*0.4*x", "i*0.2", "0");
        let q = DiskQuadrature::new(24, 64);
        let f = [p("(1-x^2-y^2)^2*cos(x)")];
        let beta = OneForm::new(vec![p("y+i*x^2")], vec![p("sin(x*y)")]);
        let df = d_a(&sc, &f);
        let ds = d_a_star(&sc, &beta);
        let (mut l, mut r) = (ZERO, ZERO);
        for (pt, w) in q.pts.iter().zip(&q.w) {
            let (x, y) = (pt[0], pt[1]);
            l += (at(&df.ax[0], x, y) * at(&beta.ax[0], x, y).conj()
                + at(&df.ay[0], x, y) * at(&beta.ay[0], x, y).conj())
                * *w;
            let e2 = (2.0 * sc.sigma(x, y)).exp();
            r += at(&f[0], x, y) * at(&ds[0], x, y).conj() * (w * e2);
        }
        assert!((l - r).norm() < 1e-8 * l.norm().max(1.0), "{l} {r}");
    }

    #[test]
    fn twist_pair_and_identity() {
        let flat = scene("0", "1", "0", "0", "0");
        let t = twist(&flat, 1).unwrap();
        assert!(t.ax(0.3, 0.2).max_abs() < 1e-15);
        assert!((t.phi(0.3, 0.2)[(0, 0)] - C64::new(0.0, 1.0)).norm() < 1e-15);
        let sc = scene("0.2*x*y", "0.4+0.1*x", "0", "0", "0");
        let pts = [[0.1, 0.2, 0.3], [-0.4, 0.5, 2.0], [0.0, -0.7, 5.0]];
        assert!(twist_identity(&sc, &pts).identity_residual < 1e-8);
    }

    #[test]
    fn gauge_preserves_unitarity_and_transforms_curvature() {
        let sc = scene("0", "0", "i*0.3*y", "0", "i*0.2");
        let g = Gauge::new(
            p("(1-x^2-y^2)*sin(x+2*y)"),
            CMat::scalar(1, C64::new(0.0, 1.0)),
        )
        .unwrap();
        let gs = g.apply(&sc).unwrap();
        // abelian: curvature invariant, Φ invariant
        for (x, y) in [(0.2, 0.1), (-0.3, 0.6)] {
            assert!((&gs.curvature(x, y) - &sc.curvature(x, y)).max_abs() < 1e-12);
            assert!((&gs.phi(x, y) - &sc.phi(x, y)).max_abs() < 1e-14);
        }
        let mut rng = <rand_chacha::ChaCha8Rng as rand::SeedableRng>::seed_from_u64(3);
        let s2 = Gauge::random_generator(2, &mut rng);
        assert!(Gauge::new(p("x"), s2).is_ok());
        assert!(Gauge::new(p("x"), CMat::identity(1)).is_err());
    }

    #[test]
    fn basis_is_orthonormal() {
        let b = DiskBasis::new(8);
        let n = b.len();
        let mut g = DMatrix::<f64>::zeros(n, n);
        for (pt, w) in b.quad.pts.iter().zip(&b.quad.w) {
            let e = b.eval(pt[0], pt[1], false);
            for i in 0..n {
                for j in 0..n {
                    g[(i, j)] += e.v[i] * e.v[j] * w;
                }
            }
        }
        assert!((g - DMatrix::identity(n, n)).amax() < 1e-10);
    }

    #[test]
    fn no_harmonic_forms_without_connection() {
        let sc = scene("0.1*x", "0", "0", "0", "0");
        let basis = Arc::new(DiskBasis::new(10));
        let h = harmonic_forms(&sc, &basis).unwrap();
        assert_eq!(h.dim(), 0, "{:?}", h.singular_values);
    }

    #[test]
    fn decomposition_of_exact_and_coexact_forms() {
        let sc = scene("0", "0", "0", "0", "0");
        let basis = Arc::new(DiskBasis::new(12));
        let h = harmonic_forms(&sc, &basis).unwrap();
        // α = df with f|∂M = 0: p = f, d a = 0
        let f = p("(1-x^2-y^2)*exp(x)");
        let df = OneForm::exact(&[f.clone()]);
        let (px, py) = (df.ax[0].compile(), df.ay[0].compile());
        let alpha = move |x: f64, y: f64, o: &mut [C64]| {
            o[0] = px.eval(x, y);
            o[1] = py.eval(x, y);
        };
        let d = decompose_one_form(&sc, &basis, &h, &alpha).unwrap();
        assert!(d.residual < 1e-8);
        let mut v = [ZERO; 1];
        let (mut da, mut dy) = ([ZERO; 1], [ZERO; 1]);
        for (x, y) in [(0.2, 0.3), (-0.5, 0.1)] {
            d.p.value(x, y, &mut v);
            assert!((v[0] - f.eval(x, y)).norm() < 1e-7);
            d.a.eval_full(x, y, &mut v, &mut da, &mut dy);
            assert!(da[0].norm() < 1e-7 && dy[0].norm() < 1e-7);
        }
        // α = ⋆dg: p = 0, a = g + const
        let g = p("sin(x)*y + x^3");
        let sdg = OneForm::exact(&[g.clone()]).star();
        let (px, py) = (sdg.ax[0].compile(), sdg.ay[0].compile());
        let alpha = move |x: f64, y: f64, o: &mut [C64]| {
            o[0] = px.eval(x, y);
            o[1] = py.eval(x, y);
        };
        let d = decompose_one_form(&sc, &basis, &h, &alpha).unwrap();
        let mut a0 = [ZERO; 1];
        d.a.value(0.0, 0.0, &mut a0);
        for (x, y) in [(0.2, 0.3), (-0.5, 0.1)] {
            d.p.value(x, y, &mut v);
            assert!(v[0].norm() < 1e-7);
            d.a.value(x, y, &mut v);
            assert!((v[0] - a0[0] - g.eval(x, y)).norm() < 1e-7);
        }
    }

    #[test]
    fn beta_for_constant_curl() {
        let sc = scene("0", "0", "0", "0", "0");
        let basis = Arc::new(DiskBasis::new(6));
        let two = |_: f64, _: f64, o: &mut [C64]| o[0] = C64::new(2.0, 0.0);
        let zero = |_: f64, _: f64, o: &mut [C64]| o[0] = ZERO;
        let b = solve_beta(&sc, &basis, &two, &zero, 1.0).unwrap();
        let mut v = [ZERO; 2];
        for (x, y) in [(0.3, 0.1), (-0.2, -0.6)] {
            b.beta.value(x, y, &mut v);
            assert!(
                (v[0] + y).norm() < 1e-9 && (v[1] - x).norm() < 1e-9,
                "{v:?}"
            );
        }
        let b = solve_beta(&sc, &basis, &zero, &zero, 1.0).unwrap();
        b.beta.value(0.1, 0.1, &mut v);
        assert!(v[0].norm() + v[1].norm() < 1e-14);
    }

    #[test]
    fn beta_with_higgs_field() {
        let sc = scene("0.1*x*y", "0", "i*0.2*y", "0", "i*(0.5+0.2*x)");
        let basis = Arc::new(DiskBasis::new(14));
        let f = p("cos(x-y) + i*x");
        let a = p("exp(y)*sin(x)");
        let (fp, ap) = (f.compile(), a.compile());
        let fv = move |x: f64, y: f64, o: &mut [C64]| o[0] = fp.eval(x, y);
        let av = move |x: f64, y: f64, o: &mut [C64]| o[0] = ap.eval(x, y);
        let b = solve_beta(&sc, &basis, &fv, &av, 1.0).unwrap();
        assert!(b.curl_residual < 1e-6 && b.div_residual < 1e-6, "{b:?}");
    }

    #[test]
    fn mode_identity() {
        let sc = scene("0.1*x*y", "0.2", "i*0.3*y", "-i*0.1*x", "0");
        let grid = SpatialGrid::new(48);
        let alpha = OneForm::new(vec![p("sin(x)+i*y")], vec![p("x*y")]);
        let r = star_d_a_mode_identity(&sc, &grid, 16, &alpha).unwrap();
        assert!(r.sup < 1e-5 * r.scale.max(1.0), "{r:?}");
        let flat = scene("0", "0", "0", "0", "0");
        let r =
            star_d_a_mode_identity(&flat, &grid, 16, &OneForm::new(vec![p("-y")], vec![p("x")]))
                .unwrap();
        assert!((r.scale - 2.0).abs() < 1e-14 && r.sup < 1e-8, "{r:?}");
    }
}
