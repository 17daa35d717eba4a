//! Functions on SM and on the disk.
//!
//! [`BandFn`] is an analytic, fiber band-limited function u = Σ u_k(x, y) e^{ikθ}
//! with symbolic coefficients, so its frame derivatives are exact. Tensor fields
//! and 1-forms convert to it. [`GridField`] wraps sampled 0- and 1-forms for
//! evaluation along rays.

use std::collections::BTreeMap;

use rand::Rng;

use crate::expr::{CompiledExpr, Expr, Func, Var};
use crate::grid::SpatialGrid;
use crate::linalg::{C64, ZERO};
use crate::scene::Scene;

/// A C^n-valued function on SM evaluated pointwise.
pub trait SmFunction: Sync {
    fn rank(&self) -> usize;
    fn eval(&self, x: f64, y: f64, theta: f64, out: &mut [C64]);
}

impl<F: Fn(f64, f64, f64, &mut [C64]) + Sync> SmFunction for (usize, F) {
    fn rank(&self) -> usize {
        self.0
    }
    fn eval(&self, x: f64, y: f64, theta: f64, out: &mut [C64]) {
        (self.1)(x, y, theta, out)
    }
}

#[derive(Debug, Clone)]
pub struct BandMode {
    pub k: i32,
    pub comps: Vec<CompiledExpr>,
}

/// Σ_k u_k(x, y) e^{ikθ} with symbolic C^n coefficients.
#[derive(Debug, Clone)]
pub struct BandFn {
    n: usize,
    modes: Vec<BandMode>,
}

impl BandFn {
    /// Coefficients with equal k are summed; zero modes are dropped.
    pub fn new(n: usize, modes: Vec<(i32, Vec<Expr>)>) -> Self {
        let mut acc: BTreeMap<i32, Vec<Expr>> = BTreeMap::new();
        for (k, comps) in modes {
            assert_eq!(
                comps.len(),
                n,
                "mode {k} has {} components, rank is {n}",
                comps.len()
            );
            match acc.get_mut(&k) {
                Some(prev) => {
                    for (p, c) in prev.iter_mut().zip(comps) {
                        *p = Expr::add(std::mem::replace(p, Expr::Num(0.0)), c);
                    }
                }
                None => {
                    acc.insert(k, comps);
                }
            }
        }
        let modes = acc
            .into_iter()
            .filter(|(_, c)| !c.iter().all(Expr::is_zero))
            .map(|(k, c)| BandMode {
                k,
                comps: c.into_iter().map(CompiledExpr::new).collect(),
            })
            .collect();
        BandFn { n, modes }
    }

    pub fn zero(n: usize) -> Self {
        BandFn {
            n,
            modes: Vec::new(),
        }
    }

    /// A function of position only.
    pub fn scalar_field(comps: Vec<Expr>) -> Self {
        let n = comps.len();
        Self::new(n, vec![(0, comps)])
    }

    pub fn rank(&self) -> usize {
        self.n
    }

    pub fn modes(&self) -> &[BandMode] {
        &self.modes
    }

    /// Largest |k| present (0 for the zero function).
    pub fn band(&self) -> i32 {
        self.modes.iter().map(|m| m.k.abs()).max().unwrap_or(0)
    }

    pub fn mode(&self, k: i32) -> Option<&BandMode> {
        self.modes.iter().find(|m| m.k == k)
    }

    fn exprs(&self) -> Vec<(i32, Vec<Expr>)> {
        self.modes
            .iter()
            .map(|m| (m.k, m.comps.iter().map(|c| c.expr.clone()).collect()))
            .collect()
    }

    /// Multiplication by e^{imθ}.
    pub fn twist(&self, m: i32) -> BandFn {
        let mut e = self.exprs();
        for (k, _) in e.iter_mut() {
            *k += m;
        }
        BandFn::new(self.n, e)
    }

    pub fn add(&self, other: &BandFn) -> BandFn {
        let mut e = self.exprs();
        e.extend(other.exprs());
        BandFn::new(self.n, e)
    }

    pub fn scale(&self, z: C64) -> BandFn {
        let c = Expr::complex(z);
        let e = self
            .exprs()
            .into_iter()
            .map(|(k, v)| (k, v.into_iter().map(|x| Expr::mul(c.clone(), x)).collect()))
            .collect();
        BandFn::new(self.n, e)
    }

    /// Keeps the modes accepted by `keep`.
    pub fn filter_modes(&self, keep: impl Fn(i32) -> bool) -> BandFn {
        BandFn::new(
            self.n,
            self.exprs().into_iter().filter(|(k, _)| keep(*k)).collect(),
        )
    }

    /// Value and the partials (∂x, ∂y, ∂θ).
    pub fn eval_with_derivatives(
        &self,
        x: f64,
        y: f64,
        theta: f64,
        val: &mut [C64],
        dx: &mut [C64],
        dy: &mut [C64],
        dth: &mut [C64],
    ) {
        for o in [&mut *val, &mut *dx, &mut *dy, &mut *dth] {
            o[..self.n].fill(ZERO);
        }
        for m in &self.modes {
            let e = C64::from_polar(1.0, m.k as f64 * theta);
            let ik = C64::new(0.0, m.k as f64);
            for (c, p) in m.comps.iter().enumerate() {
                let v = p.value.eval(x, y) * e;
                val[c] += v;
                dth[c] += ik * v;
                dx[c] += p.dx.eval(x, y) * e;
                dy[c] += p.dy.eval(x, y) * e;
            }
        }
    }

    /// Mode coefficients u_k at (x, y), for k in `ks`.
    pub fn mode_values(&self, k: i32, x: f64, y: f64, out: &mut [C64]) {
        out[..self.n].fill(ZERO);
        if let Some(m) = self.mode(k) {
            for (c, p) in m.comps.iter().enumerate() {
                out[c] = p.value.eval(x, y);
            }
        }
    }

    /// Random smooth function with the given modes.
    pub fn random(n: usize, ks: &[i32], rng: &mut impl Rng, amp: f64) -> BandFn {
        let modes = ks
            .iter()
            .map(|&k| (k, (0..n).map(|_| random_smooth(rng, amp, 3)).collect()))
            .collect();
        BandFn::new(n, modes)
    }
}

impl SmFunction for BandFn {
    fn rank(&self) -> usize {
        self.n
    }

    fn eval(&self, x: f64, y: f64, theta: f64, out: &mut [C64]) {
        out[..self.n].fill(ZERO);
        for m in &self.modes {
            let e = C64::from_polar(1.0, m.k as f64 * theta);
            for (c, p) in m.comps.iter().enumerate() {
                out[c] += p.value.eval(x, y) * e;
            }
        }
    }
}

/// Σ_j (a_j + i b_j) cos(p_j x + q_j y + r_j) with |p|, |q| ≤ 2.
pub fn random_smooth(rng: &mut impl Rng, amp: f64, terms: usize) -> Expr {
    let mut e = Expr::Num(0.0);
    for _ in 0..terms {
        let a = C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)) * (amp / terms as f64);
        let arg = Expr::add(
            Expr::add(
                Expr::mul(Expr::num(rng.gen_range(-2.0..2.0)), Expr::x()),
                Expr::mul(Expr::num(rng.gen_range(-2.0..2.0)), Expr::y()),
            ),
            Expr::num(rng.gen_range(0.0..std::f64::consts::TAU)),
        );
        e = Expr::add(e, Expr::mul(Expr::complex(a), Expr::call(Func::Cos, arg)));
    }
    e
}

/// (G_μ + A + Φ)u for an analytic u, with exact derivatives.
pub struct GeneratorImage<'a> {
    pub scene: &'a Scene,
    pub u: &'a BandFn,
}

impl SmFunction for GeneratorImage<'_> {
    fn rank(&self) -> usize {
        self.u.rank()
    }

    fn eval(&self, x: f64, y: f64, theta: f64, out: &mut [C64]) {
        let n = self.u.rank();
        let mut v = [ZERO; 8];
        let mut gx = [ZERO; 8];
        let mut gy = [ZERO; 8];
        let mut gt = [ZERO; 8];
        self.u
            .eval_with_derivatives(x, y, theta, &mut v, &mut gx, &mut gy, &mut gt);
        let m = self.scene.metric(x, y);
        let (s, c) = theta.sin_cos();
        let a = m.emsig * c;
        let b = m.emsig * s;
        let cth = m.emsig * (m.sy * c - m.sx * s) + m.lambda;
        for i in 0..n {
            out[i] = gx[i] * a + gy[i] * b + gt[i] * cth;
        }
        if self.scene.has_attenuation() {
            self.scene
                .attenuation(x, y, theta, m.emsig)
                .mul_vec_acc(&v[..n], &mut out[..n]);
        }
    }
}

/// Coefficients of cos^a θ sin^b θ in e^{ikθ}, indexed by k + a + b.
fn trig_monomial(a: usize, b: usize) -> Vec<C64> {
    let mut poly = vec![C64::new(1.0, 0.0)];
    let half = C64::new(0.5, 0.0);
    let cos = [half, ZERO, half];
    let sin = [C64::new(0.0, 0.5), ZERO, C64::new(0.0, -0.5)];
    for f in std::iter::repeat(&cos)
        .take(a)
        .chain(std::iter::repeat(&sin).take(b))
    {
        let mut next = vec![ZERO; poly.len() + 2];
        for (i, p) in poly.iter().enumerate() {
            for (j, q) in f.iter().enumerate() {
                next[i + j] += p * q;
            }
        }
        poly = next;
    }
    poly
}

fn binomial(m: usize, j: usize) -> f64 {
    (0..j).fold(1.0, |acc, i| acc * (m - i) as f64 / (i + 1) as f64)
}

/// Symmetric m-tensor f_{i₁…i_m} stored by the number j of y-indices.
#[derive(Debug, Clone)]
pub struct TensorField {
    pub order: usize,
    /// comps[j][c]: component c of f_{x…x y…y} with j y-indices.
    pub comps: Vec<Vec<Expr>>,
}

impl TensorField {
    pub fn new(order: usize, comps: Vec<Vec<Expr>>) -> Self {
        assert_eq!(
            comps.len(),
            order + 1,
            "order-{order} tensor needs {} components",
            order + 1
        );
        TensorField { order, comps }
    }

    pub fn rank(&self) -> usize {
        self.comps[0].len()
    }

    /// f_m(x, v) = f_{i₁…i_m} v^{i₁}⋯v^{i_m} with v = e^{−σ}(cos θ, sin θ).
    pub fn to_band(&self, scene: &Scene) -> BandFn {
        let m = self.order;
        let n = self.rank();
        let weight = if m == 0 {
            Expr::Num(1.0)
        } else {
            Expr::call(
                Func::Exp,
                Expr::neg(Expr::mul(Expr::num(m as f64), scene.sigma_expr().clone())),
            )
        };
        let mut modes: Vec<(i32, Vec<Expr>)> = Vec::new();
        for (j, comp) in self.comps.iter().enumerate() {
            let coeffs = trig_monomial(m - j, j);
            let bin = binomial(m, j);
            for (idx, z) in coeffs.iter().enumerate() {
                if z.norm() < 1e-15 {
                    continue;
                }
                let k = idx as i32 - m as i32;
                let c = Expr::complex(z * bin);
                modes.push((
                    k,
                    comp.iter()
                        .map(|f| Expr::mul(Expr::mul(c.clone(), weight.clone()), f.clone()))
                        .collect(),
                ));
            }
        }
        if modes.is_empty() {
            return BandFn::zero(n);
        }
        BandFn::new(n, modes)
    }
}

/// C^n-valued 1-form α_x dx + α_y dy with symbolic components.
#[derive(Debug, Clone)]
pub struct OneForm {
    pub ax: Vec<Expr>,
    pub ay: Vec<Expr>,
}

impl OneForm {
    pub fn new(ax: Vec<Expr>, ay: Vec<Expr>) -> Self {
        assert_eq!(ax.len(), ay.len());
        OneForm { ax, ay }
    }

    pub fn zero(n: usize) -> Self {
        OneForm {
            ax: vec![Expr::Num(0.0); n],
            ay: vec![Expr::Num(0.0); n],
        }
    }

    pub fn rank(&self) -> usize {
        self.ax.len()
    }

    pub fn to_tensor(&self) -> TensorField {
        TensorField::new(1, vec![self.ax.clone(), self.ay.clone()])
    }

    pub fn to_band(&self, scene: &Scene) -> BandFn {
        self.to_tensor().to_band(scene)
    }

    /// ⋆α = −α_y dx + α_x dy.
    pub fn star(&self) -> OneForm {
        OneForm {
            ax: self.ay.iter().map(|e| Expr::neg(e.clone())).collect(),
            ay: self.ax.clone(),
        }
    }

    /// df for a C^n function given by expressions.
    pub fn exact(f: &[Expr]) -> OneForm {
        OneForm {
            ax: f.iter().map(|e| e.diff(Var::X)).collect(),
            ay: f.iter().map(|e| e.diff(Var::Y)).collect(),
        }
    }

    pub fn add(&self, o: &OneForm) -> OneForm {
        OneForm {
            ax: self
                .ax
                .iter()
                .zip(&o.ax)
                .map(|(a, b)| Expr::add(a.clone(), b.clone()))
                .collect(),
            ay: self
                .ay
                .iter()
                .zip(&o.ay)
                .map(|(a, b)| Expr::add(a.clone(), b.clone()))
                .collect(),
        }
    }

    /// Samples on the grid, layout [node][x comps, y comps].
    pub fn sample(&self, grid: &SpatialGrid) -> Vec<C64> {
        let n = self.rank();
        let px: Vec<_> = self.ax.iter().map(Expr::compile).collect();
        let py: Vec<_> = self.ay.iter().map(Expr::compile).collect();
        grid.sample(2 * n, |x, y, o| {
            for c in 0..n {
                o[c] = px[c].eval(x, y);
                o[n + c] = py[c].eval(x, y);
            }
        })
    }
}

/// Samples C^n expressions on the grid, layout [node][comp].
pub fn sample_exprs(grid: &SpatialGrid, f: &[Expr]) -> Vec<C64> {
    let p: Vec<_> = f.iter().map(Expr::compile).collect();
    grid.sample(f.len(), |x, y, o| {
        for (c, q) in p.iter().enumerate() {
            o[c] = q.eval(x, y);
        }
    })
}

/// A sampled 0-form or 1-form on the disk grid, seen as a function on SM.
pub struct GridField<'a> {
    grid: &'a SpatialGrid,
    scene: &'a Scene,
    order: u8,
    n: usize,
    ext: Vec<C64>,
}

impl<'a> GridField<'a> {
    /// `vals`: [node][comp], n components.
    pub fn zero_form(grid: &'a SpatialGrid, scene: &'a Scene, vals: &[C64]) -> Self {
        let n = vals.len() / grid.len();
        GridField {
            grid,
            scene,
            order: 0,
            n,
            ext: grid.extend(vals, n),
        }
    }

    /// `vals`: [node][x comps, y comps], 2n components.
    pub fn one_form(grid: &'a SpatialGrid, scene: &'a Scene, vals: &[C64]) -> Self {
        let n = vals.len() / grid.len() / 2;
        GridField {
            grid,
            scene,
            order: 1,
            n,
            ext: grid.extend(vals, 2 * n),
        }
    }
}

impl SmFunction for GridField<'_> {
    fn rank(&self) -> usize {
        self.n
    }

    fn eval(&self, x: f64, y: f64, theta: f64, out: &mut [C64]) {
        let st = self.grid.stencil(x, y);
        if self.order == 0 {
            self.grid.interp(&self.ext, self.n, &st, out);
            return;
        }
        let mut buf = [ZERO; 16];
        let n = self.n;
        self.grid.interp(&self.ext, 2 * n, &st, &mut buf);
        let e = (-self.scene.sigma(x, y)).exp();
        let (s, c) = theta.sin_cos();
        for i in 0..n {
            out[i] = (buf[i] * c + buf[n + i] * s) * e;
        }
    }
}
