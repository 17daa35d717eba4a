//! Problem description: conformal factor, magnetic intensity, connection and
//! Higgs field, plus discretization parameters.

use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::expr::{parse_expression, Expr, ExprError, Program, Var};
use crate::linalg::{CMat, C64};

const SKEW_TOL: f64 = 1e-12;
const PROBE_GRID: usize = 17;

#[derive(Debug, Error)]
pub enum SceneError {
    #[error("cannot read scene file: {0}")]
    Io(#[from] std::io::Error),
    #[error("malformed scene file: {0}")]
    Json(#[from] serde_json::Error),
    #[error("in field `{field}`: {source}")]
    Syntax {
        field: String,
        #[source]
        source: ExprError,
    },
    #[error("`{entry}` is not skew-Hermitian at ({x:.4}, {y:.4}): ‖M + M*‖∞ = {norm:.3e}")]
    SkewHermitianViolation {
        entry: String,
        x: f64,
        y: f64,
        norm: f64,
    },
    #[error("`{field}` has shape {rows}×{cols}, expected {n}×{n}")]
    RankMismatch {
        field: String,
        n: usize,
        rows: usize,
        cols: usize,
    },
    #[error("`{field}` is not finite at ({x:.4}, {y:.4})")]
    NonFinite { field: String, x: f64, y: f64 },
    #[error("`{field}` must be real-valued, got imaginary part {im:.3e} at ({x:.4}, {y:.4})")]
    NotReal {
        field: String,
        x: f64,
        y: f64,
        im: f64,
    },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GridParams {
    pub nx: usize,
    pub ntheta: usize,
    pub ns: usize,
    pub nphi: usize,
}

impl Default for GridParams {
    fn default() -> Self {
        GridParams {
            nx: 64,
            ntheta: 64,
            ns: 64,
            nphi: 32,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OdeParams {
    /// RK4 step in g-arclength.
    pub dt: f64,
    /// Tolerance of the terminal boundary search.
    pub tol: f64,
    /// Arclength after which a ray counts as trapped.
    pub tmax: f64,
}

impl Default for OdeParams {
    fn default() -> Self {
        OdeParams {
            dt: 1e-3,
            tol: 1e-12,
            tmax: 20.0,
        }
    }
}

/// Scene file contents before parsing of the expression strings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneSpec {
    #[serde(default = "one")]
    pub n: usize,
    #[serde(default = "zero_str")]
    pub sigma: String,
    #[serde(default = "zero_str")]
    pub lambda: String,
    #[serde(rename = "Ax", default, skip_serializing_if = "Option::is_none")]
    pub ax: Option<Vec<Vec<String>>>,
    #[serde(rename = "Ay", default, skip_serializing_if = "Option::is_none")]
    pub ay: Option<Vec<Vec<String>>>,
    #[serde(rename = "Phi", default, skip_serializing_if = "Option::is_none")]
    pub phi: Option<Vec<Vec<String>>>,
    #[serde(default)]
    pub grid: GridParams,
    #[serde(default)]
    pub ode: OdeParams,
}

fn one() -> usize {
    1
}

fn zero_str() -> String {
    "0".into()
}

impl Default for SceneSpec {
    fn default() -> Self {
        SceneSpec {
            n: 1,
            sigma: zero_str(),
            lambda: zero_str(),
            ax: None,
            ay: None,
            phi: None,
            grid: GridParams::default(),
            ode: OdeParams::default(),
        }
    }
}

impl SceneSpec {
    pub fn scalar(sigma: &str, lambda: &str, ax: &str, ay: &str, phi: &str) -> Self {
        let m = |s: &str| Some(vec![vec![s.to_string()]]);
        SceneSpec {
            sigma: sigma.into(),
            lambda: lambda.into(),
            ax: m(ax),
            ay: m(ay),
            phi: m(phi),
            ..Default::default()
        }
    }

    pub fn with_grid(mut self, grid: GridParams) -> Self {
        self.grid = grid;
        self
    }

    pub fn with_dt(mut self, dt: f64) -> Self {
        self.ode.dt = dt;
        self
    }
}

/// Square matrix of expressions.
#[derive(Debug, Clone, PartialEq)]
pub struct ExprMatrix {
    n: usize,
    entries: Vec<Expr>,
}

impl ExprMatrix {
    pub fn zeros(n: usize) -> Self {
        ExprMatrix {
            n,
            entries: vec![Expr::Num(0.0); n * n],
        }
    }

    pub fn from_entries(n: usize, entries: Vec<Expr>) -> Self {
        assert_eq!(entries.len(), n * n);
        ExprMatrix { n, entries }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn get(&self, i: usize, j: usize) -> &Expr {
        &self.entries[i * self.n + j]
    }

    pub fn entries(&self) -> &[Expr] {
        &self.entries
    }

    pub fn is_zero(&self) -> bool {
        self.entries.iter().all(Expr::is_zero)
    }

    pub fn map(&self, f: impl Fn(&Expr) -> Expr) -> Self {
        ExprMatrix {
            n: self.n,
            entries: self.entries.iter().map(f).collect(),
        }
    }

    pub fn diff(&self, v: Var) -> Self {
        self.map(|e| e.diff(v))
    }

    pub fn add(&self, other: &ExprMatrix) -> Self {
        ExprMatrix {
            n: self.n,
            entries: self
                .entries
                .iter()
                .zip(&other.entries)
                .map(|(a, b)| Expr::add(a.clone(), b.clone()))
                .collect(),
        }
    }

    pub fn mul(&self, other: &ExprMatrix) -> Self {
        let n = self.n;
        let mut entries = Vec::with_capacity(n * n);
        for i in 0..n {
            for j in 0..n {
                let mut acc = Expr::Num(0.0);
                for k in 0..n {
                    acc = Expr::add(
                        acc,
                        Expr::mul(self.get(i, k).clone(), other.get(k, j).clone()),
                    );
                }
                entries.push(acc);
            }
        }
        ExprMatrix { n, entries }
    }

    pub fn scale(&self, s: &Expr) -> Self {
        self.map(|e| Expr::mul(s.clone(), e.clone()))
    }

    pub fn add_scalar_identity(&self, s: &Expr) -> Self {
        let mut m = self.clone();
        for i in 0..self.n {
            m.entries[i * self.n + i] = Expr::add(m.entries[i * self.n + i].clone(), s.clone());
        }
        m
    }

    pub fn compile(&self) -> MatrixProgram {
        MatrixProgram {
            n: self.n,
            progs: self.entries.iter().map(Expr::compile).collect(),
            zero: self.is_zero(),
        }
    }

    pub fn to_strings(&self) -> Vec<Vec<String>> {
        (0..self.n)
            .map(|i| (0..self.n).map(|j| self.get(i, j).to_string()).collect())
            .collect()
    }

    fn parse(field: &str, rows: &[Vec<String>], n: usize) -> Result<Self, SceneError> {
        let mismatch = |r: usize, c: usize| SceneError::RankMismatch {
            field: field.into(),
            n,
            rows: r,
            cols: c,
        };
        if rows.len() != n {
            return Err(mismatch(rows.len(), rows.first().map_or(0, Vec::len)));
        }
        let mut entries = Vec::with_capacity(n * n);
        for (i, row) in rows.iter().enumerate() {
            if row.len() != n {
                return Err(mismatch(rows.len(), row.len()));
            }
            for (j, src) in row.iter().enumerate() {
                let e = parse_expression(src).map_err(|source| SceneError::Syntax {
                    field: format!("{field}[{i}][{j}]"),
                    source,
                })?;
                entries.push(e);
            }
        }
        Ok(ExprMatrix { n, entries })
    }
}

#[derive(Debug, Clone)]
pub struct MatrixProgram {
    n: usize,
    progs: Vec<Program>,
    zero: bool,
}

impl MatrixProgram {
    #[inline]
    pub fn eval(&self, x: f64, y: f64) -> CMat {
        let mut m = CMat::zeros(self.n);
        if !self.zero {
            for (slot, p) in m.as_mut_slice().iter_mut().zip(&self.progs) {
                *slot = p.eval(x, y);
            }
        }
        m
    }

    pub fn is_zero(&self) -> bool {
        self.zero
    }
}

/// Pointwise metric data.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetricSample {
    pub sigma: f64,
    pub sx: f64,
    pub sy: f64,
    pub lambda: f64,
    /// e^{−σ}
    pub emsig: f64,
}

/// Largest supported bundle rank.
pub const MAX_RANK: usize = 8;

#[derive(Debug, Clone)]
struct Compiled {
    sigma: Program,
    sx: Program,
    sy: Program,
    lambda: Program,
    ax: MatrixProgram,
    ay: MatrixProgram,
    phi: MatrixProgram,
}

/// A validated scene. Immutable; cheap to share between threads.
#[derive(Debug, Clone)]
pub struct Scene {
    n: usize,
    pub grid: GridParams,
    pub ode: OdeParams,
    sigma: Expr,
    lambda: Expr,
    ax: ExprMatrix,
    ay: ExprMatrix,
    phi: ExprMatrix,
    compiled: Compiled,
}

impl Scene {
    pub fn load(path: impl AsRef<Path>) -> Result<Scene, SceneError> {
        let text = std::fs::read_to_string(path)?;
        Self::from_json_str(&text)
    }

    pub fn from_json_str(text: &str) -> Result<Scene, SceneError> {
        let spec: SceneSpec = serde_json::from_str(text)?;
        Self::from_spec(&spec)
    }

    pub fn from_spec(spec: &SceneSpec) -> Result<Scene, SceneError> {
        let n = spec.n;
        if n == 0 || n > MAX_RANK {
            return Err(SceneError::InvalidParameter(format!(
                "rank n must be in 1..={MAX_RANK}"
            )));
        }
        let parse = |field: &str, src: &str| {
            parse_expression(src).map_err(|source| SceneError::Syntax {
                field: field.into(),
                source,
            })
        };
        let sigma = parse("sigma", &spec.sigma)?;
        let lambda = parse("lambda", &spec.lambda)?;
        let mat = |field: &str, m: &Option<Vec<Vec<String>>>| match m {
            Some(rows) => ExprMatrix::parse(field, rows, n),
            None => Ok(ExprMatrix::zeros(n)),
        };
        let ax = mat("Ax", &spec.ax)?;
        let ay = mat("Ay", &spec.ay)?;
        let phi = mat("Phi", &spec.phi)?;
        Self::from_parts(n, sigma, lambda, ax, ay, phi, spec.grid, spec.ode)
    }

    #[allow(clippy::too_many_arguments)]
    pub fn from_parts(
        n: usize,
        sigma: Expr,
        lambda: Expr,
        ax: ExprMatrix,
        ay: ExprMatrix,
        phi: ExprMatrix,
        grid: GridParams,
        ode: OdeParams,
    ) -> Result<Scene, SceneError> {
        for (name, m) in [("Ax", &ax), ("Ay", &ay), ("Phi", &phi)] {
            if m.n() != n {
                return Err(SceneError::RankMismatch {
                    field: name.into(),
                    n,
                    rows: m.n(),
                    cols: m.n(),
                });
            }
        }
        validate_params(&grid, &ode)?;
        let compiled = Compiled {
            sigma: sigma.compile(),
            sx: sigma.diff(Var::X).compile(),
            sy: sigma.diff(Var::Y).compile(),
            lambda: lambda.compile(),
            ax: ax.compile(),
            ay: ay.compile(),
            phi: phi.compile(),
        };
        let scene = Scene {
            n,
            grid,
            ode,
            sigma,
            lambda,
            ax,
            ay,
            phi,
            compiled,
        };
        scene.validate()?;
        Ok(scene)
    }

    fn validate(&self) -> Result<(), SceneError> {
        let c = &self.compiled;
        for (i, j) in probe_points() {
            let (x, y) = (i, j);
            for (name, p) in [
                ("sigma", &c.sigma),
                ("lambda", &c.lambda),
                ("d(sigma)/dx", &c.sx),
                ("d(sigma)/dy", &c.sy),
            ] {
                let v = p.eval(x, y);
                if !(v.re.is_finite() && v.im.is_finite()) {
                    return Err(SceneError::NonFinite {
                        field: name.into(),
                        x,
                        y,
                    });
                }
                if v.im.abs() > SKEW_TOL {
                    return Err(SceneError::NotReal {
                        field: name.into(),
                        x,
                        y,
                        im: v.im,
                    });
                }
            }
            for (name, p) in [("Ax", &c.ax), ("Ay", &c.ay), ("Phi", &c.phi)] {
                let m = p.eval(x, y);
                if m.as_slice()
                    .iter()
                    .any(|v| !(v.re.is_finite() && v.im.is_finite()))
                {
                    return Err(SceneError::NonFinite {
                        field: name.into(),
                        x,
                        y,
                    });
                }
                let norm = m.skew_defect();
                if norm > SKEW_TOL {
                    let n = self.n;
                    let mut worst = (0, 0, 0.0);
                    for a in 0..n {
                        for b in 0..n {
                            let d = (m[(a, b)] + m[(b, a)].conj()).norm();
                            if d > worst.2 {
                                worst = (a, b, d);
                            }
                        }
                    }
                    return Err(SceneError::SkewHermitianViolation {
                        entry: format!("{name}[{}][{}]", worst.0, worst.1),
                        x,
                        y,
                        norm,
                    });
                }
            }
        }
        Ok(())
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn sigma_expr(&self) -> &Expr {
        &self.sigma
    }

    pub fn lambda_expr(&self) -> &Expr {
        &self.lambda
    }

    pub fn ax_expr(&self) -> &ExprMatrix {
        &self.ax
    }

    pub fn ay_expr(&self) -> &ExprMatrix {
        &self.ay
    }

    pub fn phi_expr(&self) -> &ExprMatrix {
        &self.phi
    }

    pub fn has_connection(&self) -> bool {
        !(self.compiled.ax.is_zero() && self.compiled.ay.is_zero())
    }

    pub fn has_attenuation(&self) -> bool {
        self.has_connection() || !self.compiled.phi.is_zero()
    }

    pub fn is_flat(&self) -> bool {
        self.sigma.is_zero()
    }

    #[inline]
    pub fn metric(&self, x: f64, y: f64) -> MetricSample {
        let c = &self.compiled;
        let sigma = c.sigma.eval_re(x, y);
        MetricSample {
            sigma,
            sx: c.sx.eval_re(x, y),
            sy: c.sy.eval_re(x, y),
            lambda: c.lambda.eval_re(x, y),
            emsig: (-sigma).exp(),
        }
    }

    #[inline]
    pub fn sigma(&self, x: f64, y: f64) -> f64 {
        self.compiled.sigma.eval_re(x, y)
    }

    #[inline]
    pub fn lambda(&self, x: f64, y: f64) -> f64 {
        self.compiled.lambda.eval_re(x, y)
    }

    #[inline]
    pub fn ax(&self, x: f64, y: f64) -> CMat {
        self.compiled.ax.eval(x, y)
    }

    #[inline]
    pub fn ay(&self, x: f64, y: f64) -> CMat {
        self.compiled.ay.eval(x, y)
    }

    #[inline]
    pub fn phi(&self, x: f64, y: f64) -> CMat {
        self.compiled.phi.eval(x, y)
    }

    /// A(v) + Φ at (x, y, θ), with v = e^{−σ}(cos θ, sin θ).
    #[inline]
    pub fn attenuation(&self, x: f64, y: f64, theta: f64, emsig: f64) -> CMat {
        let c = &self.compiled;
        let mut m = c.phi.eval(x, y);
        if !c.ax.is_zero() {
            m.axpy(emsig * theta.cos(), &c.ax.eval(x, y));
        }
        if !c.ay.is_zero() {
            m.axpy(emsig * theta.sin(), &c.ay.eval(x, y));
        }
        m
    }

    /// Same scene with a different connection and Higgs field.
    pub fn with_attenuation(
        &self,
        ax: ExprMatrix,
        ay: ExprMatrix,
        phi: ExprMatrix,
    ) -> Result<Scene, SceneError> {
        Scene::from_parts(
            ax.n(),
            self.sigma.clone(),
            self.lambda.clone(),
            ax,
            ay,
            phi,
            self.grid,
            self.ode,
        )
    }

    pub fn with_grid(&self, grid: GridParams) -> Result<Scene, SceneError> {
        validate_params(&grid, &self.ode)?;
        let mut s = self.clone();
        s.grid = grid;
        Ok(s)
    }

    pub fn with_ode(&self, ode: OdeParams) -> Result<Scene, SceneError> {
        validate_params(&self.grid, &ode)?;
        let mut s = self.clone();
        s.ode = ode;
        Ok(s)
    }

    pub fn to_spec(&self) -> SceneSpec {
        SceneSpec {
            n: self.n,
            sigma: self.sigma.to_string(),
            lambda: self.lambda.to_string(),
            ax: Some(self.ax.to_strings()),
            ay: Some(self.ay.to_strings()),
            phi: Some(self.phi.to_strings()),
            grid: self.grid,
            ode: self.ode,
        }
    }

    /// Curvature F_A = ∂x A_y − ∂y A_x + [A_x, A_y] (coefficient of dx∧dy).
    pub fn curvature(&self, x: f64, y: f64) -> CMat {
        let dxay = self.ay.diff(Var::X).compile().eval(x, y);
        let dyax = self.ax.diff(Var::Y).compile().eval(x, y);
        let a = self.ax(x, y);
        let b = self.ay(x, y);
        let comm = &(&a * &b) - &(&b * &a);
        &(&dxay - &dyax) + &comm
    }
}

fn validate_params(grid: &GridParams, ode: &OdeParams) -> Result<(), SceneError> {
    if grid.ntheta < 8 || grid.ntheta % 2 != 0 {
        return Err(SceneError::InvalidParameter(format!(
            "ntheta must be even and at least 8, got {}",
            grid.ntheta
        )));
    }
    if grid.nx < 8 || grid.ns < 8 || grid.nphi < 4 {
        return Err(SceneError::InvalidParameter(
            "grid too small: need nx ≥ 8, ns ≥ 8, nphi ≥ 4".into(),
        ));
    }
    if !(ode.dt > 0.0 && ode.dt <= 0.1) {
        return Err(SceneError::InvalidParameter(format!(
            "ode.dt out of range: {}",
            ode.dt
        )));
    }
    if !(ode.tmax > 0.0) || !(ode.tol > 0.0) {
        return Err(SceneError::InvalidParameter(
            "ode.tmax and ode.tol must be positive".into(),
        ));
    }
    Ok(())
}

fn probe_points() -> impl Iterator<Item = (f64, f64)> {
    let h = 2.0 / (PROBE_GRID - 1) as f64;
    (0..PROBE_GRID).flat_map(move |i| {
        (0..PROBE_GRID).filter_map(move |j| {
            let x = -1.0 + i as f64 * h;
            let y = -1.0 + j as f64 * h;
            (x * x + y * y <= 1.0 + 1e-12).then_some((x, y))
        })
    })
}

/// Evaluates a scalar expression at a point; convenience for tests and tools.
pub fn eval_expr(e: &Expr, x: f64, y: f64) -> C64 {
    e.eval(x, y)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scene(json: &str) -> Result<Scene, SceneError> {
        Scene::from_json_str(json)
    }

    #[test]
    fn accepts_unitary_entries() {
        assert!(scene(r#"{"n":1,"Ax":[["i*x"]]}"#).is_ok());
        assert!(scene(r#"{"n":1,"Phi":[["i"]]}"#).is_ok());
        assert!(scene(
            r#"{"n":2,"Ax":[["i*x","0.3*y + 0.1*i"],["-0.3*y + 0.1*i","0"]],"Ay":[["0","0"],["0","i*y^2"]]}"#
        )
        .is_ok());
    }

    #[test]
    fn rejects_real_scalar_connection() {
        match scene(r#"{"n":1,"Ax":[["1"]]}"#) {
            Err(SceneError::SkewHermitianViolation { entry, norm, .. }) => {
                assert_eq!(entry, "Ax[0][0]");
                assert!((norm - 2.0).abs() < 1e-12);
            }
            other => panic!("unexpected {other:?}"),
        }
        // violation only away from the origin
        assert!(matches!(
            scene(r#"{"n":1,"Phi":[["i + 0.5*x^2"]]}"#),
            Err(SceneError::SkewHermitianViolation { .. })
        ));
    }

    #[test]
    fn rank_mismatch_and_syntax_errors() {
        assert!(matches!(
            scene(r#"{"n":2,"Ax":[["0"]]}"#),
            Err(SceneError::RankMismatch { .. })
        ));
        match scene(r#"{"n":1,"sigma":"0.1*(x"}"#) {
            Err(SceneError::Syntax { field, .. }) => assert_eq!(field, "sigma"),
            other => panic!("unexpected {other:?}"),
        }
        match scene(r#"{"n":1,"Phi":[["i*q"]]}"#) {
            Err(SceneError::Syntax { field, source }) => {
                assert_eq!(field, "Phi[0][0]");
                assert!(matches!(source, ExprError::UnknownIdentifier { .. }));
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn defaults_and_parameter_checks() {
        let s = scene("{}").unwrap();
        assert_eq!(s.grid, GridParams::default());
        assert_eq!(
            (s.grid.nx, s.grid.ntheta, s.grid.ns, s.grid.nphi),
            (64, 64, 64, 32)
        );
        assert!(!s.has_attenuation());
        assert!(matches!(
            scene(r#"{"grid":{"ntheta":7}}"#),
            Err(SceneError::InvalidParameter(_))
        ));
        assert!(matches!(
            scene(r#"{"grid":{"ntheta":6}}"#),
            Err(SceneError::InvalidParameter(_))
        ));
        assert!(matches!(
            scene(r#"{"lambda":"i"}"#),
            Err(SceneError::NotReal { .. })
        ));
        assert!(matches!(
            scene(r#"{"sigma":"log(x)"}"#),
            Err(SceneError::NotReal { .. } | SceneError::NonFinite { .. })
        ));
    }

    #[test]
    fn spec_round_trip() {
        let s = scene(r#"{"n":1,"sigma":"0.1*(x^2+y^2)","lambda":"0.3","Ax":[["i*0.2*y"]],"Phi":[["i*(1+x)"]]}"#)
            .unwrap();
        let back = Scene::from_spec(&s.to_spec()).unwrap();
        assert_eq!(back.sigma_expr(), s.sigma_expr());
        assert_eq!(back.ax_expr(), s.ax_expr());
        let m = s.metric(0.3, -0.2);
        assert!((m.sx - 0.06).abs() < 1e-15 && (m.sy + 0.04).abs() < 1e-15);
    }

    #[test]
    fn curvature_of_abelian_connection() {
        // A = i(−y dx + x dy)/2 has F = i
        let s = scene(r#"{"n":1,"Ax":[["-0.5*i*y"]],"Ay":[["0.5*i*x"]]}"#).unwrap();
        let f = s.curvature(0.2, 0.1);
        assert!((f[(0, 0)] - C64::new(0.0, 1.0)).norm() < 1e-14);
    }
}
