//! File formats used by the CLI and the C interface.
//!
//! A field file holds a symmetric tensor of order m as m + 1 lists of C^n
//! expressions, indexed by the number of y-indices:
//!
//! ```json
//! { "order": 1, "components": [["x*y"], ["0"]] }
//! ```
//!
//! Boundary functions are CSV rows `s,phi,component,re,im` in grid order.

use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{MagrayError, Result};
use crate::expr::{parse_expression, Expr};
use crate::flow::RaySample;
use crate::functions::{OneForm, TensorField};
use crate::grid::BoundaryGrid;
use crate::linalg::{CMat, C64};
use crate::transport::{BoundaryFn, ScatterEntry};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FieldFile {
    pub order: usize,
    pub components: Vec<Vec<String>>,
}

impl FieldFile {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json_str(&std::fs::read_to_string(path)?)
    }

    pub fn from_json_str(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    fn parsed(&self, n: usize) -> Result<Vec<Vec<Expr>>> {
        if self.components.len() != self.order + 1 {
            return Err(MagrayError::Invalid(format!(
                "order-{} field needs {} component lists, got {}",
                self.order,
                self.order + 1,
                self.components.len()
            )));
        }
        self.components
            .iter()
            .map(|list| {
                if list.len() != n {
                    return Err(MagrayError::Invalid(format!(
                        "expected {n} entries per component, got {}",
                        list.len()
                    )));
                }
                list.iter()
                    .map(|s| {
                        parse_expression(s).map_err(|e| MagrayError::Invalid(format!("'{s}': {e}")))
                    })
                    .collect()
            })
            .collect()
    }

    pub fn tensor(&self, n: usize) -> Result<TensorField> {
        Ok(TensorField::new(self.order, self.parsed(n)?))
    }

    /// The field as a function; requires order 0.
    pub fn function(&self, n: usize) -> Result<Vec<Expr>> {
        if self.order != 0 {
            return Err(MagrayError::Invalid(format!(
                "expected a function, got order {}",
                self.order
            )));
        }
        Ok(self.parsed(n)?.remove(0))
    }

    /// The field as a 1-form; requires order 1.
    pub fn one_form(&self, n: usize) -> Result<OneForm> {
        if self.order != 1 {
            return Err(MagrayError::Invalid(format!(
                "expected a 1-form, got order {}",
                self.order
            )));
        }
        let mut p = self.parsed(n)?;
        let ay = p.pop().expect("two lists");
        let ax = p.pop().expect("two lists");
        Ok(OneForm::new(ax, ay))
    }
}

pub fn boundary_csv(b: &BoundaryGrid, w: &BoundaryFn) -> String {
    let mut s = String::from("s,phi,component,re,im\n");
    for (idx, si, phi) in b.points() {
        for (c, v) in w.at(idx).iter().enumerate() {
            let _ = writeln!(s, "{si:.17e},{phi:.17e},{c},{:.17e},{:.17e}", v.re, v.im);
        }
    }
    s
}

/// Reads the output of [`boundary_csv`] back onto the same grid.
pub fn parse_boundary_csv(b: &BoundaryGrid, nc: usize, text: &str) -> Result<BoundaryFn> {
    let mut w = BoundaryFn::zeros(b.ns, b.nphi, nc);
    let mut count = 0;
    for (line_no, line) in text.lines().enumerate().skip(1) {
        if line.trim().is_empty() {
            continue;
        }
        let bad = || MagrayError::Invalid(format!("boundary csv line {}: '{line}'", line_no + 1));
        let cols: Vec<&str> = line.split(',').map(str::trim).collect();
        if cols.len() != 5 || count >= w.data.len() {
            return Err(bad());
        }
        let num = |i: usize| cols[i].parse::<f64>().map_err(|_| bad());
        let (idx, c) = (count / nc, count % nc);
        let (s, phi) = (b.s[idx / b.nphi], b.phi[idx % b.nphi]);
        if (num(0)? - s).abs() > 1e-9 || (num(1)? - phi).abs() > 1e-9 || cols[2] != c.to_string() {
            return Err(MagrayError::Invalid(format!(
                "boundary csv line {} does not match the scene's boundary grid",
                line_no + 1
            )));
        }
        w.data[count] = C64::new(num(3)?, num(4)?);
        count += 1;
    }
    if count != w.data.len() {
        return Err(MagrayError::Invalid(format!(
            "boundary csv has {count} values, grid needs {}",
            w.data.len()
        )));
    }
    Ok(w)
}

pub fn ray_csv(ray: &RaySample) -> String {
    let mut s = String::from("t,x,y,theta\n");
    for n in &ray.nodes {
        let _ = writeln!(
            s,
            "{:.17e},{:.17e},{:.17e},{:.17e}",
            n.t, n.z[0], n.z[1], n.z[2]
        );
    }
    s
}

pub fn scatter_csv(table: &[ScatterEntry]) -> String {
    let mut s = String::from("s,phi,s_exit,phi_exit\n");
    for e in table {
        let _ = writeln!(
            s,
            "{:.17e},{:.17e},{:.17e},{:.17e}",
            e.s, e.phi, e.s_exit, e.phi_exit
        );
    }
    s
}

/// Complex matrix as rows of [re, im] pairs.
pub fn matrix_json(m: &CMat) -> serde_json::Value {
    let n = m.n();
    let rows: Vec<Vec<[f64; 2]>> = (0..n)
        .map(|i| {
            (0..n)
                .map(|j| {
                    let z = m[(i, j)];
                    [z.re, z.im]
                })
                .collect()
        })
        .collect();
    serde_json::json!(rows)
}

/// Scattering data with τ₊ and the transport matrix at every ∂₊ node.
pub fn scatter_data_json(table: &[ScatterEntry]) -> serde_json::Value {
    let rows: Vec<serde_json::Value> = table
        .iter()
        .map(|e| {
            serde_json::json!({
                "s": e.s,
                "phi": e.phi,
                "s_exit": e.s_exit,
                "phi_exit": e.phi_exit,
                "tau": e.tau,
                "c": matrix_json(&e.c),
            })
        })
        .collect();
    serde_json::Value::Array(rows)
}

/// Grid samples as CSV rows `x,y,field,component,re,im`.
pub fn grid_csv(xy: &[[f64; 2]], fields: &[(&str, &[C64], usize)]) -> String {
    let mut s = String::from("x,y,field,component,re,im\n");
    for (k, p) in xy.iter().enumerate() {
        for (name, vals, nc) in fields {
            for c in 0..*nc {
                let v = vals[k * nc + c];
                let _ = writeln!(
                    s,
                    "{:.17e},{:.17e},{name},{c},{:.17e},{:.17e}",
                    p[0], p[1], v.re, v.im
                );
            }
        }
    }
    s
}

pub fn history_csv(history: &[f64]) -> String {
    let mut s = String::from("iteration,residual\n");
    for (i, r) in history.iter().enumerate() {
        let _ = writeln!(s, "{i},{r:.6e}");
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn field_file_round_trip() {
        let f =
            FieldFile::from_json_str(r#"{"order": 1, "components": [["x"], ["y^2"]]}"#).unwrap();
        let w = f.one_form(1).unwrap();
        assert_eq!(w.ax[0].eval(0.5, 0.3), C64::new(0.5, 0.0));
        assert!((w.ay[0].eval(0.5, 0.3).re - 0.09).abs() < 1e-15);
        assert!(f.function(1).is_err());
        assert!(f.tensor(2).is_err());
    }

    #[test]
    fn boundary_csv_round_trip() {
        let b = BoundaryGrid::new(4, 3);
        let w = BoundaryFn::from_fn(&b, 2, |s, phi, o| {
            o[0] = C64::new(s, phi);
            o[1] = C64::new(-phi, s * s);
        });
        let back = parse_boundary_csv(&b, 2, &boundary_csv(&b, &w)).unwrap();
        assert_eq!(back, w);
        assert!(parse_boundary_csv(&BoundaryGrid::new(4, 4), 2, &boundary_csv(&b, &w)).is_err());
    }
}
