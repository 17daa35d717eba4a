//! Suite runner, reference scenes and report output.

use std::io::Write;
use std::path::Path;

use serde::Serialize;

use super::checks::{check_info, run_check, CheckResult, Status, CHECKS};
use crate::error::{MagrayError, Result};
use crate::flow::{simplicity_report, SimplicityReport};
use crate::scene::{GridParams, Scene, SceneSpec};

pub const DEFAULT_SEED: u64 = 20240917;

#[derive(Debug, Clone, Serialize)]
pub struct SuiteReport {
    pub seed: u64,
    pub grid: GridParams,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub simplicity: Option<SimplicityReport>,
    pub checks: Vec<CheckResult>,
}

impl SuiteReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.status != Status::Fail)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// One row per metric.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("criterion,check,status,metric,value,bound,pass\n");
        for c in &self.checks {
            if c.metrics.is_empty() {
                s.push_str(&format!("{},{},{},,,,\n", c.criterion, c.name, c.status));
            }
            for m in &c.metrics {
                s.push_str(&format!(
                    "{},{},{},{},{:.6e},{},{}\n",
                    c.criterion, c.name, c.status, m.name, m.value, m.bound, m.pass
                ));
            }
        }
        s
    }

    /// Plot data: index,value rows per named series.
    pub fn series_csv(&self) -> String {
        let mut s = String::from("check,series,index,value\n");
        for c in &self.checks {
            for (name, v) in &c.series {
                for (i, x) in v.iter().enumerate() {
                    s.push_str(&format!("{},{},{},{:.6e}\n", c.name, name, i, x));
                }
            }
        }
        s
    }

    /// Writes `path` (JSON) plus `.csv` and `.series.csv` siblings.
    pub fn write(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()?)?;
        std::fs::write(path.with_extension("csv"), self.to_csv())?;
        std::fs::write(path.with_extension("series.csv"), self.series_csv())?;
        Ok(())
    }

    pub fn print_summary(&self, out: &mut impl Write) -> std::io::Result<()> {
        for c in &self.checks {
            writeln!(out, "{}", c.summary_line())?;
        }
        Ok(())
    }
}

/// Runs the selected checks on one scene. Checks that need a simple scene are
/// skipped when the simplicity report flags it.
pub fn run_suite(scene: &Scene, selection: &[&str], seed: u64) -> Result<SuiteReport> {
    for name in selection {
        if check_info(name).is_none() {
            return Err(MagrayError::Invalid(format!("unknown check '{name}'")));
        }
    }
    let simplicity = (!selection.is_empty()).then(|| simplicity_report(scene));
    let simple = simplicity.as_ref().is_none_or(|s| s.simple);
    let mut checks = Vec::new();
    for name in selection {
        let (criterion, gated) = check_info(name).expect("validated above");
        if gated && !simple {
            checks.push(CheckResult::skipped(
                name,
                criterion,
                seed,
                scene.grid,
                "scene is not simple",
            ));
            continue;
        }
        checks.push(run_check(name, scene, seed)?);
    }
    Ok(SuiteReport {
        seed,
        grid: scene.grid,
        simplicity,
        checks,
    })
}

pub fn all_checks() -> Vec<&'static str> {
    CHECKS.iter().map(|c| c.0).collect()
}

/// RK4 step of the reference scenes: the Simpson/RK4 errors at this step sit
/// far below every tolerance while keeping the suite fast.
pub const REFERENCE_DT: f64 = 0.02;

fn reference(spec: SceneSpec) -> Scene {
    Scene::from_spec(&spec.with_grid(GridParams::default()).with_dt(REFERENCE_DT))
        .expect("reference scenes are valid")
}

/// Reference scenes by label: zero, magnetic, attenuated, free (A = 0), matrix (n = 2).
pub fn reference_scene(label: &str) -> Option<Scene> {
    let m = |v: &[&[&str]]| {
        Some(
            v.iter()
                .map(|r| r.iter().map(|s| s.to_string()).collect())
                .collect(),
        )
    };
    let metric = "0.05*(x^2 - y^2) + 0.1*x*y";
    let lambda = "0.3 + 0.1*x";
    Some(match label {
        "zero" => reference(SceneSpec::default()),
        "magnetic" => reference(SceneSpec::scalar(metric, lambda, "0", "0", "0")),
        "attenuated" => reference(SceneSpec::scalar(
            metric,
            lambda,
            "i*0.2*y",
            "-i*0.1*x",
            "i*(0.3 + 0.2*x*y)",
        )),
        "free" => reference(SceneSpec::scalar(
            metric,
            lambda,
            "0",
            "0",
            "i*(0.4 + 0.2*x)",
        )),
        "matrix" => reference(SceneSpec {
            n: 2,
            sigma: metric.into(),
            lambda: lambda.into(),
            ax: m(&[&["0", "i*0.2*y"], &["i*0.2*y", "0"]]),
            ay: m(&[&["i*0.1*x", "0.1*y"], &["-0.1*y", "-i*0.1*x"]]),
            phi: m(&[&["i*0.3", "0.2*x"], &["-0.2*x", "i*0.1"]]),
            ..Default::default()
        }),
        _ => return None,
    })
}

/// Scenes each acceptance criterion runs on.
pub fn criterion_scenes(criterion: u8) -> &'static [&'static str] {
    match criterion {
        1 => &["zero", "magnetic", "attenuated", "matrix"],
        2 => &["zero"],
        3 => &["attenuated", "matrix"],
        4 => &["zero", "magnetic", "attenuated"],
        5 | 6 | 7 => &["attenuated", "matrix"],
        8 => &["zero", "attenuated"],
        9 => &["zero", "attenuated"],
        10 | 11 => &["attenuated"],
        12 => &["free"],
        13 => &["magnetic"],
        _ => &[],
    }
}

/// Runs acceptance criterion 1..=13 on its reference scenes.
pub fn run_criterion(criterion: u8, seed: u64) -> Result<CheckResult> {
    let (name, _, _) = *CHECKS
        .iter()
        .find(|c| c.1 == criterion)
        .ok_or_else(|| MagrayError::Invalid(format!("no criterion {criterion}")))?;
    let mut parts = Vec::new();
    for label in criterion_scenes(criterion) {
        let scene = reference_scene(label).expect("known label");
        parts.push((label.to_string(), run_check(name, &scene, seed)?));
    }
    Ok(CheckResult::merge(name, criterion, parts))
}
