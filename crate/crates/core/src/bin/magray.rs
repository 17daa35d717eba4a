use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use magray::adjoint::{
    adjoint_transform, normal_probe, solve_adjoint_pair, AdjointSolveOptions, ProbeOptions,
};
use magray::error::{MagrayError, Result};
use magray::flow::{integrate_ray, BoundaryPoint, Direction};
use magray::functions::sample_exprs;
use magray::harness::report::{all_checks, reference_scene, run_suite, DEFAULT_SEED};
use magray::harness::{
    extension_map, range_membership, seeded, smooth_boundary_data, MembershipOptions,
};
use magray::io::{self, FieldFile};
use magray::krylov::CgneOptions;
use magray::scene::Scene;
use magray::transport::Workspace;

#[derive(Parser)]
#[command(
    name = "magray",
    version,
    about = "Attenuated magnetic ray transforms on the unit disk"
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Csv,
    Json,
}

#[derive(Subcommand)]
enum Cmd {
    /// Trace one magnetic geodesic from a boundary point; CSV of (t, x, y, θ).
    Trace {
        #[arg(long)]
        scene: String,
        /// Boundary parameter of the start point (cos s, sin s).
        #[arg(long, default_value_t = 0.0)]
        s: f64,
        /// Angle from the inward normal.
        #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
        phi: f64,
        #[arg(long)]
        backward: bool,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Scattering relation on the ∂₊ grid; CSV of (s, φ, s′, φ′).
    Scatter {
        #[arg(long)]
        scene: String,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Ray transform of a tensor field file.
    Transform {
        #[arg(long)]
        scene: String,
        #[arg(long)]
        field: PathBuf,
        /// Expected tensor order; checked against the field file.
        #[arg(long)]
        order: Option<usize>,
        #[arg(long, value_enum, default_value_t = Format::Csv)]
        format: Format,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Scattering data C with exit times as JSON.
    Scatterdata {
        #[arg(long)]
        scene: String,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Adjoint transforms (I⁰)*h and (I¹)*h on the spatial grid.
    Adjoint {
        #[arg(long)]
        scene: String,
        /// Boundary data in the CSV layout written by `transform`.
        #[arg(long)]
        data: Option<PathBuf>,
        /// Use smooth random boundary data with this seed instead.
        #[arg(long, conflicts_with = "data")]
        seed: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Block amplitudes of the normal operator at frequencies κ and 2κ.
    ProbeSymbol {
        #[arg(long)]
        scene: String,
        #[arg(long, default_value_t = 16.0)]
        kappa: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Find w with (I⁰)*w = f and (I¹)*w = ω.
    SolveAdjoint {
        #[arg(long)]
        scene: String,
        #[arg(long)]
        f: PathBuf,
        #[arg(long)]
        omega: PathBuf,
        /// Solve for w directly on ∂₊ instead of through an outer disk.
        #[arg(long)]
        no_extension: bool,
        #[arg(long, default_value_t = 500)]
        max_iter: usize,
        #[arg(long, default_value_t = 1e-4)]
        tol: f64,
        /// Boundary CSV of w.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Report JSON; stdout when omitted.
        #[arg(long)]
        report: Option<PathBuf>,
        /// Residual history CSV.
        #[arg(long)]
        history: Option<PathBuf>,
    },
    /// Run verification checks; exit code 1 when any check fails.
    Verify {
        #[arg(long)]
        scene: String,
        /// Comma-separated check names; all checks when omitted.
        #[arg(long, value_delimiter = ',')]
        checks: Option<Vec<String>>,
        /// JSON report; CSV tables are written next to it.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, default_value_t = DEFAULT_SEED)]
        seed: u64,
    },
    /// Decompose u = I⁰f + I¹ω as I¹η − 2πPw and report the residual.
    Range {
        #[arg(long)]
        scene: String,
        #[arg(long)]
        f: PathBuf,
        #[arg(long)]
        omega: PathBuf,
        /// Residual above which the exit code is 1.
        #[arg(long, default_value_t = 5e-2)]
        tol: f64,
        /// Boundary CSV of w.
        #[arg(long)]
        w_out: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

/// A scene file, or `ref:<label>` for a built-in reference scene.
fn load_scene(arg: &str) -> Result<Scene> {
    if let Some(label) = arg.strip_prefix("ref:") {
        return reference_scene(label)
            .ok_or_else(|| MagrayError::Invalid(format!("unknown reference scene '{label}'")));
    }
    Ok(Scene::load(arg)?)
}

fn emit(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(p) => std::fs::write(p, text)?,
        None => match std::io::stdout().lock().write_all(text.as_bytes()) {
            Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => return Err(e.into()),
            _ => {}
        },
    }
    Ok(())
}

fn emit_json(out: Option<&Path>, v: &impl serde::Serialize) -> Result<()> {
    let mut s = serde_json::to_string_pretty(v)?;
    s.push('\n');
    emit(out, &s)
}

fn run(cmd: Cmd) -> Result<bool> {
    match cmd {
        Cmd::Trace {
            scene,
            s,
            phi,
            backward,
            out,
        } => {
            let scene = load_scene(&scene)?;
            let dir = if backward {
                Direction::Backward
            } else {
                Direction::Forward
            };
            let ray = integrate_ray(&scene, &BoundaryPoint::new(s, phi).phase_point(), dir)?;
            emit(out.as_deref(), &io::ray_csv(&ray))?;
        }
        Cmd::Scatter { scene, out } => {
            let ws = Workspace::new(&load_scene(&scene)?);
            emit(out.as_deref(), &io::scatter_csv(&ws.scattering_data()?))?;
        }
        Cmd::Scatterdata { scene, out } => {
            let ws = Workspace::new(&load_scene(&scene)?);
            emit_json(
                out.as_deref(),
                &io::scatter_data_json(&ws.scattering_data()?),
            )?;
        }
        Cmd::Transform {
            scene,
            field,
            order,
            format,
            out,
        } => {
            let scene = load_scene(&scene)?;
            let file = FieldFile::load(&field)?;
            if let Some(m) = order.filter(|&m| m != file.order) {
                return Err(MagrayError::Invalid(format!(
                    "--order {m} but the field has order {}",
                    file.order
                )));
            }
            let ws = Workspace::new(&scene);
            let w = ws.ray_transform(&file.tensor(scene.n())?.to_band(&scene))?;
            match format {
                Format::Csv => emit(out.as_deref(), &io::boundary_csv(&ws.bgrid, &w))?,
                Format::Json => {
                    let values: Vec<[f64; 2]> = w.data.iter().map(|z| [z.re, z.im]).collect();
                    let v = serde_json::json!({
                        "s": ws.bgrid.s,
                        "phi": ws.bgrid.phi,
                        "components": w.nc,
                        "values": values,
                    });
                    emit_json(out.as_deref(), &v)?;
                }
            }
        }
        Cmd::Adjoint {
            scene,
            data,
            seed,
            out,
        } => {
            let ws = Workspace::new(&load_scene(&scene)?);
            let h = match data {
                Some(p) => io::parse_boundary_csv(&ws.bgrid, ws.n(), &std::fs::read_to_string(p)?)?,
                None => smooth_boundary_data(&ws, 2, &mut seeded(seed.unwrap_or(DEFAULT_SEED)))?,
            };
            let r = adjoint_transform(&ws, &h)?;
            let n = ws.n();
            emit(
                out.as_deref(),
                &io::grid_csv(&ws.grid.xy, &[("f", &r.f, n), ("omega", &r.omega, 2 * n)]),
            )?;
        }
        Cmd::ProbeSymbol { scene, kappa, out } => {
            let r = normal_probe(&load_scene(&scene)?, kappa, ProbeOptions::default())?;
            emit_json(out.as_deref(), &r)?;
        }
        Cmd::SolveAdjoint {
            scene,
            f,
            omega,
            no_extension,
            max_iter,
            tol,
            out,
            report,
            history,
        } => {
            let scene = load_scene(&scene)?;
            let n = scene.n();
            let ws = Workspace::new(&scene);
            let fv = sample_exprs(&ws.grid, &FieldFile::load(&f)?.function(n)?);
            let ov = FieldFile::load(&omega)?.one_form(n)?.sample(&ws.grid);
            let ext = if no_extension {
                None
            } else {
                Some(extension_map(&ws)?)
            };
            let opts = AdjointSolveOptions {
                cg: CgneOptions { tol, max_iter },
                ..Default::default()
            };
            let (w, rep) = solve_adjoint_pair(&ws, &fv, &ov, ext.as_ref(), opts)?;
            if let Some(p) = out {
                std::fs::write(p, io::boundary_csv(&ws.bgrid, &w))?;
            }
            if let Some(p) = history {
                std::fs::write(p, io::history_csv(&rep.cg.history))?;
            }
            emit_json(report.as_deref(), &rep)?;
            return Ok(rep.cg.converged);
        }
        Cmd::Verify {
            scene,
            checks,
            out,
            seed,
        } => {
            let scene = load_scene(&scene)?;
            let names: Vec<String> =
                checks.unwrap_or_else(|| all_checks().iter().map(|s| s.to_string()).collect());
            let selection: Vec<&str> = names
                .iter()
                .map(String::as_str)
                .filter(|s| !s.is_empty())
                .collect();
            let report = run_suite(&scene, &selection, seed)?;
            report.print_summary(&mut std::io::stdout())?;
            if let Some(p) = out {
                report.write(&p)?;
            }
            return Ok(report.passed());
        }
        Cmd::Range {
            scene,
            f,
            omega,
            tol,
            w_out,
            out,
        } => {
            let scene = load_scene(&scene)?;
            let n = scene.n();
            let fe = FieldFile::load(&f)?.function(n)?;
            let om = FieldFile::load(&omega)?.one_form(n)?;
            let ws = Workspace::new(&scene);
            let (w, rep) = range_membership(&ws, &fe, &om, MembershipOptions::default())?;
            if let Some(p) = w_out {
                std::fs::write(p, io::boundary_csv(&ws.bgrid, &w))?;
            }
            emit_json(out.as_deref(), &rep)?;
            return Ok(rep.residual <= tol);
        }
    }
    Ok(true)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.cmd) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("magray: {e}");
            ExitCode::from(2)
        }
    }
}
