use thiserror::Error;

use crate::flow::TrappedRay;
use crate::scene::SceneError;

#[derive(Debug, Error)]
pub enum MagrayError {
    #[error(transparent)]
    Scene(#[from] SceneError),
    #[error(transparent)]
    Trapped(#[from] TrappedRay),
    #[error("fiber content up to |k| = {band} exceeds the band limit {limit}")]
    BandLimitExceeded { band: usize, limit: usize },
    #[error("solver stalled: relative residual {residual:.3e} after {iterations} iterations")]
    SolverStalled { residual: f64, iterations: usize },
    #[error("frequency {kappa} is not resolvable on this grid (limit {limit:.3})")]
    FrequencyUnresolvable { kappa: f64, limit: f64 },
    #[error("numerical nullspace is ambiguous: singular-value gap {gap:.2} is below 10")]
    ResolutionTooCoarse { gap: f64 },
    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
    #[error("{0}")]
    Invalid(String),
}

pub type Result<T> = std::result::Result<T, MagrayError>;
