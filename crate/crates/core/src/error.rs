use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("metric is not positive definite at ({u:.6}, {v:.6}): g11={g11:.6e}, det={det:.6e}")]
    DegenerateMetric {
        u: f64,
        v: f64,
        g11: f64,
        det: f64,
    },

    #[error("ambiguous wrap between path points {index} and {next}: coordinate gap is at least half a period")]
    AmbiguousWrap { index: usize, next: usize },

    #[error("perturbation family rejected at t = {t}: {reason}")]
    FamilyRejected { t: f64, reason: String },

    #[error("geodesic speed drift {drift:.3e} exceeds tolerance {tol:.3e}; reduce the step size (currently {step:.3e})")]
    SpeedDrift { drift: f64, tol: f64, step: f64 },

    #[error("fast sweeping did not converge after {iterations} iterations (last update {residual:.3e})")]
    NoConvergence { iterations: usize, residual: f64 },

    #[error("distance fields live on different grids ({a} vs {b})")]
    GridMismatch { a: usize, b: usize },

    #[error("no cut detected before t = {t_max:.4} (tolerance misconfigured?)")]
    NoCutDetected { t_max: f64 },

    #[error("cut time failed for direction {index}: {source}")]
    Direction {
        index: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("lattice search radius {radius} is not certified: enlarging it changes the result")]
    RadiusUnstable { radius: i32 },

    #[error("empty sample: {0}")]
    EmptySample(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("cannot parse {what}: {detail}")]
    Parse { what: String, detail: String },

    #[error("I/O error at {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("JSON error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn parse(what: impl Into<String>, detail: impl Into<String>) -> Self {
        Error::Parse {
            what: what.into(),
            detail: detail.into(),
        }
    }
}
