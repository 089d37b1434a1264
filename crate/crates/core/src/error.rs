use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("non-finite argument: {0}")]
    NonFinite(&'static str),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("overlapping supports: piece {index} starts at {start} before previous piece ends at {prev_end}")]
    Overlap { index: usize, start: f64, prev_end: f64 },

    #[error("potential is not integrable: {0}")]
    NonIntegrable(String),

    #[error("unbounded support: {0}")]
    UnboundedSupport(String),

    #[error("spectral parameter must satisfy Im k >= 0 (got {0})")]
    LowerHalfPlane(f64),

    #[error("tolerance {tol:e} not reached within cell budget (achieved {achieved:e})")]
    ToleranceNotReached { tol: f64, achieved: f64 },

    #[error("tail mass {tail:e} beyond truncation exceeds budget {budget:e}")]
    TailBudget { tail: f64, budget: f64 },

    #[error("|a| = {0} < 1: integration failure")]
    ModulusBelowOne(f64),

    #[error("top anchor {0} is not within 0.1 of 1; raise eta_max")]
    AnchorNotNearOne(f64),

    #[error("gap {gap} shorter than required {required}")]
    ShortGap { gap: f64, required: f64 },

    #[error("log-modulus does not decay at the grid ends (end value {0:e})")]
    NonDecaying(f64),

    #[error("fit is degenerate: {0}")]
    FitDegenerate(String),

    #[error("routes disagree by {diff:e} (limit {limit:e})")]
    RouteDisagreement { diff: f64, limit: f64 },

    #[error("gap phase precision budget exceeded: {0:e}")]
    PhaseBudget(f64),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("config: {0}")]
    Config(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
