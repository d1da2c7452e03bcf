use std::path::PathBuf;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("schema error: {0}")]
    Schema(String),

    #[error("parse error at data row {row}, column `{column}`: {message}")]
    Parse {
        row: usize,
        column: String,
        message: String,
    },

    #[error("no data rows")]
    NoData,

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("period {period}: cannot guarantee nonempty validation (only {size} observation)")]
    SplitTooSmall { period: usize, size: usize },

    #[error("dimension mismatch: expected {expected} covariates, found {found}")]
    Dimension { expected: usize, found: usize },

    #[error("coordinate descent did not converge after {iterations} iterations (max KKT violation {gap:.3e})")]
    Convergence { iterations: usize, gap: f64 },

    #[error("fitting {spec} failed: {source}")]
    Fit {
        spec: String,
        #[source]
        source: Box<Error>,
    },

    #[error("degenerate denominator")]
    DegenerateDenominator,

    #[error("zero variance in evaluation window")]
    ZeroVariance,

    #[error("bankruptcy/invalid return at period {period}, observation {index}")]
    Bankruptcy { period: usize, index: usize },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("seed {seed}, period {period}, selector {selector}: {source}")]
    Run {
        seed: u64,
        period: usize,
        selector: String,
        #[source]
        source: Box<Error>,
    },

    #[error("cannot write to {path}: {source}")]
    Output {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }
}
