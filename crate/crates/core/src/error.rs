use thiserror::Error;

/// Errors raised anywhere in the lab.
#[derive(Debug, Error)]
pub enum Error {
    #[error("unsupported dimension {dim} for {what} (supported: {supported})")]
    UnsupportedDimension {
        what: &'static str,
        dim: usize,
        supported: &'static str,
    },

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("unknown catalog entry `{0}`")]
    UnknownCatalogEntry(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("alpha must exceed 1, got {0}")]
    AlphaOutOfRange(f64),

    #[error("dimension condition violated: {0}")]
    Dimension(String),

    #[error("degenerate differential at node {node}: smallest singular value {sigma_min:e}")]
    Degenerate { node: usize, sigma_min: f64 },

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("integration failed: non-finite integrand at node {node}")]
    NonFinite { node: usize },

    #[error("sections live over different base maps")]
    MismatchedBase,

    #[error("solver did not converge after {iterations} iterations (residual {residual:e})")]
    SolverDiverged { iterations: usize, residual: f64 },

    #[error("numeric failure: {0}")]
    Numeric(String),

    #[error("config error at `{path}`: {message}")]
    Config { path: String, message: String },

    #[error("checkpoint format error: {0}")]
    Checkpoint(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
