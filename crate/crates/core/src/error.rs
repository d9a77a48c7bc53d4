use thiserror::Error;

/// Errors raised anywhere in the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("far-field mismatch: |value - far field| = {mismatch:.3e} at x = {at:?} exceeds {tolerance:.3e}")]
    FarFieldMismatch {
        mismatch: f64,
        tolerance: f64,
        at: Vec<f64>,
    },

    #[error("resolution: {0}")]
    Resolution(String),

    #[error("cfl violation: dt = {dt:.6e} exceeds stable dt = {limit:.6e}")]
    Cfl { dt: f64, limit: f64 },

    #[error("incompatible far field and mode: {0}")]
    Incompatible(String),

    #[error("non-finite value at time {time} (node {index})")]
    NonFinite { time: f64, index: usize },

    #[error("not converged after {iterations} iterations, last residual {residual:.6e}")]
    NotConverged { iterations: usize, residual: f64 },

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("unknown scenario `{0}`")]
    UnknownScenario(String),

    #[error("scenario {scenario}: {source}")]
    Scenario {
        scenario: String,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidArgument(msg.into())
}
