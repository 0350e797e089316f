use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, GadError>;

/// Coarse classification used by the CLI to pick an exit code.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    Validation,
    Numerical,
    Io,
}

#[derive(Debug, Error)]
pub enum GadError {
    #[error("adjacency is not symmetric: A[{row}][{col}] = {a} but A[{col}][{row}] = {b}")]
    Asymmetric { row: usize, col: usize, a: f64, b: f64 },

    #[error("node {0} has zero degree (isolated nodes are not supported)")]
    IsolatedNode(usize),

    #[error("invalid adjacency: {0}")]
    InvalidAdjacency(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("time {t} outside [0, {horizon}]")]
    TimeOutOfRange { t: f64, horizon: f64 },

    #[error("graph not connected after {retries} attempts; try a larger p_in (or p_out)")]
    Disconnected { retries: usize },

    #[error("covariance singular at t=0")]
    SingularCovariance,

    #[error("time {t} is below the floor t_min = {t_min}; the marginal covariance is near-singular")]
    BelowTimeFloor { t: f64, t_min: f64 },

    #[error("spectral centroid undefined for the zero signal")]
    ZeroSignal,

    #[error("undefined correlation: signal or degree vector is constant")]
    UndefinedCorrelation,

    #[error("training diverged at iteration {iteration}: loss {loss}")]
    Diverged { iteration: usize, loss: f64 },

    #[error("non-finite state at reverse step {step}")]
    NonFinite { step: usize },

    #[error("{path}:{line}: {message}")]
    Csv { path: PathBuf, line: u64, message: String },

    #[error("checkpoint graph hash {checkpoint} does not match graph hash {graph}")]
    HashMismatch { checkpoint: String, graph: String },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

impl GadError {
    pub fn kind(&self) -> ErrorKind {
        match self {
            GadError::Diverged { .. } | GadError::NonFinite { .. } | GadError::SingularCovariance => {
                ErrorKind::Numerical
            }
            GadError::Io { .. } => ErrorKind::Io,
            _ => ErrorKind::Validation,
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        GadError::Io { path: path.into(), source }
    }

    pub(crate) fn param(msg: impl Into<String>) -> Self {
        GadError::InvalidParameter(msg.into())
    }
}
