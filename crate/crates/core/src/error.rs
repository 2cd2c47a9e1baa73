use std::io;

use thiserror::Error;

/// Errors raised anywhere in the toolkit.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("singular evaluation: {0}")]
    Singularity(String),

    #[error("unsupported: {0}")]
    Unsupported(String),

    /// A query touched space the obstacle environment was not sampled on.
    #[error("coverage contract violated: {0}")]
    CoverageViolation(String),

    #[error("genealogy mismatch: {0}")]
    GenealogyMismatch(String),

    #[error("missing snapshot at t = {0}")]
    MissingSnapshot(f64),

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("support violation: {0}")]
    SupportViolation(String),

    #[error("picard iteration did not converge after {sweeps} sweeps (residual {residual:.3e})")]
    NonConvergence { sweeps: usize, residual: f64 },

    #[error("config error in `{field}`: {message}")]
    Config { field: String, message: String },

    #[error("format error: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidArgument(msg.into())
}

pub(crate) fn ensure_finite(name: &str, value: f64) -> Result<()> {
    if value.is_finite() {
        Ok(())
    } else {
        Err(invalid(format!("{name} must be finite, got {value}")))
    }
}
