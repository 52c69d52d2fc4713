use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("structural error: {0}")]
    Structural(String),

    #[error("degenerate triangle {triangle} (signed area {area:e})")]
    NumericalDegeneracy { triangle: usize, area: f64 },

    #[error("degenerate map: {0}")]
    DegenerateMap(String),

    #[error("linear solver did not converge after {iterations} iterations (relative residual {residual:e})")]
    NonConvergence { iterations: usize, residual: f64 },

    #[error("fit residual {residual:e} exceeds threshold {threshold:e}")]
    Accuracy { residual: f64, threshold: f64 },

    #[error("unstable march: {0}")]
    Stability(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn invalid<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::InvalidArgument(msg.into()))
}
