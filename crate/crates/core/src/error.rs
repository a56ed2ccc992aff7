use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Library error. Every variant carries a stable machine-readable code used
/// as the CLI's stderr prefix, so scripted callers can dispatch on failures
/// without parsing prose.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid measure: {0}")]
    InvalidMeasure(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("invalid coupling: {0}")]
    InvalidCoupling(String),

    #[error("invalid parameter: {0}")]
    InvalidParams(String),

    #[error("disconnected input: {0}")]
    Disconnected(String),

    #[error("instance too large for exact enumeration: {0}")]
    TooLarge(String),

    #[error("solver failure: {0}")]
    Solver(String),

    #[error("no convergence after {iterations} iterations (residual {residual:.3e}): {message}")]
    NonConvergence {
        message: String,
        iterations: usize,
        residual: f64,
    },

    #[error("parse error: {0}")]
    Parse(String),

    #[error("internal error: {0}")]
    Internal(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Stable error code, used as a machine-parsable stderr prefix.
    pub fn code(&self) -> &'static str {
        match self {
            Error::InvalidMeasure(_) => "E_MEASURE",
            Error::DimensionMismatch(_) => "E_DIM",
            Error::InvalidCoupling(_) => "E_COUPLING",
            Error::InvalidParams(_) => "E_PARAMS",
            Error::Disconnected(_) => "E_DISCONNECTED",
            Error::TooLarge(_) => "E_TOO_LARGE",
            Error::Solver(_) => "E_SOLVER",
            Error::NonConvergence { .. } => "E_CONVERGE",
            Error::Parse(_) => "E_PARSE",
            Error::Internal(_) => "E_INTERNAL",
            Error::Io(_) => "E_IO",
        }
    }
}
