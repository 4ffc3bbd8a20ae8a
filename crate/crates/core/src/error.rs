use thiserror::Error;

pub type Result<T> = std::result::Result<T, ArubaError>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ArubaError {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("boundary error: {0}")]
    Boundary(String),

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("did not converge after {iterations} iterations (residual {residual:.3e})")]
    Convergence { iterations: usize, residual: f64 },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("invalid environment spec: {0}")]
    InvalidSpec(String),

    #[error("numeric error: {0}")]
    Numeric(String),

    #[error("internal error: {0}")]
    Internal(String),

    #[error("client skipped: {0}")]
    SkipClient(String),

    #[error("io error: {0}")]
    Io(String),
}

impl From<std::io::Error> for ArubaError {
    fn from(err: std::io::Error) -> Self {
        ArubaError::Io(err.to_string())
    }
}

pub(crate) fn invalid(msg: impl Into<String>) -> ArubaError {
    ArubaError::InvalidArgument(msg.into())
}
