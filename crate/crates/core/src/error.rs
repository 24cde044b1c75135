use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("constraint violated at t = {time}: {detail}")]
    ConstraintViolation { time: f64, detail: String },

    #[error("numerical failure: {detail} (residual {residual:e})")]
    NumericalFailure { detail: String, residual: f64 },

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub(crate) fn numerical(detail: impl Into<String>, residual: f64) -> Self {
        Error::NumericalFailure {
            detail: detail.into(),
            residual,
        }
    }
}
