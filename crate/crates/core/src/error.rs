use thiserror::Error;

/// Errors raised by the simulation layers.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid argument: {0}")]
    Argument(String),

    #[error("zero-probability branch: herald probability {prob:e} below {floor:e}")]
    ZeroProbability { prob: f64, floor: f64 },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("truncation inadequate: {0}")]
    Truncation(String),

    #[error("infeasible: {0}")]
    Infeasible(String),

    #[error("config error: {0}")]
    Config(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn arg<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Argument(msg.into()))
}
