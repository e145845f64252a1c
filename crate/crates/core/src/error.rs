use alloc::string::String;

/// Errors raised by the harmonization core.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("unknown location `{0}`")]
    UnknownLocation(String),
    #[error("operation requires {0} excitation")]
    WrongCoupling(&'static str),
    #[error("non-finite value in {what} at t = {t}")]
    NonFinite { what: &'static str, t: f64 },
    #[error("step size underflow at t = {t}")]
    StepUnderflow { t: f64 },
    #[error("no convergence: {0}")]
    NoConvergence(String),
    #[error("singular matrix in {0}")]
    Singular(&'static str),
    #[error("insufficient data: {0}")]
    InsufficientData(String),
}

pub type Result<T> = core::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidParameter(msg.into())
}
