use std::path::PathBuf;

use harmonize_core::Error as CoreError;

/// Bench errors, grouped by process exit code.
#[derive(Debug, thiserror::Error)]
pub enum BenchError {
    #[error("validation: {0}")]
    Validation(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
}

pub type Result<T> = std::result::Result<T, BenchError>;

impl BenchError {
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Validation(_) => 2,
            Self::Numerical(_) => 3,
            Self::Io { .. } => 1,
        }
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Self::Io { path: path.into(), source }
    }
}

impl From<CoreError> for BenchError {
    fn from(e: CoreError) -> Self {
        match e {
            CoreError::InvalidParameter(_) | CoreError::UnknownLocation(_) | CoreError::WrongCoupling(_) => {
                Self::Validation(e.to_string())
            }
            _ => Self::Numerical(e.to_string()),
        }
    }
}

pub(crate) fn validation(msg: impl Into<String>) -> BenchError {
    BenchError::Validation(msg.into())
}
