use std::path::PathBuf;

use thiserror::Error;

/// Errors produced by this crate.
#[derive(Debug, Error)]
pub enum Error {
    /// A caller broke an operation's precondition (shape, channel count, range...).
    #[error("contract violation: {0}")]
    Contract(String),

    /// A file could not be read, parsed or written.
    #[error("data error in {path}: {message}")]
    Data { path: PathBuf, message: String },

    /// Numerical failure during training or a backward pass.
    #[error("training error at {location}: {message}")]
    Training { location: String, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn contract(message: impl Into<String>) -> Error {
    Error::Contract(message.into())
}

pub(crate) fn data_error(path: impl Into<PathBuf>, message: impl Into<String>) -> Error {
    Error::Data {
        path: path.into(),
        message: message.into(),
    }
}

macro_rules! ensure {
    ($cond:expr, $($arg:tt)+) => {
        if !$cond {
            return Err($crate::error::contract(format!($($arg)+)));
        }
    };
}
pub(crate) use ensure;
