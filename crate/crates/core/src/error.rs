use thiserror::Error;

use crate::intent::FilterError;

/// Crate-wide error type for everything above the filtering primitives.
#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Filter(#[from] FilterError),

    #[error("invalid config at `{path}`: {message}")]
    Config { path: String, message: String },

    #[error("kalman filter: {0}")]
    Kalman(String),

    #[error("push rejected: {0}")]
    Push(String),

    #[error("admittance control is only available in cooperation mode")]
    NotCooperating,

    #[error("trial log is truncated: {0}")]
    TruncatedLog(String),

    #[error("protocol: {0}")]
    Protocol(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn config(path: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            path: path.into(),
            message: message.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
