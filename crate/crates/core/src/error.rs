use std::path::PathBuf;

use thiserror::Error;

/// Errors raised across the crate.
///
/// Variants are grouped by who can fix them: shape/config/input/data/format/state
/// errors are caller mistakes; numerics and io errors are runtime failures.
#[derive(Debug, Error)]
pub enum Error {
    #[error("shape error: {0}")]
    Shape(String),
    #[error("numerics error: {0}")]
    Numerics(String),
    #[error("tape error: {0}")]
    Tape(String),
    #[error("input error: {0}")]
    Input(String),
    #[error("config error: {0}")]
    Config(String),
    #[error("state error: {0}")]
    State(String),
    #[error("data error: {0}")]
    Data(String),
    #[error("format error in {path}: {reason}")]
    Format { path: PathBuf, reason: String },
    #[error("io error at {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// True for errors caused by invalid user input or configuration, as
    /// opposed to failures while running a valid request.
    pub fn is_validation(&self) -> bool {
        !matches!(self, Error::Numerics(_) | Error::Io { .. } | Error::Tape(_))
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
