use std::path::PathBuf;

use thiserror::Error;

/// Failures grouped by the exit code they map to.
#[derive(Debug, Error)]
pub enum MixselError {
    #[error("config error: {0}")]
    Config(String),
    #[error("{path}: line {line}: {msg}")]
    Parse { path: PathBuf, line: usize, msg: String },
    #[error("data error: {0}")]
    Data(String),
    #[error(transparent)]
    Compute(#[from] mixsel_core::Error),
    #[error("io error on {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
}

impl MixselError {
    /// 2 for configuration problems, 3 for bad input data, 1 otherwise.
    pub fn exit_code(&self) -> i32 {
        match self {
            MixselError::Config(_) => 2,
            MixselError::Parse { .. } | MixselError::Data(_) => 3,
            MixselError::Compute(_) | MixselError::Io { .. } => 1,
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        MixselError::Io { path: path.into(), source }
    }
}

pub type Result<T> = std::result::Result<T, MixselError>;
