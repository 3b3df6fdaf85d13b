use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum GenlabError {
    #[error("config error at `{key}`: {message}")]
    Config { key: String, message: String },
    #[error("usage error: {0}")]
    Usage(String),
    #[error(transparent)]
    Core(#[from] genlab_core::Error),
    #[error("I/O error at {}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed {what} at {}: {message}", path.display())]
    Parse { what: &'static str, path: PathBuf, message: String },
    #[error("{failed} of {total} sweep cells failed")]
    CellsFailed { failed: usize, total: usize },
}

impl GenlabError {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        GenlabError::Io { path: path.into(), source }
    }

    pub fn config(key: impl Into<String>, message: impl Into<String>) -> Self {
        GenlabError::Config { key: key.into(), message: message.into() }
    }

    /// 2 for usage and configuration problems, 1 for everything else.
    pub fn exit_code(&self) -> i32 {
        match self {
            GenlabError::Config { .. } | GenlabError::Usage(_) => 2,
            _ => 1,
        }
    }
}

pub type Result<T, E = GenlabError> = std::result::Result<T, E>;
