use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("invalid config: {0}")]
    ConfigInvalid(String),

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("assertion failed: {}", .0.join(", "))]
    AssertionFailed(Vec<String>),

    #[error("numerical failure: {0}")]
    Numerical(#[from] tweedie_prox::Error),
}

impl CliError {
    /// Process exit status: 2 config, 3 assertion or numerical failure, 4 I/O.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::ConfigInvalid(_) => 2,
            CliError::AssertionFailed(_) | CliError::Numerical(_) => 3,
            CliError::Io { .. } => 4,
        }
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T> = std::result::Result<T, CliError>;

/// Turns a construction error from the library into a config violation.
pub(crate) fn invalid(err: tweedie_prox::Error) -> CliError {
    CliError::ConfigInvalid(err.to_string())
}
