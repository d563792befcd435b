use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    /// Invalid or inconsistent configuration. Exit code 2.
    #[error("config: {0}")]
    Config(String),
    /// Failure while running or writing outputs. Exit code 1.
    #[error("{0}")]
    Runtime(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            _ => 1,
        }
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.into(),
            source,
        }
    }
}

/// Parameter problems are configuration errors; everything else happened
/// while running.
impl From<vrsim_core::Error> for CliError {
    fn from(e: vrsim_core::Error) -> Self {
        use vrsim_core::Error as E;
        match e {
            E::InvalidParameter { .. } | E::DimensionMismatch { .. } | E::InvalidLabel { .. } | E::EmptyDataset => {
                CliError::Config(e.to_string())
            }
            other => CliError::Runtime(other.to_string()),
        }
    }
}

pub type Result<T> = std::result::Result<T, CliError>;
