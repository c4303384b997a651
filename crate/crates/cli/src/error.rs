use junctionlab_core::fitio::FitIoError;
use junctionlab_core::KvError;
use thiserror::Error;

/// Everything a subcommand can fail with, mapped onto the exit-code contract:
/// 2 for usage, configuration and input problems, 1 for numerical or runtime failures.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("config {path}: {source}")]
    Config {
        path: String,
        #[source]
        source: KvError,
    },
    #[error("{0}")]
    Input(String),
    #[error("{0}")]
    Numerical(String),
    #[error("cannot write {path}: {source}")]
    Write {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) | CliError::Config { .. } | CliError::Input(_) => 2,
            CliError::Numerical(_) | CliError::Write { .. } => 1,
        }
    }

    pub fn config(path: &str, key: impl Into<String>, message: impl Into<String>) -> Self {
        CliError::Config {
            path: path.to_string(),
            source: KvError::Rejected {
                key: key.into(),
                message: message.into(),
            },
        }
    }

    pub fn numerical(err: impl std::fmt::Display) -> Self {
        CliError::Numerical(err.to_string())
    }
}

impl From<FitIoError> for CliError {
    fn from(err: FitIoError) -> Self {
        CliError::Input(err.to_string())
    }
}
