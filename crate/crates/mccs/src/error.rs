use std::path::PathBuf;

use thiserror::Error;

pub type CliResult<T> = std::result::Result<T, CliError>;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("{0}")]
    Core(#[from] mccs_core::Error),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: malformed file: {msg}")]
    Format { path: PathBuf, msg: String },
}

impl CliError {
    pub fn config(msg: impl Into<String>) -> Self {
        CliError::Config(msg.into())
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.into(),
            source,
        }
    }

    pub fn format(path: impl Into<PathBuf>, msg: impl ToString) -> Self {
        CliError::Format {
            path: path.into(),
            msg: msg.to_string(),
        }
    }

    /// 2 config, 3 numeric or inapplicable, 4 I/O.
    pub fn exit_code(&self) -> i32 {
        use mccs_core::Error as E;
        match self {
            CliError::Config(_) => 2,
            CliError::Core(E::Domain(_) | E::KeyDeficit { .. } | E::ShapeMismatch { .. }) => 2,
            CliError::Core(_) => 3,
            CliError::Io { .. } | CliError::Format { .. } => 4,
        }
    }
}
