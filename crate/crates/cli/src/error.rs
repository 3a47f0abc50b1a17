use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = CliError> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum CliError {
    /// A configuration key has a malformed or out-of-range value.
    #[error("invalid value for `{key}`: {message}")]
    Config { key: String, message: String },

    #[error("{0}")]
    Usage(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Core(#[from] icc_core::Error),
}

impl CliError {
    pub fn config(key: &str, message: impl Into<String>) -> Self {
        CliError::Config {
            key: key.into(),
            message: message.into(),
        }
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.into(),
            source,
        }
    }

    /// 2 for configuration, 3 for data and I/O, 4 for numerical failures.
    pub fn exit_code(&self) -> i32 {
        use icc_core::Error as E;
        match self {
            CliError::Config { .. } | CliError::Usage(_) => 2,
            CliError::Io { .. } => 3,
            CliError::Core(e) => match e {
                E::InvalidArgument(_) => 2,
                E::Io { .. } | E::Parse { .. } | E::Data(_) => 3,
                E::Numerical(_) => 4,
            },
        }
    }
}
