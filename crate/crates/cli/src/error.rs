use std::path::PathBuf;

use thiserror::Error;

pub const EXIT_OK: i32 = 0;
/// Bad configuration, unreadable input, or a refused request.
pub const EXIT_VALIDATION: i32 = 2;
/// A statistic could not be computed from the data.
pub const EXIT_DEGENERATE: i32 = 3;
/// `compare`: gradients aligned but not significantly different.
pub const EXIT_NOT_DIFFERENT: i32 = 4;
/// `compare`: alignment not established.
pub const EXIT_NOT_ALIGNED: i32 = 5;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("invalid configuration: {0}")]
    Validation(String),

    #[error("{unit}: {source}")]
    Analysis {
        unit: String,
        #[source]
        source: xssd_core::Error,
    },

    #[error(transparent)]
    Core(#[from] xssd_core::Error),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {source}")]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
}

impl CliError {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.into(),
            source,
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Validation(_) | CliError::Json { .. } | CliError::Io { .. } => {
                EXIT_VALIDATION
            }
            CliError::Analysis { source, .. } | CliError::Core(source) => {
                if source.is_degenerate() {
                    EXIT_DEGENERATE
                } else {
                    EXIT_VALIDATION
                }
            }
        }
    }
}

pub type Result<T> = std::result::Result<T, CliError>;
