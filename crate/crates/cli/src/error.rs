use std::path::PathBuf;

use thiserror::Error;

pub type CliResult<T> = std::result::Result<T, CliError>;

pub const EXIT_OK: i32 = 0;
pub const EXIT_VALIDATION: i32 = 1;
pub const EXIT_IO: i32 = 2;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{path}: {source}")]
    File {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {source}")]
    Input {
        path: PathBuf,
        #[source]
        source: rollaid::Error,
    },

    #[error("invalid arguments: {0}")]
    Usage(String),

    #[error("invalid configuration file {path}: {message}")]
    ConfigFile { path: PathBuf, message: String },

    #[error(transparent)]
    Core(#[from] rollaid::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl CliError {
    /// Stable machine-readable code; core errors keep their own codes.
    pub fn code(&self) -> &'static str {
        match self {
            CliError::File { .. } | CliError::Io(_) => "io_error",
            CliError::Input { source, .. } | CliError::Core(source) => source.code(),
            CliError::Usage(_) => "invalid_arguments",
            CliError::ConfigFile { .. } => "invalid_config",
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::File { .. } | CliError::Io(_) => EXIT_IO,
            CliError::Input { source, .. } | CliError::Core(source) if source.is_io() => EXIT_IO,
            _ => EXIT_VALIDATION,
        }
    }

    /// `{"error":{"code":..,"message":..}}`, the same envelope the HTTP API uses.
    pub fn to_json(&self) -> serde_json::Value {
        serde_json::json!({ "error": { "code": self.code(), "message": self.to_string() } })
    }
}
