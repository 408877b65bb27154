use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid defect id {token:?}: {reason}")]
    InvalidDefectId { token: String, reason: &'static str },

    #[error("line {line}: {message}")]
    Parse { line: u64, message: String },

    #[error("duplicate observation for vehicle {vehicle_id} on {date} (line {line})")]
    DuplicateObservation {
        vehicle_id: String,
        date: chrono::NaiveDate,
        line: u64,
    },

    #[error("ratio 0/0 is undefined")]
    ZeroOverZero,

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("unpriced defect {0}")]
    UnpricedDefect(String),

    #[error("no observation for vehicle {vehicle_id} on {date}")]
    MissingObservation {
        vehicle_id: String,
        date: chrono::NaiveDate,
    },

    #[error("state cost index is empty: no rollout history to match against")]
    EmptyHistory,

    #[error("unsupported model version {0:?}")]
    UnsupportedModelVersion(String),

    #[error("corrupted model entry {itemset:?}: {reason}")]
    CorruptedModel { itemset: String, reason: String },

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Stable machine-readable code, shared by CLI error output and HTTP bodies.
    pub fn code(&self) -> &'static str {
        match self {
            Error::InvalidDefectId { .. } => "invalid_defect_id",
            Error::Parse { .. } => "parse_error",
            Error::DuplicateObservation { .. } => "duplicate_observation",
            Error::ZeroOverZero => "zero_over_zero",
            Error::Config(_) => "invalid_config",
            Error::UnpricedDefect(_) => "unpriced_defect",
            Error::MissingObservation { .. } => "missing_observation",
            Error::EmptyHistory => "empty_history",
            Error::UnsupportedModelVersion(_) => "unsupported_model_version",
            Error::CorruptedModel { .. } => "corrupted_model",
            Error::Csv(_) => "csv_error",
            Error::Json(_) => "json_error",
            Error::Io(_) => "io_error",
        }
    }

    /// I/O failures map to a different process exit status than validation failures.
    pub fn is_io(&self) -> bool {
        match self {
            Error::Io(_) => true,
            Error::Csv(e) => matches!(e.kind(), csv::ErrorKind::Io(_)),
            _ => false,
        }
    }
}
