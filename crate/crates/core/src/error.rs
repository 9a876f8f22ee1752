use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("missing file: {}", .0.display())]
    MissingFile(PathBuf),

    #[error("missing column: {0}")]
    MissingColumn(String),

    #[error("duplicate id: {0}")]
    DuplicateId(String),

    #[error("self pair: ({0}, {0})")]
    SelfPair(String),

    #[error("bad format in {context}: {message}")]
    Format { context: String, message: String },

    #[error("schema mismatch: expected {expected} attributes, found {found}")]
    SchemaMismatch { expected: usize, found: usize },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("unknown attribute: {0}")]
    UnknownAttribute(String),

    #[error("empty sample")]
    EmptySample,

    #[error("budget {budget} exceeds population {population}")]
    BudgetExceedsPool { budget: usize, population: usize },

    #[error("invalid config: {0}")]
    InvalidConfig(String),

    #[error("empty labeled pool")]
    EmptyLabeledPool,

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Stable short identifier, used by the CLI for machine-parsable errors.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::MissingFile(_) => "missing-file",
            Error::MissingColumn(_) => "missing-column",
            Error::DuplicateId(_) => "duplicate-id",
            Error::SelfPair(_) => "self-pair",
            Error::Format { .. } => "format",
            Error::SchemaMismatch { .. } => "schema-mismatch",
            Error::DimensionMismatch { .. } => "dimension-mismatch",
            Error::UnknownAttribute(_) => "unknown-attribute",
            Error::EmptySample => "empty-sample",
            Error::BudgetExceedsPool { .. } => "budget-exceeds-pool",
            Error::InvalidConfig(_) => "invalid-config",
            Error::EmptyLabeledPool => "empty-labeled-pool",
            Error::Io(_) => "io",
            Error::Csv(_) => "csv",
            Error::Json(_) => "json",
        }
    }

    pub fn format(context: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Format {
            context: context.into(),
            message: message.into(),
        }
    }
}

/// Opens a file, mapping "not found" to [`Error::MissingFile`].
pub(crate) fn open_file(path: &std::path::Path) -> Result<std::fs::File> {
    std::fs::File::open(path).map_err(|e| match e.kind() {
        std::io::ErrorKind::NotFound => Error::MissingFile(path.to_path_buf()),
        _ => Error::Io(e),
    })
}
