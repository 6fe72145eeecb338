use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("malformed CSV: {0}")]
    Csv(String),

    #[error("invalid value {value:?} at row {row}, column {column:?}")]
    InvalidCell {
        row: usize,
        column: String,
        value: String,
    },

    #[error("label outside permitted set {{-1, +1, 0, 1}}: {value:?} at row {row}")]
    InvalidLabel { row: usize, value: String },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("invalid group partition: {0}")]
    InvalidPartition(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("single-class training set")]
    SingleClass,

    #[error("power iteration did not converge for group {group} after {iterations} iterations")]
    PowerIteration { group: usize, iterations: usize },

    #[error("non-finite objective at sweep {sweep}")]
    NonFiniteObjective { sweep: usize },

    #[error("unsupported schema version {found} (expected {expected})")]
    SchemaVersion { found: u32, expected: u32 },

    #[error("schema violation: {0}")]
    Schema(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// True for failures of the filesystem rather than of the data.
    pub fn is_io(&self) -> bool {
        matches!(self, Error::Io { .. })
    }
}
