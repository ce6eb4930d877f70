use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("training data must contain at least two distinct classes, found {0}")]
    SingleClass(usize),

    #[error("class {class} has {available} samples, {required} required")]
    InsufficientSamples {
        class: String,
        available: usize,
        required: usize,
    },

    #[error("class {0} has no positive samples")]
    NoPositives(usize),

    #[error("invalid dataset: {0}")]
    InvalidDataset(String),

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{}: parse error at line {line}: {message}", path.display())]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("{}: expected {expected} columns, found {found} at row {row}", path.display())]
    FeatureDimension {
        path: PathBuf,
        row: usize,
        expected: usize,
        found: usize,
    },

    #[error("{}: non-finite entry at row {row}, column {column}", path.display())]
    NonFiniteEntry {
        path: PathBuf,
        row: usize,
        column: usize,
    },

    #[error("feature '{first}' has {first_rows} rows but feature '{second}' has {second_rows}")]
    RowCountMismatch {
        first: String,
        first_rows: usize,
        second: String,
        second_rows: usize,
    },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("{}: {message}", path.display())]
    Format { path: PathBuf, message: String },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// True for errors caused by input data (files, manifests, dataset contents).
    pub fn is_data_error(&self) -> bool {
        matches!(
            self,
            Error::Io { .. }
                | Error::Parse { .. }
                | Error::FeatureDimension { .. }
                | Error::NonFiniteEntry { .. }
                | Error::RowCountMismatch { .. }
                | Error::InvalidDataset(_)
                | Error::InsufficientSamples { .. }
                | Error::Format { .. }
        )
    }
}
