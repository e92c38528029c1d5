use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Coarse classification used by the command line to pick an exit status.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    Config,
    Data,
    Internal,
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("csv error at row {row}: {message}")]
    Csv { row: usize, message: String },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("invalid data: {0}")]
    Data(String),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("training diverged at epoch {epoch}: non-finite loss")]
    Diverged { epoch: usize },

    #[error("calibration set required by addon `{0}` but none was supplied")]
    MissingCalibrationSet(String),

    #[error("degenerate references: none and silver losses differ by {0}")]
    DegenerateReferences(f64),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("invariant violated: {0}")]
    Invariant(String),
}

impl Error {
    pub fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub fn data(msg: impl Into<String>) -> Self {
        Error::Data(msg.into())
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub fn kind(&self) -> ErrorKind {
        match self {
            Error::Config(_) | Error::MissingCalibrationSet(_) | Error::Json(_) => ErrorKind::Config,
            Error::Io { .. }
            | Error::Csv { .. }
            | Error::Data(_)
            | Error::DimensionMismatch { .. }
            | Error::Diverged { .. }
            | Error::DegenerateReferences(_) => ErrorKind::Data,
            Error::Invariant(_) => ErrorKind::Internal,
        }
    }

    /// Configuration and internal errors abort a sweep; data errors only
    /// fail the affected trial.
    pub fn is_fatal(&self) -> bool {
        self.kind() != ErrorKind::Data
    }

    /// Owned copy for reporting the same failure in several places. Sources
    /// that cannot be cloned are flattened into their message.
    pub fn duplicate(&self) -> Error {
        match self {
            Error::Csv { row, message } => Error::Csv {
                row: *row,
                message: message.clone(),
            },
            Error::Config(m) => Error::Config(m.clone()),
            Error::Data(m) => Error::Data(m.clone()),
            Error::DimensionMismatch { expected, found } => Error::DimensionMismatch {
                expected: *expected,
                found: *found,
            },
            Error::Diverged { epoch } => Error::Diverged { epoch: *epoch },
            Error::MissingCalibrationSet(m) => Error::MissingCalibrationSet(m.clone()),
            Error::DegenerateReferences(v) => Error::DegenerateReferences(*v),
            Error::Invariant(m) => Error::Invariant(m.clone()),
            Error::Io { .. } => Error::Data(self.to_string()),
            Error::Json(_) => Error::Config(self.to_string()),
        }
    }
}
