use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid distribution parameters: {0}")]
    Parameter(String),

    #[error("polynomial degree {degree} exceeds family maximum {max}")]
    Degree { degree: usize, max: usize },

    #[error("invalid truncation: {0}")]
    Truncation(String),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("non-finite value at row {row}, column {col}: {context}")]
    NonFinite {
        row: usize,
        col: usize,
        context: String,
    },

    #[error("numeric failure: {0}")]
    Numeric(String),

    #[error("non-finite iterate at D-MORPH iteration {iteration}")]
    DivergedIterate { iteration: usize },

    #[error("ill-conditioned projection block (condition number {condition:.3e})")]
    Conditioning { condition: f64 },

    #[error("cross-validation needs at least {folds} rows, got {rows}")]
    Folds { folds: usize, rows: usize },

    #[error("invalid argument: {0}")]
    Argument(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("benchmark asset error: {0}")]
    Asset(String),

    #[error("ingestion error at data row {row}: {message}")]
    Ingestion { row: usize, message: String },

    #[error("format error: {0}")]
    Format(String),

    #[error("study trial {trial} failed: {source}")]
    Trial {
        trial: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Coarse classification used by front ends to pick an exit status.
    pub fn kind(&self) -> ErrorKind {
        match self {
            Error::Parameter(_)
            | Error::Degree { .. }
            | Error::Truncation(_)
            | Error::Shape(_)
            | Error::Folds { .. }
            | Error::Argument(_)
            | Error::Config(_)
            | Error::Asset(_)
            | Error::Ingestion { .. }
            | Error::Format(_) => ErrorKind::Config,
            Error::NonFinite { .. }
            | Error::Numeric(_)
            | Error::DivergedIterate { .. }
            | Error::Conditioning { .. } => ErrorKind::Numeric,
            Error::Io { .. } => ErrorKind::Io,
            Error::Trial { source, .. } => source.kind(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    Config,
    Numeric,
    Io,
}
