use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("non-finite value at row {row}, column {col}")]
    NonFiniteInput { row: usize, col: usize },

    #[error("invalid data matrix: {0}")]
    InvalidData(String),

    #[error("column '{0}' is constant and cannot be scaled to unit variance")]
    ConstantColumn(String),

    #[error("matrix has no entry above the numerical zero threshold")]
    ZeroMatrix,

    #[error("vector has no entry above the numerical zero threshold")]
    ZeroVector,

    #[error("power iteration did not converge within {0} iterations")]
    NoConvergence(usize),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("{what} = {requested} exceeds the admissible bound {bound}")]
    ComponentCountTooLarge {
        what: &'static str,
        requested: usize,
        bound: usize,
    },

    #[error("invalid hyperparameter: {0}")]
    InvalidHyperparameter(String),

    #[error(
        "Gram matrix W'X'XW is numerically singular (condition estimate {condition:.3e}); \
         reduce the number of predictor components h"
    )]
    SingularGram { condition: f64 },

    #[error("column mismatch: missing {missing:?}, unexpected {extra:?}")]
    ColumnMismatch {
        missing: Vec<String>,
        extra: Vec<String>,
    },

    #[error("cannot split {rows} rows into {folds} folds")]
    TooFewRows { rows: usize, folds: usize },

    #[error("every grid point was infeasible")]
    AllPointsInfeasible,

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("I/O failure on {path}: {source}")]
    IoFailure {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: row {row}, column '{column}': {message}")]
    Parse {
        path: PathBuf,
        row: usize,
        column: String,
        message: String,
    },

    #[error("archive schema version {found} is not supported (expected {expected})")]
    SchemaMismatch { found: i64, expected: i64 },

    #[error("corrupt model archive: {0}")]
    CorruptArchive(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::IoFailure {
            path: path.into(),
            source,
        }
    }
}
