//! Error type shared across the pipeline.

use std::path::PathBuf;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("failed to read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("csv error in {path}: {source}")]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },

    #[error("{path}: no data rows")]
    EmptyDataset { path: PathBuf },

    #[error("{path}: {n} data rows, need at least 4")]
    TooFewRows { path: PathBuf, n: usize },

    #[error("{path}: row {row} has {found} fields, expected {expected}")]
    RaggedRow {
        path: PathBuf,
        row: usize,
        expected: usize,
        found: usize,
    },

    #[error("{path}: row {row}, column {col}: cannot parse {value:?} as a finite number")]
    NonNumericCell {
        path: PathBuf,
        row: usize,
        col: usize,
        value: String,
    },

    #[error("{path}: label column {name:?} not found")]
    LabelColumnNotFound { path: PathBuf, name: String },

    #[error("perplexity {perplexity} must be below n - 1 = {}", n - 1)]
    PerplexityTooLarge { perplexity: f64, n: usize },

    #[error("power iteration did not converge within {iterations} iterations")]
    PowerIterationStalled { iterations: usize },

    #[error("gradient descent diverged at iteration {iteration}")]
    DescentDiverged { iteration: usize },

    #[error("non-finite cost for candidate {signature:?}")]
    NonFiniteCost { signature: String },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("delta vector has length {found}, individual has {expected} constants")]
    DeltaLengthMismatch { expected: usize, found: usize },

    #[error("cannot parse expression: {0}")]
    ExpressionSyntax(String),

    #[error("front file {path}: {reason}")]
    FrontFormat { path: PathBuf, reason: String },

    #[error("front file {path}: no entry matches selector {selector:?}")]
    NoSuchEntry { path: PathBuf, selector: String },
}
