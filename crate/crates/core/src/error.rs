use thiserror::Error;

/// Errors produced by dataset ingestion, distribution kernels and estimators.
#[derive(Debug, Error)]
pub enum Error {
    /// Malformed input file (ragged row, non-numeric field, ...).
    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    /// The dataset (or a subset of it) has too few points to analyze.
    #[error("dataset too small: {0}")]
    DatasetTooSmall(String),

    /// A parameter is outside its documented range.
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// Two points at distance exactly zero; every downstream ratio would be
    /// undefined. Deduplicate the input before analysis.
    #[error("degenerate distance: points {first} and {second} are identical")]
    DegenerateDistance { first: usize, second: usize },

    /// Two consecutive neighbor distances are exactly equal, producing a
    /// ratio of 1 which is outside the support of every ratio law.
    #[error("degenerate ratio at point {point}, neighbor order {order}: tied distances")]
    DegenerateRatio { point: usize, order: usize },

    /// A density or quantile was evaluated outside its support.
    #[error("domain error: {0}")]
    Domain(String),

    /// Moment of order `k` requested where the law has no finite moment.
    #[error("moment undefined: k = {k} must be strictly below d*n1 = {bound}")]
    MomentUndefined { k: u32, bound: f64 },

    /// The likelihood optimizer could not certify a maximum.
    #[error("estimation failed: {0}")]
    EstimationFailed(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
