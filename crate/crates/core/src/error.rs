use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("matrix is {rows}x{cols}, expected a square matrix")]
    NotSquare { rows: usize, cols: usize },

    #[error("correlation matrix must be at least 2x2, got {0}x{0}")]
    TooSmall(usize),

    #[error("correlation matrix is not symmetric at ({row}, {col})")]
    NotSymmetric { row: usize, col: usize },

    #[error("correlation matrix diagonal entry {index} is {value}, expected 1")]
    BadDiagonal { index: usize, value: f64 },

    #[error("correlation matrix is not positive semi-definite (smallest eigenvalue {min_eigenvalue:e})")]
    NotPositiveSemiDefinite { min_eigenvalue: f64 },

    #[error("correlation matrix is singular (|C| = {det:e}); its inverse is required")]
    SingularCorrelation { det: f64 },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: String, reason: String },

    #[error("time must be non-negative, got {0}")]
    NegativeTime(f64),

    #[error("maturity must be positive, got {0}")]
    NonPositiveMaturity(f64),

    #[error("closed form requires {expected} assets, portfolio has {found}")]
    WrongAssetCount { expected: usize, found: usize },

    #[error("expected variance is not positive ({0:e})")]
    DegenerateVariance(f64),

    #[error("quadrature did not reach tolerance {tolerance:e} (error estimate {error:e} after {intervals} intervals)")]
    QuadratureFailure {
        intervals: usize,
        error: f64,
        tolerance: f64,
    },

    #[error("invalid simulation config: {0}")]
    InvalidConfig(String),

    #[error("asset {asset} has no subordinator specification")]
    MissingSubordinatorSpec { asset: usize },

    #[error("parse error at row {row}, column {column}: {message}")]
    Parse { row: usize, column: usize, message: String },

    #[error("non-positive price {value} at row {row}, column {column}")]
    NonPositivePrice { row: usize, column: usize, value: f64 },

    #[error("dates are not strictly increasing at row {row}")]
    UnsortedDates { row: usize },

    #[error("need at least {needed} rows, found {found}")]
    TooShort { needed: usize, found: usize },

    #[error("window of {window} rows is too small for {assets} assets (need at least {min})")]
    WindowTooSmall { window: usize, assets: usize, min: usize },

    #[error("{rows} rows cannot fill a single window of {window}")]
    TooFewRows { rows: usize, window: usize },

    #[error("column {column} has zero sample variance")]
    DegenerateColumn { column: usize },

    #[error("window ending at row {row} produced a negative determinant {value:e}")]
    NegativeDeterminant { row: usize, value: f64 },

    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },

    #[error("normal equations are singular")]
    SingularNormalEquations,

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn invalid(name: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name: name.into(),
            reason: reason.into(),
        }
    }

    /// True for errors caused by bad user input rather than numerical trouble
    /// or I/O.
    pub fn is_validation(&self) -> bool {
        !self.is_io() && !matches!(self, Error::QuadratureFailure { .. } | Error::SingularNormalEquations)
    }

    /// True when a file could not be read or written.
    pub fn is_io(&self) -> bool {
        match self {
            Error::Io { .. } => true,
            Error::Csv(e) => e.is_io_error(),
            _ => false,
        }
    }
}
