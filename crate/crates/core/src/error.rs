use std::path::PathBuf;

use crate::panel::YearRange;

/// Coarse error classes. Each maps to a stable process exit code.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorCategory {
    /// Missing or unreadable files, malformed text.
    Input,
    /// Data that parses but violates a domain invariant.
    Validation,
    /// Numerical preconditions (undefined columns, non-stochastic matrices).
    Numeric,
}

impl ErrorCategory {
    pub fn exit_code(self) -> i32 {
        match self {
            ErrorCategory::Input => 3,
            ErrorCategory::Validation => 4,
            ErrorCategory::Numeric => 5,
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("malformed input: {0}")]
    Parse(String),

    #[error("missing column `{0}` in header")]
    MissingColumn(String),

    #[error("row {row}: {message}")]
    InvalidRow { row: usize, message: String },

    #[error("row {row}: size {size} is reserved for non-existence and may not appear in raw input")]
    ZeroSize { row: usize, size: f64 },

    #[error("duplicate observation for entity `{entity}` in year {year}")]
    DuplicateKey { entity: String, year: i32 },

    #[error("no records to rectangularize")]
    EmptyPanel,

    #[error("panel has no observed (nonzero) cells")]
    NoObservations,

    #[error("year {year} lies outside {range}")]
    YearOutOfRange { year: i32, range: YearRange },

    #[error("invalid year range: {0}")]
    InvalidRange(String),

    #[error("invalid category scheme: {0}")]
    InvalidScheme(String),

    #[error("size must be non-negative, got {0}")]
    NegativeSize(f64),

    #[error("destination year {dest} must come after origin year {origin}")]
    YearOrder { origin: i32, dest: i32 },

    #[error("need at least {needed} years, got {got}")]
    TooFewYears { needed: usize, got: usize },

    #[error("column {state} is undefined (no occupants) in the transition starting {year}")]
    UndefinedColumn { state: usize, year: i32 },

    #[error("year mismatch: expected {expected}, found {found}")]
    YearMismatch { expected: i32, found: i32 },

    #[error("dimension mismatch: expected {expected} states, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("column {column} sums to {sum}, not 1")]
    NotStochastic { column: usize, sum: f64 },

    #[error("probability vector sums to {0}, not 1")]
    NotDistribution(f64),

    #[error("invalid grouping: {0}")]
    InvalidGrouping(String),

    #[error("fixture error: {0}")]
    Fixture(String),

    #[error("invalid configuration: {0}")]
    Config(String),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub fn category(&self) -> ErrorCategory {
        use Error::*;
        match self {
            Io { .. } | Parse(_) | MissingColumn(_) | Fixture(_) => ErrorCategory::Input,
            UndefinedColumn { .. } | NotStochastic { .. } | NotDistribution(_) => {
                ErrorCategory::Numeric
            }
            _ => ErrorCategory::Validation,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
