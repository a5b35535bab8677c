//! Error type shared across the crate.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("failed to read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("empty input: {0}")]
    EmptyInput(String),

    #[error("cannot parse cell at row {row:?}, column {col:?}: {reason}")]
    Parse {
        row: String,
        col: String,
        reason: String,
    },

    #[error("shape error: {0}")]
    Shape(String),

    #[error("duplicate row label {label:?}")]
    DuplicateRowLabel { label: String },

    #[error("symbol {value} at row {row:?}, column {col:?} is outside its alphabet [0, {size})")]
    SymbolOutOfRange {
        row: String,
        col: String,
        value: i64,
        size: u32,
    },

    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("column index {index} out of range for a matrix with {m} columns")]
    ColumnOutOfRange { index: usize, m: usize },

    #[error("no test exists: matrix has fully matching row pairs: {}", format_pairs(pairs))]
    IndistinguishableRows { pairs: Vec<(String, String)> },

    #[error("empty dead-end test report")]
    EmptyReport,

    #[error("exact computation intractable: {0}")]
    ExactIntractable(String),

    #[error("subset-sum oracle supports at most {limit} columns, got {m}")]
    OracleRange { m: usize, limit: usize },
}

impl Error {
    /// Stable machine-readable identifier, used in CLI error objects.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Io { .. } => "io",
            Error::EmptyInput(_) => "empty-input",
            Error::Parse { .. } => "parse",
            Error::Shape(_) => "shape",
            Error::DuplicateRowLabel { .. } => "duplicate-row-label",
            Error::SymbolOutOfRange { .. } => "range",
            Error::Parameter(_) => "parameter",
            Error::ColumnOutOfRange { .. } => "column-out-of-range",
            Error::IndistinguishableRows { .. } => "indistinguishable-rows",
            Error::EmptyReport => "empty-report",
            Error::ExactIntractable(_) => "exact-intractable",
            Error::OracleRange { .. } => "oracle-range",
        }
    }
}

fn format_pairs(pairs: &[(String, String)]) -> String {
    pairs
        .iter()
        .map(|(a, b)| format!("({a:?}, {b:?})"))
        .collect::<Vec<_>>()
        .join(", ")
}
