//! Crate-wide error type.

use std::fmt;
use std::io;

/// Errors produced by dataset handling, training and serialization.
#[derive(Debug)]
pub enum Error {
    /// A dataset column has zero Euclidean norm and cannot be normalized.
    ZeroColumn { class: String, column: usize },
    /// A signal passed to a classifier is identically zero.
    ZeroSignal,
    /// Shapes of two objects that must agree do not.
    DimensionMismatch {
        context: &'static str,
        expected: usize,
        found: usize,
    },
    /// The exact (∞,1)-norm enumerates 2^cols sign patterns; refuse above the cap.
    EnumerationCap { columns: usize, cap: usize },
    /// Only the five (q,p) pairs used for coherence measurement are supported.
    UnsupportedNormPair { q: &'static str, p: &'static str },
    /// Invalid configuration or parameter combination.
    InvalidConfig(String),
    /// Malformed input data; `row`/`column` are 1-based file positions.
    Parse {
        row: usize,
        column: Option<usize>,
        message: String,
    },
    /// Malformed or corrupted model encoding.
    Model(String),
    /// A numerical routine failed or produced non-finite values.
    Numerical(String),
    /// Underlying I/O failure.
    Io(io::Error),
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::ZeroColumn { class, column } => {
                write!(f, "class {class:?} column {column} has zero norm")
            }
            Error::ZeroSignal => write!(f, "signal is identically zero"),
            Error::DimensionMismatch {
                context,
                expected,
                found,
            } => write!(f, "{context}: expected dimension {expected}, found {found}"),
            Error::EnumerationCap { columns, cap } => write!(
                f,
                "(inf,1)-norm requires sign enumeration over 2^{columns} patterns; \
                 supported only up to {cap} columns"
            ),
            Error::UnsupportedNormPair { q, p } => {
                write!(f, "operator ({q},{p})-norm is not supported")
            }
            Error::InvalidConfig(msg) => write!(f, "invalid configuration: {msg}"),
            Error::Parse {
                row,
                column,
                message,
            } => match column {
                Some(c) => write!(f, "row {row}, column {c}: {message}"),
                None => write!(f, "row {row}: {message}"),
            },
            Error::Model(msg) => write!(f, "model decode failed: {msg}"),
            Error::Numerical(msg) => write!(f, "numerical failure: {msg}"),
            Error::Io(e) => write!(f, "i/o error: {e}"),
        }
    }
}

impl std::error::Error for Error {
    fn source(&self) -> Option<&(dyn std::error::Error + 'static)> {
        match self {
            Error::Io(e) => Some(e),
            _ => None,
        }
    }
}

impl From<io::Error> for Error {
    fn from(e: io::Error) -> Self {
        Error::Io(e)
    }
}

pub type Result<T> = std::result::Result<T, Error>;
