//! Error values shared by every module.
//!
//! Shape and domain problems are reported as structured values rather than
//! panics so callers can match on them and the CLI can map them to exit codes.

use std::fmt;

/// Result alias used throughout the crate.
pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// Two shapes that must agree do not. `left`/`right` are the full extents
    /// of the offending operands.
    ShapeMismatch {
        op: &'static str,
        left: Vec<usize>,
        right: Vec<usize>,
    },
    /// A tensor constructor received extents and data of inconsistent length.
    DataLength { expected: usize, got: usize },
    /// A shape with a zero extent was supplied where positive extents are required.
    EmptyShape { op: &'static str },
    /// An operation produced or received a NaN/Inf entry in correctness mode.
    NonFinite { op: &'static str, index: usize },
    /// A step size that must be strictly positive was not.
    NonPositiveDelta { index: usize, value: f64 },
    /// Token id outside the embedding table.
    OutOfVocab { id: usize, vocab: usize },
    /// An input collection that must be non-empty was empty.
    EmptyInput { what: &'static str },
    /// Unsupported operator configuration (kernel size, stride, variant name).
    Unsupported { what: String },
    /// Training aborted because the loss became non-finite.
    Diverged { step: usize },
    /// Config file problem: line number and description.
    Config { line: usize, msg: String },
    /// File I/O failure with the path involved.
    Io { path: String, cause: String },
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::ShapeMismatch { op, left, right } => {
                write!(f, "{op}: shape mismatch {left:?} vs {right:?}")
            }
            Error::DataLength { expected, got } => {
                write!(f, "data length {got} does not match shape product {expected}")
            }
            Error::EmptyShape { op } => write!(f, "{op}: extents must be positive"),
            Error::NonFinite { op, index } => {
                write!(f, "{op}: non-finite value at flat index {index}")
            }
            Error::NonPositiveDelta { index, value } => {
                write!(f, "discretize: step size must be positive, got {value} at index {index}")
            }
            Error::OutOfVocab { id, vocab } => {
                write!(f, "token id {id} outside vocabulary of size {vocab}")
            }
            Error::EmptyInput { what } => write!(f, "{what} must be non-empty"),
            Error::Unsupported { what } => write!(f, "unsupported: {what}"),
            Error::Diverged { step } => write!(f, "training diverged: non-finite loss at step {step}"),
            Error::Config { line, msg } => write!(f, "config line {line}: {msg}"),
            Error::Io { path, cause } => write!(f, "io error on {path}: {cause}"),
        }
    }
}

impl std::error::Error for Error {}
