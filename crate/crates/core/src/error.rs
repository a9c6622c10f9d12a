use thiserror::Error;

/// Errors produced by the library.
#[derive(Debug, Error)]
pub enum Error {
    /// A parameter or configuration value violates its contract.
    #[error("invalid parameter: {0}")]
    InvalidParam(String),

    /// Two inputs that must share a grid, length or unit do not.
    #[error("mismatched inputs: {0}")]
    Mismatch(String),

    /// An index or delay falls outside the valid range.
    #[error("out of range: {0}")]
    OutOfRange(String),

    /// An input is degenerate (zero distance, empty spectrum, ...).
    #[error("degenerate input: {0}")]
    Degenerate(String),

    /// A text record could not be parsed.
    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
