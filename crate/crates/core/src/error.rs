use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// A value outside the domain of an operation (negative charge, bad index, ...).
    #[error("domain error: {0}")]
    Domain(String),

    /// Scenario or solver parameters violate their invariants.
    #[error("configuration error: {0}")]
    Config(String),

    /// Numerical routine failed to reach its target accuracy.
    #[error("internal error: {0}")]
    Internal(String),

    /// The exact solver declined a problem that is too large to enumerate.
    #[error("solver refused: {0}")]
    Refused(String),

    /// An observation had zero probability under the current belief.
    #[error("belief inconsistency: {0}")]
    Inconsistent(String),

    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("model hash mismatch: policy was solved for {found}, current model is {expected}")]
    HashMismatch { expected: String, found: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
