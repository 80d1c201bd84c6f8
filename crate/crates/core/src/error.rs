use alloc::string::String;

/// Errors raised by model construction and the solvers.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    /// Malformed or out-of-range user input.
    #[error("invalid input: {0}")]
    Input(String),
    /// A size cap would be exceeded; `required` is the size that was asked for.
    #[error("{what} needs {required}, above the configured cap of {cap}")]
    Resource { what: &'static str, required: u64, cap: u64 },
    /// A caller broke an operation's precondition.
    #[error("contract violation: {0}")]
    Contract(String),
    /// Numerical breakdown that should not happen on valid models.
    #[error("internal error: {0}")]
    Internal(String),
}

pub type Result<T> = core::result::Result<T, Error>;
