use thiserror::Error;

/// Errors raised by the library.
#[derive(Debug, Error)]
pub enum Error {
    /// Malformed input text; `line` is 1-based.
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    /// A parameter or value outside its valid range.
    #[error("{0}")]
    Domain(String),

    /// A sampler or simulator reached a state its preconditions rule out.
    #[error("internal invariant violated: {0}")]
    Invariant(String),

    /// The instance gives the estimators nothing to measure, e.g. the
    /// misinformation cannot spread beyond its seeds.
    #[error("degenerate instance: {0}")]
    Degenerate(String),

    /// Exhaustive enumeration was requested on an instance that is too big.
    #[error("instance too large for exhaustive enumeration: {0}")]
    TooLarge(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn domain<T>(message: impl Into<String>) -> Result<T> {
    Err(Error::Domain(message.into()))
}
