use thiserror::Error;

/// Errors produced anywhere in the scoring pipeline.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("resource limit exceeded: {what} ({requested} > {limit})")]
    ResourceLimit {
        what: &'static str,
        requested: usize,
        limit: usize,
    },

    /// A matrix that must be positive definite was not, or a similar
    /// domain violation in the numerics.
    #[error("numeric domain error: {0}")]
    NumericDomain(String),

    #[error("optimizer did not converge after {iterations} iterations (max |grad| = {grad_norm:.3e})")]
    NonConvergence { iterations: usize, grad_norm: f64 },

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("i/o error: {0}")]
    Io(String),

    /// A failure while evaluating one discrete state of a patch.
    #[error("state {state}: {source}")]
    InState { state: String, source: Box<Error> },
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::NumericDomain(msg.into())
    }

    /// True for failures of the numerical machinery (as opposed to bad input).
    pub fn is_numeric(&self) -> bool {
        match self {
            Error::NumericDomain(_) | Error::NonConvergence { .. } => true,
            Error::InState { source, .. } => source.is_numeric(),
            _ => false,
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
