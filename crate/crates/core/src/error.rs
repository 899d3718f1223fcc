use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum Error {
    #[error("{line}:{col}: {msg}")]
    Parse { line: usize, col: usize, msg: String },

    /// A configured size limit would be exceeded. `needed` is the size that
    /// the operation would have required, when it is known.
    #[error("{what} cap exceeded: limit {limit}, needed {}", needed.map_or("more".to_string(), |n| n.to_string()))]
    CapExceeded { what: &'static str, limit: u128, needed: Option<u128> },

    #[error("invalid input: {0}")]
    Invalid(String),

    #[error("formula fails the {variant} check: {diagnostics}")]
    NotEdp { variant: String, diagnostics: String },

    /// An invariant of the repair construction was violated. This is a bug.
    #[error("internal consistency failure: {0}")]
    Internal(String),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::Invalid(msg.into())
    }

    pub(crate) fn cap(what: &'static str, limit: usize, needed: Option<u128>) -> Self {
        Error::CapExceeded { what, limit: limit as u128, needed }
    }
}
