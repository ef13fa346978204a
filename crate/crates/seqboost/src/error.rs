//! Error types shared across the crate.

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;

/// Errors raised by the sequential-testing engine.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// A numeric argument is outside the domain of the operation
    /// (e.g. `alpha` outside `(0,1)`, a wealth at or above `1/alpha`).
    #[error("domain error: {0}")]
    Domain(String),

    /// The operation was called in a state where it is not meaningful
    /// (e.g. stepping a stopped process).
    #[error("usage error: {0}")]
    Usage(String),

    /// Malformed external input (observation files, populations).
    #[error("input error: {0}")]
    Input(String),

    /// I/O failure, annotated with the offending path.
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub(crate) fn usage(msg: impl Into<String>) -> Self {
        Error::Usage(msg.into())
    }

    pub(crate) fn input(msg: impl Into<String>) -> Self {
        Error::Input(msg.into())
    }
}
