use thiserror::Error;

/// Failure modes shared by every module.
#[derive(Debug, Error)]
pub enum Error {
    /// Inputs violate a precondition (shape mismatch, bad index, invalid parameter).
    #[error("domain error: {0}")]
    Domain(String),
    /// A desk-scale cap (dense size, enumeration size, word budget) would be exceeded.
    #[error("resource limit exceeded: {0}")]
    Resource(String),
    /// A numerical routine failed to converge or produced an out-of-tolerance result.
    #[error("numeric failure: {0}")]
    Numeric(String),
    /// Malformed serialized data.
    #[error("format error: {0}")]
    Format(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn domain<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Domain(msg.into()))
}
