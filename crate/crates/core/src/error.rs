use thiserror::Error;

/// Errors produced anywhere in the crate.
#[derive(Debug, Error)]
pub enum Error {
    #[error("parameter mismatch: {0}")]
    ParameterMismatch(String),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("value outside domain: {0}")]
    Domain(String),
    #[error("capacity exceeded: {0}")]
    Capacity(String),
    #[error("unsupported: {0}")]
    Unsupported(String),
    #[error("overflow: {0}")]
    Overflow(String),
    #[error("key mismatch: {0}")]
    KeyMismatch(String),
    #[error("no galois key for exponent {0}")]
    MissingGaloisKey(usize),
    #[error(
        "rank-deficient input: requested {requested} components, at most {achievable} achievable"
    )]
    RankDeficient { requested: usize, achievable: usize },
    #[error("malformed encoding: {0}")]
    Decode(String),
    #[error("protocol error {code:?}: {message}")]
    Protocol {
        code: crate::protocol::ErrorCode,
        message: String,
    },
    #[error("not found: {0}")]
    NotFound(String),
    #[error("integrity check failed: {0}")]
    Integrity(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
