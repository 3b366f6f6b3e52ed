use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{0} is not a prime modulus")]
    NotPrime(u64),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    /// An enumeration or allocation would exceed a configured limit.
    #[error("resource limit exceeded: {what} needs {needed}, cap is {cap}")]
    Resource {
        what: String,
        needed: u128,
        cap: u128,
    },

    #[error("characteristic {0} is not supported by this operation")]
    UnsupportedCharacteristic(u32),

    /// The desk-scale analog of the tower bound: the regularization loop
    /// wants to cut further but the space has no room left.
    #[error("space exhausted: {0}")]
    SpaceExhausted(String),

    #[error("dimension precondition violated: {0}")]
    DimensionPrecondition(String),

    #[error("random choice failed the verifier {attempts} times: {detail}")]
    RetryCapExceeded { attempts: usize, detail: String },

    /// A self-certifying operation produced output that failed its own checker.
    #[error("verifier failed: {0}")]
    VerifierFailed(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn resource(what: impl Into<String>, needed: u128, cap: u128) -> Self {
        Error::Resource {
            what: what.into(),
            needed,
            cap,
        }
    }
}
