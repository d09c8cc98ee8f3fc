use thiserror::Error;

/// Errors produced by the library.
#[derive(Debug, Error)]
pub enum Error {
    /// A parameter or argument lies outside its admissible domain.
    #[error("domain error: {0}")]
    Domain(String),

    /// A series required by the computation does not converge.
    #[error("divergent series: {what} requires sigma > {threshold}, got {sigma}")]
    Divergence {
        what: String,
        threshold: f64,
        sigma: f64,
    },

    /// A truncated computation could not reach the requested accuracy.
    #[error("numerical error: {0}")]
    Numerical(String),

    /// Invalid sampler or CLI configuration.
    #[error("configuration error: {0}")]
    Config(String),

    /// Rejection sampling gave up.
    #[error("rejection sampling timed out after {trials} trials")]
    RejectionTimeout { trials: u64 },

    /// Requested size exceeds an enumeration cap.
    #[error("size error: {what} = {value} exceeds cap {cap}")]
    Size { what: String, value: u64, cap: u64 },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn domain(msg: impl Into<String>) -> Error {
    Error::Domain(msg.into())
}
