use thiserror::Error;

/// Errors raised by model construction, estimation and solving.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid model: {0}")]
    InvalidModel(String),
    #[error("non-convex cost specification: {0}")]
    NonConvexSpec(String),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("assumption violated: {0}")]
    AssumptionViolated(String),
    #[error("no sign change of rho(b) + C found for |b| <= {limit}")]
    NoSignChange { limit: f64 },
    #[error("non-finite sample: {0}")]
    NonFiniteSample(String),
    #[error("model is not spectrally negative")]
    NotSpectrallyNegative,
    #[error("root search failed: {0}")]
    RootNotFound(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
