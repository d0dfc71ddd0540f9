use thiserror::Error;

/// Errors produced by the sampling, smoothing and audit routines.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid model: {0}")]
    InvalidModel(String),

    #[error("negative coupling J = {0} violates the FKG condition")]
    NegativeCoupling(f64),

    #[error("lattice extents {0:?} overflow or are empty")]
    BadExtents(Vec<usize>),

    #[error("box {box_extent:?} at {origin:?} does not fit inside lattice {lattice:?}")]
    BoxOutOfRange { origin: Vec<usize>, box_extent: Vec<usize>, lattice: Vec<usize> },

    #[error("radius {radius} too large for lattice {lattice:?}")]
    RadiusTooLarge { radius: usize, lattice: Vec<usize> },

    #[error("need at least {needed} samples, got {got}")]
    TooFewSamples { needed: usize, got: usize },

    #[error("bandwidth must be positive and finite, got {0}")]
    BadBandwidth(f64),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("non-finite evaluation point {0}")]
    NonFinitePoint(f64),

    #[error("model is not standardized (mean {mean}, variance {variance})")]
    NotStandardized { mean: f64, variance: f64 },

    #[error("quadrature did not reach tolerance {requested:e} (estimated error {achieved:e})")]
    Quadrature { requested: f64, achieved: f64 },

    #[error("tail certificate {certificate:e} exceeds requested tolerance {tolerance:e}; increase T_max")]
    TailCertificate { certificate: f64, tolerance: f64 },

    #[error("negative covariance {0}: pair is not positively associated")]
    NegativeCovariance(f64),

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
