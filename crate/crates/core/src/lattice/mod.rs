//! FKG lattice systems: samplers, box sums and dependence estimators.

mod model;
mod sampler;
mod stats;

pub use model::{Boundary, BoxSpec, LatticeSample, ModelKind, ModelSpec, Provenance, SiteDistribution};
pub use sampler::{agreement_probability, sample_system, stream_rng};
pub use stats::{
    box_sums, covariance_profile, mean_var, quadrant_dependence, sample_covariance, CovEstimator, CovarianceProfile,
    QuadrantGrid, QuadrantReport, SampleSet, SlowVariation, TestFunction, TestFunctionCheck,
};
