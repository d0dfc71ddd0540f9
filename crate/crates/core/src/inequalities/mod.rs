//! Bivariate score calculus for sums of dependent smoothed variables.

pub mod audits;
pub mod constants;
pub mod decomposition;
pub mod expect;
pub mod hoeffding;
pub mod joint;
pub mod theta;

pub use audits::{
    factorization_bounds, joint_moment_audit, moment_bound_audit, product_term_audit, BodyCheck, FactorizationAudit,
    JointMomentAudit, JointPointwiseCheck, MomentAudit, MomentCheck, OffRegionCheck, PointwiseCheck, ProductAudit,
};
pub use constants::Constants;
pub use decomposition::{
    decompose, delta, fishdecomp_residual, theorem_gap, DecompositionReport, DecompositionTerms, Estimate,
    ExponentMode, GapOptions, IdentityCheck, COVARIANCE_FLOOR,
};
pub use expect::{expect, Expectations, Method, Point2, Quad2dSpec, Region};
pub use hoeffding::{hoeffding_integrals, HoeffdingIntegrals};
pub use joint::{shuffle_pairs, weights_for, JointEvaluation, JointSmoothedDensity, SumScoreCheck};
pub use theta::{theta_of_score, theta_seminorm, ThetaSeminorm};
