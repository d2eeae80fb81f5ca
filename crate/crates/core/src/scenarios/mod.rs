//! End-to-end runs: projection density estimation, linearized least squares,
//! exponential-family fits, and rate fits over sample sizes.

mod cosine;
mod expfam;
mod linearized;
mod projection;
mod rate;
mod spec;

pub use cosine::{cosine_family, cosine_features, ellipsoid_domain, ellipsoid_weights, sieve_dimension};
pub use expfam::{run_expfam_density, run_expfam_regression, ExpfamPoint, ExpfamReport};
pub use linearized::{
    certify_envelope, envelope_tail_bound, linearized_family, run_linearized_ls, EnvelopeCertificate, LinearizedPoint,
    LinearizedReport, TailCheck,
};
pub use projection::{run_projection_case, target_exponent, ProjectionPoint, ProjectionReport};
pub use rate::{rate_fit, RatePoint, RateReport, RATE_TOLERANCE};
pub use spec::{LambdaRule, ScenarioId, ScenarioSpec};
