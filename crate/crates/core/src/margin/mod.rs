//! Conjugates, margin certificates and deviation-bound evaluators.

mod bounds;
mod certificate;
mod function;

pub use bounds::{
    curvature_interval, default_c0, delta_bound, delta_bound_shifted, envelope_interval, klein_rio_interval,
    margin_helper_check, CurvatureVariant, DeltaBound, DeltaInputs, HelperCheck, Interval,
};
pub use certificate::{
    approx_concave_gap, check_margin, quadratic_margin_constant, ApproxConcaveGap, MarginCertificate, MarginRange,
    MarginViolation,
};
pub use function::{fenchel_conjugate, phi_and_r0, Conjugate, JDescriptor, MarginFunction, PhiR0, CONJUGATE_TOL};
