//! Regularized empirical risk minimization: risk curves, concentration
//! bounds, margin conditions and seeded Monte Carlo verification.

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::module_inception)]

pub mod convex;
pub mod curve;
pub mod direct;
pub mod error;
pub mod expfam;
pub mod linalg;
pub mod margin;
pub mod model;
pub mod numeric;
pub mod quadrature;
pub mod rng;
pub mod scenarios;
pub mod stats;

pub use error::{Error, Result};
pub use linalg::Metric;
pub use model::{Dataset, Family, FiniteFamily, LinearFamily, Penalty, PopulationOracle, Sample, SampleLaw, Seminorm, SmoothFamily};
pub use convex::{ConvexSet, SolveResult, SolverSettings};
