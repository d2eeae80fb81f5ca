//! Datasets, loss families, penalties and the empirical/population functionals.

pub mod dataset;
pub mod family;
pub mod functionals;
pub mod penalty;
pub mod population;

pub use dataset::{Dataset, Sample, SampleKind};
pub use family::{Family, FiniteFamily, LinearFamily, SmoothFamily};
pub use functionals::{empirical_mean, excess_risk, tau_min, variance, TauMin};
pub use penalty::{Penalty, Seminorm};
pub use population::{PopulationOracle, SampleLaw};
