//! Exponential families: log-partition functionals, their small-norm
//! expansion, and penalized maximum likelihood fits.

mod analysis;
mod family;
mod fit;

pub use analysis::{small_norm_expansion, taylor_ratio, ExpansionRow, ExpansionTable, TaylorRow, TaylorTable};
pub use family::{log_partition, log_sum, BaseDensity, BaseMeasure, BasisFn, ExpFamily, DEFAULT_NODES, MAX_NODES};
pub use fit::{
    fit_density_mle, fit_expfam_regression, local_curvature, score_residual, Cumulant, Design, RegressionFit, XI_CEILING,
};
