//! Projections, proximal operators and proximal-gradient solvers.

pub mod erm;
pub mod prox;
pub mod quadratic;
pub mod sets;
pub mod solver;

pub use erm::{optimality_residual, solve_erm, solve_regularized_ls};
pub use prox::{prox, prox_with_domain};
pub use quadratic::{QuadraticModel, Support};
pub use sets::ConvexSet;
pub use solver::{minimize, Composite, SolveResult, SolverSettings, StepRule};

/// Euclidean projection onto a convex primitive.
pub fn project(set: &ConvexSet, point: &[f64]) -> crate::Result<Vec<f64>> {
    set.project(point)
}
