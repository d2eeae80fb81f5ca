//! Risk curves `Ê_n(s)`, `E(s)`, their ς- and shifted variants, and checks of
//! the identities relating them to the estimator.

mod curve;
mod engine;
mod grid;
mod lemmas;

pub use curve::{
    argmin_curve, argmin_points, concavity_check, concavity_check_points, hat_e_curve, mean_curve, mean_e_curve,
    varsigma_curve, Argmin, ConcavityCounterexample, ConcavityVerdict, CurveKind, CurveMetadata, MonteCarloSpec,
    RiskCurve, TIE_TOL,
};
pub use engine::{hat_e, Constraint, CurveEngine, HatE, Process};
pub use grid::{GridRule, SGrid, DEFAULT_RATIO};
pub use lemmas::{
    kappa_gamma, shifted_curve, shifted_ordering_check, verify_minimum_lemma, KappaReport, MinimumLemmaCheck,
    OrderingCheck,
};
