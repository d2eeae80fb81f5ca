//! Empirical and population functionals: `P_n f`, `τ²(f)`, `τ_min`.

use serde::{Deserialize, Serialize};

use crate::convex::prox::prox_with_domain;
use crate::convex::quadratic::QuadraticModel;
use crate::convex::solver::{minimize, Composite, SolverSettings};
use crate::error::{Error, Result};
use crate::model::{Dataset, Family, Penalty, PopulationOracle, SmoothFamily};
use crate::convex::ConvexSet;

/// `P_n f_g = (1/n) Σ f_g(X_i)`.
pub fn empirical_mean(family: &Family, g: &[f64], data: &Dataset) -> Result<f64> {
    family.check_parameter(g)?;
    let mut acc = 0.0;
    for x in data.points() {
        acc += family.evaluate(g, x)?;
    }
    Ok(acc / data.len() as f64)
}

/// `τ²(f_g) = P(f_g − f⁰) + pen(g)`.
pub fn excess_risk(family: &Family, g: &[f64], penalty: &Penalty, oracle: &PopulationOracle) -> Result<f64> {
    penalty.validate()?;
    let excess = family.population_excess(g, oracle)?;
    Ok(excess + penalty.value(g))
}

/// `σ²(f_g − f⁰)`.
pub fn variance(family: &Family, g: &[f64], oracle: &PopulationOracle) -> Result<f64> {
    family.variance_of_difference(g, oracle)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TauMin {
    /// `min τ²(f)`.
    pub tau_sq: f64,
    pub argmin: Vec<f64>,
}

impl TauMin {
    /// `τ_min` itself (the square root).
    pub fn tau(&self) -> f64 {
        self.tau_sq.max(0.0).sqrt()
    }
}

/// Linear-family constraint model for `τ²`: metric `H/2` about `g⁰`.
pub(crate) fn tau_model(family: &crate::model::LinearFamily, penalty: &Penalty) -> Result<QuadraticModel> {
    QuadraticModel::new(family.excess_metric(), family.reference().to_vec(), penalty.clone(), family.domain().clone())
}

pub fn tau_min(family: &Family, penalty: &Penalty, oracle: &PopulationOracle) -> Result<TauMin> {
    penalty.validate()?;
    let g0 = family.require_reference()?;
    match family {
        Family::Finite(f) => {
            let r = f.population_means()[f.reference_index().expect("checked")];
            let mut best = (f64::INFINITY, 0);
            for (k, p) in f.params().iter().enumerate() {
                let t = f.population_means()[k] - r + penalty.value(p);
                if t < best.0 {
                    best = (t, k);
                }
            }
            Ok(TauMin { tau_sq: best.0, argmin: f.params()[best.1].clone() })
        }
        Family::Linear(f) => {
            let model = tau_model(f, penalty)?;
            let (min, u, ok) = model.minimum()?;
            if !ok {
                return Err(Error::SolverFailure { residual: f64::NAN, iterations: 0 });
            }
            let g: Vec<f64> = u.iter().zip(&g0).map(|(a, b)| a + b).collect();
            Ok(TauMin { tau_sq: min, argmin: g })
        }
        Family::Smooth(f) => {
            if !f.is_convex() {
                return Err(Error::Unsupported("τ_min for a family not declared convex".into()));
            }
            let p0 = f.population_mean(&g0, oracle)?;
            let prob = PopulationProblem { family: f, penalty, oracle, offset: p0, domain: family.domain() };
            let r = minimize(&prob, &g0, &SolverSettings::default().accelerated())?;
            if !r.converged {
                return Err(Error::SolverFailure { residual: r.residual, iterations: r.iterations });
            }
            Ok(TauMin { tau_sq: r.objective, argmin: r.minimizer })
        }
    }
}

struct PopulationProblem<'a> {
    family: &'a SmoothFamily,
    penalty: &'a Penalty,
    oracle: &'a PopulationOracle,
    offset: f64,
    domain: ConvexSet,
}

impl Composite for PopulationProblem<'_> {
    fn smooth(&self, g: &[f64]) -> f64 {
        self.family.population_mean(g, self.oracle).unwrap_or(f64::INFINITY) - self.offset
    }
    fn gradient(&self, g: &[f64]) -> Vec<f64> {
        self.family
            .population_gradient(g, self.oracle)
            .unwrap_or_else(|_| vec![f64::NAN; g.len()])
    }
    fn nonsmooth(&self, g: &[f64]) -> f64 {
        if !self.domain.contains(g, crate::model::family::DOMAIN_TOL) {
            return f64::INFINITY;
        }
        self.penalty.value(g)
    }
    fn prox(&self, v: &[f64], eta: f64) -> Result<Vec<f64>> {
        prox_with_domain(self.penalty, &self.domain, v, eta)
    }
}
