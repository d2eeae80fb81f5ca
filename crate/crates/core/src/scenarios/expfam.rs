use rand::Rng as _;
use rand_distr::{Distribution, Exp, Poisson};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::rate::{rate_fit, RatePoint, RateReport};
use super::spec::{ScenarioId, ScenarioSpec};
use crate::convex::{ConvexSet, SolverSettings};
use crate::error::{config, Error, Result};
use crate::expfam::{
    fit_density_mle, fit_expfam_regression, local_curvature, log_partition, score_residual, BaseDensity, BaseMeasure,
    Cumulant, Design, ExpFamily,
};
use crate::linalg::{dot, norm};
use crate::model::family::standard_normal;
use crate::model::{Penalty, Seminorm};
use crate::rng::{derive_seed, replicate_rng, Rng};
use crate::stats::median;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExpfamPoint {
    pub n: usize,
    pub lambda: f64,
    pub tau_hat: Vec<f64>,
    pub tau_hat_median: f64,
    /// Median `‖θ̂ − θ⁰‖`.
    pub param_error_median: f64,
    /// Median of `d(ĝ)/(Pĝ²/2)` (density scenario).
    pub expansion_ratio_median: Option<f64>,
    /// Median local curvature `τ²/‖ĝ − g⁰‖_n²` (regression scenario).
    pub curvature_median: Option<f64>,
    /// Largest score-equation residual (density scenario, `λ = 0`).
    pub score_residual_max: Option<f64>,
    pub clamped: usize,
    pub unconverged: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExpfamReport {
    pub id: ScenarioId,
    pub points: Vec<ExpfamPoint>,
    /// Log-log slope of the median `τ(f̂)`; recorded, not asserted.
    pub rate: Option<RateReport>,
}

impl ExpfamReport {
    pub fn flagged(&self) -> bool {
        self.points.iter().any(|p| p.unconverged > 0 || p.clamped > 0)
    }
}

fn penalty_at(spec: &ScenarioSpec, n: usize) -> (f64, Penalty) {
    let lambda = spec.lambda.at(n);
    let pen = if lambda == 0.0 { Penalty::Zero } else { Penalty::Squared { lambda, seminorm: Seminorm::Euclidean } };
    (lambda, pen)
}

fn slope(points: &[ExpfamPoint]) -> Option<RateReport> {
    if points.len() < 4 || points.iter().any(|p| !(p.tau_hat_median > 0.0)) {
        return None;
    }
    let rp: Vec<RatePoint> = points.iter().map(|p| RatePoint { n: p.n, estimate: p.tau_hat_median, se: 0.0 }).collect();
    rate_fit(&rp, None).ok()
}

/// Penalized MLE with centered polynomial statistics on `[−1, 1]` and data
/// from the uniform base measure (`g⁰ ≡ 0`).
pub fn run_expfam_density(spec: &ScenarioSpec) -> Result<ExpfamReport> {
    spec.validate()?;
    if spec.id != ScenarioId::ExpfamDensity {
        return config(format!("{} is not the exponential-family density scenario", spec.id.name()));
    }
    let degree = spec.dimension.unwrap_or(3);
    let family = ExpFamily::polynomial(BaseMeasure::interval(-1.0, 1.0, BaseDensity::Uniform), degree, true)?;
    let settings = SolverSettings::default().with_tolerance(1e-10).with_max_iterations(50_000);
    let mut points = Vec::with_capacity(spec.n.len());
    for &n in &spec.n {
        let (lambda, pen) = penalty_at(spec, n);
        let seed = derive_seed(spec.seed ^ 0xE1, n as u64);
        let runs: Vec<(f64, f64, Option<f64>, f64, bool)> = (0..spec.seeds as u64)
            .into_par_iter()
            .map(|j| -> Result<_> {
                let mut rng = replicate_rng(seed, j);
                let data = family.sample(&mut rng, n)?;
                let fit = fit_density_mle(&family, &data, &pen, &settings)?;
                let theta = &fit.minimizer;
                // Centered statistics: P g = 0, so P(f − f⁰) = d(g).
                let d = log_partition(&family, theta)?;
                let tau = (d + pen.value(theta)).max(0.0).sqrt();
                let pg2 = family.second_moment(theta)?;
                let ratio = (pg2 > 0.0).then(|| d / (0.5 * pg2));
                let res = score_residual(&family, &data, theta)?;
                Ok((tau, norm(theta), ratio, res, fit.converged))
            })
            .collect::<Result<_>>()?;
        let tau_hat: Vec<f64> = runs.iter().map(|r| r.0).collect();
        let ratios: Vec<f64> = runs.iter().filter_map(|r| r.2).collect();
        points.push(ExpfamPoint {
            n,
            lambda,
            tau_hat_median: median(&tau_hat),
            tau_hat,
            param_error_median: median(&runs.iter().map(|r| r.1).collect::<Vec<_>>()),
            expansion_ratio_median: (!ratios.is_empty()).then(|| median(&ratios)),
            curvature_median: None,
            score_residual_max: (lambda == 0.0).then(|| runs.iter().map(|r| r.3).fold(0.0, f64::max)),
            clamped: 0,
            unconverged: runs.iter().filter(|r| !r.4).count(),
        });
    }
    let rate = slope(&points);
    Ok(ExpfamReport { id: spec.id, points, rate })
}

fn response(cumulant: Cumulant, xi: f64, noise: f64, rng: &mut Rng) -> Result<f64> {
    Ok(match cumulant {
        Cumulant::Gaussian => xi + noise * standard_normal(rng),
        Cumulant::Poisson => Poisson::new(xi.exp()).map_err(|e| Error::Config(e.to_string()))?.sample(rng),
        Cumulant::Bernoulli => {
            let p = 1.0 / (1.0 + (-xi).exp());
            if rng.random::<f64>() < p {
                1.0
            } else {
                0.0
            }
        }
        Cumulant::Exponential => Exp::new(-xi).map_err(|e| Error::Config(e.to_string()))?.sample(rng),
    })
}

/// Fixed-design regression `g = Xβ` with an intercept column and
/// `Unif[−1, 1]` covariates; responses drawn from the cumulant's family at
/// `g⁰ = Xβ⁰`.
pub fn run_expfam_regression(spec: &ScenarioSpec) -> Result<ExpfamReport> {
    spec.validate()?;
    if spec.id != ScenarioId::ExpfamRegression {
        return config(format!("{} is not the exponential-family regression scenario", spec.id.name()));
    }
    let cumulant = spec.cumulant.unwrap_or(Cumulant::Gaussian);
    let p = spec.dimension.unwrap_or(spec.reference.len().max(2));
    if spec.reference.len() > p {
        return config("β⁰ is longer than the dimension");
    }
    let mut beta0 = spec.reference.clone();
    beta0.resize(p, 0.0);
    let settings = SolverSettings::default().with_tolerance(1e-10).with_max_iterations(50_000);
    let mut points = Vec::with_capacity(spec.n.len());
    for &n in &spec.n {
        let (lambda, pen) = penalty_at(spec, n);
        let seed = derive_seed(spec.seed ^ 0xE2, n as u64);
        let mut drng = replicate_rng(derive_seed(seed, 0xDE51), 0);
        let rows: Vec<Vec<f64>> = (0..n)
            .map(|_| (0..p).map(|k| if k == 0 { 1.0 } else { drng.random_range(-1.0..=1.0) }).collect())
            .collect();
        let g0: Vec<f64> = rows.iter().map(|r| dot(r, &beta0)).collect();
        if cumulant == Cumulant::Exponential && g0.iter().any(|x| *x >= 0.0) {
            return config("the exponential cumulant needs Xβ⁰ < 0 on the design");
        }
        let design = Design::Linear { rows };
        let runs: Vec<(f64, f64, Option<f64>, bool, bool)> = (0..spec.seeds as u64)
            .into_par_iter()
            .map(|j| -> Result<_> {
                let mut rng = replicate_rng(seed, j);
                let y: Vec<f64> = g0.iter().map(|xi| response(cumulant, *xi, spec.noise, &mut rng)).collect::<Result<_>>()?;
                let fit = fit_expfam_regression(&design, &y, cumulant, &ConvexSet::Whole, &pen, &settings)?;
                let beta = &fit.result.minimizer;
                let delta: Vec<f64> = beta.iter().zip(&beta0).map(|(a, b)| a - b).collect();
                let mut tau2 = 0.0;
                for (a, b) in fit.fitted.iter().zip(&g0) {
                    tau2 += cumulant.value(*a) - cumulant.value(*b) - cumulant.derivative(*b) * (a - b);
                }
                tau2 = tau2 / n as f64 + pen.value(beta);
                let curv = local_curvature(cumulant, &g0, &fit.fitted).ok();
                Ok((tau2.max(0.0).sqrt(), norm(&delta), curv, fit.clamped, fit.result.converged))
            })
            .collect::<Result<_>>()?;
        let tau_hat: Vec<f64> = runs.iter().map(|r| r.0).collect();
        let curv: Vec<f64> = runs.iter().filter_map(|r| r.2).collect();
        points.push(ExpfamPoint {
            n,
            lambda,
            tau_hat_median: median(&tau_hat),
            tau_hat,
            param_error_median: median(&runs.iter().map(|r| r.1).collect::<Vec<_>>()),
            expansion_ratio_median: None,
            curvature_median: (!curv.is_empty()).then(|| median(&curv)),
            score_residual_max: None,
            clamped: runs.iter().filter(|r| r.3).count(),
            unconverged: runs.iter().filter(|r| !r.4).count(),
        });
    }
    let rate = slope(&points);
    Ok(ExpfamReport { id: spec.id, points, rate })
}
