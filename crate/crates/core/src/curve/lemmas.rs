use serde::{Deserialize, Serialize};

use super::curve::{argmin_points, CurveKind, RiskCurve};
use super::engine::{Constraint, CurveEngine};
use super::grid::SGrid;
use crate::convex::{solve_erm, ConvexSet, SolverSettings};
use crate::error::{arg, Error, Result};
use crate::model::functionals::excess_risk;
use crate::model::{Dataset, Family, Penalty, PopulationOracle};

/// Both sides of the identity `τ(f̂) = ŝ` for one dataset.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MinimumLemmaCheck {
    pub tau_hat: f64,
    pub s_hat: f64,
    pub gap: f64,
    /// Larger of the two grid gaps next to `ŝ` (0 when the breakpoints were used).
    pub grid_step: f64,
    /// Whether both sides were exhaustive.
    pub exhaustive: bool,
    pub converged: bool,
}

impl MinimumLemmaCheck {
    pub fn holds(&self, solver_tol: f64) -> bool {
        self.gap <= self.grid_step + solver_tol
    }
}

/// Compares `τ(f̂)` from the estimator with the grid argmin `ŝ` of
/// `s² − Ê_n(s)`. Finite families use their exact breakpoints
/// `{τ(f_k)}` instead of `grid`.
pub fn verify_minimum_lemma(
    family: &Family,
    penalty: &Penalty,
    data: &Dataset,
    oracle: &PopulationOracle,
    grid: &SGrid,
    settings: &SolverSettings,
) -> Result<MinimumLemmaCheck> {
    let engine = CurveEngine::new(family, penalty, oracle, Constraint::Tau)?;
    let p = engine.process(data)?;
    let fit = solve_erm(family, penalty, data, oracle, settings)?;
    if let Some(levels) = engine.finite_levels() {
        // Objective `L_k − Ê(√L_k)` at each breakpoint, ties to the smaller level.
        let mut order: Vec<usize> = (0..levels.len()).collect();
        order.sort_by(|a, b| levels[*a].total_cmp(&levels[*b]));
        let mut best = (f64::INFINITY, f64::INFINITY);
        for k in order {
            let (e, _) = engine.value_at_level(&p, levels[k])?;
            let obj = levels[k] - e;
            if obj < best.0 {
                best = (obj, levels[k]);
            }
        }
        let Family::Finite(f) = family else { unreachable!() };
        let k_hat = f.index_of(&fit.minimizer)?;
        let tau_hat = levels[k_hat].max(0.0).sqrt();
        let s_hat = best.1.max(0.0).sqrt();
        return Ok(MinimumLemmaCheck {
            tau_hat,
            s_hat,
            gap: (tau_hat - s_hat).abs(),
            grid_step: 0.0,
            exhaustive: true,
            converged: true,
        });
    }
    grid.check_tau_min(engine.min_level().max(0.0).sqrt())?;
    let (values, _) = engine.values(&p, grid.points())?;
    let am = argmin_points(grid.points(), &values)?;
    let tau_hat = excess_risk(family, &fit.minimizer, penalty, oracle)?.max(0.0).sqrt();
    Ok(MinimumLemmaCheck {
        tau_hat,
        s_hat: am.s,
        gap: (tau_hat - am.s).abs(),
        grid_step: local_step(grid.points(), am.index),
        exhaustive: false,
        converged: fit.converged,
    })
}

fn local_step(points: &[f64], i: usize) -> f64 {
    let left = if i > 0 { points[i] - points[i - 1] } else { 0.0 };
    let right = if i + 1 < points.len() { points[i + 1] - points[i] } else { 0.0 };
    left.max(right)
}

/// `F(s̃) = max {W(f) : τ²(f) ≤ τ*² + s̃²}` on a grid of `s̃`.
pub fn shifted_curve(
    family: &Family,
    penalty: &Penalty,
    data: &Dataset,
    oracle: &PopulationOracle,
    tau_star_sq: f64,
    grid_tilde: &SGrid,
) -> Result<RiskCurve> {
    let engine = CurveEngine::new(family, penalty, oracle, Constraint::Tau)?;
    let min = engine.min_level();
    if !(tau_star_sq >= min - 1e-12 * min.abs().max(1.0)) {
        return arg(format!("τ*² = {tau_star_sq} lies below τ²_min = {min}"));
    }
    let p = engine.process(data)?;
    let mut values = Vec::with_capacity(grid_tilde.len());
    let mut flags = Vec::with_capacity(grid_tilde.len());
    for st in grid_tilde.points() {
        let (v, f) = engine.value(&p, (tau_star_sq + st * st).sqrt())?;
        values.push(v);
        flags.push(f);
    }
    Ok(RiskCurve {
        grid: grid_tilde.clone(),
        values,
        se: None,
        flags,
        kind: CurveKind::Shifted,
        replicates: 1,
        seed: None,
        replicate_values: Vec::new(),
    })
}

/// `κ_s` per grid point and `Γ̂ = max κ_s/s`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KappaReport {
    pub points: Vec<f64>,
    pub kappa: Vec<f64>,
    pub gamma_hat: f64,
    /// Set when the maximum of `κ_s/s` sits at the smallest grid point, which
    /// suggests `Γ` is not finite.
    pub attained_at_start: bool,
}

/// `κ_s² = max {P(f − f⁰) : τ²(f) ≤ τ*² + s²}` for finite families and pure
/// linear families with zero penalty on the whole space.
pub fn kappa_gamma(family: &Family, penalty: &Penalty, _oracle: &PopulationOracle, tau_star_sq: f64, grid: &SGrid) -> Result<KappaReport> {
    if !(tau_star_sq >= 0.0) {
        return arg("τ*² must be nonnegative");
    }
    let kappa_sq: Box<dyn Fn(f64) -> f64> = match family {
        Family::Finite(f) => {
            let r = f.reference_index().ok_or_else(|| Error::Config("no reference registered".into()))?;
            let means = f.population_means();
            let pairs: Vec<(f64, f64)> = f
                .params()
                .iter()
                .enumerate()
                .map(|(k, p)| (means[k] - means[r] + penalty.value(p), means[k] - means[r]))
                .collect();
            Box::new(move |level| {
                let tol = 1e-12 * level.abs().max(1.0);
                pairs.iter().filter(|(l, _)| *l <= level + tol).map(|(_, e)| *e).fold(f64::NEG_INFINITY, f64::max)
            })
        }
        Family::Linear(f) if penalty.is_zero() && matches!(f.domain(), ConvexSet::Whole) => Box::new(|level| level),
        _ => {
            return Err(Error::Unsupported(
                "κ_s is only computed for finite families and unpenalized pure linear families".into(),
            ))
        }
    };
    let mut kappa = Vec::with_capacity(grid.len());
    let mut gamma_hat = 0.0;
    let mut arg_idx = None;
    for (i, s) in grid.points().iter().enumerate() {
        let k2 = kappa_sq(tau_star_sq + s * s);
        if !k2.is_finite() {
            return arg(format!("no feasible element at s = {s}"));
        }
        let k = k2.max(0.0).sqrt();
        kappa.push(k);
        if *s > 0.0 && k / s > gamma_hat {
            gamma_hat = k / s;
            arg_idx = Some(i);
        }
    }
    let first_positive = grid.points().iter().position(|s| *s > 0.0);
    Ok(KappaReport {
        points: grid.points().to_vec(),
        kappa,
        gamma_hat,
        attained_at_start: arg_idx.is_some() && arg_idx == first_positive,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct OrderingCheck {
    pub s_tilde: f64,
    pub s_star: f64,
    pub lhs: f64,
    pub rhs: f64,
    pub holds: bool,
}

/// `|s̃ − s_*| ≥ |s − s₀|` with `s̃ = √(s² − τ*²)`, `s_* = √(s₀² − τ*²)`.
pub fn shifted_ordering_check(s: f64, s0: f64, tau_star_sq: f64) -> Result<OrderingCheck> {
    if !(s >= 0.0 && s0 >= 0.0 && tau_star_sq >= 0.0) {
        return arg("radii and τ*² must be nonnegative");
    }
    if s * s < tau_star_sq || s0 * s0 < tau_star_sq {
        return arg("both radii must satisfy s² ≥ τ*²");
    }
    let s_tilde = (s * s - tau_star_sq).sqrt();
    let s_star = (s0 * s0 - tau_star_sq).sqrt();
    let lhs = (s_tilde - s_star).abs();
    let rhs = (s - s0).abs();
    Ok(OrderingCheck { s_tilde, s_star, lhs, rhs, holds: lhs >= rhs - 1e-12 })
}
