//! Normal sequence model `Y = g⁰ + ε`, `ε ~ N(0, σ²I)`: simulation of the
//! regularized least squares error `‖ĝ − g_ref‖_n` and its concentration.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::convex::{solve_regularized_ls, SolverSettings};
use crate::error::{arg, config, Result};
use crate::model::family::standard_normal;
use crate::model::Penalty;
use crate::rng::{derive_seed, replicate_rng};
use crate::stats::{binomial_se, mean_se};

/// `‖v‖_n = sqrt(vᵀv / n)`.
pub fn norm_n(v: &[f64]) -> f64 {
    (v.iter().map(|x| x * x).sum::<f64>() / v.len() as f64).sqrt()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NormalSequenceSpec {
    pub n: usize,
    pub sigma: f64,
    pub g0: Vec<f64>,
    pub penalty: Penalty,
    pub replicates: usize,
    pub seed: u64,
    /// Comparison point; defaults to `g⁰`.
    #[serde(default)]
    pub g_ref: Option<Vec<f64>>,
    #[serde(default)]
    pub settings: SolverSettings,
}

impl NormalSequenceSpec {
    pub fn new(n: usize, sigma: f64, penalty: Penalty, replicates: usize, seed: u64) -> Self {
        NormalSequenceSpec {
            n,
            sigma,
            g0: vec![0.0; n],
            penalty,
            replicates,
            seed,
            g_ref: None,
            settings: SolverSettings::default(),
        }
    }

    pub fn with_g0(mut self, g0: Vec<f64>) -> Self {
        self.g0 = g0;
        self
    }

    pub fn with_g_ref(mut self, g_ref: Vec<f64>) -> Self {
        self.g_ref = Some(g_ref);
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 || self.g0.len() != self.n {
            return config("normal sequence needs n ≥ 1 and g⁰ of length n");
        }
        if !(self.sigma >= 0.0 && self.sigma.is_finite()) {
            return config("noise scale σ must be finite and nonnegative");
        }
        if self.replicates < 2 {
            return config("at least two replicates are required");
        }
        if self.g_ref.as_ref().is_some_and(|g| g.len() != self.n) {
            return config("g_ref must have length n");
        }
        self.penalty.validate()?;
        self.settings.validate()
    }

    fn reference(&self) -> &[f64] {
        self.g_ref.as_deref().unwrap_or(&self.g0)
    }

    fn solve(&self, eps: &[f64]) -> Result<Option<Vec<f64>>> {
        let y: Vec<f64> = self.g0.iter().zip(eps).map(|(a, b)| a + b).collect();
        let r = solve_regularized_ls(&y, &self.g0, &self.penalty, &self.settings)?;
        Ok(r.converged.then_some(r.minimizer))
    }

    fn noise(&self, seed: u64, index: u64) -> Vec<f64> {
        let mut rng = replicate_rng(seed, index);
        (0..self.n).map(|_| self.sigma * standard_normal(&mut rng)).collect()
    }
}

/// The noiseless penalized minimizer `g* = argmin ‖g⁰ − g‖_n² + pen(g)`.
pub fn noiseless_solution(spec: &NormalSequenceSpec) -> Result<Vec<f64>> {
    spec.validate()?;
    let r = solve_regularized_ls(&spec.g0, &spec.g0, &spec.penalty, &spec.settings)?;
    if !r.converged {
        return Err(crate::Error::SolverFailure { residual: r.residual, iterations: r.iterations });
    }
    Ok(r.minimizer)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Simulation {
    /// `‖ĝ − g_ref‖_n`, in replicate order, quarantined replicates removed.
    pub values: Vec<f64>,
    pub quarantined: usize,
}

pub fn simulate_errors(spec: &NormalSequenceSpec) -> Result<Simulation> {
    spec.validate()?;
    let g_ref = spec.reference();
    let out: Vec<Result<Option<f64>>> = (0..spec.replicates as u64)
        .into_par_iter()
        .map(|r| {
            let eps = spec.noise(spec.seed, r);
            Ok(spec.solve(&eps)?.map(|g| {
                let d: Vec<f64> = g.iter().zip(g_ref).map(|(a, b)| a - b).collect();
                norm_n(&d)
            }))
        })
        .collect();
    let mut values = Vec::with_capacity(spec.replicates);
    let mut quarantined = 0;
    for v in out {
        match v? {
            Some(x) => values.push(x),
            None => quarantined += 1,
        }
    }
    Ok(Simulation { values, quarantined })
}

/// Sample mean and standard error.
pub fn estimate_m0(values: &[f64]) -> Result<(f64, f64)> {
    if values.len() < 2 {
        return arg("m₀ estimation needs at least two values");
    }
    Ok(mean_se(values))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TailRow {
    pub t: f64,
    pub bound: f64,
    pub freq: f64,
    pub se: f64,
    /// Propagated uncertainty of `m̂₀` in probability units.
    pub m0_slack: f64,
    pub flagged: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConcentrationReport {
    pub m0: f64,
    pub m0_se: f64,
    pub n: usize,
    pub sigma: f64,
    pub replicates: usize,
    pub quarantined: usize,
    pub rows: Vec<TailRow>,
    pub warning: Option<String>,
}

impl ConcentrationReport {
    pub fn flagged(&self) -> Vec<f64> {
        self.rows.iter().filter(|r| r.flagged).map(|r| r.t).collect()
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("t,bound,freq,se,flagged\n");
        for r in &self.rows {
            s.push_str(&format!("{},{},{},{},{}\n", r.t, r.bound, r.freq, r.se, r.flagged));
        }
        s
    }
}

pub const DEFAULT_T_GRID: [f64; 6] = [0.25, 0.5, 1.0, 2.0, 3.0, 4.0];

/// Tail frequencies of `|‖ĝ − g_ref‖_n − m̂₀| ≥ σ sqrt(2t/n)` against `e^{−t}`.
/// The first half of the replicates estimates `m̂₀`, the second half the tails.
pub fn tail_report(spec: &NormalSequenceSpec, t_grid: &[f64]) -> Result<ConcentrationReport> {
    if t_grid.iter().any(|t| !(*t >= 0.0)) {
        return arg("t values must be nonnegative");
    }
    let sim = simulate_errors(spec)?;
    let half = sim.values.len() / 2;
    if half < 2 {
        return arg("too few unquarantined replicates");
    }
    let (first, second) = sim.values.split_at(half);
    let (m0, m0_se) = estimate_m0(first)?;
    let m = second.len();
    let freq_at = |r: f64| second.iter().filter(|x| (*x - m0).abs() >= r).count() as f64 / m as f64;
    let mut ts = t_grid.to_vec();
    ts.sort_by(f64::total_cmp);
    let rows = ts
        .into_iter()
        .map(|t| {
            let r = spec.sigma * (2.0 * t / spec.n as f64).sqrt();
            let freq = freq_at(r);
            let bound = (-t).exp();
            let se = binomial_se(bound, m);
            let m0_slack = 0.5 * (freq_at((r - m0_se).max(0.0)) - freq_at(r + m0_se));
            let flagged = freq > bound + 3.0 * (se + m0_slack);
            TailRow { t, bound, freq, se, m0_slack, flagged }
        })
        .collect();
    let warning = (spec.replicates < 1000).then(|| format!("only {} replicates; tail frequencies are coarse", spec.replicates));
    Ok(ConcentrationReport {
        m0,
        m0_se,
        n: spec.n,
        sigma: spec.sigma,
        replicates: spec.replicates,
        quarantined: sim.quarantined,
        rows,
        warning,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LipschitzReport {
    pub pairs: usize,
    pub quarantined: usize,
    pub max_ratio: f64,
    pub min_ratio: f64,
}

/// `max ‖ĝ(ε) − ĝ(ε′)‖_n / ‖ε − ε′‖_n` over paired noise draws.
pub fn lipschitz_check(spec: &NormalSequenceSpec, pair_count: usize) -> Result<LipschitzReport> {
    spec.validate()?;
    if pair_count == 0 {
        return arg("pair_count must be at least 1");
    }
    let seed = derive_seed(spec.seed, 0x11B5);
    let ratios: Vec<Result<Option<f64>>> = (0..pair_count as u64)
        .into_par_iter()
        .map(|r| {
            let e1 = spec.noise(seed, 2 * r);
            let e2 = spec.noise(seed, 2 * r + 1);
            let (Some(g1), Some(g2)) = (spec.solve(&e1)?, spec.solve(&e2)?) else {
                return Ok(None);
            };
            let dg: Vec<f64> = g1.iter().zip(&g2).map(|(a, b)| a - b).collect();
            let de: Vec<f64> = e1.iter().zip(&e2).map(|(a, b)| a - b).collect();
            let den = norm_n(&de);
            Ok((den > 0.0).then(|| norm_n(&dg) / den))
        })
        .collect();
    let mut max_ratio = f64::NEG_INFINITY;
    let mut min_ratio = f64::INFINITY;
    let mut quarantined = 0;
    for r in ratios {
        match r? {
            Some(x) => {
                max_ratio = max_ratio.max(x);
                min_ratio = min_ratio.min(x);
            }
            None => quarantined += 1,
        }
    }
    Ok(LipschitzReport { pairs: pair_count, quarantined, max_ratio, min_ratio })
}
