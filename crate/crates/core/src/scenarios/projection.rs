use std::f64::consts::SQRT_2;

use rand::Rng as _;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::cosine::{cosine_family, ellipsoid_domain, ellipsoid_weights};
use super::rate::{rate_fit, RatePoint, RateReport};
use super::spec::{LambdaRule, ScenarioId, ScenarioSpec};
use crate::convex::{solve_erm, SolverSettings};
use crate::curve::{argmin_points, DEFAULT_RATIO, mean_curve, Constraint, CurveEngine, MonteCarloSpec, Process, RiskCurve, SGrid};
use crate::error::{config, Error, Result};
use crate::linalg::norm;
use crate::model::{excess_risk, tau_min, Family, Penalty, PopulationOracle, Seminorm};
use crate::rng::{derive_seed, replicate_rng};
use crate::stats::{median, variance};

const COARSE_RATIO: f64 = 1.1;
const SEED_COARSE_RATIO: f64 = 1.02;
const SEED_FINE_RATIO: f64 = 1.0002;
const BOOTSTRAP: usize = 200;
/// Added to the local grid step when comparing `τ(f̂)` with `ŝ`.
pub const LEMMA_SLACK: f64 = 1e-6;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProjectionPoint {
    pub n: usize,
    pub dimension: usize,
    pub lambda: f64,
    pub tau_min: f64,
    /// Argmin of `s² − E(s)` on the refined grid.
    pub s0: f64,
    /// Bootstrap SE of `s0` over replicate curves.
    pub s0_se: f64,
    /// `s0` sits on an edge of the refined grid that is not an edge of the
    /// search range.
    pub s0_at_edge: bool,
    pub tau_hat: Vec<f64>,
    pub s_hat: Vec<f64>,
    /// `|τ(f̂) − s0| / s0` per dataset.
    pub deviations: Vec<f64>,
    pub deviation_median: f64,
    /// Largest `|τ(f̂) − ŝ| − local step` over datasets.
    pub lemma_excess: f64,
    pub lemma_violations: usize,
    /// Fraction of datasets with `ŝ` within one default grid step of
    /// `τ_min`, i.e. `ŝ ≤ 1.05 τ_min`.
    pub boundary_fraction: f64,
    pub unconverged: usize,
    pub flagged: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProjectionReport {
    pub id: ScenarioId,
    pub points: Vec<ProjectionPoint>,
    pub rate: Option<RateReport>,
    /// Median deviations decrease along the n list with at most one
    /// inversion (reported for four or more sizes).
    pub deviation_decreasing: Option<bool>,
    /// Refined population curves, one per sample size.
    #[serde(skip)]
    pub curves: Vec<RiskCurve>,
}

impl ProjectionReport {
    pub fn flagged(&self) -> bool {
        self.points.iter().any(|p| p.flagged)
    }
}

/// Exponent of `n` in `s₀` implied by the scenario's `λ` schedule.
pub fn target_exponent(spec: &ScenarioSpec) -> Option<f64> {
    let a = spec.alpha;
    let e = match spec.lambda {
        LambdaRule::Zero => None,
        LambdaRule::Constant { .. } => Some(0.0),
        LambdaRule::Power { exponent, .. } => Some(exponent),
    };
    match spec.id {
        ScenarioId::ProjectionCase1 => Some(-1.0 / (2.0 * (1.0 + a))),
        ScenarioId::ProjectionCase2 => e.map(|e| -(0.5 + e * a)),
        ScenarioId::ProjectionCase3 => {
            let q = spec.q?;
            e.map(|e| -(0.5 + e * 2.0 * a / q) * q / (q - (2.0 - q) * a))
        }
        _ => None,
    }
}

struct Setup {
    family: Family,
    penalty: Penalty,
    tau_max: f64,
    dim: usize,
    lambda: f64,
}

fn setup(spec: &ScenarioSpec, n: usize) -> Result<Setup> {
    let d = spec.dimension_at(n);
    if spec.reference.len() > d {
        return config("more reference coefficients than basis functions");
    }
    let mut g0 = spec.reference.clone();
    g0.resize(d, 0.0);
    let lambda = spec.lambda.at(n);
    let weights = ellipsoid_weights(d, spec.alpha);
    let (fam, penalty, tau_max) = match spec.id {
        ScenarioId::ProjectionCase1 => {
            let dom = ellipsoid_domain(&g0, spec.alpha, spec.radius);
            // Weights are ≥ 1, so ½‖g − g⁰‖² ≤ R²/2 on the ellipsoid.
            (cosine_family(g0)?.with_domain(dom)?, Penalty::Zero, spec.radius / SQRT_2)
        }
        ScenarioId::ProjectionCase2 => {
            (cosine_family(g0)?, Penalty::Squared { lambda, seminorm: Seminorm::Weighted(weights) }, f64::INFINITY)
        }
        ScenarioId::ProjectionCase3 => {
            let q = spec.q.ok_or_else(|| Error::Config("projection case 3 needs q".into()))?;
            (cosine_family(g0)?, Penalty::Power { lambda, q, seminorm: Seminorm::Weighted(weights) }, f64::INFINITY)
        }
        other => return config(format!("{} is not a projection scenario", other.name())),
    };
    Ok(Setup { family: Family::Linear(fam), penalty, tau_max, dim: d, lambda })
}

/// Grid from `lo` to `hi`, a single point when they coincide.
fn grid(lo: f64, hi: f64, ratio: f64) -> Result<SGrid> {
    if hi <= lo * (1.0 + 1e-12) {
        return SGrid::from_points(vec![lo]);
    }
    SGrid::geometric(lo, hi, ratio)
}

fn merge(a: &[f64], b: &[f64]) -> Vec<f64> {
    let mut all: Vec<f64> = a.iter().chain(b).copied().collect();
    all.sort_by(f64::total_cmp);
    all.dedup_by(|x, y| (*x - *y).abs() <= 1e-14 * y.abs().max(1e-300));
    all
}

fn local_step(points: &[f64], i: usize) -> f64 {
    let left = if i > 0 { points[i] - points[i - 1] } else { 0.0 };
    let right = if i + 1 < points.len() { points[i + 1] - points[i] } else { 0.0 };
    left.max(right)
}

/// `(lo, hi)` bracketing grid index `i` by `k` points on each side.
fn bracket(points: &[f64], i: usize, k: usize) -> (f64, f64) {
    (points[i.saturating_sub(k)], points[(i + k).min(points.len() - 1)])
}

struct SeedResult {
    tau_hat: f64,
    s_hat: f64,
    step: f64,
    boundary: bool,
    converged: bool,
    flagged: bool,
}

fn seed_run(
    engine: &CurveEngine,
    setup: &Setup,
    oracle: &PopulationOracle,
    tmin: f64,
    n: usize,
    seed: u64,
    j: u64,
) -> Result<SeedResult> {
    let mut rng = replicate_rng(seed, j);
    let data = setup.family.law().draw(&mut rng, n)?;
    let p = engine.process(&data)?;
    let vnorm = match &p {
        Process::Linear(v) => norm(v),
        _ => 1.0,
    };
    // ŝ ≤ τ_min + 2√2‖v‖ since τ² ≥ ½‖g − g⁰‖².
    let hi = (tmin + 3.0 * SQRT_2 * vnorm).min(setup.tau_max);
    let lo = if tmin > 0.0 { tmin.max(1e-3 * hi) } else { 1e-3 * hi };
    let coarse = grid(lo, hi, SEED_COARSE_RATIO)?;
    let (cv, cf) = engine.values(&p, coarse.points())?;
    let ci = argmin_points(coarse.points(), &cv)?.index;
    let (flo, fhi) = bracket(coarse.points(), ci, 1);
    let fine = grid(flo, fhi, SEED_FINE_RATIO)?;
    let (fv, ff) = engine.values(&p, fine.points())?;
    let pts = merge(coarse.points(), fine.points());
    let mut vals = Vec::with_capacity(pts.len());
    for s in &pts {
        let k = fine.points().iter().position(|x| x == s);
        vals.push(match k {
            Some(k) => fv[k],
            None => cv[coarse.points().iter().position(|x| x == s).expect("merged point")],
        });
    }
    let am = argmin_points(&pts, &vals)?;
    let step = local_step(&pts, am.index);
    let fit = solve_erm(&setup.family, &setup.penalty, &data, oracle, &SolverSettings::default())?;
    let tau_hat = excess_risk(&setup.family, &fit.minimizer, &setup.penalty, oracle)?.max(0.0).sqrt();
    let boundary = tmin > 0.0 && am.s <= tmin * DEFAULT_RATIO;
    Ok(SeedResult {
        tau_hat,
        s_hat: am.s,
        step,
        boundary,
        converged: fit.converged,
        flagged: cf.iter().chain(&ff).any(|f| *f),
    })
}

fn bootstrap_se(curve: &RiskCurve, seed: u64) -> Result<f64> {
    let rows = &curve.replicate_values;
    if rows.len() < 2 {
        return Ok(0.0);
    }
    let mut rng = replicate_rng(seed, 0);
    let g = curve.len();
    let mut draws = Vec::with_capacity(BOOTSTRAP);
    for _ in 0..BOOTSTRAP {
        let mut acc = vec![0.0; g];
        for _ in 0..rows.len() {
            let r = &rows[rng.random_range(0..rows.len())];
            acc.iter_mut().zip(r).for_each(|(a, b)| *a += b);
        }
        acc.iter_mut().for_each(|a| *a /= rows.len() as f64);
        draws.push(argmin_points(curve.points(), &acc)?.s);
    }
    Ok(variance(&draws).sqrt())
}

fn run_size(spec: &ScenarioSpec, n: usize) -> Result<(ProjectionPoint, RiskCurve)> {
    let st = setup(spec, n)?;
    let oracle = PopulationOracle::ClosedForm;
    let tmin = tau_min(&st.family, &st.penalty, &oracle)?.tau();
    let engine = CurveEngine::new(&st.family, &st.penalty, &oracle, Constraint::Tau)?;
    let Family::Linear(lf) = &st.family else { unreachable!() };
    let trace = lf.feature_cov().map(|c| c.to_dense().trace()).unwrap_or(st.dim as f64);
    // E(s) ≤ √2 s E‖v‖ bounds s₀ by τ_min + √2 √(tr Cov / n).
    let hi = (tmin + 3.0 * SQRT_2 * (trace / n as f64).sqrt()).min(st.tau_max);
    let lo = if tmin > 0.0 { tmin.max(1e-3 * hi) } else { 1e-3 * hi };
    let curve_seed = derive_seed(spec.seed, n as u64);
    let mc = MonteCarloSpec { n, replicates: spec.replicates, seed: curve_seed, oracle };
    let coarse = grid(lo, hi, COARSE_RATIO)?;
    let pilot = mean_curve(&engine, &mc, &coarse)?;
    let ci = argmin_points(coarse.points(), &pilot.values)?.index;
    let (flo, fhi) = bracket(coarse.points(), ci, 2);
    let fine = grid(flo, fhi, spec.grid_ratio)?;
    let curve = mean_curve(&engine, &mc, &fine)?;
    let am = argmin_points(fine.points(), &curve.values)?;
    let last = fine.len() - 1;
    let s0_at_edge = (am.index == 0 && flo > lo) || (am.index == last && fhi < hi);
    let s0 = am.s;
    let s0_se = bootstrap_se(&curve, derive_seed(curve_seed, 0xB007))?;

    let data_seed = derive_seed(spec.seed ^ 0xDA7A, n as u64);
    let runs: Vec<SeedResult> = (0..spec.seeds as u64)
        .into_par_iter()
        .map(|j| seed_run(&engine, &st, &oracle, tmin, n, data_seed, j))
        .collect::<Result<_>>()?;
    let tau_hat: Vec<f64> = runs.iter().map(|r| r.tau_hat).collect();
    let s_hat: Vec<f64> = runs.iter().map(|r| r.s_hat).collect();
    let deviations: Vec<f64> = tau_hat.iter().map(|t| (t - s0).abs() / s0).collect();
    let excess: Vec<f64> = runs.iter().map(|r| (r.tau_hat - r.s_hat).abs() - r.step).collect();
    let lemma_violations = excess.iter().filter(|e| **e > LEMMA_SLACK).count();
    let unconverged = runs.iter().filter(|r| !r.converged).count();
    let flagged = s0_at_edge || unconverged > 0 || lemma_violations > 0 || curve.flagged() > 0 || runs.iter().any(|r| r.flagged);
    let point = ProjectionPoint {
        n,
        dimension: st.dim,
        lambda: st.lambda,
        tau_min: tmin,
        s0,
        s0_se,
        s0_at_edge,
        deviation_median: median(&deviations),
        lemma_excess: excess.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        lemma_violations,
        boundary_fraction: runs.iter().filter(|r| r.boundary).count() as f64 / runs.len() as f64,
        unconverged,
        flagged,
        tau_hat,
        s_hat,
        deviations,
    };
    Ok((point, curve))
}

/// Projection density estimation over the sample sizes in `spec.n`: population
/// curve and `s₀` per size, then `τ(f̂)`, `ŝ` and deviations per dataset.
pub fn run_projection_case(spec: &ScenarioSpec) -> Result<ProjectionReport> {
    spec.validate()?;
    if !spec.id.is_projection() {
        return config(format!("{} is not a projection scenario", spec.id.name()));
    }
    let mut points = Vec::with_capacity(spec.n.len());
    let mut curves = Vec::with_capacity(spec.n.len());
    for &n in &spec.n {
        let (p, c) = run_size(spec, n)?;
        points.push(p);
        curves.push(c);
    }
    let rate = if points.len() >= 4 {
        let rp: Vec<RatePoint> = points.iter().map(|p| RatePoint { n: p.n, estimate: p.s0, se: p.s0_se }).collect();
        rate_fit(&rp, target_exponent(spec)).ok()
    } else {
        None
    };
    let deviation_decreasing = (points.len() >= 4).then(|| {
        points.windows(2).filter(|w| w[1].deviation_median > w[0].deviation_median).count() <= 1
    });
    Ok(ProjectionReport { id: spec.id, points, rate, deviation_decreasing, curves })
}
