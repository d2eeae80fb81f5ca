use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::engine::{Constraint, CurveEngine};
use super::grid::{GridRule, SGrid};
use crate::error::{arg, Result};
use crate::model::{Dataset, Family, Penalty, PopulationOracle};
use crate::rng::replicate_rng;
use crate::stats::mean_se;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CurveKind {
    EmpiricalSingle,
    PopulationMean,
    Varsigma,
    Shifted,
}

/// Sampled curve `s ↦ Ê_n(s)` (or its Monte Carlo mean).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RiskCurve {
    pub grid: SGrid,
    pub values: Vec<f64>,
    /// Per-point standard errors of Monte Carlo means.
    pub se: Option<Vec<f64>>,
    pub flags: Vec<bool>,
    pub kind: CurveKind,
    pub replicates: usize,
    pub seed: Option<u64>,
    /// `replicate_values[r][i]`, kept for paired standard errors.
    #[serde(skip)]
    pub replicate_values: Vec<Vec<f64>>,
}

/// JSON sidecar for a serialized curve.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CurveMetadata {
    pub kind: CurveKind,
    pub seed: Option<u64>,
    pub replicates: usize,
    pub grid_rule: GridRule,
    pub points: usize,
    pub flagged_points: usize,
}

impl RiskCurve {
    /// Deterministic curve from given values (used for synthetic curves).
    pub fn from_values(grid: SGrid, values: Vec<f64>, kind: CurveKind) -> Result<Self> {
        if values.len() != grid.len() {
            return arg("curve needs one value per grid point");
        }
        let flags = vec![false; values.len()];
        Ok(RiskCurve { grid, values, se: None, flags, kind, replicates: 1, seed: None, replicate_values: Vec::new() })
    }

    pub fn points(&self) -> &[f64] {
        self.grid.points()
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn flagged(&self) -> usize {
        self.flags.iter().filter(|f| **f).count()
    }

    pub fn se_at(&self, i: usize) -> f64 {
        self.se.as_ref().map_or(0.0, |s| s[i])
    }

    /// Standard error of `value[i] − value[j]`; paired across replicates when
    /// they were kept.
    pub fn paired_se(&self, i: usize, j: usize) -> f64 {
        if self.replicate_values.len() >= 2 {
            let diffs: Vec<f64> = self.replicate_values.iter().map(|r| r[i] - r[j]).collect();
            return mean_se(&diffs).1;
        }
        (self.se_at(i).powi(2) + self.se_at(j).powi(2)).sqrt()
    }

    /// Indices where the curve decreases by more than `tol`.
    pub fn monotone_violations(&self, tol: f64) -> Vec<usize> {
        (1..self.values.len()).filter(|i| self.values[*i] < self.values[i - 1] - tol).collect()
    }

    /// CSV with columns `s,value,se,flag`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("s,value,se,flag\n");
        for (i, (s, v)) in self.points().iter().zip(&self.values).enumerate() {
            out.push_str(&format!("{s},{v},{},{}\n", self.se_at(i), u8::from(self.flags[i])));
        }
        out
    }

    pub fn metadata(&self) -> CurveMetadata {
        CurveMetadata {
            kind: self.kind,
            seed: self.seed,
            replicates: self.replicates,
            grid_rule: self.grid.rule().clone(),
            points: self.len(),
            flagged_points: self.flagged(),
        }
    }
}

fn single_curve(engine: &CurveEngine, data: &Dataset, grid: &SGrid, kind: CurveKind) -> Result<RiskCurve> {
    grid.check_tau_min(engine.min_level().max(0.0).sqrt())?;
    let p = engine.process(data)?;
    let (values, flags) = engine.values(&p, grid.points())?;
    Ok(RiskCurve { grid: grid.clone(), values, se: None, flags, kind, replicates: 1, seed: None, replicate_values: Vec::new() })
}

/// `Ê_n` on a grid for one dataset.
pub fn hat_e_curve(family: &Family, penalty: &Penalty, data: &Dataset, oracle: &PopulationOracle, grid: &SGrid) -> Result<RiskCurve> {
    let engine = CurveEngine::new(family, penalty, oracle, Constraint::Tau)?;
    single_curve(&engine, data, grid, CurveKind::EmpiricalSingle)
}

/// `Ê_n^ς` on a grid for one dataset.
pub fn varsigma_curve(
    family: &Family,
    penalty: &Penalty,
    data: &Dataset,
    oracle: &PopulationOracle,
    c: f64,
    grid: &SGrid,
) -> Result<RiskCurve> {
    let engine = CurveEngine::new(family, penalty, oracle, Constraint::Varsigma { c })?;
    single_curve(&engine, data, grid, CurveKind::Varsigma)
}

/// Monte Carlo settings for population curves.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MonteCarloSpec {
    pub n: usize,
    pub replicates: usize,
    pub seed: u64,
    #[serde(default)]
    pub oracle: PopulationOracle,
}

impl MonteCarloSpec {
    pub fn new(n: usize, replicates: usize, seed: u64) -> Self {
        MonteCarloSpec { n, replicates, seed, oracle: PopulationOracle::ClosedForm }
    }
}

/// Monte Carlo mean curve with common random numbers from an engine.
pub fn mean_curve(engine: &CurveEngine, spec: &MonteCarloSpec, grid: &SGrid) -> Result<RiskCurve> {
    if spec.replicates < 2 {
        return arg("population curves need at least two replicates");
    }
    grid.check_tau_min(engine.min_level().max(0.0).sqrt())?;
    let rows: Vec<(Vec<f64>, Vec<bool>)> = (0..spec.replicates as u64)
        .into_par_iter()
        .map(|r| {
            let mut rng = replicate_rng(spec.seed, r);
            let p = engine.draw_process(&mut rng, spec.n)?;
            engine.values(&p, grid.points())
        })
        .collect::<Result<_>>()?;
    let g = grid.len();
    let mut values = Vec::with_capacity(g);
    let mut se = Vec::with_capacity(g);
    let mut flags = vec![false; g];
    for i in 0..g {
        let col: Vec<f64> = rows.iter().map(|(v, _)| v[i]).collect();
        let (m, s) = mean_se(&col);
        values.push(m);
        se.push(s);
        flags[i] = rows.iter().any(|(_, f)| f[i]);
    }
    let kind = match engine.constraint() {
        Constraint::Tau => CurveKind::PopulationMean,
        Constraint::Varsigma { .. } => CurveKind::Varsigma,
    };
    Ok(RiskCurve {
        grid: grid.clone(),
        values,
        se: Some(se),
        flags,
        kind,
        replicates: spec.replicates,
        seed: Some(spec.seed),
        replicate_values: rows.into_iter().map(|(v, _)| v).collect(),
    })
}

/// `E(s)` estimated by Monte Carlo on a grid.
pub fn mean_e_curve(family: &Family, penalty: &Penalty, spec: &MonteCarloSpec, grid: &SGrid) -> Result<RiskCurve> {
    let engine = CurveEngine::new(family, penalty, &spec.oracle, Constraint::Tau)?;
    mean_curve(&engine, spec, grid)
}

/// Grid argmin of `s² − curve(s)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Argmin {
    pub s: f64,
    pub index: usize,
    /// `s² − curve(s)` at the minimizer.
    pub value: f64,
    /// Every grid point within `TIE_TOL·max(1, |min|)` of the minimum.
    pub ties: Vec<f64>,
}

pub const TIE_TOL: f64 = 1e-12;

pub fn argmin_points(points: &[f64], values: &[f64]) -> Result<Argmin> {
    if points.is_empty() || points.len() != values.len() {
        return arg("argmin needs matching nonempty points and values");
    }
    if values.iter().any(|v| !v.is_finite()) {
        return arg("curve values must be finite");
    }
    let obj: Vec<f64> = points.iter().zip(values).map(|(s, v)| s * s - v).collect();
    let best = obj.iter().copied().fold(f64::INFINITY, f64::min);
    let ties: Vec<usize> = (0..obj.len()).filter(|i| obj[*i] <= best + TIE_TOL * best.abs().max(1.0)).collect();
    let index = ties[0];
    Ok(Argmin { s: points[index], index, value: obj[index], ties: ties.iter().map(|i| points[*i]).collect() })
}

pub fn argmin_curve(curve: &RiskCurve) -> Result<Argmin> {
    argmin_points(curve.points(), &curve.values)
}

/// Three grid points where the chord lies above the curve.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConcavityCounterexample {
    pub s1: f64,
    pub s_mid: f64,
    pub s2: f64,
    /// Chord value minus curve value at `s_mid`.
    pub deficit: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConcavityVerdict {
    pub passed: bool,
    pub triples: usize,
    pub counterexample: Option<ConcavityCounterexample>,
}

/// Checks `curve(s_j) ≥ chord(s_i, s_k)(s_j) − tol` over index-symmetric
/// triples `(j − h, j, j + h)`. On a uniform grid the chord value is the
/// midpoint average.
pub fn concavity_check_points(points: &[f64], values: &[f64], tol: f64) -> Result<ConcavityVerdict> {
    if points.len() < 3 || points.len() != values.len() {
        return arg("concavity check needs at least three matching points");
    }
    let g = points.len();
    let mut triples = 0;
    for j in 1..g - 1 {
        for h in 1..=j.min(g - 1 - j) {
            let (i, k) = (j - h, j + h);
            let w = (points[k] - points[j]) / (points[k] - points[i]);
            let chord = w * values[i] + (1.0 - w) * values[k];
            let deficit = chord - values[j];
            triples += 1;
            if deficit > tol {
                return Ok(ConcavityVerdict {
                    passed: false,
                    triples,
                    counterexample: Some(ConcavityCounterexample { s1: points[i], s_mid: points[j], s2: points[k], deficit }),
                });
            }
        }
    }
    Ok(ConcavityVerdict { passed: true, triples, counterexample: None })
}

pub fn concavity_check(curve: &RiskCurve, tol: f64) -> Result<ConcavityVerdict> {
    concavity_check_points(curve.points(), &curve.values, tol)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn argmin_examples() {
        let grid = SGrid::uniform(0.0, 2.0, 0.01).unwrap();
        let lin: Vec<f64> = grid.points().to_vec();
        let a = argmin_points(grid.points(), &lin).unwrap();
        assert!((a.s - 0.5).abs() < 1e-12 && (a.value + 0.25).abs() < 1e-12);
        let root: Vec<f64> = grid.points().iter().map(|s| 4.0 * s.sqrt()).collect();
        let a = argmin_points(grid.points(), &root).unwrap();
        assert!((a.s - 1.0).abs() < 1e-9);
    }

    #[test]
    fn ties_pick_smallest() {
        let a = argmin_points(&[1.0, 2.0, 3.0], &[1.0, 4.0, 6.0]).unwrap();
        assert_eq!(a.ties, vec![1.0, 2.0]);
        assert_eq!(a.s, 1.0);
    }

    #[test]
    fn concavity_examples() {
        let grid = SGrid::uniform(0.1, 2.0, 0.01).unwrap();
        let root: Vec<f64> = grid.points().iter().map(|s| s.sqrt()).collect();
        assert!(concavity_check_points(grid.points(), &root, 0.0).unwrap().passed);
        let sq: Vec<f64> = grid.points().iter().map(|s| s * s).collect();
        let v = concavity_check_points(grid.points(), &sq, 1e-12).unwrap();
        assert!(!v.passed);
        let c = v.counterexample.unwrap();
        assert!(c.s1 < c.s_mid && c.s_mid < c.s2 && c.deficit > 0.0);
    }
}
