use std::fmt;
use std::sync::Arc;

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::error::{arg, config, Result};
use crate::model::{Dataset, Sample};
use crate::rng::{replicate_rng, Rng};

pub type SamplerFn = Arc<dyn Fn(&mut Rng) -> Sample + Send + Sync>;
pub type DensityFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

#[derive(Clone)]
enum LawKind {
    Discrete { atoms: Vec<Sample>, probs: Vec<f64>, cumulative: Vec<f64> },
    Density { lower: f64, upper: f64, pdf: DensityFn, sampler: SamplerFn },
    Generic { sampler: SamplerFn },
}

/// The law `P` of one observation.
#[derive(Clone)]
pub struct SampleLaw {
    kind: LawKind,
}

impl fmt::Debug for SampleLaw {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.kind {
            LawKind::Discrete { atoms, .. } => write!(f, "SampleLaw::Discrete({} atoms)", atoms.len()),
            LawKind::Density { lower, upper, .. } => write!(f, "SampleLaw::Density([{lower}, {upper}])"),
            LawKind::Generic { .. } => write!(f, "SampleLaw::Generic"),
        }
    }
}

impl SampleLaw {
    pub fn discrete(atoms: Vec<Sample>, probs: Vec<f64>) -> Result<Self> {
        if atoms.is_empty() || atoms.len() != probs.len() {
            return config("discrete law needs matching nonempty atoms and probabilities");
        }
        if probs.iter().any(|p| !(p.is_finite() && *p >= 0.0)) {
            return config("probabilities must be nonnegative");
        }
        let total: f64 = probs.iter().sum();
        if (total - 1.0).abs() > 1e-9 {
            return config(format!("probabilities sum to {total}, not 1"));
        }
        let mut cumulative = Vec::with_capacity(probs.len());
        let mut acc = 0.0;
        for p in &probs {
            acc += p;
            cumulative.push(acc);
        }
        Ok(SampleLaw { kind: LawKind::Discrete { atoms, probs, cumulative } })
    }

    /// Law on the atom indices `0, …, m−1` (stored as scalars).
    pub fn indexed(probs: Vec<f64>) -> Result<Self> {
        let atoms = (0..probs.len()).map(|j| Sample::Scalar(j as f64)).collect();
        SampleLaw::discrete(atoms, probs)
    }

    pub fn density(lower: f64, upper: f64, pdf: DensityFn, sampler: SamplerFn) -> Result<Self> {
        if !(lower < upper) {
            return config("density support must be a nonempty interval");
        }
        Ok(SampleLaw { kind: LawKind::Density { lower, upper, pdf, sampler } })
    }

    pub fn generic(sampler: SamplerFn) -> Self {
        SampleLaw { kind: LawKind::Generic { sampler } }
    }

    pub fn uniform01() -> Self {
        SampleLaw::density(
            0.0,
            1.0,
            Arc::new(|_| 1.0),
            Arc::new(|rng: &mut Rng| Sample::Scalar(rng.random::<f64>())),
        )
        .expect("valid interval")
    }

    pub fn atoms(&self) -> Option<(&[Sample], &[f64])> {
        match &self.kind {
            LawKind::Discrete { atoms, probs, .. } => Some((atoms, probs)),
            _ => None,
        }
    }

    pub fn draw_one(&self, rng: &mut Rng) -> Sample {
        match &self.kind {
            LawKind::Discrete { atoms, cumulative, .. } => {
                let u: f64 = rng.random();
                let j = cumulative.partition_point(|c| *c <= u).min(atoms.len() - 1);
                atoms[j].clone()
            }
            LawKind::Density { sampler, .. } | LawKind::Generic { sampler } => sampler(rng),
        }
    }

    /// Index of a discrete draw, avoiding a clone of the atom.
    pub fn draw_index(&self, rng: &mut Rng) -> Option<usize> {
        match &self.kind {
            LawKind::Discrete { atoms, cumulative, .. } => {
                let u: f64 = rng.random();
                Some(cumulative.partition_point(|c| *c <= u).min(atoms.len() - 1))
            }
            _ => None,
        }
    }

    pub fn draw(&self, rng: &mut Rng, n: usize) -> Result<Dataset> {
        Dataset::new((0..n).map(|_| self.draw_one(rng)).collect())
    }
}

/// How population quantities `Pf` and `σ²(f)` are evaluated.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "kebab-case")]
pub enum PopulationOracle {
    /// Exact sums for discrete laws, family formulas otherwise.
    #[default]
    ClosedForm,
    /// Gauss–Legendre over the density support.
    Quadrature { nodes: usize },
    /// Plug-in average over fresh draws.
    MonteCarlo { draws: usize, seed: u64 },
}

impl PopulationOracle {
    pub fn quadrature() -> Self {
        PopulationOracle::Quadrature { nodes: 64 }
    }

    pub fn monte_carlo(seed: u64) -> Self {
        PopulationOracle::MonteCarlo { draws: 100_000, seed }
    }

    pub fn is_deterministic(&self) -> bool {
        !matches!(self, PopulationOracle::MonteCarlo { .. })
    }

    /// `E h(X)` under `law`.
    pub fn expect(&self, law: &SampleLaw, h: &dyn Fn(&Sample) -> f64) -> Result<f64> {
        if let Some((atoms, probs)) = law.atoms() {
            if !matches!(self, PopulationOracle::MonteCarlo { .. }) {
                return Ok(atoms.iter().zip(probs).map(|(a, p)| p * h(a)).sum());
            }
        }
        match (self, &law.kind) {
            (PopulationOracle::ClosedForm, _) => {
                config("closed-form expectation is unavailable for this law; declare quadrature or Monte Carlo")
            }
            (PopulationOracle::Quadrature { nodes }, LawKind::Density { lower, upper, pdf, .. }) => {
                if *nodes == 0 {
                    return arg("quadrature needs at least one node");
                }
                let f = |x: f64| pdf(x) * h(&Sample::Scalar(x));
                Ok(crate::quadrature::integrate(&f, *lower, *upper, *nodes))
            }
            (PopulationOracle::Quadrature { .. }, _) => config("quadrature requires a scalar density law"),
            (PopulationOracle::MonteCarlo { draws, seed }, _) => {
                if *draws == 0 {
                    return arg("Monte Carlo oracle needs at least one draw");
                }
                let mut rng = replicate_rng(*seed, u64::MAX);
                let mut acc = 0.0;
                for _ in 0..*draws {
                    acc += h(&law.draw_one(&mut rng));
                }
                Ok(acc / *draws as f64)
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn oracle_modes_agree_on_uniform_square() {
        let law = SampleLaw::uniform01();
        let h = |s: &Sample| s.as_scalar().unwrap().powi(2);
        let q = PopulationOracle::quadrature().expect(&law, &h).unwrap();
        assert!((q - 1.0 / 3.0).abs() < 1e-14);
        let mc = PopulationOracle::monte_carlo(3).expect(&law, &h).unwrap();
        assert!((mc - 1.0 / 3.0).abs() < 5e-3);
        assert!(PopulationOracle::ClosedForm.expect(&law, &h).is_err());
    }

    #[test]
    fn discrete_draws_follow_probabilities() {
        let law = SampleLaw::indexed(vec![0.2, 0.8]).unwrap();
        let mut rng = replicate_rng(1, 0);
        let ones = (0..20_000).filter(|_| law.draw_index(&mut rng) == Some(1)).count();
        assert!((ones as f64 / 20_000.0 - 0.8).abs() < 0.015);
        assert!(SampleLaw::indexed(vec![0.2, 0.7]).is_err());
    }
}
