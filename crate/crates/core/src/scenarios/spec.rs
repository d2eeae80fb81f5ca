use serde::{Deserialize, Serialize};

use crate::error::{config, Result};
use crate::expfam::Cumulant;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ScenarioId {
    ProjectionCase1,
    ProjectionCase2,
    ProjectionCase3,
    LinearizedLs,
    ExpfamDensity,
    ExpfamRegression,
    NormalSequence,
}

impl ScenarioId {
    pub fn name(&self) -> &'static str {
        match self {
            ScenarioId::ProjectionCase1 => "projection-case1",
            ScenarioId::ProjectionCase2 => "projection-case2",
            ScenarioId::ProjectionCase3 => "projection-case3",
            ScenarioId::LinearizedLs => "linearized-ls",
            ScenarioId::ExpfamDensity => "expfam-density",
            ScenarioId::ExpfamRegression => "expfam-regression",
            ScenarioId::NormalSequence => "normal-sequence",
        }
    }

    pub fn is_projection(&self) -> bool {
        matches!(self, ScenarioId::ProjectionCase1 | ScenarioId::ProjectionCase2 | ScenarioId::ProjectionCase3)
    }
}

/// Regularization level as a function of the sample size.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "rule", rename_all = "kebab-case")]
pub enum LambdaRule {
    #[default]
    Zero,
    Constant { value: f64 },
    /// `λ = scale · n^exponent`.
    Power { scale: f64, exponent: f64 },
}

impl LambdaRule {
    pub fn at(&self, n: usize) -> f64 {
        match self {
            LambdaRule::Zero => 0.0,
            LambdaRule::Constant { value } => *value,
            LambdaRule::Power { scale, exponent } => scale * (n as f64).powf(*exponent),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = match self {
            LambdaRule::Zero => true,
            LambdaRule::Constant { value } => value.is_finite() && *value >= 0.0,
            LambdaRule::Power { scale, exponent } => scale.is_finite() && *scale >= 0.0 && exponent.is_finite(),
        };
        if ok {
            Ok(())
        } else {
            config("λ rule needs finite nonnegative values")
        }
    }
}

fn default_alpha() -> f64 {
    0.5
}
fn default_seeds() -> usize {
    20
}
fn default_replicates() -> usize {
    200
}
fn default_radius() -> f64 {
    1.0
}
fn default_noise() -> f64 {
    1.0
}
fn default_ratio() -> f64 {
    1.005
}

/// One scenario run over a list of sample sizes.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioSpec {
    pub id: ScenarioId,
    /// Sample sizes, strictly increasing.
    pub n: Vec<usize>,
    /// Basis size; the sieve rule is used when absent.
    #[serde(default)]
    pub dimension: Option<usize>,
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    /// Penalty exponent (projection case 3).
    #[serde(default)]
    pub q: Option<f64>,
    #[serde(default)]
    pub lambda: LambdaRule,
    /// Datasets per sample size.
    #[serde(default = "default_seeds")]
    pub seeds: usize,
    /// Monte Carlo replicates per population curve.
    #[serde(default = "default_replicates")]
    pub replicates: usize,
    /// `c` in the sieve size `⌈c n^{α/(1+α)}⌉`.
    #[serde(default)]
    pub sieve_constant: Option<f64>,
    /// Ellipsoid radius `R` (projection case 1).
    #[serde(default = "default_radius")]
    pub radius: f64,
    /// Coefficients of the truth (`g⁰` or `β⁰`); zero-padded.
    #[serde(default)]
    pub reference: Vec<f64>,
    /// Noise level of the responses.
    #[serde(default = "default_noise")]
    pub noise: f64,
    /// Mixing matrix `A` for `X = AU` (linearized least squares).
    #[serde(default)]
    pub design: Option<Vec<Vec<f64>>>,
    /// `ℓ₁` radius of the parameter set around `β⁰`; unconstrained when absent.
    #[serde(default)]
    pub l1_radius: Option<f64>,
    #[serde(default)]
    pub cumulant: Option<Cumulant>,
    /// Ratio of the refined geometric grid around `s₀`.
    #[serde(default = "default_ratio")]
    pub grid_ratio: f64,
    #[serde(default)]
    pub seed: u64,
}

impl ScenarioSpec {
    pub fn new(id: ScenarioId, n: Vec<usize>) -> Self {
        ScenarioSpec {
            id,
            n,
            dimension: None,
            alpha: default_alpha(),
            q: None,
            lambda: LambdaRule::Zero,
            seeds: default_seeds(),
            replicates: default_replicates(),
            sieve_constant: None,
            radius: default_radius(),
            reference: Vec::new(),
            noise: default_noise(),
            design: None,
            l1_radius: None,
            cumulant: None,
            grid_ratio: default_ratio(),
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n.is_empty() {
            return config("the n list is empty");
        }
        if self.n.windows(2).any(|w| w[0] >= w[1]) || self.n[0] == 0 {
            return config("the n list must be positive and strictly increasing");
        }
        let alpha_ok = match self.id {
            ScenarioId::ProjectionCase1 => self.alpha > 0.0 && self.alpha <= 1.0,
            _ => self.alpha > 0.0 && self.alpha < 1.0,
        };
        if !alpha_ok {
            return config(format!("α = {} is outside the admissible range", self.alpha));
        }
        if self.id == ScenarioId::ProjectionCase3 {
            match self.q {
                Some(q) if q > 1.0 && q <= 2.0 => {}
                _ => return config("projection case 3 needs q in (1, 2]"),
            }
        }
        self.lambda.validate()?;
        if self.seeds == 0 {
            return config("at least one seed per sample size is needed");
        }
        if self.replicates < 2 {
            return config("population curves need at least two replicates");
        }
        if self.dimension == Some(0) {
            return config("dimension must be positive");
        }
        if let Some(c) = self.sieve_constant {
            if !(c > 0.0 && c.is_finite()) {
                return config("sieve constant must be positive");
            }
        }
        if !(self.radius > 0.0 && self.radius.is_finite()) {
            return config("radius must be positive");
        }
        if !(self.noise >= 0.0 && self.noise.is_finite()) {
            return config("noise level must be nonnegative");
        }
        if let Some(r) = self.l1_radius {
            if !(r > 0.0 && r.is_finite()) {
                return config("ℓ₁ radius must be positive");
            }
        }
        if !(self.grid_ratio > 1.0 && self.grid_ratio < 1.5) {
            return config("grid ratio must lie in (1, 1.5)");
        }
        if self.reference.iter().any(|x| !x.is_finite()) {
            return config("reference coefficients must be finite");
        }
        Ok(())
    }

    /// Parameter dimension at sample size `n`.
    pub fn dimension_at(&self, n: usize) -> usize {
        if let Some(d) = self.dimension {
            return d;
        }
        let c = self.sieve_constant.unwrap_or(if self.id == ScenarioId::ProjectionCase1 { 1.0 } else { 4.0 });
        super::cosine::sieve_dimension(n, self.alpha, c).max(self.reference.len())
    }
}
