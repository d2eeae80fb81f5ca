//! TOML run configuration.

use std::path::{Path, PathBuf};

use riskconc_core::curve::SGrid;
use riskconc_core::expfam::BaseDensity;
use riskconc_core::margin::JDescriptor;
use riskconc_core::scenarios::ScenarioSpec;
use riskconc_core::{ConvexSet, Penalty};
use serde::{Deserialize, Serialize};

use crate::error::{io_err, CliError, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
}

fn default_formats() -> Vec<Format> {
    vec![Format::Csv, Format::Json]
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// Global seed; `--seed` overrides it.
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default)]
    pub out: Option<PathBuf>,
    #[serde(default)]
    pub workers: Option<usize>,
    #[serde(default = "default_formats")]
    pub formats: Vec<Format>,
    #[serde(default)]
    pub direct: Vec<DirectJob>,
    #[serde(default)]
    pub curve: Vec<CurveJob>,
    #[serde(default)]
    pub margin: Vec<MarginJob>,
    #[serde(default)]
    pub expfam: Vec<ExpfamJob>,
    #[serde(default)]
    pub scenario: Vec<ScenarioSpec>,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            seed: None,
            out: None,
            workers: None,
            formats: default_formats(),
            direct: Vec::new(),
            curve: Vec::new(),
            margin: Vec::new(),
            expfam: Vec::new(),
            scenario: Vec::new(),
        }
    }
}

impl RunConfig {
    pub fn parse(text: &str, path: &Path) -> Result<Self> {
        toml::from_str(text).map_err(|e| CliError::Config { path: path.to_path_buf(), message: e.to_string() })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(io_err(path))?;
        Self::parse(&text, path)
    }
}

/// Penalties of the normal sequence model, in its own scaling.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum SequencePenalty {
    Zero,
    /// `λ‖g‖_n²`.
    Ridge { lambda: f64 },
    /// Indicator of `[−w, w]^n`.
    Box { half_width: f64 },
    /// Indicator of the Euclidean ball of the given radius.
    Ball { radius: f64 },
}

impl SequencePenalty {
    pub fn build(&self, n: usize) -> Penalty {
        match self {
            SequencePenalty::Zero => Penalty::Zero,
            SequencePenalty::Ridge { lambda } => Penalty::ridge_n(*lambda, n),
            SequencePenalty::Box { half_width } => {
                Penalty::indicator(ConvexSet::Box { lower: vec![-half_width; n], upper: vec![*half_width; n] })
            }
            SequencePenalty::Ball { radius } => Penalty::indicator(ConvexSet::ball(n, *radius)),
        }
    }
}

fn one() -> f64 {
    1.0
}
fn direct_replicates() -> usize {
    100_000
}
fn curve_replicates() -> usize {
    200
}
fn taylor_grid() -> Vec<f64> {
    vec![1e-1, 1e-2, 1e-3, 1e-4]
}
fn delta_grid() -> Vec<f64> {
    vec![0.5, 1.0, 2.0, 4.0]
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DirectJob {
    #[serde(default)]
    pub name: Option<String>,
    pub n: usize,
    #[serde(default = "one")]
    pub sigma: f64,
    pub penalty: SequencePenalty,
    #[serde(default = "direct_replicates")]
    pub replicates: usize,
    /// Deviation levels; the default grid when absent.
    #[serde(default)]
    pub t: Option<Vec<f64>>,
    /// Paired draws for the Lipschitz check; skipped when absent.
    #[serde(default)]
    pub lipschitz_pairs: Option<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum CurveFamily {
    GaussianLocation {
        g0: Vec<f64>,
        #[serde(default = "one")]
        sigma: f64,
    },
    Cosine {
        g0: Vec<f64>,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub start: f64,
    pub end: f64,
    #[serde(default)]
    pub step: Option<f64>,
    #[serde(default)]
    pub ratio: Option<f64>,
}

impl GridSpec {
    pub fn build(&self) -> Result<SGrid> {
        match (self.step, self.ratio) {
            (Some(h), None) => Ok(SGrid::uniform(self.start, self.end, h)?),
            (None, Some(r)) => Ok(SGrid::geometric(self.start, self.end, r)?),
            _ => Err(CliError::Usage("a grid needs exactly one of step and ratio".into())),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CurveJob {
    #[serde(default)]
    pub name: Option<String>,
    pub family: CurveFamily,
    #[serde(default = "zero_penalty")]
    pub penalty: Penalty,
    pub n: usize,
    #[serde(default = "curve_replicates")]
    pub replicates: usize,
    pub grid: GridSpec,
}

fn zero_penalty() -> Penalty {
    Penalty::Zero
}

/// `r₀` from `J`, then `δ(t)` for the quadratic margin `G(u) = u²/(2c²)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MarginJob {
    #[serde(default)]
    pub name: Option<String>,
    pub j: JDescriptor,
    pub m_n: f64,
    /// Curvature constant `C`.
    #[serde(default = "one")]
    pub c: f64,
    /// Uniform bound `K`.
    #[serde(default = "one")]
    pub k: f64,
    /// Constant of the quadratic margin function.
    #[serde(default = "one")]
    pub margin_c: f64,
    pub n: usize,
    #[serde(default = "one")]
    pub tau_max: f64,
    pub s0: f64,
    #[serde(default = "delta_grid")]
    pub t: Vec<f64>,
    #[serde(default)]
    pub c0: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum ExpfamFamilySpec {
    TwoPoint {
        p: f64,
        #[serde(default)]
        centered: bool,
    },
    Polynomial {
        lower: f64,
        upper: f64,
        base: BaseDensity,
        degree: usize,
        #[serde(default)]
        centered: bool,
        #[serde(default)]
        nodes: Option<usize>,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExpfamJob {
    #[serde(default)]
    pub name: Option<String>,
    pub family: ExpfamFamilySpec,
    pub theta: Vec<f64>,
    #[serde(default = "taylor_grid")]
    pub t: Vec<f64>,
}
