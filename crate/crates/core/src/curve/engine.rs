use rand::SeedableRng;
use serde::{Deserialize, Serialize};

use crate::convex::quadratic::QuadraticModel;
use crate::error::{arg, Error, Result};
use crate::linalg::norm;
use crate::model::family::standard_normal;
use crate::model::functionals::{tau_min, tau_model};
use crate::model::{Dataset, Family, Penalty, PopulationOracle};
use crate::rng::Rng;

/// Which functional bounds the feasible set `{f : level(f) ≤ s²}`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Constraint {
    /// `τ²(f) = P(f − f⁰) + pen(f)`.
    Tau,
    /// `ς²(f) = c²σ²(f − f⁰) + pen(f)`.
    Varsigma { c: f64 },
}

/// Realization of the centered empirical process `W(f) = (P_n − P)(f⁰ − f)`.
#[derive(Clone, Debug)]
pub enum Process {
    /// `W_k` per list element.
    Finite(Vec<f64>),
    /// Coefficient vector `v` with `W(f_g) = ⟨g − g⁰, v⟩`.
    Linear(Vec<f64>),
    /// Raw data; `W` is evaluated pointwise.
    Smooth(Dataset),
}

#[allow(clippy::large_enum_variant)]
enum Inner {
    Finite { levels: Vec<f64> },
    Linear { model: QuadraticModel, min: f64, umin: Vec<f64>, ok: bool },
    Smooth { g0: Vec<f64>, anchor: Vec<f64>, min: f64, ref_mean: f64 },
}

/// Precomputed constraint geometry for evaluating `Ê_n(s)` over many
/// datasets and radii.
pub struct CurveEngine<'a> {
    family: &'a Family,
    penalty: &'a Penalty,
    oracle: &'a PopulationOracle,
    constraint: Constraint,
    inner: Inner,
}

const LEVEL_TOL: f64 = 1e-12;
const STARTS: usize = 8;

fn level_tol(level: f64) -> f64 {
    LEVEL_TOL * level.abs().max(1.0)
}

impl<'a> CurveEngine<'a> {
    pub fn new(family: &'a Family, penalty: &'a Penalty, oracle: &'a PopulationOracle, constraint: Constraint) -> Result<Self> {
        penalty.validate()?;
        if let Constraint::Varsigma { c } = constraint {
            if !(c > 0.0 && c.is_finite()) {
                return arg("ς constant c must be positive");
            }
        }
        let g0 = family.require_reference()?;
        let inner = match family {
            Family::Finite(f) => {
                let r = f.reference_index().expect("reference checked");
                let mut levels = Vec::with_capacity(f.len());
                for (k, p) in f.params().iter().enumerate() {
                    let base = match constraint {
                        Constraint::Tau => f.population_means()[k] - f.population_means()[r],
                        Constraint::Varsigma { c } => c * c * f.variance_of_difference(k)?,
                    };
                    levels.push(base + penalty.value(p));
                }
                Inner::Finite { levels }
            }
            Family::Linear(f) => {
                let model = match constraint {
                    Constraint::Tau => tau_model(f, penalty)?,
                    Constraint::Varsigma { c } => {
                        let cov = f.feature_cov().ok_or_else(|| {
                            Error::Unsupported("ς-curves of linear families need the feature covariance".into())
                        })?;
                        QuadraticModel::new(cov.scaled(c * c), g0.clone(), penalty.clone(), f.domain().clone())?
                    }
                };
                let (min, umin, ok) = model.minimum()?;
                Inner::Linear { model, min, umin, ok }
            }
            Family::Smooth(f) => {
                let (anchor, min) = match constraint {
                    Constraint::Tau => {
                        let t = tau_min(family, penalty, oracle)?;
                        (t.argmin, t.tau_sq)
                    }
                    Constraint::Varsigma { .. } if penalty.is_zero() => (g0.clone(), 0.0),
                    Constraint::Varsigma { .. } => {
                        return Err(Error::Unsupported(
                            "penalized ς-curves of smooth families are not supported".into(),
                        ))
                    }
                };
                let ref_mean = f.population_mean(&g0, oracle)?;
                Inner::Smooth { g0, anchor, min, ref_mean }
            }
        };
        Ok(CurveEngine { family, penalty, oracle, constraint, inner })
    }

    pub fn family(&self) -> &Family {
        self.family
    }

    pub fn constraint(&self) -> Constraint {
        self.constraint
    }

    /// Smallest attainable level (`τ²_min` or `ς²_min`).
    pub fn min_level(&self) -> f64 {
        match &self.inner {
            Inner::Finite { levels } => levels.iter().copied().fold(f64::INFINITY, f64::min),
            Inner::Linear { min, .. } => *min,
            Inner::Smooth { min, .. } => *min,
        }
    }

    /// Constraint levels of a finite family, one per element.
    pub fn finite_levels(&self) -> Option<&[f64]> {
        match &self.inner {
            Inner::Finite { levels } => Some(levels),
            _ => None,
        }
    }

    /// Constraint level of a parameter.
    pub fn level_of(&self, g: &[f64]) -> Result<f64> {
        let base = match self.constraint {
            Constraint::Tau => self.family.population_excess(g, self.oracle)?,
            Constraint::Varsigma { c } => c * c * self.family.variance_of_difference(g, self.oracle)?,
        };
        Ok(base + self.penalty.value(g))
    }

    pub fn process(&self, data: &Dataset) -> Result<Process> {
        match self.family {
            Family::Finite(f) => Ok(Process::Finite(finite_process(f, &f.empirical_means(data)?))),
            Family::Linear(f) => Ok(Process::Linear(f.process_vector(data))),
            Family::Smooth(_) => Ok(Process::Smooth(data.clone())),
        }
    }

    /// Draws a fresh sample of size `n` and returns its process.
    pub fn draw_process(&self, rng: &mut Rng, n: usize) -> Result<Process> {
        if n == 0 {
            return arg("sample size must be positive");
        }
        match self.family {
            Family::Finite(f) => {
                let law = self.family.law();
                let mut counts = vec![0usize; f.atoms()];
                for _ in 0..n {
                    counts[law.draw_index(rng).expect("finite families have discrete laws")] += 1;
                }
                Ok(Process::Finite(finite_process(f, &f.empirical_means_from_counts(&counts))))
            }
            Family::Linear(f) => {
                let d = f.dim();
                let mut acc = vec![0.0; d];
                let mut buf = vec![0.0; d];
                for _ in 0..n {
                    let x = f.law().draw_one(rng);
                    f.features(&x, &mut buf);
                    for (a, b) in acc.iter_mut().zip(&buf) {
                        *a += b;
                    }
                }
                Ok(Process::Linear(
                    acc.iter().zip(f.feature_mean()).map(|(a, m)| a / n as f64 - m).collect(),
                ))
            }
            Family::Smooth(f) => Ok(Process::Smooth(f.law().draw(rng, n)?)),
        }
    }

    fn check_radius(&self, s: f64) -> Result<f64> {
        if !(s >= 0.0 && s.is_finite()) {
            return arg(format!("radius {s} must be finite and nonnegative"));
        }
        let level = s * s;
        let min = self.min_level();
        if level < min - level_tol(min) {
            return arg(format!("s = {s} lies below the minimal radius {}", min.max(0.0).sqrt()));
        }
        Ok(level)
    }

    /// `Ê_n(s)` and whether the inner maximization was flagged.
    pub fn value(&self, p: &Process, s: f64) -> Result<(f64, bool)> {
        let level = self.check_radius(s)?;
        self.value_at_level(p, level)
    }

    /// Maximum of `W` over `{level(f) ≤ level}`.
    pub fn value_at_level(&self, p: &Process, level: f64) -> Result<(f64, bool)> {
        let min = self.min_level();
        if level < min - level_tol(min) {
            return arg(format!("level {level} below the minimal level {min}"));
        }
        match (&self.inner, p) {
            (Inner::Finite { levels }, Process::Finite(w)) => {
                let tol = level_tol(level);
                let best = levels
                    .iter()
                    .zip(w)
                    .filter(|(l, _)| **l <= level + tol)
                    .map(|(_, w)| *w)
                    .fold(f64::NEG_INFINITY, f64::max);
                Ok((best, false))
            }
            (Inner::Linear { model, min, umin, ok }, Process::Linear(v)) => {
                let sup = model.support_with_min(v, level.max(*min), *min, umin, *ok)?;
                Ok((sup.value, sup.flagged))
            }
            (Inner::Smooth { .. }, Process::Smooth(data)) => self.smooth_value(data, level),
            _ => arg("process does not match the family"),
        }
    }

    /// Curve values on sorted radii.
    pub fn values(&self, p: &Process, points: &[f64]) -> Result<(Vec<f64>, Vec<bool>)> {
        let mut values = Vec::with_capacity(points.len());
        let mut flags = Vec::with_capacity(points.len());
        for s in points {
            let (v, f) = self.value(p, *s)?;
            values.push(v);
            flags.push(f);
        }
        Ok((values, flags))
    }

    fn smooth_value(&self, data: &Dataset, level: f64) -> Result<(f64, bool)> {
        let Family::Smooth(f) = self.family else { unreachable!() };
        let Inner::Smooth { g0, anchor, ref_mean, .. } = &self.inner else { unreachable!() };
        let domain = self.family.domain();
        let n = data.len() as f64;
        let emp_ref = data.points().iter().map(|x| f.loss(g0, x)).sum::<f64>() / n;
        let w = |g: &[f64]| -> Result<f64> {
            let emp = data.points().iter().map(|x| f.loss(g, x)).sum::<f64>() / n;
            Ok((emp_ref - emp) - (ref_mean - f.population_mean(g, self.oracle)?))
        };
        let grad = |g: &[f64]| -> Result<Vec<f64>> {
            let mut acc = vec![0.0; g.len()];
            let mut buf = vec![0.0; g.len()];
            for x in data.points() {
                f.loss_gradient(g, x, &mut buf);
                for (a, b) in acc.iter_mut().zip(&buf) {
                    *a += b;
                }
            }
            let pg = f.population_gradient(g, self.oracle)?;
            Ok(acc.iter().zip(&pg).map(|(a, p)| p - a / n).collect())
        };
        let feasible = |g: &[f64]| -> Result<bool> {
            Ok(domain.contains(g, crate::model::family::DOMAIN_TOL) && self.level_of(g)? <= level + level_tol(level))
        };
        let retract = |p: Vec<f64>| -> Result<Vec<f64>> {
            let p = domain.project(&p)?;
            if feasible(&p)? {
                return Ok(p);
            }
            let at = |t: f64| anchor.iter().zip(&p).map(|(a, b)| a + t * (b - a)).collect::<Vec<f64>>();
            let (mut lo, mut hi) = (0.0, 1.0);
            for _ in 0..60 {
                let mid = 0.5 * (lo + hi);
                if feasible(&at(mid))? {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            Ok(at(lo))
        };
        let scale = (level - self.min_level()).max(0.0).sqrt().max(1e-3);
        let mut rng = Rng::seed_from_u64(0x5EED);
        let mut best = (f64::NEG_INFINITY, false);
        for start in 0..STARTS {
            let mut p = anchor.clone();
            if start > 0 {
                let dir: Vec<f64> = (0..p.len()).map(|_| standard_normal(&mut rng)).collect();
                let dn = norm(&dir).max(1e-300);
                p = retract(p.iter().zip(&dir).map(|(a, d)| a + scale * d / dn).collect())?;
            }
            let (value, converged) = ascend(&w, &grad, &retract, p, scale)?;
            if value > best.0 {
                best = (value, !converged);
            }
        }
        Ok(best)
    }
}

/// Projected ascent with normalized steps; returns the value and whether the
/// step size collapsed before the iteration limit.
fn ascend(
    w: &dyn Fn(&[f64]) -> Result<f64>,
    grad: &dyn Fn(&[f64]) -> Result<Vec<f64>>,
    retract: &dyn Fn(Vec<f64>) -> Result<Vec<f64>>,
    mut p: Vec<f64>,
    scale: f64,
) -> Result<(f64, bool)> {
    let mut value = w(&p)?;
    let mut step = 0.5 * scale;
    let floor = 1e-10 * scale;
    for _ in 0..500 {
        if step < floor {
            return Ok((value, true));
        }
        let g = grad(&p)?;
        let gn = norm(&g);
        if gn == 0.0 {
            return Ok((value, true));
        }
        let cand = retract(p.iter().zip(&g).map(|(a, b)| a + step * b / gn).collect())?;
        let cv = w(&cand)?;
        if cv > value + 1e-15 * value.abs().max(1.0) {
            p = cand;
            value = cv;
            step *= 1.5;
        } else {
            step *= 0.5;
        }
    }
    Ok((value, false))
}

fn finite_process(f: &crate::model::FiniteFamily, emp: &[f64]) -> Vec<f64> {
    let r = f.reference_index().expect("reference checked");
    let pop = f.population_means();
    emp.iter().zip(pop).map(|(e, p)| (emp[r] - e) - (pop[r] - p)).collect()
}

/// Single-radius evaluation of `Ê_n(s)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct HatE {
    pub value: f64,
    pub flagged: bool,
}

pub fn hat_e(family: &Family, penalty: &Penalty, data: &Dataset, oracle: &PopulationOracle, s: f64) -> Result<HatE> {
    let engine = CurveEngine::new(family, penalty, oracle, Constraint::Tau)?;
    let p = engine.process(data)?;
    let (value, flagged) = engine.value(&p, s)?;
    Ok(HatE { value, flagged })
}
