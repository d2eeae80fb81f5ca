use std::cell::Cell;

use nalgebra::{DMatrix, DVector};

use serde::{Deserialize, Serialize};

use super::family::ExpFamily;
use crate::convex::prox::prox_with_domain;
use crate::convex::solver::{minimize, Composite};
use crate::convex::{ConvexSet, SolveResult, SolverSettings};
use crate::error::{arg, Result};
use crate::linalg::{dot, norm};
use crate::model::family::DOMAIN_TOL;
use crate::model::{Dataset, Penalty};

struct DensityMle<'a> {
    family: &'a ExpFamily,
    emp: Vec<f64>,
    penalty: &'a Penalty,
}

impl Composite for DensityMle<'_> {
    fn smooth(&self, theta: &[f64]) -> f64 {
        match self.family.log_partition_values(&self.family.node_values(theta)) {
            Ok(d) => d - dot(theta, &self.emp),
            Err(_) => f64::INFINITY,
        }
    }
    fn gradient(&self, theta: &[f64]) -> Vec<f64> {
        match self.family.tilted_mean(theta) {
            Ok(m) => m.iter().zip(&self.emp).map(|(a, b)| a - b).collect(),
            Err(_) => vec![f64::NAN; theta.len()],
        }
    }
    fn nonsmooth(&self, theta: &[f64]) -> f64 {
        if !self.family.domain().contains(theta, DOMAIN_TOL) {
            return f64::INFINITY;
        }
        self.penalty.value(theta)
    }
    fn prox(&self, v: &[f64], eta: f64) -> Result<Vec<f64>> {
        prox_with_domain(self.penalty, self.family.domain(), v, eta)
    }
}

fn empirical_statistics(family: &ExpFamily, data: &Dataset) -> Result<Vec<f64>> {
    let mut acc = vec![0.0; family.dim()];
    let mut buf = vec![0.0; family.dim()];
    for x in data.points() {
        let v = x.as_scalar().ok_or_else(|| crate::Error::Argument("density data must be scalar".into()))?;
        family.statistics(v, &mut buf);
        acc.iter_mut().zip(&buf).for_each(|(a, b)| *a += b);
    }
    Ok(acc.iter().map(|a| a / data.len() as f64).collect())
}

/// `argmin −P_n g_θ + d(g_θ) + pen(θ)` over the family's domain.
pub fn fit_density_mle(family: &ExpFamily, data: &Dataset, penalty: &Penalty, settings: &SolverSettings) -> Result<SolveResult> {
    penalty.validate()?;
    let prob = DensityMle { family, emp: empirical_statistics(family, data)?, penalty };
    let start = family.domain().project(&vec![0.0; family.dim()])?;
    minimize(&prob, &start, settings)
}

/// `‖P_θ ψ − P_n ψ‖`, zero at interior unpenalized solutions.
pub fn score_residual(family: &ExpFamily, data: &Dataset, theta: &[f64]) -> Result<f64> {
    let emp = empirical_statistics(family, data)?;
    let m = family.tilted_mean(theta)?;
    Ok(norm(&m.iter().zip(&emp).map(|(a, b)| a - b).collect::<Vec<_>>()))
}

/// Cumulant `d(ξ)` of a one-parameter response family.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Cumulant {
    /// `ξ²/2`.
    Gaussian,
    /// `e^ξ`.
    Poisson,
    /// `log(1 + e^ξ)`.
    Bernoulli,
    /// `−log(−ξ)` on `ξ < 0`.
    Exponential,
}

/// Largest admissible `ξ` for the exponential cumulant.
pub const XI_CEILING: f64 = -1e-8;

impl Cumulant {
    /// Clamps `ξ` into the natural parameter space.
    pub fn clamp(&self, xi: f64) -> (f64, bool) {
        match self {
            Cumulant::Exponential if xi > XI_CEILING => (XI_CEILING, true),
            _ => (xi, false),
        }
    }

    pub fn value(&self, xi: f64) -> f64 {
        match self {
            Cumulant::Gaussian => 0.5 * xi * xi,
            Cumulant::Poisson => xi.exp(),
            Cumulant::Bernoulli => {
                if xi > 0.0 {
                    xi + (-xi).exp().ln_1p()
                } else {
                    xi.exp().ln_1p()
                }
            }
            Cumulant::Exponential => -(-xi).ln(),
        }
    }

    pub fn derivative(&self, xi: f64) -> f64 {
        match self {
            Cumulant::Gaussian => xi,
            Cumulant::Poisson => xi.exp(),
            Cumulant::Bernoulli => 1.0 / (1.0 + (-xi).exp()),
            Cumulant::Exponential => -1.0 / xi,
        }
    }
}

/// How the parameter maps to `g = (g(X_1), …, g(X_n))`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Design {
    /// The parameter is `g` itself.
    Identity,
    /// `g = Xβ` with rows `X_i`.
    Linear { rows: Vec<Vec<f64>> },
}

impl Design {
    fn dim(&self, n: usize) -> Result<usize> {
        match self {
            Design::Identity => Ok(n),
            Design::Linear { rows } => {
                if rows.len() != n || rows.is_empty() {
                    return arg("design needs one row per response");
                }
                let p = rows[0].len();
                if p == 0 || rows.iter().any(|r| r.len() != p) {
                    return arg("design rows must share a positive length");
                }
                Ok(p)
            }
        }
    }

    pub fn apply(&self, beta: &[f64]) -> Vec<f64> {
        match self {
            Design::Identity => beta.to_vec(),
            Design::Linear { rows } => rows.iter().map(|r| dot(r, beta)).collect(),
        }
    }

    fn adjoint(&self, r: &[f64], p: usize) -> Vec<f64> {
        match self {
            Design::Identity => r.to_vec(),
            Design::Linear { rows } => {
                let mut out = vec![0.0; p];
                for (row, ri) in rows.iter().zip(r) {
                    out.iter_mut().zip(row).for_each(|(o, x)| *o += ri * x);
                }
                out
            }
        }
    }
}

struct Regression<'a> {
    design: &'a Design,
    y: &'a [f64],
    cumulant: Cumulant,
    domain: &'a ConvexSet,
    penalty: &'a Penalty,
    p: usize,
    clamped: Cell<bool>,
    /// Treat points outside `Ξ` as infeasible instead of clamping.
    barrier: bool,
}

impl Regression<'_> {
    fn xi(&self, beta: &[f64]) -> Vec<f64> {
        self.design
            .apply(beta)
            .into_iter()
            .map(|x| {
                let (c, hit) = self.cumulant.clamp(x);
                if hit {
                    self.clamped.set(true);
                }
                c
            })
            .collect()
    }
}

impl Composite for Regression<'_> {
    fn smooth(&self, beta: &[f64]) -> f64 {
        let n = self.y.len() as f64;
        if self.barrier && self.design.apply(beta).iter().any(|x| self.cumulant.clamp(*x).1) {
            return f64::INFINITY;
        }
        let xi = self.xi(beta);
        xi.iter().zip(self.y).map(|(x, y)| self.cumulant.value(*x) - y * x).sum::<f64>() / n
    }
    fn gradient(&self, beta: &[f64]) -> Vec<f64> {
        let n = self.y.len() as f64;
        let xi = self.xi(beta);
        let r: Vec<f64> = xi.iter().zip(self.y).map(|(x, y)| (self.cumulant.derivative(*x) - y) / n).collect();
        self.design.adjoint(&r, self.p)
    }
    fn nonsmooth(&self, beta: &[f64]) -> f64 {
        if !self.domain.contains(beta, DOMAIN_TOL) {
            return f64::INFINITY;
        }
        self.penalty.value(beta)
    }
    fn prox(&self, v: &[f64], eta: f64) -> Result<Vec<f64>> {
        prox_with_domain(self.penalty, self.domain, v, eta)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RegressionFit {
    pub result: SolveResult,
    /// `g(X_i)` at the solution.
    pub fitted: Vec<f64>,
    /// Set when some `g(X_i)` left the natural parameter space during the solve
    /// and was clamped back.
    pub clamped: bool,
}

/// `argmin −Yᵀg/n + Σ d(g(X_i))/n + pen` over the domain.
pub fn fit_expfam_regression(
    design: &Design,
    y: &[f64],
    cumulant: Cumulant,
    domain: &ConvexSet,
    penalty: &Penalty,
    settings: &SolverSettings,
) -> Result<RegressionFit> {
    if y.is_empty() || y.iter().any(|v| !v.is_finite()) {
        return arg("responses must be finite and nonempty");
    }
    penalty.validate()?;
    domain.validate()?;
    let p = design.dim(y.len())?;
    let mut start = domain.project(&vec![0.0; p])?;
    let mut barrier = false;
    if cumulant == Cumulant::Exponential {
        // Start inside Ξ when the design allows it: fit g ≡ −1/Ȳ.
        let mean = y.iter().sum::<f64>() / y.len() as f64;
        let target = -1.0 / mean.max(1e-8);
        let cand = match design {
            Design::Identity => Some(vec![target; p]),
            Design::Linear { rows } => constant_fit(rows, target),
        };
        if let Some(c) = cand.map(|c| domain.project(&c)).transpose()? {
            if design.apply(&c).iter().all(|x| !cumulant.clamp(*x).1) {
                start = c;
                barrier = true;
            }
        }
    }
    let prob = Regression { design, y, cumulant, domain, penalty, p, clamped: Cell::new(false), barrier };
    let result = minimize(&prob, &start, settings)?;
    let fitted = design.apply(&result.minimizer);
    Ok(RegressionFit { fitted, clamped: prob.clamped.get(), result })
}

/// Least-squares `β` with `Xβ ≈ c·1`.
fn constant_fit(rows: &[Vec<f64>], c: f64) -> Option<Vec<f64>> {
    let p = rows[0].len();
    let x = DMatrix::from_fn(rows.len(), p, |i, j| rows[i][j]);
    let b = DVector::from_element(rows.len(), c);
    let sol = x.svd(true, true).solve(&b, 1e-12).ok()?;
    Some(sol.iter().copied().collect())
}

/// `τ²/‖g − g⁰‖_n²` with `τ² = Σ [d(g_i) − d(g⁰_i) − d′(g⁰_i)(g_i − g⁰_i)]/n`,
/// the local curvature constant of the regression class.
pub fn local_curvature(cumulant: Cumulant, g0: &[f64], g: &[f64]) -> Result<f64> {
    if g0.len() != g.len() || g.is_empty() {
        return arg("g and g⁰ must have equal positive length");
    }
    let mut num = 0.0;
    let mut den = 0.0;
    for (a, b) in g.iter().zip(g0) {
        num += cumulant.value(*a) - cumulant.value(*b) - cumulant.derivative(*b) * (a - b);
        den += (a - b) * (a - b);
    }
    if den == 0.0 {
        return arg("g equals g⁰");
    }
    Ok(num / den)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn regression_examples() {
        let s = SolverSettings::default();
        let y = [0.5, -1.0, 2.0];
        let fit = fit_expfam_regression(&Design::Identity, &y, Cumulant::Gaussian, &ConvexSet::Whole, &Penalty::Zero, &s)
            .unwrap();
        assert!(fit.result.converged, "{:?}", fit.result);
        for (a, b) in fit.fitted.iter().zip(&y) {
            assert!((a - b).abs() < 1e-8);
        }
        let dom = ConvexSet::interval(-2.0, 2.0);
        let fit = fit_expfam_regression(&Design::Identity, &[1.0], Cumulant::Poisson, &dom, &Penalty::Zero, &s).unwrap();
        assert!(fit.fitted[0].abs() < 1e-8 && !fit.clamped);
        assert!((local_curvature(Cumulant::Gaussian, &[0.0, 1.0], &[1.0, 3.0]).unwrap() - 0.5).abs() < 1e-15);
    }

    #[test]
    fn two_point_score_equation() {
        let f = ExpFamily::two_point(0.5, false).unwrap().with_domain(ConvexSet::interval(-2.0, 2.0)).unwrap();
        let data = Dataset::scalars(&[1.0, 1.0, -1.0, 1.0, -1.0]).unwrap();
        let r = fit_density_mle(&f, &data, &Penalty::Zero, &SolverSettings::default()).unwrap();
        assert!((r.minimizer[0] - 0.2f64.atanh()).abs() < 1e-8);
        assert!(score_residual(&f, &data, &r.minimizer).unwrap() < 1e-8);
    }
}
