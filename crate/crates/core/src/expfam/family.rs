use std::fmt;
use std::sync::Arc;

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::convex::ConvexSet;
use crate::error::{arg, config, Error, Result};
use crate::linalg::dot;
use crate::model::family::standard_normal;
use crate::model::{Dataset, Sample};
use crate::quadrature::rule_on;
use crate::rng::Rng;

pub const DEFAULT_NODES: usize = 64;
pub const MAX_NODES: usize = 1024;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum BaseDensity {
    Uniform,
    Gaussian { mean: f64, sd: f64 },
}

impl BaseDensity {
    fn pdf(&self, x: f64) -> f64 {
        match self {
            BaseDensity::Uniform => 1.0,
            BaseDensity::Gaussian { mean, sd } => (-0.5 * ((x - mean) / sd).powi(2)).exp(),
        }
    }
}

/// Base measure `ν`, normalized to a probability measure.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum BaseMeasure {
    Finite { points: Vec<f64>, weights: Vec<f64> },
    Interval { lower: f64, upper: f64, density: BaseDensity, nodes: usize },
}

impl BaseMeasure {
    pub fn interval(lower: f64, upper: f64, density: BaseDensity) -> Self {
        BaseMeasure::Interval { lower, upper, density, nodes: DEFAULT_NODES }
    }

    pub fn with_nodes(self, nodes: usize) -> Self {
        match self {
            BaseMeasure::Interval { lower, upper, density, .. } => BaseMeasure::Interval { lower, upper, density, nodes },
            other => other,
        }
    }

    /// Nodes and normalized weights.
    pub fn discretize(&self) -> Result<(Vec<f64>, Vec<f64>)> {
        let (x, w) = match self {
            BaseMeasure::Finite { points, weights } => {
                if points.is_empty() || points.len() != weights.len() {
                    return config("finite base measure needs one weight per point");
                }
                (points.clone(), weights.clone())
            }
            BaseMeasure::Interval { lower, upper, density, nodes } => {
                if !(lower < upper && lower.is_finite() && upper.is_finite()) || *nodes == 0 {
                    return config("interval base measure needs a finite interval and at least one node");
                }
                if let BaseDensity::Gaussian { sd, .. } = density {
                    if !(*sd > 0.0) {
                        return config("Gaussian base density needs sd > 0");
                    }
                }
                let (x, w) = rule_on(*lower, *upper, *nodes);
                let w = x.iter().zip(&w).map(|(a, b)| b * density.pdf(*a)).collect();
                (x, w)
            }
        };
        if w.iter().any(|v| !(*v >= 0.0 && v.is_finite())) {
            return config("base weights must be finite and nonnegative");
        }
        let total: f64 = w.iter().sum();
        if !(total > 0.0) {
            return config("base measure has zero mass");
        }
        Ok((x, w.iter().map(|v| v / total).collect()))
    }

    /// Doubles the node count from the current value until `log ∫ e^{probe} dν`
    /// changes by at most `tol`, or `MAX_NODES` is reached.
    pub fn refined(self, probe: &dyn Fn(f64) -> f64, tol: f64) -> Result<Self> {
        let BaseMeasure::Interval { nodes, .. } = self else { return Ok(self) };
        let value = |m: &BaseMeasure| -> Result<f64> {
            let (x, w) = m.discretize()?;
            Ok(log_sum(&x.iter().map(|a| probe(*a)).collect::<Vec<_>>(), &w))
        };
        let mut cur = self.with_nodes(nodes);
        let mut v = value(&cur)?;
        let mut k = nodes;
        while k < MAX_NODES {
            let next = cur.clone().with_nodes(2 * k);
            let nv = value(&next)?;
            let done = (nv - v).abs() <= tol;
            cur = next;
            v = nv;
            k *= 2;
            if done {
                break;
            }
        }
        Ok(cur)
    }

    pub fn sample_one(&self, rng: &mut Rng, cumulative: &[f64]) -> f64 {
        match self {
            BaseMeasure::Finite { points, .. } => {
                let u: f64 = rng.random();
                points[cumulative.partition_point(|c| *c <= u).min(points.len() - 1)]
            }
            BaseMeasure::Interval { lower, upper, density, .. } => match density {
                BaseDensity::Uniform => lower + (upper - lower) * rng.random::<f64>(),
                BaseDensity::Gaussian { mean, sd } => loop {
                    let x = mean + sd * standard_normal(rng);
                    if x >= *lower && x <= *upper {
                        break x;
                    }
                },
            },
        }
    }
}

/// `log Σ w_i e^{g_i}` for probability weights, using `log1p(Σ w (e^g − 1))`
/// when `g` is small so that `d(tg)` keeps its relative accuracy as `t ↓ 0`.
pub fn log_sum(g: &[f64], w: &[f64]) -> f64 {
    let m = g.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lo = g.iter().copied().fold(f64::INFINITY, f64::min);
    if m.abs() <= 1.0 && lo.abs() <= 1.0 {
        return g.iter().zip(w).map(|(a, b)| b * a.exp_m1()).sum::<f64>().ln_1p();
    }
    m + g.iter().zip(w).map(|(a, b)| b * (a - m).exp()).sum::<f64>().ln()
}

pub type BasisFn = Arc<dyn Fn(f64, &mut [f64]) + Send + Sync>;

/// Linear family `g_θ = Σ θ_k (ψ_k − c_k)` over a base measure, with `c_k`
/// the `ν`-means when centering is on.
#[derive(Clone)]
pub struct ExpFamily {
    base: BaseMeasure,
    nodes: Vec<f64>,
    weights: Vec<f64>,
    cumulative: Vec<f64>,
    basis: BasisFn,
    dim: usize,
    table: Vec<Vec<f64>>,
    centers: Vec<f64>,
    domain: ConvexSet,
    centered: bool,
}

impl fmt::Debug for ExpFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ExpFamily")
            .field("base", &self.base)
            .field("dim", &self.dim)
            .field("centered", &self.centered)
            .finish_non_exhaustive()
    }
}

impl ExpFamily {
    pub fn new(base: BaseMeasure, dim: usize, basis: BasisFn, centered: bool) -> Result<Self> {
        if dim == 0 {
            return config("exponential family needs at least one sufficient statistic");
        }
        let (nodes, weights) = base.discretize()?;
        let mut table: Vec<Vec<f64>> = nodes
            .iter()
            .map(|x| {
                let mut row = vec![0.0; dim];
                basis(*x, &mut row);
                row
            })
            .collect();
        let centers: Vec<f64> = if centered {
            (0..dim).map(|k| table.iter().zip(&weights).map(|(r, w)| w * r[k]).sum()).collect()
        } else {
            vec![0.0; dim]
        };
        for row in &mut table {
            row.iter_mut().zip(&centers).for_each(|(a, c)| *a -= c);
        }
        let mut acc = 0.0;
        let cumulative = weights.iter().map(|w| {
            acc += w;
            acc
        });
        let cumulative = cumulative.collect();
        Ok(ExpFamily { base, nodes, weights, cumulative, basis, dim, table, centers, domain: ConvexSet::Whole, centered })
    }

    /// `ν` on `{−1, +1}` with `ν{+1} = p`, `g_a(x) = a·x`.
    pub fn two_point(p: f64, centered: bool) -> Result<Self> {
        if !(p > 0.0 && p < 1.0) {
            return config("two-point weight must lie in (0, 1)");
        }
        let base = BaseMeasure::Finite { points: vec![-1.0, 1.0], weights: vec![1.0 - p, p] };
        ExpFamily::new(base, 1, Arc::new(|x, out| out[0] = x), centered)
    }

    /// `ψ_k(x) = x^k`, `k = 1..=degree`.
    pub fn polynomial(base: BaseMeasure, degree: usize, centered: bool) -> Result<Self> {
        ExpFamily::new(
            base,
            degree,
            Arc::new(|x, out| {
                let mut p = 1.0;
                for o in out.iter_mut() {
                    p *= x;
                    *o = p;
                }
            }),
            centered,
        )
    }

    pub fn with_domain(mut self, domain: ConvexSet) -> Result<Self> {
        domain.validate()?;
        if domain.dim().is_some_and(|d| d != self.dim) {
            return config("domain dimension does not match the family");
        }
        self.domain = domain;
        Ok(self)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn base(&self) -> &BaseMeasure {
        &self.base
    }

    pub fn domain(&self) -> &ConvexSet {
        &self.domain
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    fn check(&self, theta: &[f64]) -> Result<()> {
        if theta.len() != self.dim {
            return Err(Error::DomainViolation(format!("parameter has dimension {}, family has {}", theta.len(), self.dim)));
        }
        Ok(())
    }

    /// Centered statistics `ψ(x) − c`.
    pub fn statistics(&self, x: f64, out: &mut [f64]) {
        (self.basis)(x, out);
        out.iter_mut().zip(&self.centers).for_each(|(a, c)| *a -= c);
    }

    /// `g_θ(x)`.
    pub fn eval(&self, theta: &[f64], x: f64) -> Result<f64> {
        self.check(theta)?;
        let mut buf = vec![0.0; self.dim];
        self.statistics(x, &mut buf);
        Ok(dot(theta, &buf))
    }

    /// `g_θ` at the quadrature nodes.
    pub fn node_values(&self, theta: &[f64]) -> Vec<f64> {
        self.table.iter().map(|r| dot(r, theta)).collect()
    }

    /// `∫ g_θ dν`.
    pub fn centering_residual(&self, theta: &[f64]) -> Result<f64> {
        self.check(theta)?;
        Ok(dot(&self.node_values(theta), &self.weights))
    }

    /// `P g_θ² = ∫ g_θ² dν`.
    pub fn second_moment(&self, theta: &[f64]) -> Result<f64> {
        self.check(theta)?;
        Ok(self.node_values(theta).iter().zip(&self.weights).map(|(g, w)| w * g * g).sum())
    }

    /// `max |g_θ|` over the support nodes.
    pub fn sup_norm(&self, theta: &[f64]) -> Result<f64> {
        self.check(theta)?;
        Ok(self.node_values(theta).iter().fold(0.0, |a, b| a.max(b.abs())))
    }

    /// `d(g) = log ∫ e^g dν` for values of `g` at the nodes.
    pub fn log_partition_values(&self, g: &[f64]) -> Result<f64> {
        let v = log_sum(g, &self.weights);
        if !v.is_finite() {
            return Err(Error::DomainViolation("log-partition integral diverges".into()));
        }
        Ok(v)
    }

    /// Mean of the centered statistics under the tilted law `e^{g_θ − d} dν`.
    pub fn tilted_mean(&self, theta: &[f64]) -> Result<Vec<f64>> {
        let g = self.node_values(theta);
        let m = g.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let p: Vec<f64> = g.iter().zip(&self.weights).map(|(a, w)| w * (a - m).exp()).collect();
        let z: f64 = p.iter().sum();
        if !(z > 0.0 && z.is_finite()) {
            return Err(Error::DomainViolation("log-partition integral diverges".into()));
        }
        let mut out = vec![0.0; self.dim];
        for (row, pi) in self.table.iter().zip(&p) {
            out.iter_mut().zip(row).for_each(|(o, r)| *o += pi / z * r);
        }
        Ok(out)
    }

    /// `n` draws from `ν` (the `g⁰ ≡ 0` law).
    pub fn sample(&self, rng: &mut Rng, n: usize) -> Result<Dataset> {
        if n == 0 {
            return arg("sample size must be positive");
        }
        Dataset::new((0..n).map(|_| Sample::Scalar(self.base.sample_one(rng, &self.cumulative))).collect())
    }
}

/// `d(g_θ) = log ∫ e^{g_θ} dν`.
pub fn log_partition(family: &ExpFamily, theta: &[f64]) -> Result<f64> {
    family.check(theta)?;
    family.log_partition_values(&family.node_values(theta))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_point_cosh() {
        let f = ExpFamily::two_point(0.5, false).unwrap();
        let d = log_partition(&f, &[1.0]).unwrap();
        assert!((d - 1f64.cosh().ln()).abs() < 1e-15);
        assert_eq!(log_partition(&f, &[0.0]).unwrap(), 0.0);
    }

    #[test]
    fn gaussian_refinement() {
        let base = BaseMeasure::interval(-5.0, 5.0, BaseDensity::Gaussian { mean: 0.0, sd: 1.0 });
        let f64n = ExpFamily::polynomial(base.clone(), 2, true).unwrap();
        let f512 = ExpFamily::polynomial(base.with_nodes(512), 2, true).unwrap();
        let theta = [0.15, 0.01];
        assert!(f64n.sup_norm(&theta).unwrap() <= 1.0 + 1e-12);
        let a = log_partition(&f64n, &theta).unwrap();
        let b = log_partition(&f512, &theta).unwrap();
        assert!((a - b).abs() <= 1e-10, "{a} vs {b}");
        assert!(f64n.centering_residual(&theta).unwrap().abs() <= 1e-10);
    }
}
