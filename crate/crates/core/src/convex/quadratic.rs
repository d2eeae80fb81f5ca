//! Quadratic models `L(u) = uᵀQu + pen(c + u)` restricted to `c + u ∈ domain`,
//! where `u = g − c` is the displacement from a reference parameter `c`.
//!
//! Linear families reduce every inner problem to one of three primitives:
//! the minimum of `L`, the penalized minimizer `argmin L(u) − ⟨v, u⟩`, and
//! the support value `max {⟨v, u⟩ : L(u) ≤ level}`.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

use crate::convex::prox::prox_with_domain;
use crate::convex::solver::{minimize, Composite, SolverSettings};
use crate::convex::ConvexSet;
use crate::error::{arg, Error, Result};
use crate::linalg::{dot, Metric};
use crate::model::Penalty;

#[derive(Clone, Debug)]
enum Inverse {
    Diagonal(Vec<f64>),
    Dense(Cholesky<f64, Dyn>),
}

impl Inverse {
    fn solve(&self, v: &[f64]) -> Vec<f64> {
        match self {
            Inverse::Diagonal(a) => v
                .iter()
                .zip(a)
                .map(|(x, d)| if *x == 0.0 { 0.0 } else { x / d })
                .collect(),
            Inverse::Dense(c) => c.solve(&DVector::from_column_slice(v)).as_slice().to_vec(),
        }
    }
}

#[derive(Clone, Debug)]
enum Structure {
    /// Whole domain and quadratic penalty: `L(u) = uᵀAu + 2bᵀu + c₀`.
    Ellipsoid { inv: Inverse, u_center: Vec<f64>, min: f64 },
    /// Zero penalty, diagonal `Q`, domain an ellipsoid centered at the reference.
    Concentric { q: Vec<f64>, w: Vec<f64>, r2: f64 },
    /// `Q = q·I` with a single nonsmooth term handled by a prox.
    Isotropic { q: f64 },
    General,
}

/// Outcome of a support evaluation.
#[derive(Clone, Debug, PartialEq)]
pub struct Support {
    pub value: f64,
    pub argmax: Vec<f64>,
    /// Set when an inner iterative solve did not reach its tolerance.
    pub flagged: bool,
}

#[derive(Clone, Debug)]
pub struct QuadraticModel {
    metric: Metric,
    center: Vec<f64>,
    penalty: Penalty,
    domain: ConvexSet,
    structure: Structure,
    inner_settings: SolverSettings,
}

fn penalty_weights(p: &Penalty, dim: usize) -> Option<Vec<f64>> {
    match p {
        Penalty::Zero => Some(vec![0.0; dim]),
        Penalty::Indicator { set: ConvexSet::Whole } => Some(vec![0.0; dim]),
        Penalty::Squared { lambda, seminorm } => {
            Some((0..dim).map(|k| lambda * lambda * seminorm.weight(k)).collect())
        }
        Penalty::Power { lambda, q, seminorm } if *q == 2.0 || *lambda == 0.0 => {
            Some((0..dim).map(|k| lambda * lambda * seminorm.weight(k)).collect())
        }
        _ => None,
    }
}

impl QuadraticModel {
    pub fn new(metric: Metric, center: Vec<f64>, penalty: Penalty, domain: ConvexSet) -> Result<Self> {
        let d = center.len();
        if metric.dim() != d {
            return arg("metric and reference parameter differ in dimension");
        }
        metric.validate()?;
        penalty.validate()?;
        domain.validate()?;
        if let Some(dd) = domain.dim() {
            if dd != d {
                return arg("domain and reference parameter differ in dimension");
            }
        }
        if matches!(domain, ConvexSet::Finite { .. }) {
            return Err(Error::Unsupported("finite domains are handled by finite families".into()));
        }
        let structure = Self::analyse(&metric, &center, &penalty, &domain)?;
        Ok(QuadraticModel {
            metric,
            center,
            penalty,
            domain,
            structure,
            inner_settings: SolverSettings::default().accelerated().with_tolerance(1e-11).with_max_iterations(20_000),
        })
    }

    fn analyse(metric: &Metric, center: &[f64], penalty: &Penalty, domain: &ConvexSet) -> Result<Structure> {
        let d = center.len();
        if matches!(domain, ConvexSet::Whole) {
            if let Some(w) = penalty_weights(penalty, d) {
                let b: Vec<f64> = w.iter().zip(center).map(|(wk, c)| wk * c).collect();
                let c0 = dot(&b, center);
                let inv = match metric {
                    Metric::Diagonal(q) => {
                        let a: Vec<f64> = q.iter().zip(&w).map(|(x, y)| x + y).collect();
                        Inverse::Diagonal(a)
                    }
                    Metric::Dense(m) => {
                        let a = m + DMatrix::from_diagonal(&DVector::from_column_slice(&w));
                        match a.cholesky() {
                            Some(c) => Inverse::Dense(c),
                            None => return Ok(Structure::General),
                        }
                    }
                };
                let u_center: Vec<f64> = inv.solve(&b).iter().map(|x| -x).collect();
                let min = c0 + dot(&b, &u_center);
                return Ok(Structure::Ellipsoid { inv, u_center, min: min.max(0.0) });
            }
        }
        let zero_pen = penalty.is_zero();
        if zero_pen {
            if let Metric::Diagonal(q) = metric {
                let concentric = match domain {
                    ConvexSet::Ellipsoid { center: c, weights, radius } if c.as_slice() == center => {
                        Some((weights.clone(), radius * radius))
                    }
                    ConvexSet::Ball { center: c, radius } if c.as_slice() == center => {
                        Some((vec![1.0; d], radius * radius))
                    }
                    _ => None,
                };
                if let Some((w, r2)) = concentric {
                    return Ok(Structure::Concentric { q: q.clone(), w, r2 });
                }
            }
        }
        if let Some(q) = metric.isotropic_value() {
            if q > 0.0 && prox_with_domain(penalty, domain, center, 1.0).is_ok() {
                return Ok(Structure::Isotropic { q });
            }
        }
        Ok(Structure::General)
    }

    pub fn dim(&self) -> usize {
        self.center.len()
    }

    pub fn center(&self) -> &[f64] {
        &self.center
    }

    /// `L(u)`; `+∞` outside the domain.
    pub fn level(&self, u: &[f64]) -> f64 {
        let g: Vec<f64> = u.iter().zip(&self.center).map(|(a, b)| a + b).collect();
        if !self.domain.contains(&g, crate::model::penalty::MEMBERSHIP_TOL) {
            return f64::INFINITY;
        }
        self.metric.quad(u) + self.penalty.value(&g)
    }

    /// Prox of `pen + ι_domain` in displacement coordinates.
    fn prox_u(&self, z: &[f64], eta: f64) -> Result<Vec<f64>> {
        let g: Vec<f64> = z.iter().zip(&self.center).map(|(a, b)| a + b).collect();
        let p = prox_with_domain(&self.penalty, &self.domain, &g, eta)?;
        Ok(p.iter().zip(&self.center).map(|(a, b)| a - b).collect())
    }

    /// `argmin_u L(u) − ⟨v, u⟩` and whether the solve converged.
    pub fn penalized_minimizer(&self, v: &[f64], warm: Option<&[f64]>) -> Result<(Vec<f64>, bool)> {
        match &self.structure {
            Structure::Ellipsoid { inv, u_center, .. } => {
                let s = inv.solve(v);
                Ok((u_center.iter().zip(&s).map(|(c, x)| c + 0.5 * x).collect(), true))
            }
            Structure::Isotropic { q } => {
                let z: Vec<f64> = v.iter().map(|x| x / (2.0 * q)).collect();
                Ok((self.prox_u(&z, 1.0 / (2.0 * q))?, true))
            }
            Structure::Concentric { .. } | Structure::General => {
                let prob = Inner { model: self, w: v };
                let zero = vec![0.0; self.dim()];
                let r = minimize(&prob, warm.unwrap_or(&zero), &self.inner_settings)?;
                Ok((r.minimizer, r.converged))
            }
        }
    }

    /// `(min L, argmin L)`.
    pub fn minimum(&self) -> Result<(f64, Vec<f64>, bool)> {
        match &self.structure {
            Structure::Ellipsoid { u_center, min, .. } => Ok((*min, u_center.clone(), true)),
            Structure::Concentric { .. } => Ok((0.0, vec![0.0; self.dim()], true)),
            _ => {
                let zero = vec![0.0; self.dim()];
                let (u, ok) = self.penalized_minimizer(&zero, None)?;
                Ok((self.level(&u), u, ok))
            }
        }
    }

    /// `max {⟨v, u⟩ : L(u) ≤ level}`.
    pub fn support(&self, v: &[f64], level: f64) -> Result<Support> {
        let (min, umin, ok) = self.minimum()?;
        self.support_with_min(v, level, min, &umin, ok)
    }

    /// As [`support`](Self::support) with a precomputed minimum.
    pub fn support_with_min(&self, v: &[f64], level: f64, min: f64, umin: &[f64], min_ok: bool) -> Result<Support> {
        let tol = 1e-12 * min.abs().max(1.0);
        if level < min - tol {
            return arg(format!("level {level} below the minimum {min}"));
        }
        if v.iter().all(|x| *x == 0.0) {
            return Ok(Support { value: 0.0, argmax: umin.to_vec(), flagged: !min_ok });
        }
        match &self.structure {
            Structure::Ellipsoid { inv, u_center, min } => {
                let s = inv.solve(v);
                let vav = dot(v, &s);
                if !vav.is_finite() {
                    return Err(Error::Numerical("unbounded sublevel set".into()));
                }
                let rho = (level - min).max(0.0);
                let scale = if vav > 0.0 { (rho / vav).sqrt() } else { 0.0 };
                let argmax: Vec<f64> = u_center.iter().zip(&s).map(|(c, x)| c + scale * x).collect();
                let value = dot(v, u_center) + (rho * vav).sqrt();
                Ok(Support { value, argmax, flagged: false })
            }
            Structure::Concentric { q, w, r2 } => Ok(concentric_support(v, q, w, level.max(0.0), *r2)),
            _ => self.dual_support(v, level, min, umin, min_ok),
        }
    }

    fn dual_support(&self, v: &[f64], level: f64, min: f64, umin: &[f64], min_ok: bool) -> Result<Support> {
        if level <= min + 1e-14 * min.abs().max(1.0) {
            return Ok(Support { value: dot(v, umin), argmax: umin.to_vec(), flagged: !min_ok });
        }
        let mut flagged = false;
        let mut warm: Option<Vec<f64>> = None;
        let mut eval = |mu: f64, warm: &mut Option<Vec<f64>>| -> Result<(Vec<f64>, f64)> {
            let w: Vec<f64> = v.iter().map(|x| x / mu).collect();
            let (u, ok) = self.penalized_minimizer(&w, warm.as_deref())?;
            flagged |= !ok;
            let l = self.level(&u);
            *warm = Some(u.clone());
            Ok((u, l))
        };
        let mut mu_hi = 1.0;
        let (mut u_hi, mut l_hi) = eval(mu_hi, &mut warm)?;
        let mut guard = 0;
        while l_hi > level {
            mu_hi *= 4.0;
            (u_hi, l_hi) = eval(mu_hi, &mut warm)?;
            guard += 1;
            if guard > 400 {
                return Err(Error::Numerical("dual bracket search failed".into()));
            }
        }
        let mut mu_lo = mu_hi;
        loop {
            mu_lo /= 4.0;
            let (u, l) = eval(mu_lo, &mut warm)?;
            if l > level {
                break;
            }
            mu_hi = mu_lo;
            u_hi = u;
            guard += 1;
            if guard > 400 || mu_lo < 1e-250 {
                // The level constraint never binds: the domain alone bounds the problem.
                return Ok(Support { value: dot(v, &u_hi), argmax: u_hi, flagged });
            }
        }
        for _ in 0..200 {
            if mu_hi / mu_lo < 1.0 + 1e-13 {
                break;
            }
            let mid = (mu_lo * mu_hi).sqrt();
            let (u, l) = eval(mid, &mut warm)?;
            if l > level {
                mu_lo = mid;
            } else {
                mu_hi = mid;
                u_hi = u;
            }
        }
        Ok(Support { value: dot(v, &u_hi), argmax: u_hi, flagged })
    }
}

/// Support of `{Σ q u² ≤ L} ∩ {Σ w u² ≤ R²}` via the one-parameter dual.
fn concentric_support(v: &[f64], q: &[f64], w: &[f64], level: f64, r2: f64) -> Support {
    if level == 0.0 || r2 == 0.0 {
        return Support { value: 0.0, argmax: vec![0.0; v.len()], flagged: false };
    }
    let denom = |theta: f64, k: usize| theta * q[k] / level + (1.0 - theta) * w[k] / r2;
    let h = |theta: f64| -> f64 {
        v.iter()
            .enumerate()
            .map(|(k, x)| if *x == 0.0 { 0.0 } else { x * x / denom(theta, k) })
            .sum()
    };
    let theta = crate::numeric::golden_min(&h, 0.0, 1.0, 1e-15);
    let best = [0.0, theta, 1.0]
        .into_iter()
        .map(|t| (h(t), t))
        .filter(|(val, _)| val.is_finite())
        .min_by(|a, b| a.0.total_cmp(&b.0))
        .unwrap_or((0.0, theta));
    let value = best.0.max(0.0).sqrt();
    let raw: Vec<f64> = v
        .iter()
        .enumerate()
        .map(|(k, x)| if *x == 0.0 { 0.0 } else { x / denom(best.1, k) })
        .collect();
    let scale = if value > 0.0 { value / dot(v, &raw) } else { 0.0 };
    let mut argmax: Vec<f64> = raw.iter().map(|x| x * scale).collect();
    // Pull back inside both ellipsoids if the dual optimum is slightly inexact.
    let l1: f64 = argmax.iter().zip(q).map(|(x, a)| a * x * x).sum::<f64>() / level;
    let l2: f64 = argmax.iter().zip(w).map(|(x, a)| a * x * x).sum::<f64>() / r2;
    let worst = l1.max(l2);
    if worst > 1.0 {
        let t = 1.0 / worst.sqrt();
        argmax.iter_mut().for_each(|x| *x *= t);
    }
    Support { value, argmax, flagged: false }
}

struct Inner<'a> {
    model: &'a QuadraticModel,
    w: &'a [f64],
}

impl Composite for Inner<'_> {
    fn smooth(&self, u: &[f64]) -> f64 {
        self.model.metric.quad(u) - dot(self.w, u)
    }
    fn gradient(&self, u: &[f64]) -> Vec<f64> {
        self.model
            .metric
            .apply(u)
            .iter()
            .zip(self.w)
            .map(|(a, b)| 2.0 * a - b)
            .collect()
    }
    fn nonsmooth(&self, u: &[f64]) -> f64 {
        let g: Vec<f64> = u.iter().zip(&self.model.center).map(|(a, b)| a + b).collect();
        if !self.model.domain.contains(&g, crate::model::penalty::MEMBERSHIP_TOL) {
            return f64::INFINITY;
        }
        self.model.penalty.value(&g)
    }
    fn prox(&self, v: &[f64], eta: f64) -> Result<Vec<f64>> {
        self.model.prox_u(v, eta)
    }
    fn step_hint(&self) -> f64 {
        let l = 2.0 * self.model.metric.max_eigen();
        if l > 0.0 {
            1.0 / l
        } else {
            1.0
        }
    }
}
