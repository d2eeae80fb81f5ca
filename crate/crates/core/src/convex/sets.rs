//! Convex parameter domains and their Euclidean projections.

use serde::{Deserialize, Serialize};

use crate::error::{arg, config, Result};
use crate::linalg::dist;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum ConvexSet {
    /// The whole space.
    Whole,
    Box { lower: Vec<f64>, upper: Vec<f64> },
    /// Euclidean ball.
    Ball { center: Vec<f64>, radius: f64 },
    L1Ball { center: Vec<f64>, radius: f64 },
    /// `{x : Σ w_k (x_k − c_k)² ≤ r²}` with all `w_k > 0`.
    Ellipsoid { center: Vec<f64>, weights: Vec<f64>, radius: f64 },
    /// `{x ≥ 0 : Σ x = total}`.
    Simplex { dim: usize, total: f64 },
    /// A finite list of parameters. Not convex; used by finite families,
    /// where projection means nearest point.
    Finite { points: Vec<Vec<f64>> },
}

impl ConvexSet {
    pub fn unit_box(dim: usize) -> Self {
        ConvexSet::Box { lower: vec![0.0; dim], upper: vec![1.0; dim] }
    }

    pub fn ball(dim: usize, radius: f64) -> Self {
        ConvexSet::Ball { center: vec![0.0; dim], radius }
    }

    pub fn interval(lower: f64, upper: f64) -> Self {
        ConvexSet::Box { lower: vec![lower], upper: vec![upper] }
    }

    pub fn dim(&self) -> Option<usize> {
        match self {
            ConvexSet::Whole => None,
            ConvexSet::Box { lower, .. } => Some(lower.len()),
            ConvexSet::Ball { center, .. }
            | ConvexSet::L1Ball { center, .. }
            | ConvexSet::Ellipsoid { center, .. } => Some(center.len()),
            ConvexSet::Simplex { dim, .. } => Some(*dim),
            ConvexSet::Finite { points } => points.first().map(Vec::len),
        }
    }

    /// Rejects empty or malformed descriptors.
    pub fn validate(&self) -> Result<()> {
        match self {
            ConvexSet::Whole => Ok(()),
            ConvexSet::Box { lower, upper } => {
                if lower.len() != upper.len() {
                    return config("box bounds have different lengths");
                }
                if lower.iter().zip(upper).any(|(l, u)| !(l <= u)) {
                    return config("empty box: some lower bound exceeds its upper bound");
                }
                Ok(())
            }
            ConvexSet::Ball { radius, .. } | ConvexSet::L1Ball { radius, .. } => {
                if !(*radius >= 0.0) || !radius.is_finite() {
                    return config("ball radius must be finite and nonnegative");
                }
                Ok(())
            }
            ConvexSet::Ellipsoid { center, weights, radius } => {
                if center.len() != weights.len() {
                    return config("ellipsoid weights and center differ in length");
                }
                if weights.iter().any(|w| !(*w > 0.0) || !w.is_finite()) {
                    return config("ellipsoid weights must be positive");
                }
                if !(*radius >= 0.0) || !radius.is_finite() {
                    return config("ellipsoid radius must be finite and nonnegative");
                }
                Ok(())
            }
            ConvexSet::Simplex { dim, total } => {
                if *dim == 0 || !(*total >= 0.0) {
                    return config("empty simplex");
                }
                Ok(())
            }
            ConvexSet::Finite { points } => {
                let Some(first) = points.first() else {
                    return config("empty finite parameter list");
                };
                if points.iter().any(|p| p.len() != first.len()) {
                    return config("finite parameter list has mixed dimensions");
                }
                Ok(())
            }
        }
    }

    fn check_dim(&self, x: &[f64]) -> Result<()> {
        match self.dim() {
            Some(d) if d != x.len() => arg(format!("point has dimension {}, set has {d}", x.len())),
            _ => Ok(()),
        }
    }

    pub fn contains(&self, x: &[f64], tol: f64) -> bool {
        if self.check_dim(x).is_err() {
            return false;
        }
        match self {
            ConvexSet::Whole => true,
            ConvexSet::Box { lower, upper } => x
                .iter()
                .zip(lower.iter().zip(upper))
                .all(|(v, (l, u))| *v >= l - tol && *v <= u + tol),
            ConvexSet::Ball { center, radius } => dist(x, center) <= radius + tol,
            ConvexSet::L1Ball { center, radius } => {
                x.iter().zip(center).map(|(a, b)| (a - b).abs()).sum::<f64>() <= radius + tol
            }
            ConvexSet::Ellipsoid { center, weights, radius } => {
                let q: f64 = x
                    .iter()
                    .zip(center)
                    .zip(weights)
                    .map(|((a, c), w)| w * (a - c) * (a - c))
                    .sum();
                q.sqrt() <= radius + tol
            }
            ConvexSet::Simplex { total, .. } => {
                x.iter().all(|v| *v >= -tol) && (x.iter().sum::<f64>() - total).abs() <= tol
            }
            ConvexSet::Finite { points } => points.iter().any(|p| dist(p, x) <= tol),
        }
    }

    /// Euclidean projection (nearest point for finite lists, first on ties).
    pub fn project(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.validate()?;
        self.check_dim(x)?;
        Ok(match self {
            ConvexSet::Whole => x.to_vec(),
            ConvexSet::Box { lower, upper } => x
                .iter()
                .zip(lower.iter().zip(upper))
                .map(|(v, (l, u))| v.clamp(*l, *u))
                .collect(),
            ConvexSet::Ball { center, radius } => {
                let d = dist(x, center);
                if d <= *radius {
                    x.to_vec()
                } else {
                    let t = radius / d;
                    x.iter().zip(center).map(|(v, c)| c + t * (v - c)).collect()
                }
            }
            ConvexSet::L1Ball { center, radius } => {
                let u: Vec<f64> = x.iter().zip(center).map(|(a, b)| a - b).collect();
                let p = project_l1(&u, *radius);
                p.iter().zip(center).map(|(a, b)| a + b).collect()
            }
            ConvexSet::Ellipsoid { center, weights, radius } => {
                let u: Vec<f64> = x.iter().zip(center).map(|(a, b)| a - b).collect();
                let p = project_ellipsoid(&u, weights, *radius);
                p.iter().zip(center).map(|(a, b)| a + b).collect()
            }
            ConvexSet::Simplex { total, .. } => project_simplex(x, *total),
            ConvexSet::Finite { points } => {
                let mut best = &points[0];
                let mut best_d = f64::INFINITY;
                for p in points {
                    let d = dist(p, x);
                    if d < best_d {
                        best_d = d;
                        best = p;
                    }
                }
                best.clone()
            }
        })
    }
}

fn project_l1(u: &[f64], radius: f64) -> Vec<f64> {
    let l1: f64 = u.iter().map(|v| v.abs()).sum();
    if l1 <= radius {
        return u.to_vec();
    }
    if radius == 0.0 {
        return vec![0.0; u.len()];
    }
    let mut a: Vec<f64> = u.iter().map(|v| v.abs()).collect();
    a.sort_by(|x, y| y.total_cmp(x));
    let theta = sorted_threshold(&a, radius);
    u.iter().map(|v| v.signum() * (v.abs() - theta).max(0.0)).collect()
}

fn project_simplex(x: &[f64], total: f64) -> Vec<f64> {
    if total == 0.0 {
        return vec![0.0; x.len()];
    }
    let mut a = x.to_vec();
    a.sort_by(|p, q| q.total_cmp(p));
    let theta = sorted_threshold(&a, total);
    x.iter().map(|v| (v - theta).max(0.0)).collect()
}

/// Threshold θ with Σ max(a_i − θ, 0) = z for `a` sorted descending.
fn sorted_threshold(a: &[f64], z: f64) -> f64 {
    let mut cum = 0.0;
    let mut theta = 0.0;
    for (i, v) in a.iter().enumerate() {
        cum += v;
        let t = (cum - z) / (i + 1) as f64;
        if *v - t > 0.0 {
            theta = t;
        } else {
            break;
        }
    }
    theta
}

fn project_ellipsoid(u: &[f64], w: &[f64], radius: f64) -> Vec<f64> {
    let level = |mu: f64| -> f64 {
        u.iter()
            .zip(w)
            .map(|(x, wk)| {
                let d = 1.0 + mu * wk;
                wk * x * x / (d * d)
            })
            .sum()
    };
    let r2 = radius * radius;
    if level(0.0) <= r2 {
        return u.to_vec();
    }
    if radius == 0.0 {
        return vec![0.0; u.len()];
    }
    // Newton from the left on a convex decreasing function: monotone convergence.
    let mut mu = 0.0_f64;
    for _ in 0..200 {
        let mut h = -r2;
        let mut dh = 0.0;
        for (x, wk) in u.iter().zip(w) {
            let d = 1.0 + mu * wk;
            h += wk * x * x / (d * d);
            dh -= 2.0 * wk * wk * x * x / (d * d * d);
        }
        let step = h / dh;
        let next = mu - step;
        if !(next.is_finite()) || (next - mu).abs() <= 1e-15 * mu.max(1e-300) {
            mu = next.max(mu);
            break;
        }
        mu = next;
    }
    let mut p: Vec<f64> = u.iter().zip(w).map(|(x, wk)| x / (1.0 + mu * wk)).collect();
    // Guard against round-off leaving the point marginally outside.
    let q: f64 = p.iter().zip(w).map(|(x, wk)| wk * x * x).sum::<f64>().sqrt();
    if q > radius {
        let t = radius / q;
        p.iter_mut().for_each(|x| *x *= t);
    }
    p
}
