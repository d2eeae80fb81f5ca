use serde::{Deserialize, Serialize};

use crate::convex::ConvexSet;
use crate::error::{arg, Result};

/// Quadratic seminorm `I(g) = sqrt(Σ w_k g_k²)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "value", rename_all = "kebab-case")]
pub enum Seminorm {
    Euclidean,
    /// `I² = c·‖g‖²`; `Scaled(1/n)` is the empirical norm `‖·‖_n`.
    Scaled(f64),
    Weighted(Vec<f64>),
}

impl Seminorm {
    pub fn empirical(n: usize) -> Self {
        Seminorm::Scaled(1.0 / n as f64)
    }

    pub fn weight(&self, k: usize) -> f64 {
        match self {
            Seminorm::Euclidean => 1.0,
            Seminorm::Scaled(c) => *c,
            Seminorm::Weighted(w) => w.get(k).copied().unwrap_or(0.0),
        }
    }

    pub fn squared(&self, g: &[f64]) -> f64 {
        g.iter().enumerate().map(|(k, x)| self.weight(k) * x * x).sum()
    }

    pub fn value(&self, g: &[f64]) -> f64 {
        self.squared(g).sqrt()
    }

    fn validate(&self) -> Result<()> {
        let ok = match self {
            Seminorm::Euclidean => true,
            Seminorm::Scaled(c) => c.is_finite() && *c >= 0.0,
            Seminorm::Weighted(w) => w.iter().all(|x| x.is_finite() && *x >= 0.0),
        };
        if ok {
            Ok(())
        } else {
            arg("seminorm weights must be finite and nonnegative")
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Penalty {
    Zero,
    Indicator { set: ConvexSet },
    /// `λ² I(g)²`.
    Squared { lambda: f64, seminorm: Seminorm },
    /// `λ² I(g)^q`, `q ∈ (1, 2]`.
    Power { lambda: f64, q: f64, seminorm: Seminorm },
}

/// Slack used when testing indicator membership of solver output.
pub const MEMBERSHIP_TOL: f64 = 1e-9;

impl Penalty {
    pub fn indicator(set: ConvexSet) -> Self {
        Penalty::Indicator { set }
    }

    /// `λ²‖g‖²`.
    pub fn ridge(lambda: f64) -> Self {
        Penalty::Squared { lambda, seminorm: Seminorm::Euclidean }
    }

    /// `λ‖g‖_n²` as used in the normal sequence model.
    pub fn ridge_n(lambda: f64, n: usize) -> Self {
        Penalty::Squared { lambda: lambda.sqrt(), seminorm: Seminorm::empirical(n) }
    }

    pub fn power(lambda: f64, q: f64, seminorm: Seminorm) -> Self {
        Penalty::Power { lambda, q, seminorm }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            Penalty::Zero => Ok(()),
            Penalty::Indicator { set } => set.validate(),
            Penalty::Squared { lambda, seminorm } => {
                if !(lambda.is_finite() && *lambda >= 0.0) {
                    return arg("penalty weight λ must be finite and nonnegative");
                }
                seminorm.validate()
            }
            Penalty::Power { lambda, q, seminorm } => {
                if !(lambda.is_finite() && *lambda >= 0.0) {
                    return arg("penalty weight λ must be finite and nonnegative");
                }
                if !(*q > 1.0 && *q <= 2.0) {
                    return arg(format!("power penalty needs q in (1, 2], got {q}"));
                }
                seminorm.validate()
            }
        }
    }

    /// `pen(g)`; `+∞` outside an indicator's set.
    pub fn value(&self, g: &[f64]) -> f64 {
        match self {
            Penalty::Zero => 0.0,
            Penalty::Indicator { set } => {
                if set.contains(g, MEMBERSHIP_TOL) {
                    0.0
                } else {
                    f64::INFINITY
                }
            }
            Penalty::Squared { lambda, seminorm } => lambda * lambda * seminorm.squared(g),
            Penalty::Power { lambda, q, seminorm } => lambda * lambda * seminorm.value(g).powf(*q),
        }
    }

    /// Whether `sqrt(pen)` is convex, the hypothesis of the concavity result.
    pub fn sqrt_is_convex(&self) -> bool {
        match self {
            Penalty::Zero | Penalty::Indicator { .. } | Penalty::Squared { .. } => true,
            Penalty::Power { q, .. } => *q == 2.0,
        }
    }

    pub fn is_zero(&self) -> bool {
        match self {
            Penalty::Zero => true,
            Penalty::Indicator { set } => matches!(set, ConvexSet::Whole),
            Penalty::Squared { lambda, .. } | Penalty::Power { lambda, .. } => *lambda == 0.0,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn values() {
        let p = Penalty::ridge(0.5);
        assert_eq!(p.value(&[2.0, 0.0]), 1.0);
        let p = Penalty::ridge_n(1.0, 2);
        assert_eq!(p.value(&[2.0, 4.0]), 10.0);
        let p = Penalty::indicator(ConvexSet::unit_box(2));
        assert_eq!(p.value(&[0.5, 0.5]), 0.0);
        assert_eq!(p.value(&[1.5, 0.5]), f64::INFINITY);
        let p = Penalty::power(1.0, 1.5, Seminorm::Euclidean);
        assert!((p.value(&[0.0, 4.0]) - 8.0).abs() < 1e-14);
        assert!(Penalty::power(1.0, 2.5, Seminorm::Euclidean).validate().is_err());
    }
}
