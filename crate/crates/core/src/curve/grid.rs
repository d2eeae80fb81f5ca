use serde::{Deserialize, Serialize};

use crate::error::{arg, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum GridRule {
    Geometric { ratio: f64 },
    Uniform { step: f64 },
    Explicit,
}

/// Strictly increasing grid of `s` values.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SGrid {
    points: Vec<f64>,
    rule: GridRule,
}

pub const DEFAULT_RATIO: f64 = 1.05;

impl SGrid {
    pub fn geometric(start: f64, end: f64, ratio: f64) -> Result<Self> {
        if !(start > 0.0 && start <= end && end.is_finite()) {
            return arg("geometric grid needs 0 < start ≤ end");
        }
        if !(ratio > 1.0) {
            return arg("geometric ratio must exceed 1");
        }
        let mut points = vec![start];
        let mut k = 1;
        loop {
            let s = start * ratio.powi(k);
            if s >= end * (1.0 - 1e-12) {
                break;
            }
            points.push(s);
            k += 1;
        }
        if end > start {
            points.push(end);
        }
        Ok(SGrid { points, rule: GridRule::Geometric { ratio } })
    }

    pub fn uniform(start: f64, end: f64, step: f64) -> Result<Self> {
        if !(start >= 0.0 && start <= end && end.is_finite()) {
            return arg("uniform grid needs 0 ≤ start ≤ end");
        }
        if !(step > 0.0) {
            return arg("uniform step must be positive");
        }
        let count = ((end - start) / step + 1e-9).floor() as usize;
        let points = (0..=count).map(|k| start + k as f64 * step).collect();
        Ok(SGrid { points, rule: GridRule::Uniform { step } })
    }

    pub fn from_points(points: Vec<f64>) -> Result<Self> {
        if points.is_empty() || points.iter().any(|p| !(p.is_finite() && *p >= 0.0)) {
            return arg("grid points must be finite, nonnegative and nonempty");
        }
        if points.windows(2).any(|w| !(w[0] < w[1])) {
            return arg("grid points must be strictly increasing");
        }
        Ok(SGrid { points, rule: GridRule::Explicit })
    }

    /// Default exploratory grid from `max(τ_min, 1e−3)` to `τ_max`.
    pub fn default_for(tau_min: f64, tau_max: f64) -> Result<Self> {
        SGrid::geometric(tau_min.max(1e-3), tau_max, DEFAULT_RATIO)
    }

    pub fn check_tau_min(&self, tau_min: f64) -> Result<()> {
        if self.points[0] < tau_min - 1e-12 {
            return arg(format!("grid starts at {} below τ_min = {tau_min}", self.points[0]));
        }
        Ok(())
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn rule(&self) -> &GridRule {
        &self.rule
    }

    pub fn start(&self) -> f64 {
        self.points[0]
    }

    pub fn end(&self) -> f64 {
        *self.points.last().expect("nonempty grid")
    }

    /// Largest gap between consecutive points.
    pub fn max_step(&self) -> f64 {
        self.points.windows(2).map(|w| w[1] - w[0]).fold(0.0, f64::max)
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Result<SGrid> {
        SGrid::from_points(self.points.iter().map(|s| f(*s)).collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constructors() {
        let g = SGrid::uniform(0.0, 1.0, 0.25).unwrap();
        assert_eq!(g.points(), &[0.0, 0.25, 0.5, 0.75, 1.0]);
        let g = SGrid::geometric(0.1, 1.0, 2.0).unwrap();
        assert_eq!(g.points(), &[0.1, 0.2, 0.4, 0.8, 1.0]);
        assert!(SGrid::from_points(vec![0.1, 0.1]).is_err());
        assert!(g.check_tau_min(0.2).is_err());
        assert!(g.check_tau_min(0.1).is_ok());
    }
}
