use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::error::{arg, Result};
use crate::stats::ols;

/// Relative tolerance on a fitted exponent.
pub const RATE_TOLERANCE: f64 = 0.15;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RatePoint {
    pub n: usize,
    pub estimate: f64,
    pub se: f64,
}

/// Log-log slope of an estimate against `n`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RateReport {
    pub points: Vec<RatePoint>,
    pub slope: f64,
    pub intercept: f64,
    pub jackknife_se: f64,
    /// 95% interval from the jackknife SE and a Student t quantile.
    pub ci: (f64, f64),
    pub target: Option<f64>,
    /// `|slope − target| ≤ 15% |target|`.
    pub within_tolerance: Option<bool>,
}

/// Least-squares slope of `log estimate` on `log n` with a leave-one-out
/// jackknife interval. Needs ≥ 4 sizes spanning ≥ 1.5 decades.
pub fn rate_fit(points: &[RatePoint], target: Option<f64>) -> Result<RateReport> {
    let m = points.len();
    if m < 4 {
        return arg(format!("a rate fit needs at least 4 sample sizes, got {m}"));
    }
    if points.iter().any(|p| p.n == 0 || !(p.estimate > 0.0 && p.estimate.is_finite())) {
        return arg("rate fit needs positive sizes and estimates");
    }
    let lo = points.iter().map(|p| p.n).min().unwrap_or(1) as f64;
    let hi = points.iter().map(|p| p.n).max().unwrap_or(1) as f64;
    if (hi / lo).log10() < 1.5 - 1e-12 {
        return arg(format!("sample sizes span {:.2} decades; at least 1.5 are needed", (hi / lo).log10()));
    }
    let x: Vec<f64> = points.iter().map(|p| (p.n as f64).ln()).collect();
    let y: Vec<f64> = points.iter().map(|p| p.estimate.ln()).collect();
    let (intercept, slope) = ols(&x, &y);
    let loo: Vec<f64> = (0..m)
        .map(|i| {
            let xs: Vec<f64> = x.iter().enumerate().filter(|(j, _)| *j != i).map(|(_, v)| *v).collect();
            let ys: Vec<f64> = y.iter().enumerate().filter(|(j, _)| *j != i).map(|(_, v)| *v).collect();
            ols(&xs, &ys).1
        })
        .collect();
    let mean = loo.iter().sum::<f64>() / m as f64;
    let jackknife_se = ((m as f64 - 1.0) / m as f64 * loo.iter().map(|b| (b - mean).powi(2)).sum::<f64>()).sqrt();
    let tq = StudentsT::new(0.0, 1.0, (m - 1) as f64)
        .map(|t| t.inverse_cdf(0.975))
        .unwrap_or(1.96);
    let within_tolerance = target.map(|t| (slope - t).abs() <= RATE_TOLERANCE * t.abs());
    Ok(RateReport {
        points: points.to_vec(),
        slope,
        intercept,
        jackknife_se,
        ci: (slope - tq * jackknife_se, slope + tq * jackknife_se),
        target,
        within_tolerance,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pts(ns: &[usize], f: impl Fn(f64) -> f64) -> Vec<RatePoint> {
        ns.iter().map(|n| RatePoint { n: *n, estimate: f(*n as f64), se: 0.0 }).collect()
    }

    #[test]
    fn exact_power_law() {
        let r = rate_fit(&pts(&[250, 500, 1000, 2000, 4000, 8000], |n| n.powf(-0.25)), Some(-0.25)).unwrap();
        assert!((r.slope + 0.25).abs() < 1e-12);
        assert!(r.jackknife_se < 1e-12);
        assert_eq!(r.within_tolerance, Some(true));
    }

    #[test]
    fn insufficient_inputs() {
        assert!(rate_fit(&pts(&[100, 1000, 10_000], |n| 1.0 / n), None).is_err());
        assert!(rate_fit(&pts(&[100, 200, 400, 800], |n| 1.0 / n), None).is_err());
    }
}
