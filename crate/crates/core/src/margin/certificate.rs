use serde::{Deserialize, Serialize};

use super::function::MarginFunction;
use crate::curve::RiskCurve;
use crate::error::{arg, Result};

/// Where the margin inequality is required: `[lower, s₀)` (unless
/// `right_only`) and `(s₀ + δ̲, upper]`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MarginRange {
    pub lower: f64,
    pub upper: f64,
    pub right_only: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MarginViolation {
    pub s: f64,
    /// `[s² − E(s)] − [s₀² − E(s₀)]`.
    pub lhs: f64,
    /// `G(|s − s₀|)`.
    pub rhs: f64,
    pub se: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MarginCertificate {
    pub range: MarginRange,
    pub s0: f64,
    pub delta_lower: f64,
    pub margin: MarginFunction,
    pub passed: bool,
    pub checked: usize,
    /// Smallest `lhs − rhs` over the checked points.
    pub min_slack: f64,
    pub counterexample: Option<MarginViolation>,
}

/// Verifies `[s² − E(s)] − [s₀² − E(s₀)] ≥ G(|s − s₀|)` at grid points of the
/// range. A point fails only if the deficit exceeds `tol` plus three paired
/// standard errors of the curve difference.
pub fn check_margin(
    curve: &RiskCurve,
    s0: f64,
    margin: &MarginFunction,
    delta_lower: f64,
    range: MarginRange,
    tol: f64,
) -> Result<MarginCertificate> {
    margin.validate()?;
    if !(delta_lower >= 0.0) || !(range.lower <= range.upper) {
        return arg("margin range must be ordered and δ̲ nonnegative");
    }
    let pts = curve.points();
    let i0 = pts
        .iter()
        .enumerate()
        .min_by(|a, b| (a.1 - s0).abs().total_cmp(&(b.1 - s0).abs()))
        .map(|(i, _)| i)
        .expect("nonempty grid");
    if (pts[i0] - s0).abs() > 1e-12 * s0.abs().max(1.0) {
        return arg(format!("s₀ = {s0} is not a grid point of the curve"));
    }
    let base = s0 * s0 - curve.values[i0];
    let mut checked = 0;
    let mut min_slack = f64::INFINITY;
    let mut worst: Option<(f64, MarginViolation)> = None;
    for (i, s) in pts.iter().enumerate() {
        let left = !range.right_only && *s >= range.lower && *s < s0;
        let right = *s > s0 + delta_lower && *s <= range.upper;
        if !(left || right) {
            continue;
        }
        checked += 1;
        let lhs = s * s - curve.values[i] - base;
        let rhs = margin.eval(s - s0);
        let se = curve.paired_se(i, i0);
        min_slack = min_slack.min(lhs - rhs);
        let excess = rhs - lhs - tol - 3.0 * se;
        if excess > 0.0 && worst.as_ref().is_none_or(|(e, _)| excess > *e) {
            worst = Some((excess, MarginViolation { s: *s, lhs, rhs, se }));
        }
    }
    Ok(MarginCertificate {
        range,
        s0,
        delta_lower,
        margin: margin.clone(),
        passed: worst.is_none(),
        checked,
        min_slack,
        counterexample: worst.map(|(_, v)| v),
    })
}

/// `c = √(2q⁻¹(q − 1)(M + 1)^{−2(2−q)/q})`.
pub fn quadratic_margin_constant(q: f64, m: f64) -> Result<f64> {
    if !(q > 1.0 && q <= 2.0) {
        return arg(format!("q = {q} must lie in (1, 2]"));
    }
    if !(m > 0.0) {
        return arg("M must be positive");
    }
    Ok((2.0 / q * (q - 1.0) * (m + 1.0).powf(-2.0 * (2.0 - q) / q)).sqrt())
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ApproxConcaveGap {
    pub delta_lower: f64,
    /// `√ε(1 + ε) < 1/2`.
    pub admissible: bool,
}

/// `δ̲ = 2[√ε(2√ε M + 1)]^{1/2} s₀`.
pub fn approx_concave_gap(eps: f64, m: f64, s0: f64) -> Result<ApproxConcaveGap> {
    if !(eps >= 0.0 && m >= 0.0 && s0 >= 0.0) {
        return arg("ε, M and s₀ must be nonnegative");
    }
    let r = eps.sqrt();
    Ok(ApproxConcaveGap { delta_lower: 2.0 * (r * (2.0 * r * m + 1.0)).sqrt() * s0, admissible: r * (1.0 + eps) < 0.5 })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::curve::{CurveKind, SGrid};

    fn curve(f: impl Fn(f64) -> f64) -> RiskCurve {
        let g = SGrid::uniform(0.0, 2.0, 0.01).unwrap();
        let v = g.points().iter().map(|s| f(*s)).collect();
        RiskCurve::from_values(g, v, CurveKind::PopulationMean).unwrap()
    }

    #[test]
    fn linear_curve_passes() {
        let c = curve(|s| s);
        let g = MarginFunction::quadratic(0.5f64.sqrt()).unwrap();
        let r = MarginRange { lower: 0.0, upper: 2.0, right_only: false };
        let cert = check_margin(&c, 0.5, &g, 0.0, r, 1e-12).unwrap();
        assert!(cert.passed && cert.checked > 100);
    }

    #[test]
    fn convex_curve_fails() {
        let c = curve(|s| s * s);
        let g = MarginFunction::quadratic(0.5f64.sqrt()).unwrap();
        let r = MarginRange { lower: 0.0, upper: 2.0, right_only: false };
        let cert = check_margin(&c, 0.5, &g, 0.0, r, 1e-12).unwrap();
        assert!(!cert.passed && cert.counterexample.is_some());
    }

    #[test]
    fn constants() {
        for m in [0.1, 1.0, 10.0] {
            assert_eq!(quadratic_margin_constant(2.0, m).unwrap(), 1.0);
        }
        assert!(quadratic_margin_constant(1.0, 1.0).is_err());
        let g = approx_concave_gap(0.04, 1.0, 1.0).unwrap();
        assert!((g.delta_lower - 2.0 * 0.28f64.sqrt()).abs() < 1e-12 && g.admissible);
        assert!(!approx_concave_gap(0.25, 1.0, 1.0).unwrap().admissible);
        assert_eq!(approx_concave_gap(0.0, 1.0, 1.0).unwrap().delta_lower, 0.0);
    }
}
