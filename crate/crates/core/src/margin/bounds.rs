use serde::{Deserialize, Serialize};

use super::function::MarginFunction;
use crate::error::{arg, Error, Result};

/// Default `c₀ = 4(C + 1) + 2(K + 1)`.
pub fn default_c0(c: f64, k: f64) -> f64 {
    4.0 * (c + 1.0) + 2.0 * (k + 1.0)
}

/// Inputs of the deviation bound `δ(t)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DeltaInputs {
    pub t: f64,
    pub n: usize,
    pub tau_max: f64,
    pub s0: f64,
    pub r0: f64,
    pub c: f64,
    pub k: f64,
    /// Overrides the default `c₀`.
    pub c0: Option<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DeltaBound {
    pub delta: f64,
    /// `G*(c₀√(u/n)) + c₀((s₀ + r₀)√(u/n) + u/n)`.
    pub rhs: f64,
    pub u: f64,
    pub c0: f64,
}

fn delta_core(t: f64, n: usize, tau_max_sq: f64, s: f64, r: f64, c0: f64, g: &MarginFunction) -> Result<DeltaBound> {
    if !(t >= 0.0 && n >= 1 && tau_max_sq >= 0.0 && s >= 0.0 && r >= 0.0 && c0 > 0.0) {
        return arg("δ(t) needs t, τ_max, s, r ≥ 0, n ≥ 1 and c₀ > 0");
    }
    g.validate()?;
    let nf = n as f64;
    let u = t + (1.0 + (nf * tau_max_sq).sqrt()).ln();
    let root = (u / nf).sqrt();
    let rhs = g.conjugate(c0 * root) + c0 * ((s + r) * root + u / nf);
    if !rhs.is_finite() {
        return Err(Error::ConditionViolation("G* is infinite at the required argument".into()));
    }
    Ok(DeltaBound { delta: g.inverse(rhs), rhs, u, c0 })
}

/// Smallest `δ` with `G(δ) ≥ G*(c₀√(u/n)) + c₀((s₀ + r₀)√(u/n) + u/n)`,
/// `u = t + log(1 + √(nτ_max²))`.
pub fn delta_bound(inp: &DeltaInputs, g: &MarginFunction) -> Result<DeltaBound> {
    let c0 = inp.c0.unwrap_or_else(|| default_c0(inp.c, inp.k));
    delta_core(inp.t, inp.n, inp.tau_max * inp.tau_max, inp.s0, inp.r0, c0, g)
}

/// Shifted variant: `τ_max² → τ_max² − τ*²`, `s₀ → s_*`, `r₀ → r_*` and the
/// curvature constant `C → ΓC` in the default `c₀`.
pub fn delta_bound_shifted(inp: &DeltaInputs, tau_star: f64, gamma: f64, g: &MarginFunction) -> Result<DeltaBound> {
    if !gamma.is_finite() || !(gamma > 0.0) {
        return Err(Error::ConditionViolation(format!("oracle potential Γ = {gamma} is not finite and positive")));
    }
    if !(tau_star >= 0.0 && tau_star <= inp.tau_max) {
        return arg("τ* must lie in [0, τ_max]");
    }
    let c0 = inp.c0.unwrap_or_else(|| default_c0(gamma * inp.c, inp.k));
    let tm2 = inp.tau_max * inp.tau_max - tau_star * tau_star;
    delta_core(inp.t, inp.n, tm2, inp.s0, inp.r0, c0, g)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub lower: f64,
    pub upper: f64,
}

impl Interval {
    pub fn contains(&self, x: f64) -> bool {
        self.lower <= x && x <= self.upper
    }

    pub fn width(&self) -> f64 {
        self.upper - self.lower
    }
}

fn check_nonneg(vals: &[f64], n: usize) -> Result<()> {
    if vals.iter().any(|v| !(*v >= 0.0 && v.is_finite())) || n == 0 {
        return arg("interval inputs must be finite and nonnegative with n ≥ 1");
    }
    Ok(())
}

/// Two-sided deviation interval for bounded classes.
pub fn klein_rio_interval(k: f64, sigma_sq: f64, e_s: f64, t: f64, n: usize) -> Result<Interval> {
    check_nonneg(&[k, sigma_sq, e_s, t], n)?;
    let nf = n as f64;
    let dev = (8.0 * k * e_s + 2.0 * sigma_sq).sqrt() * (t / nf).sqrt();
    Ok(Interval { lower: e_s - dev - k * t / nf, upper: e_s + dev + 2.0 * k * t / (3.0 * nf) })
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CurvatureVariant {
    /// Lower bound with `+r₀√(t/n)` as printed.
    #[default]
    Display,
    /// Lower bound with `−r₀√(t/n)`, which follows from the chain.
    Coherent,
}

/// Interval with `√(8KE + 2σ²)` replaced by `2Cs + r₀`. Requires the chain
/// `8K·E_s ≤ 2C²s² + r₀²`.
#[allow(clippy::too_many_arguments)]
pub fn curvature_interval(
    c: f64,
    s: f64,
    r0: f64,
    k: f64,
    e_s: f64,
    t: f64,
    n: usize,
    variant: CurvatureVariant,
) -> Result<Interval> {
    check_nonneg(&[c, s, r0, k, e_s, t], n)?;
    let lhs = 8.0 * k * e_s;
    let rhs = 2.0 * c * c * s * s + r0 * r0;
    if lhs > rhs * (1.0 + 1e-12) {
        return Err(Error::ConditionViolation(format!("8K·E(s) = {lhs} exceeds 2C²s² + r₀² = {rhs}")));
    }
    let nf = n as f64;
    let root = (t / nf).sqrt();
    let r_term = match variant {
        CurvatureVariant::Display => r0 * root,
        CurvatureVariant::Coherent => -r0 * root,
    };
    Ok(Interval {
        lower: e_s - 2.0 * c * s * root + r_term - k * t / nf,
        upper: e_s + (2.0 * c * s + r0) * root + 2.0 * k * t / (3.0 * nf),
    })
}

/// Interval for classes with a sub-Gaussian envelope, truncated at
/// `t₀ = C_F√(log n)`. The upper bound uses additive deviation terms unless
/// `verbatim` is set, in which case the printed signs are used.
#[allow(clippy::too_many_arguments)]
pub fn envelope_interval(
    c_f: f64,
    cap_f: f64,
    sigma_sq: f64,
    e_s: f64,
    t: f64,
    n: usize,
    verbatim: bool,
) -> Result<Interval> {
    if !(c_f >= 1.0 && cap_f >= 1.0) {
        return arg("envelope constants must be at least 1");
    }
    check_nonneg(&[sigma_sq, e_s, t], n)?;
    if n < 3 {
        return arg("envelope interval needs n ≥ 3");
    }
    let nf = n as f64;
    let ln = nf.ln().sqrt();
    let root = (t / nf).sqrt();
    let dev_lo = (8.0 * cap_f * ln * (e_s + 2.0 * c_f * (c_f + t) / nf) + 2.0 * sigma_sq).sqrt() * root;
    let dev_hi = (8.0 * cap_f * ln * (e_s + 2.0 * c_f * c_f / nf) + 2.0 * sigma_sq).sqrt() * root;
    let bias = c_f * (4.0 * c_f + t) / nf;
    let lower = e_s - dev_lo - cap_f * t * ln / nf - bias;
    let upper = if verbatim {
        e_s - dev_hi - 2.0 * cap_f * t * ln / (3.0 * nf) - bias
    } else {
        e_s + dev_hi + 2.0 * cap_f * t * ln / (3.0 * nf) + bias
    };
    Ok(Interval { lower, upper })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct HelperCheck {
    /// `G(a) ≥ G*(2b) + 2c`.
    pub hypothesis: bool,
    /// `G(a) − ab − c ≥ 0`.
    pub conclusion: bool,
}

pub fn margin_helper_check(g: &MarginFunction, a: f64, b: f64, c: f64) -> Result<HelperCheck> {
    if !(a > 0.0 && b > 0.0 && c > 0.0) {
        return arg("a, b, c must be positive");
    }
    let ga = g.eval(a);
    Ok(HelperCheck { hypothesis: ga >= g.conjugate(2.0 * b) + 2.0 * c, conclusion: ga - a * b - c >= -1e-12 * ga.max(1.0) })
}
