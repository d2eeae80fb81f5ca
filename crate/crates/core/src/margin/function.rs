use serde::{Deserialize, Serialize};

use crate::error::{arg, Error, Result};
use crate::numeric::golden_min;

/// Numeric convex conjugate value.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Conjugate {
    pub value: f64,
    pub argmax: f64,
    /// The supremum sits at an end of the search interval.
    pub boundary: bool,
}

pub const CONJUGATE_TOL: f64 = 1e-10;

/// `sup {v·u − f(u) : u ∈ [lo, hi]}` by golden section.
pub fn fenchel_conjugate(f: &dyn Fn(f64) -> f64, v: f64, lo: f64, hi: f64) -> Result<Conjugate> {
    if !(v > 0.0 && v.is_finite()) {
        return arg("conjugate argument must be positive");
    }
    if !(lo < hi && lo.is_finite() && hi.is_finite()) {
        return arg("search interval must be a finite nonempty interval");
    }
    let u = golden_min(&|u| f(u) - v * u, lo, hi, CONJUGATE_TOL);
    let width = hi - lo;
    let boundary = u - lo <= 1e-8 * width || hi - u <= 1e-8 * width;
    Ok(Conjugate { value: v * u - f(u), argmax: u, boundary })
}

/// Margin function `G` with `G(0) = 0`, strictly increasing and convex.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum MarginFunction {
    /// `G(u) = u²/(2c²)`.
    Quadratic { c: f64 },
    /// Piecewise linear through `(u_k, g_k)`, `u_0 = g_0 = 0`, extended
    /// linearly past the last knot.
    Tabulated { u: Vec<f64>, g: Vec<f64> },
}

impl MarginFunction {
    pub fn quadratic(c: f64) -> Result<Self> {
        let m = MarginFunction::Quadratic { c };
        m.validate()?;
        Ok(m)
    }

    pub fn tabulated(u: Vec<f64>, g: Vec<f64>) -> Result<Self> {
        let m = MarginFunction::Tabulated { u, g };
        m.validate()?;
        Ok(m)
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            MarginFunction::Quadratic { c } => {
                if !(*c > 0.0 && c.is_finite()) {
                    return arg("quadratic margin constant must be positive");
                }
            }
            MarginFunction::Tabulated { u, g } => {
                if u.len() < 2 || u.len() != g.len() || u[0] != 0.0 || g[0] != 0.0 {
                    return arg("tabulated margin needs matching knots starting at (0, 0)");
                }
                if u.windows(2).any(|w| !(w[0] < w[1])) || g.windows(2).any(|w| !(w[0] < w[1])) {
                    return arg("tabulated margin must be strictly increasing");
                }
                let slopes = Self::slopes(u, g);
                if slopes.windows(2).any(|w| !(w[0] < w[1])) {
                    return arg("tabulated margin must be strictly convex");
                }
            }
        }
        Ok(())
    }

    fn slopes(u: &[f64], g: &[f64]) -> Vec<f64> {
        u.windows(2).zip(g.windows(2)).map(|(a, b)| (b[1] - b[0]) / (a[1] - a[0])).collect()
    }

    pub fn eval(&self, x: f64) -> f64 {
        let x = x.abs();
        match self {
            MarginFunction::Quadratic { c } => x * x / (2.0 * c * c),
            MarginFunction::Tabulated { u, g } => {
                let k = u.partition_point(|p| *p <= x).clamp(1, u.len() - 1);
                g[k - 1] + (g[k] - g[k - 1]) / (u[k] - u[k - 1]) * (x - u[k - 1])
            }
        }
    }

    /// `G*(v)`; infinite when `v` exceeds the final slope of a table.
    pub fn conjugate(&self, v: f64) -> f64 {
        match self {
            MarginFunction::Quadratic { c } => c * c * v * v / 2.0,
            MarginFunction::Tabulated { u, g } => {
                let last = *Self::slopes(u, g).last().expect("two knots");
                if v > last {
                    return f64::INFINITY;
                }
                u.iter().zip(g).map(|(a, b)| v * a - b).fold(0.0, f64::max)
            }
        }
    }

    /// `G⁻¹(y)` by bisection to `1e−10`.
    pub fn inverse(&self, y: f64) -> f64 {
        if y <= 0.0 {
            return 0.0;
        }
        let mut hi = 1.0;
        while self.eval(hi) < y {
            hi *= 2.0;
        }
        crate::numeric::bisect_threshold(&|x| self.eval(x) >= y, 0.0, hi, 1e-10 * hi.max(1.0))
    }
}

/// Complexity majorant `J` with `J(τ_min) = 0`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum JDescriptor {
    /// `J(s) = A·s^p`.
    Power { a: f64, p: f64 },
    /// Piecewise linear through `(s_k, j_k)` with `j_0 = 0`.
    Tabulated { s: Vec<f64>, j: Vec<f64> },
}

impl JDescriptor {
    pub fn linear(a: f64) -> Self {
        JDescriptor::Power { a, p: 1.0 }
    }

    fn validate(&self) -> Result<()> {
        match self {
            JDescriptor::Power { a, p } => {
                if !(*a > 0.0 && *p > 0.0 && a.is_finite() && p.is_finite()) {
                    return arg("J = A·s^p needs A > 0 and p > 0");
                }
            }
            JDescriptor::Tabulated { s, j } => {
                if s.len() < 2 || s.len() != j.len() || j[0] != 0.0 {
                    return arg("tabulated J needs matching knots with J = 0 at the first");
                }
                if s.windows(2).any(|w| !(w[0] < w[1])) || j.windows(2).any(|w| !(w[0] < w[1])) {
                    return arg("tabulated J must be strictly increasing");
                }
            }
        }
        Ok(())
    }

    pub fn eval(&self, s: f64) -> f64 {
        match self {
            JDescriptor::Power { a, p } => a * s.max(0.0).powf(*p),
            JDescriptor::Tabulated { s: xs, j } => interpolate(xs, j, s),
        }
    }

    pub fn inverse(&self, u: f64) -> f64 {
        match self {
            JDescriptor::Power { a, p } => (u.max(0.0) / a).powf(1.0 / p),
            JDescriptor::Tabulated { s, j } => interpolate(j, s, u),
        }
    }

    /// `Φ_J(u) = [J⁻¹(u)]²`.
    pub fn phi(&self, u: f64) -> f64 {
        self.inverse(u).powi(2)
    }

    /// `Φ*_J(v)`; closed form for power laws.
    pub fn phi_conjugate(&self, v: f64) -> Result<f64> {
        match self {
            JDescriptor::Power { a, p } => {
                let beta = 2.0 / p;
                if beta <= 1.0 {
                    return Err(Error::ConditionViolation("Φ_J is not strictly convex".into()));
                }
                // Stationarity v = β u^{β−1} / A^β.
                let u = (v * a.powf(beta) / beta).powf(1.0 / (beta - 1.0));
                Ok(v * u - (u / a).powf(beta))
            }
            JDescriptor::Tabulated { .. } => {
                let mut hi = 1.0;
                loop {
                    let c = fenchel_conjugate(&|u| self.phi(u), v, 0.0, hi)?;
                    if !c.boundary || c.argmax <= 0.5 * hi {
                        return Ok(c.value);
                    }
                    if hi > 1e12 {
                        return Err(Error::Numerical("Φ*_J search interval diverged".into()));
                    }
                    hi *= 4.0;
                }
            }
        }
    }

    /// Grid test of strict convexity of `Φ_J` on `(0, upper]`.
    pub fn phi_strictly_convex(&self, upper: f64) -> bool {
        let m = 200;
        let h = upper / m as f64;
        let vals: Vec<f64> = (0..=m).map(|k| self.phi(k as f64 * h)).collect();
        let scale = vals.iter().fold(0.0f64, |a, b| a.max(b.abs())).max(1e-300);
        vals.windows(3).all(|w| w[0] - 2.0 * w[1] + w[2] > 1e-12 * scale)
    }
}

fn interpolate(xs: &[f64], ys: &[f64], x: f64) -> f64 {
    let k = xs.partition_point(|p| *p <= x).clamp(1, xs.len() - 1);
    ys[k - 1] + (ys[k] - ys[k - 1]) / (xs[k] - xs[k - 1]) * (x - xs[k - 1])
}

/// `Φ_J` together with `r₀`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PhiR0 {
    pub j: JDescriptor,
    pub r0_sq: f64,
    pub r0: f64,
}

impl PhiR0 {
    pub fn phi(&self, u: f64) -> f64 {
        self.j.phi(u)
    }
}

/// `r₀² = 2C²·Φ*_J(4K/(m_n C²))`.
pub fn phi_and_r0(j: &JDescriptor, m_n: f64, k: f64, c: f64) -> Result<PhiR0> {
    j.validate()?;
    if !(m_n > 0.0 && k > 0.0 && c > 0.0) {
        return arg("m_n, K and C must be positive");
    }
    let upper = match j {
        JDescriptor::Power { .. } => 10.0,
        JDescriptor::Tabulated { j: js, .. } => *js.last().expect("two knots"),
    };
    if !j.phi_strictly_convex(upper) {
        return Err(Error::ConditionViolation("Φ_J is not strictly convex".into()));
    }
    let v = 4.0 * k / (m_n * c * c);
    let r0_sq = 2.0 * c * c * j.phi_conjugate(v)?;
    Ok(PhiR0 { j: j.clone(), r0_sq, r0: r0_sq.sqrt() })
}
