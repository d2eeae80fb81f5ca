use serde::{Deserialize, Serialize};

use super::family::{log_partition, ExpFamily};
use crate::error::{arg, Result};
use crate::stats::ols;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TaylorRow {
    pub t: f64,
    /// `d(tg) / (t²Pg²)`.
    pub ratio: f64,
    /// `|ratio − 1/2| / t`.
    pub kappa: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TaylorTable {
    pub pg2: f64,
    pub rows: Vec<TaylorRow>,
    pub kappa_min: f64,
    pub kappa_max: f64,
    /// `kappa_max ≤ 2·kappa_min`.
    pub stable: bool,
}

/// Ratios `d(tg)/(t²Pg²)` and the implied first-order constants.
pub fn taylor_ratio(family: &ExpFamily, theta: &[f64], t_grid: &[f64]) -> Result<TaylorTable> {
    let pg2 = family.second_moment(theta)?;
    if !(pg2 > 0.0) {
        return arg("Pg² must be positive");
    }
    if t_grid.is_empty() || t_grid.iter().any(|t| !(*t > 0.0 && *t <= 1.0)) {
        return arg("t values must lie in (0, 1]");
    }
    let mut rows = Vec::with_capacity(t_grid.len());
    for t in t_grid {
        let scaled: Vec<f64> = theta.iter().map(|a| a * t).collect();
        let ratio = log_partition(family, &scaled)? / (t * t * pg2);
        rows.push(TaylorRow { t: *t, ratio, kappa: (ratio - 0.5).abs() / t });
    }
    let kappa_min = rows.iter().map(|r| r.kappa).fold(f64::INFINITY, f64::min);
    let kappa_max = rows.iter().map(|r| r.kappa).fold(0.0, f64::max);
    Ok(TaylorTable { pg2, rows, kappa_min, kappa_max, stable: kappa_max <= 2.0 * kappa_min })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExpansionRow {
    pub eta: f64,
    /// `d(g)/(Pg²/2)` with `g` scaled to `‖g‖_∞ = η`.
    pub ratio: f64,
    pub error: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExpansionTable {
    pub rows: Vec<ExpansionRow>,
    /// Least-squares slope of `log |ratio − 1|` against `log η`.
    pub slope: f64,
}

pub fn small_norm_expansion(family: &ExpFamily, theta: &[f64], eta_grid: &[f64]) -> Result<ExpansionTable> {
    let sup = family.sup_norm(theta)?;
    if !(sup > 0.0) {
        return arg("g must be nonzero");
    }
    if eta_grid.is_empty() || eta_grid.iter().any(|e| !(*e > 0.0)) {
        return arg("η values must be positive");
    }
    let mut rows = Vec::with_capacity(eta_grid.len());
    for eta in eta_grid {
        let scaled: Vec<f64> = theta.iter().map(|a| a * eta / sup).collect();
        let ratio = log_partition(family, &scaled)? / (0.5 * family.second_moment(&scaled)?);
        rows.push(ExpansionRow { eta: *eta, ratio, error: (ratio - 1.0).abs() });
    }
    let usable: Vec<&ExpansionRow> = rows.iter().filter(|r| r.error > 0.0).collect();
    let slope = if usable.len() >= 2 {
        let x: Vec<f64> = usable.iter().map(|r| r.eta.ln()).collect();
        let y: Vec<f64> = usable.iter().map(|r| r.error.ln()).collect();
        ols(&x, &y).1
    } else {
        f64::NAN
    };
    Ok(ExpansionTable { rows, slope })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_point_values() {
        let f = ExpFamily::two_point(0.5, false).unwrap();
        let t = taylor_ratio(&f, &[1.0], &[0.01, 0.1]).unwrap();
        let series = |t: f64| 0.5 - t * t / 12.0 + t.powi(4) / 45.0 - 17.0 * t.powi(6) / 2520.0;
        assert!((t.rows[0].ratio - series(0.01)).abs() < 1e-12);
        assert!((t.rows[0].ratio - 0.499_991_7).abs() < 1e-6);
        assert!((t.rows[1].ratio - series(0.1)).abs() < 1e-9);
        assert!((t.rows[1].ratio - 0.499_167).abs() < 5e-6);
        let e = small_norm_expansion(&f, &[1.0], &[0.01]).unwrap();
        assert!((e.rows[0].ratio - 0.999_983).abs() < 1e-6);
        let e2 = small_norm_expansion(&f, &[-1.0], &[0.01]).unwrap();
        assert_eq!(e.rows[0].ratio, e2.rows[0].ratio);
        assert!(taylor_ratio(&f, &[0.0], &[0.1]).is_err());
    }
}
