//! Proximal operators `argmin_u ‖u − v‖²/(2η) + pen(u)`.

use crate::convex::ConvexSet;
use crate::error::{arg, Error, Result};
use crate::model::{Penalty, Seminorm};

pub fn prox(pen: &Penalty, v: &[f64], eta: f64) -> Result<Vec<f64>> {
    if !(eta > 0.0) || !eta.is_finite() {
        return arg(format!("prox step must be positive, got {eta}"));
    }
    pen.validate()?;
    Ok(match pen {
        Penalty::Zero => v.to_vec(),
        Penalty::Indicator { set } => set.project(v)?,
        Penalty::Squared { lambda, seminorm } => {
            let a = 2.0 * eta * lambda * lambda;
            v.iter()
                .enumerate()
                .map(|(k, x)| x / (1.0 + a * seminorm.weight(k)))
                .collect()
        }
        Penalty::Power { lambda, q, seminorm } => prox_power(v, eta * lambda * lambda, *q, seminorm),
    })
}

/// Prox of `c·I(u)^q` by bisection on the radius `r = I(u)`.
fn prox_power(v: &[f64], c: f64, q: f64, seminorm: &Seminorm) -> Vec<f64> {
    if c == 0.0 {
        return v.to_vec();
    }
    if q == 2.0 {
        return v
            .iter()
            .enumerate()
            .map(|(k, x)| x / (1.0 + 2.0 * c * seminorm.weight(k)))
            .collect();
    }
    let iv = seminorm.value(v);
    if iv == 0.0 {
        return v.to_vec();
    }
    let shrink = |r: f64| -> f64 { c * q * r.powf(q - 2.0) };
    let radius_of = |r: f64| -> f64 {
        let a = shrink(r);
        v.iter()
            .enumerate()
            .map(|(k, x)| {
                let w = seminorm.weight(k);
                let u = x / (1.0 + a * w);
                w * u * u
            })
            .sum::<f64>()
            .sqrt()
    };
    // I(u(r)) − r is positive near 0 and negative at r = I(v).
    let (mut lo, mut hi) = (0.0, iv);
    while hi - lo > 1e-13 * iv {
        let mid = 0.5 * (lo + hi);
        if radius_of(mid) > mid {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let a = shrink(0.5 * (lo + hi));
    v.iter()
        .enumerate()
        .map(|(k, x)| x / (1.0 + a * seminorm.weight(k)))
        .collect()
}

/// Prox of `pen + ι_domain`. Exact for the combinations with closed forms;
/// two sets are combined with Dykstra's algorithm.
pub fn prox_with_domain(pen: &Penalty, domain: &ConvexSet, v: &[f64], eta: f64) -> Result<Vec<f64>> {
    if matches!(domain, ConvexSet::Whole) {
        return prox(pen, v, eta);
    }
    match pen {
        Penalty::Zero => domain.project(v),
        p if p.is_zero() => domain.project(v),
        Penalty::Indicator { set } => dykstra(set, domain, v),
        Penalty::Squared { .. } if matches!(domain, ConvexSet::Box { .. }) => {
            // Separable: clipping the unconstrained coordinate minimizer is exact.
            let u = prox(pen, v, eta)?;
            domain.project(&u)
        }
        Penalty::Squared { seminorm, .. } if is_radial(seminorm) => {
            // c‖u‖² + ι_C: shrink then project, for any convex C.
            let u = prox(pen, v, eta)?;
            domain.project(&u)
        }
        Penalty::Power { seminorm, .. } if is_radial(seminorm) && centered_ball(domain) =>
        {
            let u = prox(pen, v, eta)?;
            domain.project(&u)
        }
        _ => Err(Error::Unsupported(
            "prox of this penalty combined with this parameter domain".into(),
        )),
    }
}

fn is_radial(s: &Seminorm) -> bool {
    matches!(s, Seminorm::Euclidean | Seminorm::Scaled(_))
}

fn centered_ball(d: &ConvexSet) -> bool {
    matches!(d, ConvexSet::Ball { center, .. } if center.iter().all(|c| *c == 0.0))
}

/// Projection onto `A ∩ B` by Dykstra's alternating projections.
pub fn dykstra(a: &ConvexSet, b: &ConvexSet, v: &[f64]) -> Result<Vec<f64>> {
    let d = v.len();
    let mut x = v.to_vec();
    let mut p = vec![0.0; d];
    let mut q = vec![0.0; d];
    for _ in 0..100_000 {
        let yin: Vec<f64> = (0..d).map(|i| x[i] + p[i]).collect();
        let y = a.project(&yin)?;
        for i in 0..d {
            p[i] = yin[i] - y[i];
        }
        let xin: Vec<f64> = (0..d).map(|i| y[i] + q[i]).collect();
        let xn = b.project(&xin)?;
        for i in 0..d {
            q[i] = xin[i] - xn[i];
        }
        let change = crate::linalg::dist(&xn, &x);
        x = xn;
        if change <= 1e-14 * (1.0 + crate::linalg::norm(&x)) && a.contains(&x, 1e-10) {
            return Ok(x);
        }
    }
    Err(Error::SolverFailure { residual: f64::NAN, iterations: 100_000 })
}
