use std::f64::consts::{PI, SQRT_2};
use std::sync::Arc;

use rand::Rng as _;

use crate::convex::ConvexSet;
use crate::error::{config, Result};
use crate::linalg::Metric;
use crate::model::family::FeatureFn;
use crate::model::{LinearFamily, Sample, SampleLaw};
use crate::rng::Rng;

/// `φ_k(x) = √2 cos(πkx)`, `k = 1..=out.len()`, by the Chebyshev recurrence.
pub fn cosine_features(x: f64, out: &mut [f64]) {
    let c1 = (PI * x).cos();
    let (mut prev, mut cur) = (1.0, c1);
    for o in out.iter_mut() {
        *o = SQRT_2 * cur;
        let next = 2.0 * c1 * cur - prev;
        prev = cur;
        cur = next;
    }
}

/// Ellipsoid weights `k^{2β}` with `β = 1/(2α)`.
pub fn ellipsoid_weights(d: usize, alpha: f64) -> Vec<f64> {
    let beta = 1.0 / (2.0 * alpha);
    (1..=d).map(|k| (k as f64).powf(2.0 * beta)).collect()
}

/// `⌈c n^{α/(1+α)}⌉`.
pub fn sieve_dimension(n: usize, alpha: f64, c: f64) -> usize {
    ((c * (n as f64).powf(alpha / (1.0 + alpha))).ceil() as usize).max(1)
}

fn density(g0: &[f64], x: f64, buf: &mut [f64]) -> f64 {
    cosine_features(x, buf);
    1.0 + g0.iter().zip(buf.iter()).map(|(a, b)| a * b).sum::<f64>()
}

/// Projection density estimation on `[0, 1]` with the cosine basis:
/// `f_g = −g + ‖g‖²/2`, data from `p = 1 + Σ g⁰_k φ_k`.
pub fn cosine_family(g0: Vec<f64>) -> Result<LinearFamily> {
    let d = g0.len();
    if d == 0 {
        return config("the cosine family needs at least one basis function");
    }
    let mut buf = vec![0.0; d];
    let lowest = (0..=4096).map(|i| density(&g0, i as f64 / 4096.0, &mut buf)).fold(f64::INFINITY, f64::min);
    if !(lowest >= 0.0) {
        return config(format!("coefficients give a negative density (minimum {lowest:.3e})"));
    }
    let bound = 1.0 + SQRT_2 * g0.iter().map(|a| a.abs()).sum::<f64>();
    let g_pdf = g0.clone();
    let g_draw = g0.clone();
    let pdf = Arc::new(move |x: f64| {
        if !(0.0..=1.0).contains(&x) {
            return 0.0;
        }
        let mut b = vec![0.0; g_pdf.len()];
        density(&g_pdf, x, &mut b)
    });
    let sampler = Arc::new(move |rng: &mut Rng| {
        let mut b = vec![0.0; g_draw.len()];
        loop {
            let x: f64 = rng.random();
            let u: f64 = rng.random();
            if u * bound <= density(&g_draw, x, &mut b) {
                return Sample::Scalar(x);
            }
        }
    });
    let law = SampleLaw::density(0.0, 1.0, pdf, sampler)?;
    let features: FeatureFn = Arc::new(|x: &Sample, out: &mut [f64]| {
        if let Sample::Scalar(v) = x {
            cosine_features(*v, out);
        }
    });
    // E φ_j φ_k = δ_jk + (g⁰_{|j−k|} + g⁰_{j+k})/√2
    let coef = |m: usize| if m >= 1 && m <= d { g0[m - 1] } else { 0.0 };
    let mut cov = nalgebra::DMatrix::zeros(d, d);
    for j in 1..=d {
        for k in 1..=d {
            let second = if j == k { 1.0 } else { 0.0 } + (coef(j.abs_diff(k)) + coef(j + k)) / SQRT_2;
            cov[(j - 1, k - 1)] = second - g0[j - 1] * g0[k - 1];
        }
    }
    LinearFamily::new(Metric::isotropic(d, 1.0), g0, features, law)?.with_feature_cov(Metric::dense(cov)?)
}

/// Case 1 parameter set `{Σ k^{2β}(g_k − g⁰_k)² ≤ R²}`.
pub fn ellipsoid_domain(g0: &[f64], alpha: f64, radius: f64) -> ConvexSet {
    ConvexSet::Ellipsoid { center: g0.to_vec(), weights: ellipsoid_weights(g0.len(), alpha), radius }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn recurrence_matches_cosines() {
        let mut out = [0.0; 7];
        for x in [0.0, 0.13, 0.5, 0.77, 1.0] {
            cosine_features(x, &mut out);
            for (k, v) in out.iter().enumerate() {
                let want = SQRT_2 * (PI * (k + 1) as f64 * x).cos();
                assert!((v - want).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn sieve_sizes() {
        assert_eq!(sieve_dimension(250, 1.0, 1.0), 16);
        assert_eq!(sieve_dimension(8000, 1.0, 1.0), 90);
        assert_eq!(ellipsoid_weights(3, 0.5), vec![1.0, 4.0, 9.0]);
    }

    #[test]
    fn negative_density_rejected() {
        assert!(cosine_family(vec![1.0]).is_err());
        assert!(cosine_family(vec![0.3, 0.1]).is_ok());
    }
}
