use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rand::Rng as _;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{Continuous, ContinuousCDF, Normal};

use super::rate::{rate_fit, RatePoint, RateReport};
use super::spec::{ScenarioId, ScenarioSpec};
use crate::convex::{solve_erm, ConvexSet, SolverSettings};
use crate::error::{config, Error, Result};
use crate::linalg::{dot, norm, Metric};
use crate::model::family::{standard_normal, FeatureFn};
use crate::model::population::SamplerFn;
use crate::model::{excess_risk, Family, LinearFamily, Penalty, PopulationOracle, Sample, SampleLaw, Seminorm};
use crate::numeric::golden_min;
use crate::rng::{derive_seed, replicate_rng, Rng};
use crate::stats::median;

/// `f_β(x, y) = −y xᵀβ + βᵀΣ₀β/2` for a known second-moment matrix `Σ₀`.
/// Observations are `Sample::Pair`.
pub fn linearized_family(sigma0: DMatrix<f64>, beta0: Vec<f64>, sampler: SamplerFn) -> Result<LinearFamily> {
    let p = beta0.len();
    if sigma0.nrows() != p || sigma0.ncols() != p {
        return config("Σ₀ and β⁰ differ in dimension");
    }
    let scale = sigma0.amax().max(1.0);
    if (&sigma0 - sigma0.transpose()).amax() > 1e-12 * scale {
        return config("Σ₀ is not symmetric");
    }
    let low = sigma0.clone().symmetric_eigenvalues().min();
    if low < -1e-12 * scale {
        return config(format!("Σ₀ is not positive semidefinite (eigenvalue {low:.3e})"));
    }
    let features: FeatureFn = Arc::new(|x: &Sample, out: &mut [f64]| {
        if let Sample::Pair { x, y } = x {
            out.iter_mut().zip(x).for_each(|(o, xi)| *o = y * xi);
        }
    });
    LinearFamily::new(Metric::dense(sigma0)?, beta0, features, SampleLaw::generic(sampler))
}

/// Envelope bound `F ≤ a + b|ε|` with `ε ~ N(0, 1)` and the constants of
/// the tail condition `P F²1{F > t} ≤ c_F² exp(−t²/C_F²)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnvelopeCertificate {
    pub k0: f64,
    pub kx: f64,
    pub a: f64,
    pub b: f64,
    pub c_f: f64,
    pub cap_f: f64,
}

/// `E[(a + b|Z|)² 1{a + b|Z| > t}]`.
pub fn envelope_tail_bound(a: f64, b: f64, t: f64) -> f64 {
    if b == 0.0 {
        return if a > t { a * a } else { 0.0 };
    }
    let z = ((t - a) / b).max(0.0);
    let nd = Normal::standard();
    let q = nd.sf(z);
    let phi = nd.pdf(z);
    2.0 * ((a * a + b * b) * q + 2.0 * a * b * phi + b * b * z * phi)
}

/// Smallest `C_F = max(1, a + 2b)` and the matching `c_F` (with a 1% margin).
pub fn certify_envelope(k0: f64, kx: f64, a: f64, b: f64) -> Result<EnvelopeCertificate> {
    if !(a >= 0.0 && b >= 0.0 && a.is_finite() && b.is_finite()) {
        return Err(Error::Argument("envelope coefficients must be finite and nonnegative".into()));
    }
    let cap_f = (a + 2.0 * b).max(1.0);
    let ratio = |t: f64| envelope_tail_bound(a, b, t) * (t * t / (cap_f * cap_f)).exp();
    // The ratio peaks below 2a + a few b; scan then polish.
    let top = 3.0 * a + 40.0 * b + 10.0;
    let m = 20_000;
    let mut best = (0.0, 0.0);
    for i in 1..=m {
        let t = top * i as f64 / m as f64;
        let r = ratio(t);
        if r > best.0 {
            best = (r, t);
        }
    }
    let h = top / m as f64;
    let t = golden_min(&|t| -ratio(t), (best.1 - h).max(0.0), best.1 + h, 1e-12);
    let peak = best.0.max(ratio(t)).max(ratio(0.0));
    let c_f = (1.01 * peak).sqrt().max(1.0);
    Ok(EnvelopeCertificate { k0, kx, a, b, c_f, cap_f })
}

/// Empirical `P F²1{F > t}` against the certified bound.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TailCheck {
    pub draws: usize,
    pub t: Vec<f64>,
    pub empirical: Vec<f64>,
    pub se: Vec<f64>,
    pub bound: Vec<f64>,
    /// Rows with `empirical > bound + 3 SE`.
    pub violations: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LinearizedPoint {
    pub n: usize,
    pub lambda: f64,
    pub tau_hat: Vec<f64>,
    pub tau_hat_median: f64,
    /// Median `‖β̂ − β⁰‖`.
    pub beta_error_median: f64,
    /// Largest `‖β̂ − β_closed‖_∞` on an unconstrained domain.
    pub closed_form_gap: Option<f64>,
    /// Samples with `|X_iᵀ(β̂ − β⁰)| > r max_j |X_ij|` (ℓ₁ domain only).
    pub holder_violations: usize,
    pub unconverged: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LinearizedReport {
    pub id: ScenarioId,
    pub sigma0: Vec<Vec<f64>>,
    pub points: Vec<LinearizedPoint>,
    /// Only with an ℓ₁ parameter set, which makes `K_X` finite.
    pub envelope: Option<EnvelopeCertificate>,
    pub tail_check: Option<TailCheck>,
    /// Log-log slope of the median `τ(f̂)`; recorded, not asserted.
    pub rate: Option<RateReport>,
}

impl LinearizedReport {
    pub fn flagged(&self) -> bool {
        self.points.iter().any(|p| p.unconverged > 0 || p.holder_violations > 0 || p.closed_form_gap.is_some_and(|g| g > 1e-8))
            || self.tail_check.as_ref().is_some_and(|t| t.violations > 0)
    }
}

struct Design {
    a: DMatrix<f64>,
    beta0: Vec<f64>,
    noise: f64,
}

impl Design {
    fn from_spec(spec: &ScenarioSpec) -> Result<Self> {
        let p = match (&spec.design, spec.dimension) {
            (Some(rows), _) => rows.len(),
            (None, Some(d)) => d,
            (None, None) => spec.reference.len(),
        };
        if p == 0 {
            return config("linearized least squares needs a dimension, a design or β⁰");
        }
        let a = match &spec.design {
            Some(rows) => {
                if rows.iter().any(|r| r.len() != p) {
                    return config("design matrix A must be square");
                }
                DMatrix::from_fn(p, p, |i, j| rows[i][j])
            }
            None => DMatrix::identity(p, p),
        };
        if spec.reference.len() > p {
            return config("β⁰ is longer than the dimension");
        }
        let mut beta0 = spec.reference.clone();
        beta0.resize(p, 0.0);
        Ok(Design { a, beta0, noise: spec.noise })
    }

    /// `Σ₀ = E XXᵀ = AAᵀ/3` for `X = AU`, `U ~ Unif[−1, 1]^p`.
    fn sigma0(&self) -> DMatrix<f64> {
        &self.a * self.a.transpose() / 3.0
    }

    fn draw(&self, rng: &mut Rng) -> (Vec<f64>, f64) {
        let p = self.beta0.len();
        let u = DVector::from_fn(p, |_, _| rng.random_range(-1.0..=1.0));
        let x: Vec<f64> = (&self.a * u).iter().copied().collect();
        let y = dot(&x, &self.beta0) + self.noise * standard_normal(rng);
        (x, y)
    }

    fn sampler(&self) -> SamplerFn {
        let d = Design { a: self.a.clone(), beta0: self.beta0.clone(), noise: self.noise };
        Arc::new(move |rng: &mut Rng| {
            let (x, y) = d.draw(rng);
            Sample::Pair { x, y }
        })
    }

    /// `K₀ ≥ |Xᵀβ⁰|` and the per-unit-radius `max_j Σ_i |A_ji|` bound on `|X_j|`.
    fn bounds(&self) -> (f64, f64) {
        let atb = self.a.transpose() * DVector::from_column_slice(&self.beta0);
        let k0 = atb.iter().map(|v| v.abs()).sum();
        let xmax = (0..self.a.nrows()).map(|j| self.a.row(j).iter().map(|v| v.abs()).sum::<f64>()).fold(0.0, f64::max);
        (k0, xmax)
    }
}

fn envelope_for(design: &Design, radius: f64) -> Result<EnvelopeCertificate> {
    let (k0, xmax) = design.bounds();
    let kx = radius * xmax;
    // |f_β − f_β⁰| ≤ |y||xᵀδ| + |δᵀΣ₀δ/2 + δᵀΣ₀β⁰| ≤ K_X(K₀ + σ|ε|) + K_X²/2 + K_X K₀.
    let b0 = 0.5 * kx * kx + kx * k0;
    certify_envelope(k0, kx, kx * k0 + b0, kx * design.noise)
}

fn tail_check(design: &Design, radius: f64, cert: &EnvelopeCertificate, draws: usize, seed: u64) -> TailCheck {
    let b0 = 0.5 * cert.kx * cert.kx + cert.kx * cert.k0;
    let chunks = 64u64;
    let per = draws.div_ceil(chunks as usize);
    let f: Vec<f64> = (0..chunks)
        .into_par_iter()
        .flat_map_iter(|c| {
            let mut rng = replicate_rng(seed, c);
            (0..per)
                .map(|_| {
                    let (x, y) = design.draw(&mut rng);
                    let xm = x.iter().map(|v| v.abs()).fold(0.0, f64::max);
                    radius * xm * y.abs() + b0
                })
                .collect::<Vec<_>>()
        })
        .collect();
    let m = f.len();
    let top = cert.a + 8.0 * cert.b + 1.0;
    let t: Vec<f64> = (0..=40).map(|i| top * i as f64 / 40.0).collect();
    let mut empirical = Vec::with_capacity(t.len());
    let mut se = Vec::with_capacity(t.len());
    let mut bound = Vec::with_capacity(t.len());
    let mut violations = 0;
    for ti in &t {
        let vals: Vec<f64> = f.iter().map(|v| if v > ti { v * v } else { 0.0 }).collect();
        let mean = vals.iter().sum::<f64>() / m as f64;
        let var = vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (m as f64 - 1.0).max(1.0);
        let s = (var / m as f64).sqrt();
        let b = cert.c_f * cert.c_f * (-ti * ti / (cert.cap_f * cert.cap_f)).exp();
        if mean > b + 3.0 * s {
            violations += 1;
        }
        empirical.push(mean);
        se.push(s);
        bound.push(b);
    }
    TailCheck { draws: m, t, empirical, se, bound, violations }
}

/// Draws for the envelope tail check.
pub const TAIL_DRAWS: usize = 1_000_000;

/// Linearized least squares over the sample sizes in `spec.n`.
pub fn run_linearized_ls(spec: &ScenarioSpec) -> Result<LinearizedReport> {
    spec.validate()?;
    if spec.id != ScenarioId::LinearizedLs {
        return config(format!("{} is not the linearized least-squares scenario", spec.id.name()));
    }
    let design = Design::from_spec(spec)?;
    let sigma0 = design.sigma0();
    let p = design.beta0.len();
    let fam = linearized_family(sigma0.clone(), design.beta0.clone(), design.sampler())?;
    let domain = match spec.l1_radius {
        Some(r) => ConvexSet::L1Ball { center: design.beta0.clone(), radius: r },
        None => ConvexSet::Whole,
    };
    let family = Family::Linear(fam.with_domain(domain.clone())?);
    let oracle = PopulationOracle::ClosedForm;
    let settings = SolverSettings::default().with_tolerance(1e-11).with_max_iterations(50_000);
    let mut points = Vec::with_capacity(spec.n.len());
    for &n in &spec.n {
        let lambda = spec.lambda.at(n);
        let penalty = if lambda == 0.0 { Penalty::Zero } else { Penalty::Squared { lambda, seminorm: Seminorm::Euclidean } };
        let seed = derive_seed(spec.seed ^ 0x15, n as u64);
        let runs: Vec<(f64, f64, Option<f64>, usize, bool)> = (0..spec.seeds as u64)
            .into_par_iter()
            .map(|j| -> Result<_> {
                let mut rng = replicate_rng(seed, j);
                let data = family.law().draw(&mut rng, n)?;
                let fit = solve_erm(&family, &penalty, &data, &oracle, &settings)?;
                let beta = &fit.minimizer;
                let tau = excess_risk(&family, beta, &penalty, &oracle)?.max(0.0).sqrt();
                let delta: Vec<f64> = beta.iter().zip(&design.beta0).map(|(a, b)| a - b).collect();
                let closed = if matches!(domain, ConvexSet::Whole) {
                    // (Σ₀ + 2λ²I) β = XᵀY/n
                    let m = &sigma0 + DMatrix::identity(p, p) * (2.0 * lambda * lambda);
                    let rhs = DVector::from_column_slice(&cross_moment(&data, p));
                    let sol = m.lu().solve(&rhs).ok_or_else(|| Error::Numerical("singular Σ₀ + 2λ²I".into()))?;
                    Some(sol.iter().zip(beta).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max))
                } else {
                    None
                };
                let holder = match spec.l1_radius {
                    Some(r) => data
                        .points()
                        .iter()
                        .filter(|s| match s {
                            Sample::Pair { x, .. } => {
                                let lhs = dot(x, &delta).abs();
                                let xm = x.iter().map(|v| v.abs()).fold(0.0, f64::max);
                                lhs > r * xm * (1.0 + 1e-9) + 1e-12
                            }
                            _ => false,
                        })
                        .count(),
                    None => 0,
                };
                Ok((tau, norm(&delta), closed, holder, fit.converged))
            })
            .collect::<Result<_>>()?;
        let tau_hat: Vec<f64> = runs.iter().map(|r| r.0).collect();
        let errs: Vec<f64> = runs.iter().map(|r| r.1).collect();
        let closed_form_gap = runs.iter().filter_map(|r| r.2).reduce(f64::max);
        points.push(LinearizedPoint {
            n,
            lambda,
            tau_hat_median: median(&tau_hat),
            tau_hat,
            beta_error_median: median(&errs),
            closed_form_gap,
            holder_violations: runs.iter().map(|r| r.3).sum(),
            unconverged: runs.iter().filter(|r| !r.4).count(),
        });
    }
    let (envelope, tail) = match spec.l1_radius {
        Some(r) => {
            let cert = envelope_for(&design, r)?;
            let tc = tail_check(&design, r, &cert, TAIL_DRAWS, derive_seed(spec.seed, 0x7A11));
            (Some(cert), Some(tc))
        }
        None => (None, None),
    };
    let rate = if points.len() >= 4 && points.iter().all(|p| p.tau_hat_median > 0.0) {
        let rp: Vec<RatePoint> = points.iter().map(|p| RatePoint { n: p.n, estimate: p.tau_hat_median, se: 0.0 }).collect();
        rate_fit(&rp, None).ok()
    } else {
        None
    };
    let sigma0_rows = (0..p).map(|i| sigma0.row(i).iter().copied().collect()).collect();
    Ok(LinearizedReport { id: spec.id, sigma0: sigma0_rows, points, envelope, tail_check: tail, rate })
}

/// `XᵀY/n`.
fn cross_moment(data: &crate::model::Dataset, p: usize) -> Vec<f64> {
    let mut acc = vec![0.0; p];
    for s in data.points() {
        if let Sample::Pair { x, y } = s {
            acc.iter_mut().zip(x).for_each(|(a, xi)| *a += y * xi);
        }
    }
    let n = data.len() as f64;
    acc.iter_mut().for_each(|a| *a /= n);
    acc
}
