use proptest::prelude::*;
use riskconc_core::expfam::{
    fit_density_mle, fit_expfam_regression, log_partition, local_curvature, small_norm_expansion, taylor_ratio, BaseDensity,
    BaseMeasure, Cumulant, Design, ExpFamily,
};
use riskconc_core::numeric::bisect_threshold;
use riskconc_core::rng::replicate_rng;
use riskconc_core::{ConvexSet, Dataset, Penalty, SolverSettings};

const T_GRID: [f64; 4] = [1e-1, 1e-2, 1e-3, 1e-4];

#[test]
fn log_partition_examples() {
    let f = ExpFamily::two_point(0.5, false).unwrap();
    assert!((log_partition(&f, &[1.0]).unwrap() - 1f64.cosh().ln()).abs() < 1e-15);
    assert!((log_partition(&f, &[1.0]).unwrap() - 0.433781).abs() < 1e-6);
    assert_eq!(log_partition(&f, &[0.0]).unwrap(), 0.0);

    let base = BaseMeasure::interval(-5.0, 5.0, BaseDensity::Gaussian { mean: 0.0, sd: 1.0 });
    let coarse = ExpFamily::polynomial(base.clone(), 3, false).unwrap();
    let fine = ExpFamily::polynomial(base.with_nodes(512), 3, false).unwrap();
    for theta in [[0.3, -0.1, 0.0], [0.0, 0.04, 0.0], [-0.2, 0.0, 0.005]] {
        let a = log_partition(&coarse, &theta).unwrap();
        let b = log_partition(&fine, &theta).unwrap();
        assert!((a - b).abs() <= 1e-10, "{a} vs {b}");
    }
}

#[test]
fn taylor_ratio_series_oracle() {
    let f = ExpFamily::two_point(0.5, false).unwrap();
    let tab = taylor_ratio(&f, &[1.0], &[0.01, 0.1]).unwrap();
    // log cosh t = t²/2 − t⁴/12 + t⁶/45 − …
    let series = |t: f64| 0.5 - t * t / 12.0 + t.powi(4) / 45.0;
    assert!((tab.rows[0].ratio - series(0.01)).abs() < 1e-12);
    assert!((tab.rows[0].ratio - 0.4999917).abs() < 1e-6);
    assert!((tab.rows[1].ratio - series(0.1)).abs() < 1e-8);
    assert!((tab.rows[1].ratio - 0.499167).abs() < 5e-6);
    assert!((tab.rows[1].kappa - 0.0083).abs() < 1e-4);
    // Symmetric case: |ratio − ½| = O(t²).
    let tab = taylor_ratio(&f, &[1.0], &T_GRID).unwrap();
    for r in &tab.rows {
        assert!(((r.ratio - 0.5).abs() / (r.t * r.t) - 1.0 / 12.0).abs() < 1e-3);
    }
}

#[test]
fn taylor_constant_is_stable_for_asymmetric_families() {
    let two = ExpFamily::two_point(0.3, true).unwrap();
    let tab = taylor_ratio(&two, &[1.0], &T_GRID).unwrap();
    assert!(tab.stable, "{tab:?}");
    let gauss = ExpFamily::polynomial(BaseMeasure::interval(-8.0, 8.0, BaseDensity::Gaussian { mean: 0.0, sd: 1.0 }).with_nodes(256), 2, true).unwrap();
    let tab = taylor_ratio(&gauss, &[0.0, 1.0], &T_GRID).unwrap();
    assert!(tab.stable, "{tab:?}");
    // E(x² − 1)³ = 8 for the standard normal: κ → Pg³/(6 Pg²) = 8/12.
    assert!((tab.rows[3].kappa - 8.0 / 12.0).abs() < 1e-3);
}

#[test]
fn small_norm_expansion_examples() {
    let f = ExpFamily::two_point(0.5, false).unwrap();
    let a = small_norm_expansion(&f, &[1.0], &[0.01]).unwrap();
    assert!((a.rows[0].ratio - 0.999983).abs() < 1e-6);
    let b = small_norm_expansion(&f, &[-1.0], &[0.01]).unwrap();
    assert_eq!(a.rows[0].ratio, b.rows[0].ratio);

    let asym = ExpFamily::two_point(0.3, true).unwrap();
    let t = small_norm_expansion(&asym, &[1.0], &[0.1, 0.05, 0.02, 0.01]).unwrap();
    assert!(t.slope >= 0.8, "{t:?}");
}

#[test]
fn two_point_mle_solves_score_equation() {
    let f = ExpFamily::two_point(0.5, false).unwrap().with_domain(ConvexSet::interval(-2.0, 2.0)).unwrap();
    let s = SolverSettings::default().with_tolerance(1e-12);
    for (plus, minus) in [(7usize, 3usize), (3, 12), (5, 5), (11, 9)] {
        let xs: Vec<f64> = std::iter::repeat_n(1.0, plus).chain(std::iter::repeat_n(-1.0, minus)).collect();
        let xbar = xs.iter().sum::<f64>() / xs.len() as f64;
        let data = Dataset::scalars(&xs).unwrap();
        let fit = fit_density_mle(&f, &data, &Penalty::Zero, &s).unwrap();
        let want = bisect_threshold(&|a| a.tanh() >= xbar, -2.0, 2.0, 1e-14);
        assert!((fit.minimizer[0] - want).abs() < 1e-8, "{} vs {want}", fit.minimizer[0]);
    }
}

#[test]
fn heavy_penalty_shrinks_density_fit() {
    let f = ExpFamily::polynomial(BaseMeasure::interval(-1.0, 1.0, BaseDensity::Uniform), 3, true).unwrap();
    let data = f.sample(&mut replicate_rng(4, 0), 200).unwrap();
    let fit = fit_density_mle(&f, &data, &Penalty::ridge(1e3), &SolverSettings::default()).unwrap();
    assert!(riskconc_core::linalg::norm(&fit.minimizer) <= 1e-3);
}

#[test]
fn uniform_data_gives_small_estimates() {
    let f = ExpFamily::polynomial(BaseMeasure::interval(-1.0, 1.0, BaseDensity::Uniform), 1, true).unwrap();
    let s = SolverSettings::default().with_tolerance(1e-10);
    let mut small = 0;
    for seed in 0..100 {
        let data = f.sample(&mut replicate_rng(seed, 5), 10_000).unwrap();
        let fit = fit_density_mle(&f, &data, &Penalty::Zero, &s).unwrap();
        if fit.minimizer[0].abs() <= 0.05 {
            small += 1;
        }
    }
    assert!(small >= 95, "{small}");
}

#[test]
fn regression_examples() {
    let s = SolverSettings::default().with_tolerance(1e-12);
    let y = [0.3, -1.2, 2.5, 0.0];
    let fit = fit_expfam_regression(&Design::Identity, &y, Cumulant::Gaussian, &ConvexSet::Whole, &Penalty::Zero, &s).unwrap();
    for (a, b) in fit.fitted.iter().zip(&y) {
        assert!((a - b).abs() < 1e-10);
    }
    let fit = fit_expfam_regression(&Design::Identity, &[1.0], Cumulant::Poisson, &ConvexSet::interval(-2.0, 2.0), &Penalty::Zero, &s).unwrap();
    assert!(fit.fitted[0].abs() < 1e-10);

    // λ → ∞: the argmin of the penalty over G.
    let dom = ConvexSet::Box { lower: vec![0.5, -1.0], upper: vec![2.0, 1.0] };
    let fit = fit_expfam_regression(&Design::Identity, &[3.0, -3.0], Cumulant::Poisson, &dom, &Penalty::ridge(1e3), &SolverSettings::default()).unwrap();
    assert!((fit.fitted[0] - 0.5).abs() < 1e-4 && fit.fitted[1].abs() < 1e-4);
}

#[test]
fn exponential_regression_stays_in_the_parameter_space() {
    let rows: Vec<Vec<f64>> = (0..200).map(|i| vec![1.0, -1.0 + 2.0 * i as f64 / 199.0]).collect();
    let y: Vec<f64> = rows.iter().map(|r| 1.0 / (2.0 - 0.5 * r[1])).collect();
    let fit = fit_expfam_regression(&Design::Linear { rows }, &y, Cumulant::Exponential, &ConvexSet::Whole, &Penalty::Zero, &SolverSettings::default().with_tolerance(1e-10)).unwrap();
    assert!(!fit.clamped && fit.result.converged);
    assert!(fit.fitted.iter().all(|x| *x < 0.0));
    // Means match: −1/ξ = y exactly at β = (−2, 0.5).
    assert!((fit.result.minimizer[0] + 2.0).abs() < 1e-6 && (fit.result.minimizer[1] - 0.5).abs() < 1e-6);
}

#[test]
fn curvature_of_gaussian_cumulant_is_one_half() {
    let g0 = [0.1, 0.4, -0.3];
    let g = [0.5, 0.0, 0.2];
    assert!((local_curvature(Cumulant::Gaussian, &g0, &g).unwrap() - 0.5).abs() < 1e-15);
    assert!(local_curvature(Cumulant::Poisson, &g0, &g0).is_err());
}

proptest! {
    #[test]
    fn log_partition_is_convex(a in -3.0..3.0f64, b in -3.0..3.0f64, c in -3.0..3.0f64, d in -3.0..3.0f64) {
        let f = ExpFamily::polynomial(BaseMeasure::interval(-1.0, 1.0, BaseDensity::Uniform), 2, true).unwrap();
        let x = [a, b];
        let y = [c, d];
        let m = [(a + c) / 2.0, (b + d) / 2.0];
        let lhs = log_partition(&f, &m).unwrap();
        let rhs = 0.5 * (log_partition(&f, &x).unwrap() + log_partition(&f, &y).unwrap());
        prop_assert!(lhs <= rhs + 1e-12);
        // Jensen: d(g) ≥ νg = 0 for centered statistics.
        prop_assert!(log_partition(&f, &x).unwrap() >= -1e-14);
    }

    #[test]
    fn ratio_tends_to_one_half(p in 0.05..0.95f64, t in 1e-4..1e-2f64) {
        let f = ExpFamily::two_point(p, true).unwrap();
        let tab = taylor_ratio(&f, &[1.0], &[t]).unwrap();
        prop_assert!((tab.rows[0].ratio - 0.5).abs() <= t);
    }

    #[test]
    fn cumulant_curvature_is_positive(xi0 in -2.0..-0.1f64, d in -0.05..0.05f64) {
        prop_assume!(d.abs() > 1e-6);
        for c in [Cumulant::Gaussian, Cumulant::Poisson, Cumulant::Bernoulli, Cumulant::Exponential] {
            let k = local_curvature(c, &[xi0], &[xi0 + d]).unwrap();
            prop_assert!(k > 0.0);
        }
    }
}
