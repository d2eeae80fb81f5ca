use std::f64::consts::{PI, SQRT_2};

use proptest::prelude::*;
use riskconc_core::convex::solve_erm;
use riskconc_core::expfam::Cumulant;
use riskconc_core::model::excess_risk;
use riskconc_core::rng::replicate_rng;
use riskconc_core::scenarios::{
    cosine_family, cosine_features, rate_fit, run_expfam_density, run_expfam_regression, run_linearized_ls,
    run_projection_case, sieve_dimension, target_exponent, LambdaRule, RatePoint, ScenarioId, ScenarioSpec,
};
use riskconc_core::{Family, Penalty, PopulationOracle, SolverSettings};

#[test]
fn cosine_basis_is_orthonormal() {
    // Midpoint rule is exact for trigonometric polynomials of degree < 2m.
    let m = 4000;
    let d = 12;
    let mut gram = vec![0.0; d * d];
    let mut buf = vec![0.0; d];
    for i in 0..m {
        cosine_features((i as f64 + 0.5) / m as f64, &mut buf);
        for j in 0..d {
            for k in 0..d {
                gram[j * d + k] += buf[j] * buf[k] / m as f64;
            }
        }
    }
    for j in 0..d {
        for k in 0..d {
            let want = if j == k { 1.0 } else { 0.0 };
            assert!((gram[j * d + k] - want).abs() < 1e-12);
        }
    }
    let mut one = [0.0; 3];
    cosine_features(0.3, &mut one);
    for (k, v) in one.iter().enumerate() {
        assert!((v - SQRT_2 * (PI * (k + 1) as f64 * 0.3).cos()).abs() < 1e-14);
    }
}

#[test]
fn sieve_sizes() {
    assert_eq!(sieve_dimension(1000, 1.0, 1.0), 32);
    assert_eq!(sieve_dimension(1, 0.5, 1.0), 1);
    assert_eq!(sieve_dimension(8000, 0.5, 4.0), 80);
    assert!(cosine_family(vec![0.9, 0.0, 0.0]).is_err());
}

#[test]
fn one_dimensional_basis_matches_closed_form() {
    let g0 = 0.2;
    let fam = Family::Linear(cosine_family(vec![g0]).unwrap());
    let oracle = PopulationOracle::ClosedForm;
    for seed in 0..10 {
        let data = fam.law().draw(&mut replicate_rng(seed, 1), 300).unwrap();
        let r = solve_erm(&fam, &Penalty::Zero, &data, &oracle, &SolverSettings::default()).unwrap();
        let phi_bar = data.points().iter().map(|x| SQRT_2 * (PI * x.as_scalar().unwrap()).cos()).sum::<f64>() / 300.0;
        let tau = excess_risk(&fam, &r.minimizer, &Penalty::Zero, &oracle).unwrap().sqrt();
        // τ(f̂)² = ½|ĝ − g⁰|² with ĝ − g⁰ = (P_n − P)φ₁.
        let want = (phi_bar - g0).abs() / SQRT_2;
        assert!((tau - want).abs() < 1e-8, "{tau} vs {want}");
    }

    let mut spec = ScenarioSpec::new(ScenarioId::ProjectionCase2, vec![100, 400]);
    spec.dimension = Some(1);
    spec.reference = vec![g0];
    spec.seeds = 8;
    spec.replicates = 50;
    let rep = run_projection_case(&spec).unwrap();
    for p in &rep.points {
        assert_eq!(p.dimension, 1);
        assert_eq!(p.lemma_violations, 0);
        assert_eq!(p.unconverged, 0);
        for (t, s) in p.tau_hat.iter().zip(&p.s_hat) {
            assert!((t - s).abs() <= p.lemma_excess.max(0.0) + 1e-3 * s + 1e-6);
        }
    }
}

#[test]
fn target_exponents() {
    let mut s = ScenarioSpec::new(ScenarioId::ProjectionCase1, vec![1]);
    s.alpha = 1.0;
    assert_eq!(target_exponent(&s), Some(-0.25));
    let mut s = ScenarioSpec::new(ScenarioId::ProjectionCase3, vec![1]);
    s.q = Some(1.5);
    s.lambda = LambdaRule::Power { scale: 1.0, exponent: -0.3 };
    assert!((target_exponent(&s).unwrap() + 0.36).abs() < 1e-12);
    // Case 2 with λ = n^{−1/(2(1+α))} reproduces case 1's exponent.
    let mut s = ScenarioSpec::new(ScenarioId::ProjectionCase2, vec![1]);
    s.lambda = LambdaRule::Power { scale: 1.0, exponent: -1.0 / 3.0 };
    assert!((target_exponent(&s).unwrap() + 1.0 / 3.0).abs() < 1e-12);
    assert_eq!(target_exponent(&ScenarioSpec::new(ScenarioId::LinearizedLs, vec![1])), None);
}

#[test]
fn case2_boundary_regime() {
    // I²(f⁰) = 20²·0.36 = 144 against (nλ^{2(1+α)})⁻¹ = 1, violated by a factor ≥ 100.
    let mut spec = ScenarioSpec::new(ScenarioId::ProjectionCase2, vec![500, 1000]);
    spec.lambda = LambdaRule::Power { scale: 1.0, exponent: -1.0 / 3.0 };
    spec.reference = vec![0.0; 20];
    spec.reference[19] = 0.6;
    spec.seeds = 20;
    spec.replicates = 100;
    let rep = run_projection_case(&spec).unwrap();
    for p in &rep.points {
        assert!(p.boundary_fraction > 0.9, "n = {}: {}", p.n, p.boundary_fraction);
        assert_eq!(p.lemma_violations, 0);
    }
}

#[test]
fn case2_slope_follows_lambda_schedule() {
    let mut spec = ScenarioSpec::new(ScenarioId::ProjectionCase2, vec![250, 500, 1000, 2000, 4000, 8000]);
    spec.lambda = LambdaRule::Power { scale: 1.0, exponent: -1.0 / 3.0 };
    spec.seeds = 4;
    spec.replicates = 100;
    spec.seed = 7;
    let rep = run_projection_case(&spec).unwrap();
    let rate = rep.rate.unwrap();
    assert!((rate.target.unwrap() + 1.0 / 3.0).abs() < 1e-12);
    assert_eq!(rate.within_tolerance, Some(true), "slope {}", rate.slope);
    assert!(rep.points.iter().all(|p| p.lemma_violations == 0));
}

fn linearized(n: Vec<usize>) -> ScenarioSpec {
    let mut s = ScenarioSpec::new(ScenarioId::LinearizedLs, n);
    s.reference = vec![1.0, -0.5, 0.25, 0.0, 0.5];
    s.seeds = 6;
    s.seed = 3;
    s
}

#[test]
fn linearized_closed_form_and_noiseless_recovery() {
    let rep = run_linearized_ls(&linearized(vec![200, 1000])).unwrap();
    for p in &rep.points {
        assert!(p.closed_form_gap.unwrap() <= 1e-10, "{:?}", p.closed_form_gap);
        assert_eq!(p.unconverged, 0);
    }
    assert!(rep.envelope.is_none());

    // Noiseless error is the sampling error of Σ̂, of order ‖β⁰‖√(p/n).
    let mut s = linearized(vec![1000, 10_000]);
    s.noise = 0.0;
    s.reference = vec![0.2, -0.1, 0.05, 0.0, 0.1];
    let rep = run_linearized_ls(&s).unwrap();
    let err: Vec<f64> = rep.points.iter().map(|p| p.beta_error_median).collect();
    assert!(err[1] <= 1e-2 && err[1] < err[0], "{err:?}");
}

#[test]
fn linearized_l1_ball_certifies_holder_bound() {
    let mut s = linearized(vec![500, 2000]);
    s.l1_radius = Some(1.0);
    s.lambda = LambdaRule::Constant { value: 0.1 };
    let rep = run_linearized_ls(&s).unwrap();
    assert!(rep.points.iter().all(|p| p.holder_violations == 0 && p.unconverged == 0));
    let cert = rep.envelope.as_ref().unwrap();
    assert!(cert.c_f > 0.0 && cert.cap_f > 0.0);
    let tail = rep.tail_check.as_ref().unwrap();
    assert_eq!(tail.draws, 1_000_000);
    assert_eq!(tail.violations, 0);
    assert!(!rep.flagged());
}

#[test]
fn linearized_rejects_bad_design() {
    let mut s = linearized(vec![100]);
    s.design = Some(vec![vec![1.0, 0.0], vec![0.0]]);
    assert!(run_linearized_ls(&s).is_err());
}

#[test]
fn expfam_scenarios_run_clean() {
    let mut d = ScenarioSpec::new(ScenarioId::ExpfamDensity, vec![250, 1000]);
    d.seeds = 5;
    let rep = run_expfam_density(&d).unwrap();
    assert!(!rep.flagged());
    assert!(rep.points.iter().all(|p| p.score_residual_max.unwrap() < 1e-6));

    for c in [Cumulant::Poisson, Cumulant::Bernoulli, Cumulant::Exponential] {
        let mut r = ScenarioSpec::new(ScenarioId::ExpfamRegression, vec![250, 1000]);
        r.seeds = 5;
        r.cumulant = Some(c);
        r.reference = if c == Cumulant::Exponential { vec![-2.0, 0.5, 0.3] } else { vec![0.2, 0.5, -0.3] };
        let rep = run_expfam_regression(&r).unwrap();
        assert!(!rep.flagged(), "{c:?}");
        assert!(rep.points.iter().all(|p| p.curvature_median.unwrap() > 0.0));
    }
}

#[test]
fn invalid_specs() {
    let bad = [
        ScenarioSpec::new(ScenarioId::ProjectionCase1, vec![]),
        ScenarioSpec::new(ScenarioId::ProjectionCase1, vec![500, 250]),
        ScenarioSpec { alpha: 1.0, ..ScenarioSpec::new(ScenarioId::ProjectionCase2, vec![100]) },
        ScenarioSpec { q: Some(2.5), ..ScenarioSpec::new(ScenarioId::ProjectionCase3, vec![100]) },
        ScenarioSpec::new(ScenarioId::ProjectionCase3, vec![100]),
        ScenarioSpec { replicates: 1, ..ScenarioSpec::new(ScenarioId::ProjectionCase1, vec![100]) },
    ];
    for s in bad {
        assert!(s.validate().is_err(), "{s:?}");
    }
    assert!(run_projection_case(&ScenarioSpec::new(ScenarioId::LinearizedLs, vec![100])).is_err());
    let pts: Vec<RatePoint> = [100, 200, 400, 800].iter().map(|n| RatePoint { n: *n, estimate: 1.0, se: 0.0 }).collect();
    assert!(rate_fit(&pts, None).is_err());
}

#[test]
fn exact_power_law_slope() {
    let pts: Vec<RatePoint> =
        [250, 500, 1000, 2000, 4000, 8000].iter().map(|n| RatePoint { n: *n, estimate: (*n as f64).powf(-0.25), se: 0.0 }).collect();
    let r = rate_fit(&pts, Some(-0.25)).unwrap();
    assert!((r.slope + 0.25).abs() < 1e-12);
    assert!(r.ci.0 <= r.slope && r.slope <= r.ci.1);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn rate_fit_recovers_power_laws(e in -2.0..2.0f64, c in 0.01..100.0f64) {
        let pts: Vec<RatePoint> = [100, 300, 1000, 3000, 10_000]
            .iter()
            .map(|n| RatePoint { n: *n, estimate: c * (*n as f64).powf(e), se: 0.0 })
            .collect();
        let r = rate_fit(&pts, Some(e)).unwrap();
        prop_assert!((r.slope - e).abs() < 1e-10);
        prop_assert!((r.intercept - c.ln()).abs() < 1e-8);
    }

    #[test]
    fn spec_json_round_trip(alpha in 0.05..0.95f64, seeds in 1usize..50, seed in any::<u64>()) {
        let mut s = ScenarioSpec::new(ScenarioId::ProjectionCase2, vec![100, 1000]);
        s.alpha = alpha;
        s.seeds = seeds;
        s.seed = seed;
        s.lambda = LambdaRule::Power { scale: 0.5, exponent: -0.25 };
        let text = serde_json::to_string(&s).unwrap();
        let back: ScenarioSpec = serde_json::from_str(&text).unwrap();
        prop_assert_eq!(back, s);
    }
}
