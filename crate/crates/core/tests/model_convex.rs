use std::sync::Arc;

use proptest::prelude::*;
use rand::Rng as _;
use riskconc_core::convex::{optimality_residual, project, prox, solve_erm, solve_regularized_ls};
use riskconc_core::model::{empirical_mean, excess_risk, tau_min};
use riskconc_core::rng::replicate_rng;
use riskconc_core::scenarios::cosine_family;
use riskconc_core::{
    ConvexSet, Dataset, Family, FiniteFamily, LinearFamily, Metric, Penalty, PopulationOracle, Sample, SampleLaw,
    Seminorm, SmoothFamily, SolverSettings,
};

fn scalar_family(loss: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Family {
    let loss = Arc::new(move |_g: &[f64], x: &Sample| loss(x.as_scalar().unwrap()));
    Family::Smooth(SmoothFamily::new(1, loss, SampleLaw::uniform01()))
}

#[test]
fn empirical_mean_examples() {
    let data = Dataset::scalars(&[1.0, 2.0, 3.0]).unwrap();
    assert_eq!(empirical_mean(&scalar_family(|_| 4.5), &[0.0], &data).unwrap(), 4.5);
    assert_eq!(empirical_mean(&scalar_family(|x| x), &[0.0], &data).unwrap(), 2.0);

    let mut rng = replicate_rng(17, 0);
    let xs: Vec<f64> = (0..50).map(|_| rng.random::<f64>()).collect();
    let data = Dataset::scalars(&xs).unwrap();
    let mut acc = 0.0;
    for x in &xs {
        acc += x * x;
    }
    let got = empirical_mean(&scalar_family(|x| x * x), &[0.0], &data).unwrap();
    assert!((got - acc / 50.0).abs() < 1e-12);
}

/// `P(f_g − f⁰) = ‖g − g⁰‖²`: location family with `H = 2I`.
fn pure(g0: Vec<f64>) -> Family {
    Family::Linear(LinearFamily::gaussian_location(g0, 1.0).unwrap())
}

#[test]
fn excess_risk_examples() {
    let oracle = PopulationOracle::ClosedForm;
    let fam = pure(vec![0.3, -0.2]);
    assert_eq!(excess_risk(&fam, &[0.3, -0.2], &Penalty::Zero, &oracle).unwrap(), 0.0);

    let n = 50.0_f64;
    let g = [0.3 + 3.0 / n.sqrt(), -0.2 + 4.0 / n.sqrt()];
    let v = excess_risk(&fam, &g, &Penalty::Zero, &oracle).unwrap();
    assert!((v - 25.0 / n).abs() < 1e-12);

    // ‖g‖² = 4, ‖g − g⁰‖² = 1, λ = 0.5: 1 + 0.25·4.
    let fam = pure(vec![1.0, 0.0]);
    let v = excess_risk(&fam, &[2.0, 0.0], &Penalty::ridge(0.5), &oracle).unwrap();
    assert!((v - 2.0).abs() < 1e-12);
}

#[test]
fn tau_min_examples() {
    let oracle = PopulationOracle::ClosedForm;
    let fam = pure(vec![1.0, 0.0]);
    let t = tau_min(&fam, &Penalty::Zero, &oracle).unwrap();
    assert_eq!(t.tau_sq, 0.0);
    assert_eq!(t.argmin, vec![1.0, 0.0]);

    let t = tau_min(&fam, &Penalty::indicator(ConvexSet::ball(2, 2.0)), &oracle).unwrap();
    assert!(t.tau_sq.abs() < 1e-12);

    let t = tau_min(&fam, &Penalty::ridge(1.0), &oracle).unwrap();
    assert!((t.tau_sq - 0.5).abs() < 1e-10);
    assert!((t.argmin[0] - 0.5).abs() < 1e-8 && t.argmin[1].abs() < 1e-8);
    // Grid oracle along the first axis.
    let grid_min = (0..=10_000).map(|i| i as f64 / 10_000.0).map(|a| (a - 1.0) * (a - 1.0) + a * a).fold(f64::INFINITY, f64::min);
    assert!((t.tau_sq - grid_min).abs() < 1e-7);
}

#[test]
fn projection_examples() {
    assert_eq!(project(&ConvexSet::unit_box(2), &[2.0, -1.0]).unwrap(), vec![1.0, 0.0]);
    let p = project(&ConvexSet::ball(2, 1.0), &[3.0, 4.0]).unwrap();
    assert!((p[0] - 0.6).abs() < 1e-15 && (p[1] - 0.8).abs() < 1e-15);
    for set in [ConvexSet::unit_box(2), ConvexSet::ball(2, 1.0), ConvexSet::L1Ball { center: vec![0.0; 2], radius: 1.0 }] {
        assert_eq!(project(&set, &[0.25, 0.25]).unwrap(), vec![0.25, 0.25]);
    }
}

#[test]
fn prox_examples() {
    let pen = Penalty::Squared { lambda: 0.5_f64.sqrt(), seminorm: Seminorm::Euclidean };
    let p = prox(&pen, &[1.0, 1.0], 1.0).unwrap();
    assert!((p[0] - 0.5).abs() < 1e-15 && (p[1] - 0.5).abs() < 1e-15);
    assert_eq!(prox(&Penalty::Zero, &[1.5, -2.0], 0.3).unwrap(), vec![1.5, -2.0]);
    for eta in [0.01, 1.0, 100.0] {
        assert_eq!(prox(&Penalty::indicator(ConvexSet::unit_box(2)), &[2.0, -1.0], eta).unwrap(), vec![1.0, 0.0]);
    }
}

#[test]
fn regularized_ls_examples() {
    let s = SolverSettings::default();
    let r = solve_regularized_ls(&[2.0, 4.0], &[0.0, 0.0], &Penalty::Zero, &s).unwrap();
    assert_eq!(r.minimizer, vec![2.0, 4.0]);
    assert_eq!(optimality_residual(&[2.0, 4.0], &[2.0, 4.0], &Penalty::Zero).unwrap(), 0.0);

    let ridge = Penalty::ridge_n(1.0, 2);
    let r = solve_regularized_ls(&[2.0, 4.0], &[0.0, 0.0], &ridge, &s).unwrap();
    assert!((r.minimizer[0] - 1.0).abs() < 1e-10 && (r.minimizer[1] - 2.0).abs() < 1e-10);
    assert!(optimality_residual(&[2.0, 4.0], &r.minimizer, &ridge).unwrap() <= s.tolerance);
    assert!(optimality_residual(&[2.0, 4.0], &[2.0, 4.0], &ridge).unwrap() >= 0.1);

    let boxp = Penalty::indicator(ConvexSet::unit_box(2));
    let r = solve_regularized_ls(&[5.0, -3.0], &[0.5, 0.5], &boxp, &s).unwrap();
    assert_eq!(r.minimizer, vec![1.0, 0.0]);
    let mut best = (f64::INFINITY, [0.0, 0.0]);
    for i in 0..=1000 {
        for j in 0..=1000 {
            let g = [i as f64 / 1000.0, j as f64 / 1000.0];
            let obj = ((5.0 - g[0]).powi(2) + (-3.0 - g[1]).powi(2)) / 2.0;
            if obj < best.0 {
                best = (obj, g);
            }
        }
    }
    assert!((r.minimizer[0] - best.1[0]).abs() <= 1e-3 && (r.minimizer[1] - best.1[1]).abs() <= 1e-3);
}

#[test]
fn erm_on_one_cosine_coordinate_is_clipped_mean() {
    let fam = cosine_family(vec![0.1]).unwrap().with_domain(ConvexSet::interval(-0.05, 0.15)).unwrap();
    let fam = Family::Linear(fam);
    let oracle = PopulationOracle::ClosedForm;
    for seed in 0..5 {
        let mut rng = replicate_rng(seed, 0);
        let data = fam.law().draw(&mut rng, 40).unwrap();
        let r = solve_erm(&fam, &Penalty::Zero, &data, &oracle, &SolverSettings::default()).unwrap();
        // 1-d grid oracle for P_n f_g.
        let mut best = (f64::INFINITY, 0.0);
        for i in 0..=200_000 {
            let g = -0.05 + 0.2 * i as f64 / 200_000.0;
            let v = empirical_mean(&fam, &[g], &data).unwrap();
            if v < best.0 {
                best = (v, g);
            }
        }
        assert!((r.minimizer[0] - best.1).abs() < 1e-6, "{} vs {}", r.minimizer[0], best.1);
        let phi_bar = data.points().iter().map(|x| 2f64.sqrt() * (std::f64::consts::PI * x.as_scalar().unwrap()).cos()).sum::<f64>() / 40.0;
        assert!((r.minimizer[0] - phi_bar.clamp(-0.05, 0.15)).abs() < 1e-9);
    }
}

#[test]
fn heavy_penalty_drives_erm_to_zero() {
    let fam = Family::Linear(
        LinearFamily::gaussian_location(vec![0.5, -0.5, 1.0], 1.0).unwrap().with_domain(ConvexSet::ball(3, 5.0)).unwrap(),
    );
    let mut rng = replicate_rng(3, 1);
    let data = fam.law().draw(&mut rng, 100).unwrap();
    let r = solve_erm(&fam, &Penalty::ridge(1e3), &data, &PopulationOracle::ClosedForm, &SolverSettings::default()).unwrap();
    assert!(riskconc_core::linalg::norm(&r.minimizer) <= 1e-4);
}

#[test]
fn finite_erm_is_exhaustive() {
    let params: Vec<Vec<f64>> = (0..5).map(|k| vec![k as f64]).collect();
    let table = vec![
        vec![0.3, 0.1, 0.9],
        vec![0.0, 0.5, 0.2],
        vec![0.7, 0.7, 0.1],
        vec![0.2, 0.2, 0.2],
        vec![1.0, 0.0, 0.4],
    ];
    let fam = FiniteFamily::new(params.clone(), table.clone(), vec![0.2, 0.5, 0.3]).unwrap().with_reference(3).unwrap();
    let fam = Family::Finite(fam);
    let pen = Penalty::ridge(0.1);
    for seed in 0..20 {
        let mut rng = replicate_rng(seed, 2);
        let data = fam.law().draw(&mut rng, 15).unwrap();
        let r = solve_erm(&fam, &pen, &data, &PopulationOracle::ClosedForm, &SolverSettings::default()).unwrap();
        let mut best = (f64::INFINITY, 0);
        for (k, p) in params.iter().enumerate() {
            let obj = empirical_mean(&fam, p, &data).unwrap() + pen.value(p);
            if obj < best.0 {
                best = (obj, k);
            }
        }
        assert_eq!(r.minimizer, params[best.1]);
    }
}

#[test]
fn malformed_inputs_are_rejected() {
    assert!(FiniteFamily::new(vec![vec![0.0]], vec![vec![0.1, 0.2]], vec![1.0]).is_err());
    assert!(LinearFamily::new(
        Metric::isotropic(2, 1.0),
        vec![0.0; 3],
        Arc::new(|_: &Sample, _: &mut [f64]| {}),
        SampleLaw::uniform01()
    )
    .is_err());
    assert!(solve_regularized_ls(&[], &[], &Penalty::Zero, &SolverSettings::default()).is_err());
    assert!(Penalty::power(1.0, 2.5, Seminorm::Euclidean).validate().is_err());
}

fn vec2() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-5.0..5.0f64, 3)
}

fn sets() -> Vec<ConvexSet> {
    vec![
        ConvexSet::Box { lower: vec![-1.0, 0.0, -2.0], upper: vec![1.0, 0.5, 0.0] },
        ConvexSet::Ball { center: vec![0.5, 0.0, -0.5], radius: 1.5 },
        ConvexSet::L1Ball { center: vec![0.0; 3], radius: 1.0 },
        ConvexSet::Ellipsoid { center: vec![0.0; 3], weights: vec![1.0, 4.0, 9.0], radius: 1.0 },
        ConvexSet::Simplex { dim: 3, total: 1.0 },
    ]
}

proptest! {
    #[test]
    fn projections_are_feasible_idempotent_and_nonexpansive(x in vec2(), y in vec2()) {
        for set in sets() {
            let px = set.project(&x).unwrap();
            let py = set.project(&y).unwrap();
            prop_assert!(set.contains(&px, 1e-8));
            let ppx = set.project(&px).unwrap();
            prop_assert!(riskconc_core::linalg::dist(&ppx, &px) <= 1e-8);
            prop_assert!(riskconc_core::linalg::dist(&px, &py) <= riskconc_core::linalg::dist(&x, &y) + 1e-9);
        }
    }

    #[test]
    fn prox_is_nonexpansive(x in vec2(), y in vec2(), lam in 0.0..3.0f64, q in 1.1..2.0f64, eta in 0.01..10.0f64) {
        let pens = [
            Penalty::ridge(lam),
            Penalty::power(lam, q, Seminorm::Euclidean),
            Penalty::Squared { lambda: lam, seminorm: Seminorm::Weighted(vec![1.0, 2.0, 0.0]) },
            Penalty::indicator(ConvexSet::ball(3, 1.0)),
        ];
        for pen in &pens {
            let px = prox(pen, &x, eta).unwrap();
            let py = prox(pen, &y, eta).unwrap();
            prop_assert!(riskconc_core::linalg::dist(&px, &py) <= riskconc_core::linalg::dist(&x, &y) + 1e-7);
        }
    }

    #[test]
    fn prox_beats_perturbations(x in vec2(), lam in 0.0..3.0f64, eta in 0.01..10.0f64, d in vec2()) {
        let pen = Penalty::power(lam, 1.5, Seminorm::Euclidean);
        let p = prox(&pen, &x, eta).unwrap();
        let obj = |u: &[f64]| riskconc_core::linalg::dist(u, &x).powi(2) / (2.0 * eta) + pen.value(u);
        let q: Vec<f64> = p.iter().zip(&d).map(|(a, b)| a + 1e-3 * b).collect();
        prop_assert!(obj(&p) <= obj(&q) + 1e-10);
    }

    #[test]
    fn ridge_least_squares_closed_form(y in prop::collection::vec(-3.0..3.0f64, 1..8), lam in 0.0..4.0f64) {
        let n = y.len();
        let r = solve_regularized_ls(&y, &vec![0.0; n], &Penalty::ridge_n(lam, n), &SolverSettings::default()).unwrap();
        prop_assert!(r.converged);
        for (g, yi) in r.minimizer.iter().zip(&y) {
            prop_assert!((g - yi / (1.0 + lam)).abs() < 1e-8);
        }
    }

    #[test]
    fn excess_risk_is_nonnegative_and_tau_min_is_a_lower_bound(
        g0 in vec2(), g in vec2(), lam in 0.0..2.0f64
    ) {
        let fam = pure(g0);
        let pen = Penalty::ridge(lam);
        let oracle = PopulationOracle::ClosedForm;
        let e = excess_risk(&fam, &g, &pen, &oracle).unwrap();
        prop_assert!(e >= 0.0);
        let t = tau_min(&fam, &pen, &oracle).unwrap();
        prop_assert!(t.tau_sq <= e + 1e-9);
    }
}
