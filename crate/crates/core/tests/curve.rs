use proptest::prelude::*;
use rand::Rng as _;
use riskconc_core::curve::{
    argmin_curve, argmin_points, concavity_check, concavity_check_points, hat_e, hat_e_curve, kappa_gamma, mean_e_curve,
    shifted_curve, shifted_ordering_check, varsigma_curve, verify_minimum_lemma, CurveKind, MonteCarloSpec, RiskCurve,
    SGrid,
};
use riskconc_core::linalg::norm;
use riskconc_core::rng::replicate_rng;
use riskconc_core::{ConvexSet, Dataset, Family, FiniteFamily, LinearFamily, Penalty, PopulationOracle, SolverSettings};
use statrs::function::gamma::ln_gamma;

const CF: PopulationOracle = PopulationOracle::ClosedForm;

/// Random finite family whose reference is the population risk minimizer.
fn finite_instance(seed: u64, k: usize, atoms: usize) -> (FiniteFamily, Vec<Vec<f64>>, Vec<f64>) {
    let mut rng = replicate_rng(seed, 99);
    let mut probs: Vec<f64> = (0..atoms).map(|_| rng.random::<f64>() + 0.1).collect();
    let tot: f64 = probs.iter().sum();
    probs.iter_mut().for_each(|p| *p /= tot);
    let table: Vec<Vec<f64>> = (0..k).map(|_| (0..atoms).map(|_| rng.random::<f64>()).collect()).collect();
    let params: Vec<Vec<f64>> = (0..k).map(|i| vec![i as f64, rng.random::<f64>()]).collect();
    let means: Vec<f64> = table.iter().map(|r| r.iter().zip(&probs).map(|(a, b)| a * b).sum()).collect();
    let r = (0..k).min_by(|a, b| means[*a].total_cmp(&means[*b])).unwrap();
    let fam = FiniteFamily::new(params.clone(), table.clone(), probs).unwrap().with_reference(r).unwrap();
    (fam, params, means)
}

/// Exhaustive `Ê_n(s)` for a finite family.
fn exhaustive_hat_e(fam: &FiniteFamily, pen: &Penalty, data: &Dataset, s: f64) -> f64 {
    let r = fam.reference_index().unwrap();
    let emp = fam.empirical_means(data).unwrap();
    let pop = fam.population_means();
    let mut best = f64::NEG_INFINITY;
    for (k, p) in fam.params().iter().enumerate() {
        let level = pop[k] - pop[r] + pen.value(p);
        if level <= s * s + 1e-12 {
            best = best.max((emp[r] - emp[k]) - (pop[r] - pop[k]));
        }
    }
    best
}

fn pure(g0: Vec<f64>) -> Family {
    Family::Linear(LinearFamily::gaussian_location(g0, 1.0).unwrap())
}

#[test]
fn hat_e_examples() {
    // Feasible set {f⁰}.
    let single = Family::Finite(FiniteFamily::new(vec![vec![0.0]], vec![vec![0.2, 0.7]], vec![0.5, 0.5]).unwrap().with_reference(0).unwrap());
    let data = Dataset::scalars(&[0.0, 1.0, 1.0]).unwrap();
    assert_eq!(hat_e(&single, &Penalty::Zero, &data, &CF, 0.3).unwrap().value, 0.0);

    // Cauchy–Schwarz in the pure linear case.
    let fam = pure(vec![0.2, -0.1, 0.4]);
    let Family::Linear(lf) = &fam else { unreachable!() };
    let mut rng = replicate_rng(1, 1);
    let data = lf.law().draw(&mut rng, 30).unwrap();
    let v = lf.process_vector(&data);
    for s in [0.01, 0.1, 1.0] {
        let e = hat_e(&fam, &Penalty::Zero, &data, &CF, s).unwrap();
        assert!((e.value - s * norm(&v)).abs() < 1e-10 * s.max(1.0), "{} vs {}", e.value, s * norm(&v));
    }

    // Finite family with 7 functions.
    let (fam, _, _) = finite_instance(4, 7, 5);
    let pen = Penalty::ridge(0.2);
    let f = Family::Finite(fam.clone());
    let mut rng = replicate_rng(2, 0);
    let data = fam.law().draw(&mut rng, 26).unwrap();
    for s in [0.2, 0.4, 0.6, 1.0, 2.0] {
        let e = hat_e(&f, &pen, &data, &CF, s);
        let want = exhaustive_hat_e(&fam, &pen, &data, s);
        match e {
            Ok(e) => assert_eq!(e.value, want),
            Err(_) => assert!(want == f64::NEG_INFINITY),
        }
    }
}

#[test]
fn degenerate_family_has_zero_mean_curve() {
    let single = Family::Finite(FiniteFamily::new(vec![vec![1.0]], vec![vec![0.3, -0.2, 0.9]], vec![0.2, 0.3, 0.5]).unwrap().with_reference(0).unwrap());
    let grid = SGrid::uniform(0.0, 1.0, 0.1).unwrap();
    let c = mean_e_curve(&single, &Penalty::Zero, &MonteCarloSpec::new(10, 20, 3), &grid).unwrap();
    assert!(c.values.iter().all(|v| *v == 0.0));
}

fn chi_mean(d: usize) -> f64 {
    let df = d as f64;
    2f64.sqrt() * (ln_gamma((df + 1.0) / 2.0) - ln_gamma(df / 2.0)).exp()
}

#[test]
fn pure_linear_mean_curve_is_linear() {
    let (d, n) = (4, 50);
    let fam = pure(vec![0.0; d]);
    let grid = SGrid::uniform(0.05, 1.0, 0.05).unwrap();
    let c = mean_e_curve(&fam, &Penalty::Zero, &MonteCarloSpec::new(n, 4000, 8), &grid).unwrap();
    let slope = c.values[0] / grid.points()[0];
    for (s, v) in grid.points().iter().zip(&c.values) {
        assert!((v / s - slope).abs() < 1e-9 * slope);
    }
    // v ~ N(0, I/n): E‖v‖ = E χ_d / √n.
    let want = chi_mean(d) / (n as f64).sqrt();
    let se = c.se.as_ref().unwrap()[0] / grid.points()[0];
    assert!((slope - want).abs() <= 3.0 * se, "{slope} vs {want} ± {se}");
}

#[test]
fn standard_error_follows_root_n() {
    let fam = pure(vec![0.0; 3]);
    let grid = SGrid::uniform(0.5, 0.5, 0.1).unwrap();
    let se = |reps| {
        let c = mean_e_curve(&fam, &Penalty::Zero, &MonteCarloSpec::new(40, reps, 21), &grid).unwrap();
        c.se.unwrap()[0]
    };
    let (s1, s2, s4) = (se(2000), se(4000), se(8000));
    assert!((s2 / s1 - 0.5f64.sqrt()).abs() < 0.2 * 0.5f64.sqrt());
    assert!((s4 / s1 - 0.5).abs() < 0.2 * 0.5);
}

fn curve_of(points: Vec<f64>, f: impl Fn(f64) -> f64) -> RiskCurve {
    let values = points.iter().map(|s| f(*s)).collect();
    RiskCurve::from_values(SGrid::from_points(points).unwrap(), values, CurveKind::EmpiricalSingle).unwrap()
}

#[test]
fn argmin_examples() {
    let a = argmin_curve(&curve_of((0..=100).map(|i| i as f64 / 100.0).collect(), |s| s)).unwrap();
    assert_eq!(a.s, 0.5);
    assert!((a.value + 0.25).abs() < 1e-15);
    let a = argmin_curve(&curve_of((1..=200).map(|i| i as f64 / 100.0).collect(), |s| 4.0 * s.sqrt())).unwrap();
    assert!((a.s - 1.0).abs() < 1e-12);
}

#[test]
fn minimum_lemma_is_exact_on_finite_families() {
    let grid = SGrid::uniform(0.0, 1.0, 0.01).unwrap();
    for i in 0..100u64 {
        let k = 5 + (i as usize % 16);
        let n = if i % 2 == 0 { 20 } else { 100 };
        let (fam, _, _) = finite_instance(i, k, 6);
        let mut rng = replicate_rng(i, 7);
        let data = fam.law().draw(&mut rng, n).unwrap();
        let pen = Penalty::ridge(0.1 * (i % 3) as f64);
        let chk = verify_minimum_lemma(&Family::Finite(fam), &pen, &data, &CF, &grid, &SolverSettings::default()).unwrap();
        assert!(chk.exhaustive);
        assert_eq!(chk.gap, 0.0, "instance {i}: {chk:?}");
    }
}

#[test]
fn minimum_lemma_on_pure_ball() {
    let grid = SGrid::uniform(0.0, 1.0, 1e-3).unwrap();
    let g0 = vec![0.1, -0.2];
    let fam = LinearFamily::gaussian_location(g0.clone(), 1.0)
        .unwrap()
        .with_domain(ConvexSet::Ball { center: g0, radius: 0.3 })
        .unwrap();
    let fam = Family::Linear(fam);
    for seed in 0..20 {
        let mut rng = replicate_rng(seed, 3);
        let data = fam.law().draw(&mut rng, 50).unwrap();
        let chk = verify_minimum_lemma(&fam, &Penalty::Zero, &data, &CF, &grid, &SolverSettings::default()).unwrap();
        assert!((chk.tau_hat - chk.s_hat).abs() <= 1e-3 + 1e-6, "{chk:?}");
    }
}

#[test]
fn varsigma_matches_hat_e_in_the_pure_case() {
    let fam = pure(vec![0.3, 0.3]);
    let Family::Linear(lf) = &fam else { unreachable!() };
    let data = lf.law().draw(&mut replicate_rng(5, 5), 40).unwrap();
    let grid = SGrid::geometric(0.01, 2.0, 1.1).unwrap();
    let a = hat_e_curve(&fam, &Penalty::Zero, &data, &CF, &grid).unwrap();
    let b = varsigma_curve(&fam, &Penalty::Zero, &data, &CF, 1.0, &grid).unwrap();
    for (x, y) in a.values.iter().zip(&b.values) {
        assert!((x - y).abs() < 1e-10 * x.abs().max(1.0));
    }
}

#[test]
fn concavity_examples() {
    let pts: Vec<f64> = (0..=38).map(|i| 0.1 + 0.05 * i as f64).collect();
    assert!(concavity_check(&curve_of(pts.clone(), f64::sqrt), 1e-12).unwrap().passed);
    let v = concavity_check(&curve_of(pts, |s| s * s), 1e-12).unwrap();
    assert!(!v.passed && v.counterexample.is_some());
}

#[test]
fn varsigma_curve_is_concave_for_linear_processes() {
    let grid = SGrid::uniform(0.0, 1.5, 0.01).unwrap();
    for seed in 0..50 {
        let fam = pure(vec![0.5, -0.2, 0.1]);
        let Family::Linear(lf) = &fam else { unreachable!() };
        let data = lf.law().draw(&mut replicate_rng(seed, 11), 25).unwrap();
        let pen = Penalty::ridge(0.5);
        let c = varsigma_curve(&fam, &pen, &data, &CF, 1.0, &grid);
        let c = match c {
            Ok(c) => c,
            Err(_) => {
                // Grid must start at τ_min for a penalized family.
                let tm = riskconc_core::model::tau_min(&fam, &pen, &CF).unwrap().tau();
                let g = SGrid::uniform(tm, 1.5, 0.01).unwrap();
                varsigma_curve(&fam, &pen, &data, &CF, 1.0, &g).unwrap()
            }
        };
        assert!(concavity_check(&c, 1e-8).unwrap().passed, "seed {seed}");
    }
}

#[test]
fn shifted_curve_identities() {
    let fam = pure(vec![0.0, 0.4]);
    let Family::Linear(lf) = &fam else { unreachable!() };
    let data = lf.law().draw(&mut replicate_rng(6, 0), 60).unwrap();
    let grid = SGrid::uniform(0.0, 1.0, 0.05).unwrap();
    let f0 = shifted_curve(&fam, &Penalty::Zero, &data, &CF, 0.0, &grid).unwrap();
    let e = hat_e_curve(&fam, &Penalty::Zero, &data, &CF, &grid).unwrap();
    assert_eq!(f0.values, e.values);

    let tau2 = 0.3;
    let f = shifted_curve(&fam, &Penalty::Zero, &data, &CF, tau2, &grid).unwrap();
    let s_pts: Vec<f64> = grid.points().iter().map(|st| (tau2 + st * st).sqrt()).collect();
    let e = hat_e_curve(&fam, &Penalty::Zero, &data, &CF, &SGrid::from_points(s_pts.clone()).unwrap()).unwrap();
    for ((st, fv), (s, ev)) in grid.points().iter().zip(&f.values).zip(s_pts.iter().zip(&e.values)) {
        let lhs = st * st - fv;
        let rhs = s * s - ev - tau2;
        assert!((lhs - rhs).abs() < 1e-12);
    }

    let (ff, _, _) = finite_instance(9, 10, 4);
    let data = ff.law().draw(&mut replicate_rng(9, 1), 30).unwrap();
    let pen = Penalty::Zero;
    let f = shifted_curve(&Family::Finite(ff.clone()), &pen, &data, &CF, 0.1, &grid).unwrap();
    for (st, v) in grid.points().iter().zip(&f.values) {
        assert_eq!(*v, exhaustive_hat_e(&ff, &pen, &data, (0.1 + st * st).sqrt()));
    }
}

#[test]
fn kappa_examples() {
    let fam = pure(vec![0.2, 0.2]);
    let grid = SGrid::uniform(0.1, 1.0, 0.1).unwrap();
    let r = kappa_gamma(&fam, &Penalty::Zero, &CF, 0.0, &grid).unwrap();
    for (s, k) in r.points.iter().zip(&r.kappa) {
        assert!((s - k).abs() < 1e-12);
    }
    assert!((r.gamma_hat - 1.0).abs() < 1e-12);

    let mut last = 0.0;
    for start in [0.1, 0.01, 0.001] {
        let grid = SGrid::uniform(start, 1.0, start).unwrap();
        let r = kappa_gamma(&fam, &Penalty::Zero, &CF, 1.0, &grid).unwrap();
        for (s, k) in r.points.iter().zip(&r.kappa) {
            assert!((k - (1.0 + s * s).sqrt()).abs() < 1e-12);
        }
        assert!(r.attained_at_start && r.gamma_hat > last);
        last = r.gamma_hat;
    }
}

#[test]
fn ordering_examples() {
    let c = shifted_ordering_check(2.0, 1.0, 0.0).unwrap();
    assert_eq!(c.lhs, c.rhs);
    let c = shifted_ordering_check(2.0, 1.0, 0.75).unwrap();
    assert!((c.lhs - (3.25f64.sqrt() - 0.5)).abs() < 1e-12 && c.holds);
}

proptest! {
    #[test]
    fn shifted_ordering_holds(s in 0.0..5.0f64, s0 in 0.0..5.0f64, frac in 0.0..1.0f64) {
        let t2 = frac * s.min(s0).powi(2);
        let c = shifted_ordering_check(s, s0, t2).unwrap();
        prop_assert!(c.lhs - c.rhs >= -1e-12);
    }

    #[test]
    fn grid_argmin_within_one_coarse_step_of_refined(
        knots in prop::collection::vec(0.0..1.0f64, 2..6), a0 in 0.5..3.0f64
    ) {
        // Concave piecewise-linear: decreasing slopes.
        let mut slopes: Vec<f64> = knots.iter().map(|k| a0 * (1.0 - k)).collect();
        slopes.sort_by(|a, b| b.total_cmp(a));
        let f = |s: f64| {
            let w = 2.0 / slopes.len() as f64;
            let mut acc = 0.0;
            for (i, sl) in slopes.iter().enumerate() {
                let lo = i as f64 * w;
                acc += sl * (s - lo).clamp(0.0, w);
            }
            acc
        };
        let coarse: Vec<f64> = (0..=40).map(|i| i as f64 * 0.05).collect();
        let fine: Vec<f64> = (0..=400).map(|i| i as f64 * 0.005).collect();
        let obj = |pts: &[f64]| pts.iter().map(|s| s * s - f(*s)).collect::<Vec<_>>();
        let c = argmin_points(&coarse, &obj(&coarse)).unwrap();
        let r = argmin_points(&fine, &obj(&fine)).unwrap();
        prop_assert!((c.s - r.s).abs() <= 0.05 + 1e-12);
    }

    #[test]
    fn concave_samples_pass(a in 0.1..5.0f64, p in 0.1..1.0f64) {
        let pts: Vec<f64> = (1..=50).map(|i| i as f64 / 10.0).collect();
        let vals: Vec<f64> = pts.iter().map(|s| a * s.powf(p)).collect();
        prop_assert!(concavity_check_points(&pts, &vals, 1e-12).unwrap().passed);
    }
}
