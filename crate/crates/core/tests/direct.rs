use proptest::prelude::*;
use riskconc_core::direct::{estimate_m0, lipschitz_check, simulate_errors, tail_report, NormalSequenceSpec, DEFAULT_T_GRID};
use riskconc_core::{ConvexSet, Penalty};
use statrs::function::gamma::ln_gamma;

/// `E‖ε‖_n` for `ε ~ N(0, σ²I_n)`: `σ·√2·Γ((n+1)/2)/Γ(n/2)/√n`.
fn chi_mean(n: usize, sigma: f64) -> f64 {
    let nf = n as f64;
    sigma * 2f64.sqrt() * (ln_gamma((nf + 1.0) / 2.0) - ln_gamma(nf / 2.0)).exp() / nf.sqrt()
}

#[test]
fn m0_matches_chi_mean() {
    let want = chi_mean(2, 1.0);
    assert!((want - 0.886_226_925).abs() < 1e-8);
    let sim = simulate_errors(&NormalSequenceSpec::new(2, 1.0, Penalty::Zero, 100_000, 5)).unwrap();
    let (m, se) = estimate_m0(&sim.values).unwrap();
    assert!((m - want).abs() <= 3.0 * se, "{m} ± {se} vs {want}");

    let sim2 = simulate_errors(&NormalSequenceSpec::new(2, 2.0, Penalty::Zero, 100_000, 5)).unwrap();
    let (m2, _) = estimate_m0(&sim2.values).unwrap();
    assert!((m2 - 2.0 * m).abs() < 1e-12);
}

#[test]
fn tail_reports_have_no_flags() {
    let n = 200;
    let pens = [
        Penalty::Zero,
        Penalty::indicator(ConvexSet::Box { lower: vec![-1.0; n], upper: vec![1.0; n] }),
    ];
    for pen in pens {
        let spec = NormalSequenceSpec::new(n, 1.0, pen, 20_000, 11);
        let rep = tail_report(&spec, &[0.5, 1.0, 2.0, 3.0]).unwrap();
        assert_eq!(rep.rows.len(), 4);
        assert!(rep.flagged().is_empty(), "{:?}", rep.rows);
        for row in &rep.rows {
            assert!((row.bound - (-row.t).exp()).abs() < 1e-15);
        }
    }
}

#[test]
fn csv_has_one_row_per_t() {
    let spec = NormalSequenceSpec::new(20, 1.0, Penalty::ridge_n(0.1, 20), 400, 2);
    let rep = tail_report(&spec, &DEFAULT_T_GRID).unwrap();
    let csv = rep.to_csv();
    assert_eq!(csv.lines().count(), 1 + DEFAULT_T_GRID.len());
    assert!(csv.starts_with("t,bound,freq,se,flagged"));
}

#[test]
fn lipschitz_ratios() {
    let spec = NormalSequenceSpec::new(8, 1.0, Penalty::Zero, 2, 3);
    let r = lipschitz_check(&spec, 200).unwrap();
    assert!((r.max_ratio - 1.0).abs() < 1e-12 && (r.min_ratio - 1.0).abs() < 1e-12);

    let spec = NormalSequenceSpec::new(8, 1.0, Penalty::indicator(ConvexSet::Box { lower: vec![-0.5; 8], upper: vec![0.5; 8] }), 2, 3);
    let r = lipschitz_check(&spec, 1000).unwrap();
    assert!(r.max_ratio <= 1.0 + 1e-6);
    assert_eq!(r.quarantined, 0);
}

#[test]
fn invalid_specs() {
    assert!(simulate_errors(&NormalSequenceSpec::new(3, -1.0, Penalty::Zero, 10, 0)).is_err());
    assert!(simulate_errors(&NormalSequenceSpec::new(3, 1.0, Penalty::Zero, 1, 0)).is_err());
    assert!(simulate_errors(&NormalSequenceSpec::new(3, 1.0, Penalty::Zero, 10, 0).with_g0(vec![0.0; 2])).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn simulation_is_seed_deterministic(seed in any::<u64>(), lam in 0.0..2.0f64) {
        let spec = NormalSequenceSpec::new(6, 1.0, Penalty::ridge_n(lam, 6), 16, seed);
        prop_assert_eq!(simulate_errors(&spec).unwrap(), simulate_errors(&spec).unwrap());
    }

    #[test]
    fn ridge_contracts_by_one_plus_lambda(seed in any::<u64>(), lam in 0.0..3.0f64) {
        let spec = NormalSequenceSpec::new(4, 1.0, Penalty::ridge_n(lam, 4), 2, seed);
        let r = lipschitz_check(&spec, 20).unwrap();
        let want = 1.0 / (1.0 + lam);
        prop_assert!((r.max_ratio - want).abs() < 1e-8 && (r.min_ratio - want).abs() < 1e-8);
    }

    #[test]
    fn tail_frequencies_are_probabilities(seed in any::<u64>()) {
        let spec = NormalSequenceSpec::new(5, 1.0, Penalty::Zero, 200, seed);
        let rep = tail_report(&spec, &DEFAULT_T_GRID).unwrap();
        for row in rep.rows {
            prop_assert!((0.0..=1.0).contains(&row.freq) && row.se >= 0.0);
        }
    }
}
