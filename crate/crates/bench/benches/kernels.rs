use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use riskconc_core::convex::{prox, solve_regularized_ls};
use riskconc_core::curve::{mean_e_curve, MonteCarloSpec, SGrid};
use riskconc_core::direct::{tail_report, NormalSequenceSpec, DEFAULT_T_GRID};
use riskconc_core::expfam::{log_partition, BaseDensity, BaseMeasure, ExpFamily};
use riskconc_core::{ConvexSet, Family, LinearFamily, Penalty, SolverSettings};

fn wave(d: usize) -> Vec<f64> {
    (0..d).map(|i| (0.7 * i as f64).sin()).collect()
}

fn solvers(c: &mut Criterion) {
    let mut g = c.benchmark_group("solve_regularized_ls");
    let settings = SolverSettings::default();
    for d in [10, 100, 1000] {
        let y = wave(d);
        let zero = vec![0.0; d];
        let pens = [
            ("ridge", Penalty::ridge(0.3)),
            ("ball", Penalty::indicator(ConvexSet::ball(d, 1.0))),
        ];
        for (name, pen) in &pens {
            g.bench_with_input(BenchmarkId::new(*name, d), &d, |b, _| {
                b.iter(|| solve_regularized_ls(black_box(&y), &zero, pen, &settings).unwrap())
            });
        }
    }
    g.finish();

    let v = wave(1000);
    let pen = Penalty::ridge(0.3);
    c.bench_function("prox/ridge/1000", |b| b.iter(|| prox(&pen, black_box(&v), 0.5).unwrap()));
}

fn curves(c: &mut Criterion) {
    let family = Family::Linear(LinearFamily::gaussian_location(vec![0.1, 0.0, -0.1], 1.0).unwrap());
    let grid = SGrid::uniform(0.0, 1.0, 0.05).unwrap();
    let spec = MonteCarloSpec::new(20, 50, 1);
    c.bench_function("mean_e_curve/d3/50reps", |b| {
        b.iter(|| mean_e_curve(&family, &Penalty::Zero, black_box(&spec), &grid).unwrap())
    });

    let tail = NormalSequenceSpec::new(200, 1.0, Penalty::ridge_n(0.1, 200), 10_000, 1);
    c.bench_function("tail_report/n200/1e4reps", |b| b.iter(|| tail_report(black_box(&tail), &DEFAULT_T_GRID).unwrap()));
}

fn partitions(c: &mut Criterion) {
    let mut g = c.benchmark_group("log_partition");
    for nodes in [64, 256, 1024] {
        let base = BaseMeasure::interval(-8.0, 8.0, BaseDensity::Gaussian { mean: 0.0, sd: 1.0 }).with_nodes(nodes);
        let family = ExpFamily::polynomial(base, 2, true).unwrap();
        g.bench_with_input(BenchmarkId::new("gaussian-poly2", nodes), &nodes, |b, _| {
            b.iter(|| log_partition(&family, black_box(&[0.2, -0.1])).unwrap())
        });
    }
    g.finish();
}

criterion_group!(kernels, solvers, curves, partitions);
criterion_main!(kernels);
