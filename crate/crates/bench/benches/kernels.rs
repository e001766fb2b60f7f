use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};
use geobal_core::factorize::shared_interactions_totals;
use geobal_core::lp::{assemble, mps};
use geobal_core::model::synthesize_system;
use geobal_core::residual::positive_events;
use geobal_core::solver::solve;
use geobal_core::{FactorState, MetricTable, SolveOptions};

fn lp_kernels(c: &mut Criterion) {
    let week = synthesize_system(7, 2, 168, -0.9).unwrap();
    c.bench_function("assemble 2x168", |b| b.iter(|| assemble(black_box(&week)).unwrap()));

    let (lp, _) = assemble(&week).unwrap();
    c.bench_function("to_mps 2x168", |b| b.iter(|| mps::to_mps(black_box(&lp))));
    let text = mps::to_mps(&lp);
    c.bench_function("parse_mps 2x168", |b| {
        b.iter(|| mps::parse_mps(black_box(&text)).unwrap())
    });

    let two_days = synthesize_system(7, 2, 48, -0.9).unwrap();
    let (small, _) = assemble(&two_days).unwrap();
    let options = SolveOptions::default();
    let mut g = c.benchmark_group("simplex");
    g.sample_size(10);
    g.bench_function("solve 2x48", |b| b.iter(|| solve(black_box(&small), &options).unwrap()));
    g.finish();
}

fn analysis_kernels(c: &mut Criterion) {
    let states = FactorState::NATIVE.subsets();
    let values = states
        .iter()
        .enumerate()
        .map(|(i, s)| (*s, ((i * 7919) % 1009) as f64 - 500.0));
    let table = MetricTable::from_values("bench", FactorState::NATIVE, values).unwrap();
    c.bench_function("shared_interactions_totals 2^6", |b| {
        b.iter(|| shared_interactions_totals(black_box(&table)).unwrap())
    });

    let series: Vec<f64> = (0..8760)
        .map(|h| (h as f64 * 0.013).sin() * 40.0 + (h as f64 * 0.261).cos() * 25.0)
        .collect();
    c.bench_function("positive_events 8760 h", |b| {
        b.iter(|| positive_events("DE", black_box(&series)))
    });
}

criterion_group!(benches, lp_kernels, analysis_kernels);
criterion_main!(benches);
