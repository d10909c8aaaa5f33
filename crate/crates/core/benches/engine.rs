//! Default rayon pool vs a single-thread pool over the same workloads.
//! Build with `--no-default-features` to bench the sequential fallback.

use std::hint::black_box;

use claimlot::claimsim::{run_concurrent, sweep_partial_bf, DistributionSpec, Family, SimulationConfig, SweepGrid};
use claimlot::lottery::{bf_lottery, partial_bf_lottery, SelectionOptions};
use claimlot::predict::{train, Matrix, ModelSpec};
use claimlot::{ClaimProfile, LotteryConfig, RandomSource};
use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

fn pools() -> Vec<(&'static str, rayon::ThreadPool)> {
    vec![
        ("pool_default", rayon::ThreadPoolBuilder::new().build().unwrap()),
        ("pool_1", rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap()),
    ]
}

fn simulation(c: &mut Criterion) {
    let spec = DistributionSpec::with_default_param(Family::Normal);
    let cfg = SimulationConfig {
        n: 1000,
        iterations: 100,
        m: 4,
        ..SimulationConfig::default()
    };
    let mut g = c.benchmark_group("run_concurrent");
    g.sample_size(10);
    for (name, pool) in pools() {
        g.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| pool.install(|| run_concurrent(black_box(&cfg), &spec, 1).unwrap()))
        });
    }
    g.finish();

    let grid = SweepGrid {
        kprime_rates: vec![0.25, 0.5, 0.75],
        nprime_rates: vec![0.3, 0.5],
    };
    let cfg = SimulationConfig {
        iterations: 50,
        m: 3,
        ..cfg
    };
    let mut g = c.benchmark_group("sweep_partial_bf");
    g.sample_size(10);
    for (name, pool) in pools() {
        g.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| pool.install(|| sweep_partial_bf(black_box(&cfg), &spec, &grid, 1).unwrap()))
        });
    }
    g.finish();
}

fn forest(c: &mut Criterion) {
    let mut rng = RandomSource::new(3, 0);
    let rows: Vec<Vec<f64>> = (0..2000).map(|_| (0..8).map(|_| rng.unit()).collect()).collect();
    let y: Vec<u8> = rows.iter().map(|r| (r[0] + r[1] > 1.0) as u8).collect();
    let x = Matrix::from_rows(&rows).unwrap();
    let spec = ModelSpec::forest();
    let mut g = c.benchmark_group("random_forest_fit");
    g.sample_size(10);
    for (name, pool) in pools() {
        g.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| pool.install(|| train(&spec, black_box(&x), &y, &RandomSource::new(4, 0)).unwrap()))
        });
    }
    g.finish();
}

fn lotteries(c: &mut Criterion) {
    let mut g = c.benchmark_group("lottery");
    for &n in &[1_000usize, 100_000] {
        let mut rng = RandomSource::new(9, 0);
        let p = ClaimProfile::new((0..n).map(|_| rng.unit()).collect()).unwrap();
        let k = n / 4;
        g.bench_with_input(BenchmarkId::new("bf", n), &n, |b, _| {
            b.iter(|| bf_lottery(&p, k, &mut rng).unwrap())
        });
        let cfg = LotteryConfig::partial_from_rates(n, k, 0.5, 0.25).unwrap();
        g.bench_with_input(BenchmarkId::new("partial_bf", n), &n, |b, _| {
            b.iter(|| partial_bf_lottery(&p, &cfg, &mut rng, SelectionOptions::untraced()).unwrap())
        });
    }
    g.finish();
}

criterion_group!(benches, simulation, forest, lotteries);
criterion_main!(benches);
