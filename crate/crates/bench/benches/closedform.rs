//! Closed forms against the dense solve, per frequency point.

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use qnet_bench::{critical_chain, layered_hybrid, lowered, spaced_parallel};
use qnet_core::closedform::{critical_coupling, hybrid_r_homogeneous, parallel_r_homogeneous, series_r};
use qnet_core::scatter::Prepared;
use std::hint::black_box;

fn series(c: &mut Criterion) {
    let mut group = c.benchmark_group("series");
    for n in [2usize, 10, 70] {
        let g = critical_coupling(1.0, 1.0);
        let chain = vec![g; n - 1];
        let detunings = vec![0.3; n];
        group.bench_with_input(BenchmarkId::new("continued_fraction", n), &n, |b, _| {
            b.iter(|| series_r(1.0, 1.0, black_box(&detunings), &chain).unwrap())
        });
        let prep = Prepared::new(&critical_chain(n));
        group.bench_with_input(BenchmarkId::new("dense", n), &n, |b, _| {
            b.iter(|| prep.smatrix(black_box(0.3)).unwrap())
        });
    }
    group.finish();
}

fn parallel(c: &mut Criterion) {
    let mut group = c.benchmark_group("parallel");
    for n in [5usize, 20] {
        let detunings: Vec<f64> = (0..n).map(|i| 0.3 - i as f64).collect();
        group.bench_with_input(BenchmarkId::new("cleared_sum", n), &n, |b, _| {
            b.iter(|| parallel_r_homogeneous(1.0, 1.0, black_box(&detunings)))
        });
        let prep = Prepared::new(&spaced_parallel(n));
        group.bench_with_input(BenchmarkId::new("dense", n), &n, |b, _| {
            b.iter(|| prep.smatrix(black_box(0.3)).unwrap())
        });
    }
    group.finish();
}

fn hybrid(c: &mut Criterion) {
    let h = layered_hybrid(3, 3);
    let prep = Prepared::new(&lowered(&h));
    let mut group = c.benchmark_group("hybrid_3x3");
    group.bench_function("continued_fraction", |b| b.iter(|| hybrid_r_homogeneous(&h, black_box(0.3)).unwrap()));
    group.bench_function("dense", |b| b.iter(|| prep.smatrix(black_box(0.3)).unwrap()));
    group.finish();
}

criterion_group!(benches, series, parallel, hybrid);
criterion_main!(benches);
