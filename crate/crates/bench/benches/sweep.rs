use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion, Throughput};
use qnet_bench::{critical_chain, grid, layered_hybrid, lowered, spaced_parallel};
use qnet_core::scatter::{poles, sweep};

fn dense_sweep(c: &mut Criterion) {
    let mut group = c.benchmark_group("sweep");
    let points = 1000;
    group.throughput(Throughput::Elements(points as u64));
    for n in [2, 10, 70] {
        let net = critical_chain(n);
        let g = grid(2.0, points);
        group.bench_with_input(BenchmarkId::new("chain", n), &n, |b, _| b.iter(|| sweep(&net, &g).unwrap()));
    }
    for n in [5, 20] {
        let net = spaced_parallel(n);
        let g = grid(n as f64, points);
        group.bench_with_input(BenchmarkId::new("parallel", n), &n, |b, _| b.iter(|| sweep(&net, &g).unwrap()));
    }
    let hybrid = lowered(&layered_hybrid(3, 3));
    let g = grid(6.0, points);
    group.bench_function("hybrid/3x3", |b| b.iter(|| sweep(&hybrid, &g).unwrap()));
    group.finish();
}

fn eigen(c: &mut Criterion) {
    let mut group = c.benchmark_group("poles");
    for n in [10, 70] {
        let net = critical_chain(n);
        group.bench_with_input(BenchmarkId::new("chain", n), &n, |b, _| b.iter(|| poles(&net).unwrap()));
    }
    group.finish();
}

criterion_group!(benches, dense_sweep, eigen);
criterion_main!(benches);
