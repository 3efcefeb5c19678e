//! Benchmarks the Monte-Carlo solve stage: serial vs rayon-parallel
//! scenario batches on the nine-node feeder.

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion, Throughput};
use flexfor::experiment::{solve_batch, WorkerCount};
use flexfor::grid::{build_grid, FeederSpec};
use flexfor::sampling::sample_naive;

fn bench_solve_batch(c: &mut Criterion) {
    let grid = build_grid(&FeederSpec::canonical(9)).unwrap();
    let scenarios = sample_naive(&grid, 42, 512);

    let mut group = c.benchmark_group("solve_batch_n9");
    group.throughput(Throughput::Elements(scenarios.len() as u64));
    group.sample_size(20);

    group.bench_function("serial", |b| {
        b.iter(|| solve_batch(&grid, &scenarios, WorkerCount::Fixed(1)).unwrap())
    });
    group.bench_function("parallel_auto", |b| {
        b.iter(|| solve_batch(&grid, &scenarios, WorkerCount::Auto).unwrap())
    });
    // Fixed counts include the per-call pool construction, matching what a
    // `workers = n` configuration actually pays.
    for threads in [2usize, 4] {
        group.bench_with_input(
            BenchmarkId::new("parallel_fixed", threads),
            &threads,
            |b, &t| b.iter(|| solve_batch(&grid, &scenarios, WorkerCount::Fixed(t)).unwrap()),
        );
    }
    group.finish();
}

fn bench_feeder_family(c: &mut Criterion) {
    let mut group = c.benchmark_group("solve_batch_by_feeder");
    group.sample_size(20);
    for n in [1usize, 3, 9, 27] {
        let grid = build_grid(&FeederSpec::canonical(n)).unwrap();
        let scenarios = sample_naive(&grid, 42, 256);
        group.throughput(Throughput::Elements(scenarios.len() as u64));
        group.bench_with_input(BenchmarkId::new("auto", n), &n, |b, _| {
            b.iter(|| solve_batch(&grid, &scenarios, WorkerCount::Auto).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, bench_solve_batch, bench_feeder_family);
criterion_main!(benches);
