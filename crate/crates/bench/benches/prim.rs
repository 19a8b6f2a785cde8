//! Traversal engine benchmarks: full runs and truncated prefixes.

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use std::hint::black_box;

use primperc::prim::{run_prim, StartPolicy};
use primperc_bench::fixture;

fn bench_full_run(c: &mut Criterion) {
    let mut group = c.benchmark_group("prim_full");
    for n in [200u32, 500, 1000] {
        let (spec, oracle) = fixture(n / 2, n - n / 2);
        group.bench_with_input(BenchmarkId::from_parameter(n), &n, |b, _| {
            b.iter(|| {
                run_prim(black_box(&spec), &oracle, StartPolicy::UniformAll, None).unwrap()
            })
        });
    }
    group.finish();
}

fn bench_truncated_run(c: &mut Criterion) {
    let mut group = c.benchmark_group("prim_prefix");
    group.sample_size(20);
    for n in [2000u32, 8000] {
        let (spec, oracle) = fixture(n / 2, n - n / 2);
        let k = (n as f64).powf(2.0 / 3.0).floor() as usize;
        group.bench_with_input(BenchmarkId::from_parameter(n), &n, |b, _| {
            b.iter(|| {
                run_prim(black_box(&spec), &oracle, StartPolicy::UniformAll, Some(k)).unwrap()
            })
        });
    }
    group.finish();
}

criterion_group!(benches, bench_full_run, bench_truncated_run);
criterion_main!(benches);
