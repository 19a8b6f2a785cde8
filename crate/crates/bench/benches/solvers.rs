//! Limit-solver benchmarks: fixed points, inversion, and curve tabulation.

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use std::hint::black_box;

use primperc::limits::{ell_inverse, extinction_probabilities, linear_limit_curve, ThetaParams};

fn bench_extinction(c: &mut Criterion) {
    let params = ThetaParams::new(0.3).unwrap();
    let mut group = c.benchmark_group("extinction_pair");
    for lambda in [1.001f64, 1.1, 2.0, 10.0] {
        group.bench_with_input(BenchmarkId::from_parameter(lambda), &lambda, |b, &l| {
            b.iter(|| extinction_probabilities(black_box(&params), l).unwrap())
        });
    }
    group.finish();
}

fn bench_inverse(c: &mut Criterion) {
    let params = ThetaParams::new(0.3).unwrap();
    let mut group = c.benchmark_group("depth_inverse");
    for s in [0.01f64, 0.5, 0.99] {
        group.bench_with_input(BenchmarkId::from_parameter(s), &s, |b, &s| {
            b.iter(|| ell_inverse(black_box(&params), s).unwrap())
        });
    }
    group.finish();
}

fn bench_curve(c: &mut Criterion) {
    let params = ThetaParams::new(0.7).unwrap();
    c.bench_function("limit_curve_256", |b| {
        b.iter(|| linear_limit_curve(black_box(&params), 256).unwrap())
    });
}

criterion_group!(benches, bench_extinction, bench_inverse, bench_curve);
criterion_main!(benches);
