//! Hot-loop benchmarks: forward/tangent/adjoint sweeps, the metric
//! quadratic form, the dense metric with its spectrum, and one full
//! direction solve.

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use fip_bench::fixture;
use fip_core::metric::{metric_spectrum, output_distance_sq, MetricEvaluation};
use fip_core::net::{forward, jvp, vjp};
use fip_core::path::{fip_direction, PathConfig};
use std::hint::black_box;

fn bench_net_sweeps(c: &mut Criterion) {
    let mut group = c.benchmark_group("net");
    for dims in [vec![2, 16, 2], vec![2, 64, 64, 2], vec![16, 128, 10]] {
        let label = dims
            .iter()
            .map(|d| d.to_string())
            .collect::<Vec<_>>()
            .join("x");
        let fix = fixture(dims, 1, 7);
        let x = fix.batch.input(0).to_vec();
        let v = vec![1.0; fix.spec.output_dim()];
        group.bench_with_input(BenchmarkId::new("forward", &label), &fix, |b, fix| {
            b.iter(|| forward(&fix.spec, &fix.w, black_box(&x)).unwrap())
        });
        group.bench_with_input(BenchmarkId::new("jvp", &label), &fix, |b, fix| {
            b.iter(|| jvp(&fix.spec, &fix.w, black_box(&x), &fix.dw).unwrap())
        });
        group.bench_with_input(BenchmarkId::new("vjp", &label), &fix, |b, fix| {
            b.iter(|| vjp(&fix.spec, &fix.w, black_box(&x), &v).unwrap())
        });
    }
    group.finish();
}

fn bench_metric(c: &mut Criterion) {
    let mut group = c.benchmark_group("metric");
    let fix = fixture(vec![2, 64, 64, 2], 64, 11);
    let me = MetricEvaluation::new(&fix.spec, &fix.w, &fix.batch).unwrap();
    group.bench_function("quadratic_form_batch64", |b| {
        b.iter(|| output_distance_sq(&me, black_box(&fix.dw)).unwrap())
    });
    group.bench_function("quadratic_form_and_grad_batch64", |b| {
        b.iter(|| me.quadratic_form_and_grad(black_box(&fix.dw)).unwrap())
    });

    let small = fixture(vec![2, 16, 2], 32, 13);
    let me_small = MetricEvaluation::new(&small.spec, &small.w, &small.batch).unwrap();
    group.bench_function("spectrum_2x16x2", |b| {
        b.iter(|| metric_spectrum(&me_small, 1e-6).unwrap())
    });
    group.finish();
}

fn bench_direction_solve(c: &mut Criterion) {
    let fix = fixture(vec![2, 16, 2], 64, 17);
    let me = MetricEvaluation::new(&fix.spec, &fix.w, &fix.batch).unwrap();
    let cfg = PathConfig::new(1e-3, 1).with_seed(3);
    c.bench_function("fip_direction_2x16x2_batch64", |b| {
        b.iter(|| fip_direction(&me, None, black_box(&cfg)).unwrap())
    });
}

criterion_group!(benches, bench_net_sweeps, bench_metric, bench_direction_solve);
criterion_main!(benches);
