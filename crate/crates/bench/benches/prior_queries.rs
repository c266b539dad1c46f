use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use std::hint::black_box;
use tweedie_prox_testbench::{problem, PRIORS};

fn mmse(c: &mut Criterion) {
    let mut group = c.benchmark_group("mmse");
    for name in PRIORS {
        let p = problem(name).unwrap();
        group.bench_with_input(BenchmarkId::from_parameter(name), &p, |b, p| {
            b.iter(|| p.prior().mmse(black_box(0.3), black_box(p.y())).unwrap())
        });
    }
    group.finish();
}

fn derivatives(c: &mut Criterion) {
    let mut group = c.benchmark_group("smoothed_derivatives");
    for name in PRIORS {
        let p = problem(name).unwrap();
        group.bench_with_input(BenchmarkId::from_parameter(name), &p, |b, p| {
            b.iter(|| p.prior().smoothed_derivatives(black_box(0.3), black_box(p.y())).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, mmse, derivatives);
criterion_main!(benches);
