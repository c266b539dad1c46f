use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use std::hint::black_box;
use tweedie_prox::prox::{exact_prox, exact_smoothed_prox, run_prox_iteration};
use tweedie_prox::{Reference, Schedule, StepForm};
use tweedie_prox_testbench::{problem, PRIORS};

fn iteration(c: &mut Criterion) {
    let mut group = c.benchmark_group("prox_iteration_1000");
    group.sample_size(20);
    for name in PRIORS {
        let p = problem(name).unwrap();
        let schedule = Schedule::paper_default(p.tau()).unwrap();
        group.bench_with_input(BenchmarkId::from_parameter(name), &p, |b, p| {
            b.iter(|| run_prox_iteration(p, &schedule, black_box(1000), StepForm::Averaging, &Reference::None).unwrap())
        });
    }
    group.finish();
}

fn newton(c: &mut Criterion) {
    let mut group = c.benchmark_group("newton");
    for name in PRIORS {
        let p = problem(name).unwrap();
        group.bench_with_input(BenchmarkId::new("exact_prox", name), &p, |b, p| {
            b.iter(|| exact_prox(p, black_box(1e-12)).unwrap())
        });
        group.bench_with_input(BenchmarkId::new("smoothed_prox", name), &p, |b, p| {
            b.iter(|| exact_smoothed_prox(p, black_box(0.1), 1e-12).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, iteration, newton);
criterion_main!(benches);
