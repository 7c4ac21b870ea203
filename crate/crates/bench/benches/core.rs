use std::hint::black_box;

use alphapred_core::appendix_lab::{moments, Moment};
use alphapred_core::marginal::harmonic_marginal;
use alphapred_core::predictive::{harmonic_shape, ln_normalizer};
use alphapred_core::risk::risk_difference_crn;
use alphapred_core::ProblemSpec;
use criterion::{criterion_group, criterion_main, Criterion};

fn marginal(c: &mut Criterion) {
    c.bench_function("harmonic_marginal d=5", |b| {
        b.iter(|| harmonic_marginal(black_box(3.7), black_box(1.0), 5).unwrap())
    });
}

fn normalizer(c: &mut Criterion) {
    let spec = ProblemSpec::new(3, 1.0, 1.0, 0.0).unwrap();
    let shape = harmonic_shape(&spec).unwrap();
    let xi = spec.derived().unwrap().xi;
    c.bench_function("ln_normalizer harmonic d=3", |b| {
        b.iter(|| ln_normalizer(&shape, black_box(1.3), xi, 3).unwrap())
    });
}

fn crn(c: &mut Criterion) {
    let spec = ProblemSpec::new(3, 1.0, 1.0, 0.0).unwrap();
    let mut group = c.benchmark_group("risk_difference_crn");
    group.sample_size(10);
    group.bench_function("d=3 n=1e4", |b| {
        b.iter(|| risk_difference_crn(&spec, black_box(&[0.5, 0.0, 0.0]), 10_000, 7).unwrap())
    });
    group.finish();
}

fn hypercube(c: &mut Criterion) {
    let list = [
        Moment::Rho { j1: 0, j2: 0, l: 0 },
        Moment::Rho { j1: 1, j2: 0, l: -1 },
        Moment::Eta { j2: 1, l: 0 },
    ];
    let mut group = c.benchmark_group("hypercube moments");
    group.sample_size(10);
    group.bench_function("nu=2 d=4", |b| b.iter(|| moments(2, 4, black_box(1.7), black_box(2.3), &list).unwrap()));
    group.bench_function("nu=3 d=5", |b| b.iter(|| moments(3, 5, black_box(1.7), black_box(2.3), &list).unwrap()));
    group.finish();
}

criterion_group!(benches, marginal, normalizer, crn, hypercube);
criterion_main!(benches);
