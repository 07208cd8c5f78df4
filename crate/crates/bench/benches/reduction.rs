use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};
use qbmor_bench::{chafee, irka_config, GAMMA};
use qbmor_core::bt::balanced_truncation_scaled;
use qbmor_core::irka::tqb_irka;
use qbmor_core::signals::InputSignal;
use qbmor_core::simulate::{simulate, SimOptions};

fn reduction(c: &mut Criterion) {
    let sys = chafee(100).unwrap();
    let mut group = c.benchmark_group("chafee_k100_r10");
    group.sample_size(10);
    let cfg = irka_config(10);
    group.bench_function("tqb_irka", |b| b.iter(|| tqb_irka(black_box(&sys), &cfg).unwrap()));
    group.bench_function("balanced_truncation", |b| b.iter(|| balanced_truncation_scaled(black_box(&sys), 10, GAMMA).unwrap()));
    group.finish();
}

fn simulation(c: &mut Criterion) {
    let sys = chafee(50).unwrap();
    let (red, _, _) = tqb_irka(&sys, &irka_config(6)).unwrap();
    let opts = SimOptions::default();
    let mut group = c.benchmark_group("simulate_ci_u1_T2");
    group.sample_size(10);
    group.bench_function("full_k50", |b| b.iter(|| simulate(black_box(&sys), &InputSignal::CiU1, 2.0, 101, &opts).unwrap()));
    group.bench_function("reduced_r6", |b| b.iter(|| simulate(black_box(&red), &InputSignal::CiU1, 2.0, 101, &opts).unwrap()));
    group.finish();
}

criterion_group!(benches, reduction, simulation);
criterion_main!(benches);
