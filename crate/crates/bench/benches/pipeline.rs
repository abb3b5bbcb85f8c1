use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

use cpse_core::config::RunConfig;
use cpse_core::spectral::eig_sym;
use cpse_core::{analyze_container, build_ensemble, generate_stack, omega_sequence, SurrogateSpec};

fn eigen(c: &mut Criterion) {
    let mut group = c.benchmark_group("eig_sym");
    group.sample_size(10);
    for side in [64, 256, 512] {
        let stack = generate_stack(&SurrogateSpec::square(&[side], 0)).unwrap();
        let e = build_ensemble(&stack, &Default::default()).unwrap();
        group.bench_with_input(BenchmarkId::from_parameter(side), &e.layers()[0], |b, layer| {
            b.iter(|| eig_sym(black_box(layer)).unwrap())
        });
    }
    group.finish();
}

fn omegas(c: &mut Criterion) {
    let stack = generate_stack(&SurrogateSpec::square(&[16, 32, 64, 128, 256], 0)).unwrap();
    let e = build_ensemble(&stack, &Default::default()).unwrap();
    let params = RunConfig::default().spectral();
    let mut group = c.benchmark_group("omega_sequence");
    group.sample_size(10);
    group.bench_function("16..256", |b| {
        b.iter(|| omega_sequence(black_box(&e), &params).unwrap())
    });
    group.finish();
}

fn full(c: &mut Criterion) {
    let stack = generate_stack(&SurrogateSpec::square(&[16, 32, 64, 128, 256], 0)).unwrap();
    let cfg = RunConfig::default();
    let mut group = c.benchmark_group("analyze_container");
    group.sample_size(10);
    group.bench_function("16..256", |b| {
        b.iter(|| analyze_container(black_box(&stack), &cfg).unwrap())
    });
    group.finish();
}

criterion_group!(benches, eigen, omegas, full);
criterion_main!(benches);
