//! Batch decoding and forward passes, rayon `par::map` against the
//! sequential loop.

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion, Throughput};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::hint::black_box;

use tpoint_core::learner::{forward, Activation, SorterParams};
use tpoint_core::{builtin, par, predict, QVector, Semantics};

fn random_qs(n: usize, rng: &mut ChaCha8Rng) -> Vec<QVector> {
    (0..n)
        .map(|_| QVector::new(std::array::from_fn(|_| rng.random_range(0.01..0.99))).unwrap())
        .collect()
}

fn bench_predict(c: &mut Criterion) {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let s = builtin::allen13();
    let mut group = c.benchmark_group("predict_allen13");
    for n in [1_000usize, 20_000] {
        let qs = random_qs(n, &mut rng);
        group.throughput(Throughput::Elements(n as u64));
        for semantics in [Semantics::Product, Semantics::ProbSum] {
            group.bench_with_input(BenchmarkId::new(format!("parallel/{semantics}"), n), &qs, |b, qs| {
                b.iter(|| par::map(qs, |q| predict(q, s, semantics)))
            });
            group.bench_with_input(BenchmarkId::new(format!("sequential/{semantics}"), n), &qs, |b, qs| {
                b.iter(|| par::map_sequential(qs, |q| predict(q, s, semantics)))
            });
        }
    }
    group.finish();
}

fn bench_forward(c: &mut Criterion) {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let (dim, n) = (64, 5_000);
    let params = SorterParams::random(dim, 32, Activation::Tanh, &mut rng);
    let xs: Vec<Vec<f64>> = (0..n).map(|_| (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect()).collect();
    let mut group = c.benchmark_group("forward_d64_h32");
    group.throughput(Throughput::Elements(n as u64));
    group.bench_function("parallel", |b| b.iter(|| par::map(&xs, |x| forward(black_box(x), &params, 10.0).unwrap())));
    group.bench_function("sequential", |b| {
        b.iter(|| par::map_sequential(&xs, |x| forward(black_box(x), &params, 10.0).unwrap()))
    });
    group.finish();
}

criterion_group!(benches, bench_predict, bench_forward);
criterion_main!(benches);
