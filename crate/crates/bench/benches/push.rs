// SPDX-License-Identifier: Apache-2.0

use criterion::{criterion_group, criterion_main, BatchSize, BenchmarkId, Criterion, Throughput};
use privdecay::{
    AllWindowSum, ExponentialSum, Mechanism, Noise, PolynomialSum, RandomSource, WindowSum,
};
use privdecay_bench::bits;

const UPDATES: usize = 4096;

fn run(m: &mut dyn Mechanism, xs: &[f64]) -> f64 {
    xs.iter().map(|&x| m.push(x).unwrap()).sum()
}

fn window(c: &mut Criterion) {
    let xs = bits(UPDATES, 1);
    let mut g = c.benchmark_group("window_push");
    g.throughput(Throughput::Elements(UPDATES as u64));
    for k in [4u32, 10, 20] {
        let w = 1u64 << k;
        g.bench_with_input(BenchmarkId::from_parameter(w), &w, |b, &w| {
            b.iter_batched(
                || WindowSum::new(w, 1.0, Noise::laplace(RandomSource::new(2))).unwrap(),
                |mut m| run(&mut m, &xs),
                BatchSize::SmallInput,
            )
        });
    }
    g.finish();
}

fn decayed(c: &mut Criterion) {
    let xs = bits(UPDATES, 3);
    let mut g = c.benchmark_group("decayed_push");
    g.throughput(Throughput::Elements(UPDATES as u64));
    g.bench_function("allwindow_w1000", |b| {
        b.iter_batched(
            || {
                AllWindowSum::new(1.0, 2.0, Noise::laplace(RandomSource::new(4)))
                    .unwrap()
                    .with_tracked_window(1000)
                    .unwrap()
            },
            |mut m| run(&mut m, &xs),
            BatchSize::SmallInput,
        )
    });
    g.bench_function("exponential_0.99", |b| {
        b.iter_batched(
            || ExponentialSum::new(0.99, 1.0, Noise::laplace(RandomSource::new(5))).unwrap(),
            |mut m| run(&mut m, &xs),
            BatchSize::SmallInput,
        )
    });
    g.bench_function("polynomial_c2_b0.5", |b| {
        b.iter_batched(
            || PolynomialSum::new(2.0, 0.5, 1.0, Noise::laplace(RandomSource::new(6))).unwrap(),
            |mut m| run(&mut m, &xs),
            BatchSize::SmallInput,
        )
    });
    g.finish();
}

criterion_group!(benches, window, decayed);
criterion_main!(benches);
