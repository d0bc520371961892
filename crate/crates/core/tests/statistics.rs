// SPDX-License-Identifier: Apache-2.0

//! Seeded Monte-Carlo checks of unbiasedness and the explicit error bound.

use privdecay::bounds::utility_delta;
use privdecay::harness::nearest_rank;
use privdecay::{
    AllWindowSum, ExponentialSum, Mechanism, Noise, PolynomialSum, RandomSource, RunningSum,
    WindowSum,
};

const TRIALS: u64 = 20_000;

/// Errors at step `j` of a noisy run minus the noiseless run on the same input.
fn errors(make: &dyn Fn(Noise) -> Box<dyn Mechanism>, xs: &[f64], seed: u64) -> Vec<f64> {
    let mut clean = make(Noise::disabled());
    let truth = xs.iter().map(|&x| clean.push(x).unwrap()).last().unwrap();
    let root = RandomSource::new(seed);
    (0..TRIALS)
        .map(|t| {
            let mut m = make(Noise::laplace(root.child(t)));
            xs.iter().map(|&x| m.push(x).unwrap()).last().unwrap() - truth
        })
        .collect()
}

fn stream(n: usize) -> Vec<f64> {
    let mut rng = RandomSource::new(99);
    (0..n).map(|_| rng.bernoulli(0.5) as u8 as f64).collect()
}

#[allow(clippy::type_complexity)]
fn makers() -> Vec<(&'static str, Box<dyn Fn(Noise) -> Box<dyn Mechanism>>)> {
    vec![
        ("window", Box::new(|n| Box::new(WindowSum::new(16, 1.0, n).unwrap()))),
        ("exponential", Box::new(|n| Box::new(ExponentialSum::new(0.9, 1.0, n).unwrap()))),
        ("polynomial", Box::new(|n| Box::new(PolynomialSum::new(2.0, 0.5, 1.0, n).unwrap()))),
        ("running", Box::new(|n| Box::new(RunningSum::new(1.0, n).unwrap()))),
        (
            "allwindow",
            Box::new(|n| Box::new(AllWindowSum::new(1.0, 2.0, n).unwrap().with_tracked_window(20).unwrap())),
        ),
    ]
}

#[test]
fn estimates_are_unbiased() {
    let xs = stream(37);
    for (name, make) in makers() {
        let e = errors(make.as_ref(), &xs, 1);
        let n = e.len() as f64;
        let mean = e.iter().sum::<f64>() / n;
        let sd = (e.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
        assert!(mean.abs() <= 5.0 * sd / n.sqrt(), "{name}: mean {mean}, sd {sd}");
    }
}

#[test]
fn explicit_bound_dominates_empirical_quantile() {
    let xs = stream(45);
    for (name, make) in makers() {
        let profile = make(Noise::disabled()).noise_profile(xs.len() as u64).unwrap();
        let mut e: Vec<f64> = errors(make.as_ref(), &xs, 2).iter().map(|v| v.abs()).collect();
        e.sort_by(f64::total_cmp);
        for gamma in [0.01, 0.05, 0.2] {
            let q = nearest_rank(&e, 1.0 - gamma);
            let delta = utility_delta(&profile, gamma).unwrap();
            assert!(q <= delta, "{name} γ={gamma}: quantile {q} > δ {delta}");
        }
    }
}
