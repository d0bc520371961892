// SPDX-License-Identifier: Apache-2.0

//! Inputs shared by the throughput benchmarks.

use privdecay::RandomSource;

/// `n` independent fair bits from `seed`.
pub fn bits(n: usize, seed: u64) -> Vec<f64> {
    let mut rng = RandomSource::new(seed);
    (0..n).map(|_| rng.bernoulli(0.5) as u8 as f64).collect()
}
