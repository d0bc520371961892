// SPDX-License-Identifier: Apache-2.0

//! Seeded randomness, Laplace sampling and privacy-budget schedules.
//!
//! The generator is ChaCha8 keyed from a 64-bit seed. Child streams are
//! derived by mixing the parent seed with the child index through SplitMix64
//! finalizers, so `child(i)` and `child(j)` are independent for `i != j`.
//!
//! **Not for deployment.** Nothing here is hardened against timing or
//! floating-point side channels; the samplers exist to measure accuracy.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{parameter, Result};

const ZETA_TERMS: u64 = 1_000_000;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Deterministic, splittable source of randomness.
#[derive(Clone, Debug)]
pub struct RandomSource {
    seed: u64,
    rng: ChaCha8Rng,
}

impl RandomSource {
    pub fn new(seed: u64) -> Self {
        Self {
            seed,
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Independent stream number `index`, derived from this source's seed only
    /// (not from how many samples were drawn so far).
    pub fn child(&self, index: u64) -> Self {
        Self::new(splitmix64(self.seed ^ splitmix64(index ^ 0x5851_f42d_4c95_7f2d)))
    }

    /// Uniform draw from the open interval (0, 1).
    pub fn uniform_open(&mut self) -> f64 {
        loop {
            let u: f64 = self.rng.gen();
            if u > 0.0 {
                return u;
            }
        }
    }

    pub fn bernoulli(&mut self, p: f64) -> bool {
        self.rng.gen::<f64>() < p
    }

    pub fn next_u64(&mut self) -> u64 {
        self.rng.gen()
    }
}

/// Scale `b` of a zero-mean Laplace distribution (variance `2b²`).
#[derive(Clone, Copy, Debug, PartialEq, PartialOrd)]
pub struct LaplaceScale(f64);

impl LaplaceScale {
    pub fn new(b: f64) -> Result<Self> {
        if b.is_finite() && b > 0.0 {
            Ok(Self(b))
        } else {
            Err(parameter(format!("Laplace scale must be positive, got {b}")))
        }
    }

    pub fn get(self) -> f64 {
        self.0
    }

    pub fn variance(self) -> f64 {
        2.0 * self.0 * self.0
    }
}

/// Inverse-CDF transform of `u ∈ (−½, ½)` into a Laplace(`b`) variate.
pub fn laplace_from_uniform(u: f64, scale: LaplaceScale) -> f64 {
    if u == 0.0 {
        return 0.0;
    }
    -scale.0 * u.signum() * (1.0 - 2.0 * u.abs()).ln()
}

pub fn laplace_sample(rng: &mut RandomSource, scale: LaplaceScale) -> f64 {
    laplace_from_uniform(rng.uniform_open() - 0.5, scale)
}

/// Noise used by the estimators for their counters. `disabled()` forces every
/// noise term to zero; it is for oracle comparisons only and provides no
/// privacy.
#[derive(Clone, Debug)]
pub struct Noise {
    rng: Option<RandomSource>,
}

impl Noise {
    pub fn laplace(rng: RandomSource) -> Self {
        Self { rng: Some(rng) }
    }

    pub fn disabled() -> Self {
        Self { rng: None }
    }

    pub fn is_enabled(&self) -> bool {
        self.rng.is_some()
    }

    pub fn source(&self) -> Option<&RandomSource> {
        self.rng.as_ref()
    }

    pub fn sample(&mut self, scale: LaplaceScale) -> f64 {
        match &mut self.rng {
            Some(rng) => laplace_sample(rng, scale),
            None => 0.0,
        }
    }

    /// Independent noise for a sub-instance; stays disabled if this one is.
    pub fn child(&self, index: u64) -> Self {
        Self {
            rng: self.rng.as_ref().map(|r| r.child(index)),
        }
    }
}

/// Total privacy parameter, optional target error probability, and an
/// optional per-level split of the budget.
#[derive(Clone, Debug, PartialEq)]
pub struct PrivacyBudget {
    epsilon: f64,
    gamma: Option<f64>,
    level_schedule: Option<Vec<f64>>,
}

impl PrivacyBudget {
    pub fn new(epsilon: f64) -> Result<Self> {
        if !(epsilon.is_finite() && epsilon > 0.0) {
            return Err(parameter(format!("epsilon must be positive, got {epsilon}")));
        }
        Ok(Self {
            epsilon,
            gamma: None,
            level_schedule: None,
        })
    }

    pub fn with_gamma(mut self, gamma: f64) -> Result<Self> {
        if !(gamma > 0.0 && gamma < 1.0) {
            return Err(parameter(format!("gamma must lie in (0, 1), got {gamma}")));
        }
        self.gamma = Some(gamma);
        Ok(self)
    }

    pub fn with_level_schedule(mut self, schedule: Vec<f64>) -> Result<Self> {
        if schedule.iter().any(|&e| !(e > 0.0 && e.is_finite())) {
            return Err(parameter("level budgets must be positive"));
        }
        let total: f64 = schedule.iter().sum();
        if total > self.epsilon * (1.0 + 1e-9) {
            return Err(parameter(format!(
                "level budgets sum to {total}, exceeding epsilon {}",
                self.epsilon
            )));
        }
        self.level_schedule = Some(schedule);
        Ok(self)
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn gamma(&self) -> Option<f64> {
        self.gamma
    }

    pub fn level_schedule(&self) -> Option<&[f64]> {
        self.level_schedule.as_deref()
    }
}

fn zeta_series(beta: f64) -> f64 {
    // Smallest terms first; the tail uses the midpoint integral from N + ½.
    let partial: f64 = (1..=ZETA_TERMS).rev().map(|n| (n as f64).powf(-beta)).sum();
    let tail = (ZETA_TERMS as f64 + 0.5).powf(1.0 - beta) / (beta - 1.0);
    partial + tail
}

/// Riemann zeta for real `beta > 1`.
pub fn zeta(beta: f64) -> Result<f64> {
    if !(beta > 1.0 && beta.is_finite()) {
        return Err(parameter(format!("zeta diverges for beta = {beta}")));
    }
    if beta == 2.0 {
        return Ok(PI * PI / 6.0);
    }
    Ok(zeta_series(beta))
}

/// Per-level budgets `ε_k = ε / (ζ(β) k^β)` for `k = 1..=k_max`.
pub fn level_epsilons(epsilon: f64, beta: f64, k_max: usize) -> Result<Vec<f64>> {
    if !(epsilon > 0.0 && epsilon.is_finite()) {
        return Err(parameter(format!("epsilon must be positive, got {epsilon}")));
    }
    if k_max == 0 {
        return Err(parameter("k_max must be positive"));
    }
    let z = zeta(beta)?;
    Ok((1..=k_max)
        .map(|k| epsilon / (z * (k as f64).powf(beta)))
        .collect())
}
