// SPDX-License-Identifier: Apache-2.0

//! One growing tree answering every window size at once.
//!
//! Level `k` of the tree is noised with budget `ε_k = ε/(ζ(β) k^β)`, so a
//! window of size `W` only pays for the `log₂ W′ + 1` lowest levels, where
//! `W′` is the next power of two. Blocks of size `W′` are subtrees.

use crate::bounds::NoiseProfile;
use crate::error::{check_unit, parameter, range, Result};
use crate::mechanisms::window::window_terms;
use crate::mechanisms::{CounterKey, CounterRecord, Mechanism};
use crate::noise::{zeta, LaplaceScale, Noise};
use crate::tree::{prefix_nodes, DyadicTree, Interval};

/// Exponent of the per-level budget schedule when none is given.
pub const DEFAULT_SCHEDULE_EXPONENT: f64 = 2.0;

#[derive(Clone, Debug)]
pub struct AllWindowSum {
    epsilon: f64,
    schedule_exponent: f64,
    zeta: f64,
    tree: DyadicTree,
    step: u64,
    tracked_window: Option<u64>,
    noise: Noise,
}

impl AllWindowSum {
    pub fn new(epsilon: f64, schedule_exponent: f64, noise: Noise) -> Result<Self> {
        if !(epsilon > 0.0 && epsilon.is_finite()) {
            return Err(parameter(format!("epsilon must be positive, got {epsilon}")));
        }
        Ok(Self {
            epsilon,
            schedule_exponent,
            zeta: zeta(schedule_exponent)?,
            tree: DyadicTree::new(1, 1)?,
            step: 0,
            tracked_window: None,
            noise,
        })
    }

    /// Makes [`Mechanism::push`] report the window of size `w` ending at the
    /// new step instead of the running sum.
    pub fn with_tracked_window(mut self, w: u64) -> Result<Self> {
        if w == 0 {
            return Err(parameter("window size must be at least 1"));
        }
        self.tracked_window = Some(w);
        Ok(self)
    }

    pub fn tree(&self) -> &DyadicTree {
        &self.tree
    }

    /// `ε_k` for tree level `k ≥ 1`.
    pub fn level_epsilon(&self, level: u32) -> f64 {
        self.epsilon / (self.zeta * (level as f64).powf(self.schedule_exponent))
    }

    pub fn level_scale(&self, level: u32) -> f64 {
        1.0 / self.level_epsilon(level)
    }

    pub fn update(&mut self, x: f64) -> Result<()> {
        check_unit(x)?;
        let i = self.step + 1;
        let (epsilon, zeta, beta) = (self.epsilon, self.zeta, self.schedule_exponent);
        let noise = &mut self.noise;
        let mut draw = |level: u32| {
            let scale = zeta * (level as f64).powf(beta) / epsilon;
            noise.sample(LaplaceScale::new(scale).expect("level scales are positive"))
        };
        if self.tree.hi() + 1 == i && i > 1 {
            self.tree.grow_double(i, 1.0, &mut draw)?;
        }
        self.tree.add_to_path(i, x, &mut draw)?;
        self.step = i;
        Ok(())
    }

    fn query_terms(&self, j: u64, w: u64) -> Vec<(Interval, f64)> {
        if w >= j {
            prefix_nodes(1, j).map(|iv| (iv, 1.0)).collect()
        } else {
            window_terms(w, w.next_power_of_two(), j)
                .into_iter()
                .map(|t| (t.interval, t.coeff))
                .collect()
        }
    }

    fn check_step(&self, j: u64) -> Result<()> {
        if j > self.step {
            return Err(range(format!("step {j} has not been observed (now {})", self.step)));
        }
        Ok(())
    }

    fn evaluate(&mut self, terms: &[(Interval, f64)]) -> Result<f64> {
        let (epsilon, zeta, beta) = (self.epsilon, self.zeta, self.schedule_exponent);
        let noise = &mut self.noise;
        let mut draw = |level: u32| {
            let scale = zeta * (level as f64).powf(beta) / epsilon;
            noise.sample(LaplaceScale::new(scale).expect("level scales are positive"))
        };
        let mut total = 0.0;
        for &(iv, coeff) in terms {
            total += coeff * self.tree.value(iv, &mut draw)?;
        }
        Ok(total)
    }

    /// Estimate of the window of size `w` ending at step `j`.
    pub fn query(&mut self, j: u64, w: u64) -> Result<f64> {
        if w == 0 {
            return Err(range("window size must be at least 1"));
        }
        if j == 0 {
            return Err(range("steps are numbered from 1"));
        }
        self.check_step(j)?;
        let terms = self.query_terms(j, w);
        self.evaluate(&terms)
    }

    /// Estimate of `x_1 + … + x_j`; zero for `j = 0`.
    pub fn running_sum(&mut self, j: u64) -> Result<f64> {
        self.check_step(j)?;
        let terms: Vec<_> = prefix_nodes(1, j).map(|iv| (iv, 1.0)).collect();
        self.evaluate(&terms)
    }

    fn profile_of(&self, terms: &[(Interval, f64)]) -> Option<NoiseProfile> {
        NoiseProfile::new(
            terms
                .iter()
                .map(|(iv, c)| c.abs() * self.level_scale(iv.len().trailing_zeros() + 1))
                .collect(),
        )
        .ok()
    }

    /// Noise scales in `query(j, w)`.
    pub fn query_profile(&self, j: u64, w: u64) -> Option<NoiseProfile> {
        if j == 0 || w == 0 {
            return None;
        }
        self.profile_of(&self.query_terms(j, w))
    }
}

impl Mechanism for AllWindowSum {
    fn push(&mut self, x: f64) -> Result<f64> {
        self.update(x)?;
        match self.tracked_window {
            Some(w) => self.query(self.step, w),
            None => self.running_sum(self.step),
        }
    }

    fn steps(&self) -> u64 {
        self.step
    }

    fn epsilon(&self) -> Option<f64> {
        Some(self.epsilon)
    }

    fn noise_profile(&self, j: u64) -> Option<NoiseProfile> {
        match self.tracked_window {
            Some(w) => self.query_profile(j, w),
            None => self.query_profile(j, u64::MAX),
        }
    }

    fn counters(&self) -> Vec<CounterRecord> {
        self.tree
            .iter()
            .map(|(interval, n)| CounterRecord {
                key: CounterKey { instance: 0, interval },
                c0: n.c0(),
                z: n.z(),
                scale: self.level_scale(interval.len().trailing_zeros() + 1),
            })
            .collect()
    }
}

/// Private running sum over the growing tree.
#[derive(Clone, Debug)]
pub struct RunningSum(AllWindowSum);

impl RunningSum {
    pub fn new(epsilon: f64, noise: Noise) -> Result<Self> {
        AllWindowSum::new(epsilon, DEFAULT_SCHEDULE_EXPONENT, noise).map(Self)
    }

    pub fn with_schedule(epsilon: f64, schedule_exponent: f64, noise: Noise) -> Result<Self> {
        AllWindowSum::new(epsilon, schedule_exponent, noise).map(Self)
    }

    pub fn inner(&self) -> &AllWindowSum {
        &self.0
    }

    pub fn query(&mut self, j: u64) -> Result<f64> {
        self.0.running_sum(j)
    }
}

impl Mechanism for RunningSum {
    fn push(&mut self, x: f64) -> Result<f64> {
        self.0.push(x)
    }

    fn steps(&self) -> u64 {
        self.0.steps()
    }

    fn epsilon(&self) -> Option<f64> {
        self.0.epsilon()
    }

    fn noise_profile(&self, j: u64) -> Option<NoiseProfile> {
        self.0.noise_profile(j)
    }

    fn counters(&self) -> Vec<CounterRecord> {
        self.0.counters()
    }
}
