// SPDX-License-Identifier: Apache-2.0

//! Reference estimators: the exact non-private decayed sum, randomized
//! response, and the running-sum difference for windows.

use std::collections::VecDeque;

use crate::bounds::NoiseProfile;
use crate::error::{check_unit, parameter, range, Result};
use crate::mechanisms::{DecaySpec, Mechanism};
use crate::noise::{LaplaceScale, Noise, RandomSource};
use crate::tree::{prefix_nodes, DyadicTree, Interval};

#[derive(Clone, Debug)]
enum OracleState {
    Window { sum: f64, buf: VecDeque<f64> },
    Exponential { sum: f64 },
    Running { sum: f64 },
    Polynomial { buf: Vec<f64> },
}

/// Exact decayed sum `F(j) = Σ_{i≤j} x_i g(j−i)`.
#[derive(Clone, Debug)]
pub struct ExactOracle {
    decay: DecaySpec,
    state: OracleState,
    step: u64,
}

impl ExactOracle {
    pub fn new(decay: DecaySpec) -> Result<Self> {
        decay.validate()?;
        let state = match decay {
            DecaySpec::Window { .. } => OracleState::Window {
                sum: 0.0,
                buf: VecDeque::new(),
            },
            DecaySpec::Exponential { .. } => OracleState::Exponential { sum: 0.0 },
            DecaySpec::Running => OracleState::Running { sum: 0.0 },
            DecaySpec::Polynomial { .. } => OracleState::Polynomial { buf: Vec::new() },
        };
        Ok(Self {
            decay,
            state,
            step: 0,
        })
    }

    pub fn decay(&self) -> DecaySpec {
        self.decay
    }

    /// Like [`Mechanism::push`] but for any real value.
    pub fn accumulate(&mut self, x: f64) -> f64 {
        self.step += 1;
        match (&mut self.state, self.decay) {
            (OracleState::Window { sum, buf }, DecaySpec::Window { w }) => {
                buf.push_back(x);
                *sum += x;
                if buf.len() as u64 > w {
                    *sum -= buf.pop_front().expect("buffer holds w + 1 values");
                }
                *sum
            }
            (OracleState::Exponential { sum }, DecaySpec::Exponential { alpha }) => {
                *sum = alpha * *sum + x;
                *sum
            }
            (OracleState::Running { sum }, _) => {
                *sum += x;
                *sum
            }
            (OracleState::Polynomial { buf }, decay) => {
                buf.push(x);
                let j = buf.len();
                // Oldest (smallest weight) terms first.
                buf.iter()
                    .enumerate()
                    .map(|(i, x)| x * decay.weight((j - 1 - i) as u64))
                    .sum()
            }
            _ => unreachable!("state is built from the decay"),
        }
    }
}

impl Mechanism for ExactOracle {
    fn push(&mut self, x: f64) -> Result<f64> {
        check_unit(x)?;
        Ok(self.accumulate(x))
    }

    fn steps(&self) -> u64 {
        self.step
    }

    fn epsilon(&self) -> Option<f64> {
        None
    }

    fn noise_profile(&self, _j: u64) -> Option<NoiseProfile> {
        None
    }
}

/// Per-bit randomized response with an unbiased decayed estimate.
#[derive(Clone, Debug)]
pub struct RandomizedResponse {
    flip_parameter: f64,
    flip_probability: f64,
    debiased: ExactOracle,
    rng: RandomSource,
}

impl RandomizedResponse {
    /// Keeps each bit with probability `½ + ε_f/2`.
    pub fn new(decay: DecaySpec, flip_parameter: f64, rng: RandomSource) -> Result<Self> {
        if !(flip_parameter > 0.0 && flip_parameter <= 1.0) {
            return Err(parameter(format!(
                "flip parameter must lie in (0, 1], got {flip_parameter}"
            )));
        }
        Ok(Self {
            flip_parameter,
            flip_probability: 0.5 - flip_parameter / 2.0,
            debiased: ExactOracle::new(decay)?,
            rng,
        })
    }

    /// Picks `ε_f = tanh(ε/2)` so that the per-bit privacy loss
    /// `ln((1+ε_f)/(1−ε_f))` equals `epsilon`.
    pub fn matched(decay: DecaySpec, epsilon: f64, rng: RandomSource) -> Result<Self> {
        if !(epsilon > 0.0) {
            return Err(parameter(format!("epsilon must be positive, got {epsilon}")));
        }
        Self::new(decay, (epsilon / 2.0).tanh(), rng)
    }

    pub fn flip_parameter(&self) -> f64 {
        self.flip_parameter
    }

    pub fn flip_probability(&self) -> f64 {
        self.flip_probability
    }
}

impl Mechanism for RandomizedResponse {
    fn push(&mut self, x: f64) -> Result<f64> {
        if x != 0.0 && x != 1.0 {
            return Err(parameter(format!("randomized response needs bits, got {x}")));
        }
        let y = if self.rng.bernoulli(self.flip_probability) {
            1.0 - x
        } else {
            x
        };
        Ok(self
            .debiased
            .accumulate((y - self.flip_probability) / self.flip_parameter))
    }

    fn steps(&self) -> u64 {
        self.debiased.steps()
    }

    fn epsilon(&self) -> Option<f64> {
        let e = self.flip_parameter;
        (e < 1.0).then(|| ((1.0 + e) / (1.0 - e)).ln())
    }

    fn noise_profile(&self, _j: u64) -> Option<NoiseProfile> {
        None
    }
}

/// Window estimate `s(j) − s(j−W)` from a private running sum over a fixed
/// tree of `T′ = 2^⌈log₂ T⌉` leaves.
#[derive(Clone, Debug)]
pub struct RunningDifference {
    window: u64,
    horizon: u64,
    epsilon: f64,
    scale: LaplaceScale,
    tree: DyadicTree,
    step: u64,
    noise: Noise,
}

impl RunningDifference {
    pub fn new(window: u64, horizon: u64, epsilon: f64, noise: Noise) -> Result<Self> {
        if window == 0 || horizon == 0 {
            return Err(parameter("window and horizon must be at least 1"));
        }
        if !(epsilon > 0.0 && epsilon.is_finite()) {
            return Err(parameter(format!("epsilon must be positive, got {epsilon}")));
        }
        let leaves = horizon.next_power_of_two();
        let height = leaves.trailing_zeros() + 1;
        Ok(Self {
            window,
            horizon,
            epsilon,
            scale: LaplaceScale::new(height as f64 / epsilon)?,
            tree: DyadicTree::new(1, leaves)?,
            step: 0,
            noise,
        })
    }

    pub fn scale(&self) -> LaplaceScale {
        self.scale
    }

    fn terms(&self, j: u64) -> Vec<(Interval, f64)> {
        let mut terms: Vec<(Interval, f64)> = prefix_nodes(1, j).map(|iv| (iv, 1.0)).collect();
        if j > self.window {
            for iv in prefix_nodes(1, j - self.window) {
                match terms.iter().position(|(t, _)| *t == iv) {
                    Some(k) => {
                        terms.remove(k);
                    }
                    None => terms.push((iv, -1.0)),
                }
            }
        }
        terms
    }
}

impl Mechanism for RunningDifference {
    fn push(&mut self, x: f64) -> Result<f64> {
        check_unit(x)?;
        let i = self.step + 1;
        if i > self.horizon {
            return Err(range(format!("horizon {} exhausted", self.horizon)));
        }
        let Self { tree, noise, scale, .. } = self;
        let mut draw = |_: u32| noise.sample(*scale);
        tree.add_to_path(i, x, &mut draw)?;
        self.step = i;
        let terms = self.terms(i);
        let Self { tree, noise, scale, .. } = self;
        let mut draw = |_: u32| noise.sample(*scale);
        let mut estimate = 0.0;
        for (iv, coeff) in terms {
            estimate += coeff * tree.value(iv, &mut draw)?;
        }
        Ok(estimate)
    }

    fn steps(&self) -> u64 {
        self.step
    }

    fn epsilon(&self) -> Option<f64> {
        Some(self.epsilon)
    }

    fn noise_profile(&self, j: u64) -> Option<NoiseProfile> {
        NoiseProfile::new(self.terms(j).iter().map(|_| self.scale.get()).collect()).ok()
    }
}
