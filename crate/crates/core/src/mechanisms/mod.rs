// SPDX-License-Identifier: Apache-2.0

//! Private decayed-sum estimators behind one streaming contract:
//! construct, then `push(x)` once per time step to get that step's estimate.

mod allwindow;
mod exponential;
mod polynomial;
mod window;

pub use allwindow::{AllWindowSum, RunningSum, DEFAULT_SCHEDULE_EXPONENT};
pub use exponential::{sensitivity_lambda_exp, ExponentialSum};
pub use polynomial::{breakpoint, sensitivity_lambda_poly, ChildLayout, PolynomialSum};
pub use window::{Side, Term, WindowSum};

use serde::{Deserialize, Serialize};

use crate::bounds::NoiseProfile;
use crate::error::{parameter, Result};
use crate::tree::Interval;

/// Decay function `g` with `g(0) = 1`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum DecaySpec {
    /// `g(i) = 1{i < W}`
    Window { w: u64 },
    /// `g(i) = α^i`
    Exponential { alpha: f64 },
    /// `g(i) = (i+1)^(−c)`; `beta` is the estimator's multiplicative slack.
    Polynomial { c: f64, beta: f64 },
    /// `g(i) = 1`
    Running,
}

impl DecaySpec {
    pub fn validate(&self) -> Result<()> {
        match *self {
            DecaySpec::Window { w: 0 } => Err(parameter("window size must be at least 1")),
            DecaySpec::Exponential { alpha } if !(alpha > 0.0 && alpha < 1.0) => {
                Err(parameter(format!("alpha must lie in (0, 1), got {alpha}")))
            }
            DecaySpec::Polynomial { c, .. } if !(c > 1.0 && c.is_finite()) => {
                Err(parameter(format!("c must exceed 1, got {c}")))
            }
            DecaySpec::Polynomial { beta, .. } if !(beta > 0.0 && beta < 1.0) => {
                Err(parameter(format!("beta must lie in (0, 1), got {beta}")))
            }
            _ => Ok(()),
        }
    }

    /// Weight of an update `age` steps old.
    pub fn weight(&self, age: u64) -> f64 {
        match *self {
            DecaySpec::Window { w } => {
                if age < w {
                    1.0
                } else {
                    0.0
                }
            }
            DecaySpec::Exponential { alpha } => alpha.powf(age as f64),
            DecaySpec::Polynomial { c, .. } => (age as f64 + 1.0).powf(-c),
            DecaySpec::Running => 1.0,
        }
    }
}

/// Whether an estimator may drop counters it will never read again.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Retention {
    #[default]
    Minimal,
    /// Keep every counter ever created, for sensitivity audits.
    Full,
}

/// Identity of one counter across all sub-instances of an estimator.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct CounterKey {
    pub instance: u32,
    pub interval: Interval,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CounterRecord {
    pub key: CounterKey,
    pub c0: f64,
    pub z: f64,
    /// Scale of the Laplace noise the counter was created with.
    pub scale: f64,
}

pub trait Mechanism: Send {
    /// Consumes the next update and returns the estimate for this step.
    fn push(&mut self, x: f64) -> Result<f64>;

    /// Number of updates consumed so far.
    fn steps(&self) -> u64;

    /// Privacy parameter, `None` for non-private estimators.
    fn epsilon(&self) -> Option<f64>;

    /// Laplace scales summed into the estimate at step `j`, when the noise has
    /// that form. Depends only on `j` and the parameters, never on the data.
    fn noise_profile(&self, j: u64) -> Option<NoiseProfile>;

    /// Every counter currently held.
    fn counters(&self) -> Vec<CounterRecord> {
        Vec::new()
    }
}

pub(crate) fn clamp_weight(w: f64) -> f64 {
    if w < 1e-300 {
        0.0
    } else {
        w
    }
}

impl<M: Mechanism + ?Sized> Mechanism for Box<M> {
    fn push(&mut self, x: f64) -> Result<f64> {
        (**self).push(x)
    }

    fn steps(&self) -> u64 {
        (**self).steps()
    }

    fn epsilon(&self) -> Option<f64> {
        (**self).epsilon()
    }

    fn noise_profile(&self, j: u64) -> Option<NoiseProfile> {
        (**self).noise_profile(j)
    }

    fn counters(&self) -> Vec<CounterRecord> {
        (**self).counters()
    }
}
