// SPDX-License-Identifier: Apache-2.0

//! Differentially private estimators of decayed sums over a stream, released
//! at every time step.
//!
//! A decayed sum at step `j` is `F(j) = Σ_{i≤j} x_i g(j−i)` for a
//! non-increasing `g` with `g(0) = 1` and updates `x_i ∈ [0, 1]`. The
//! estimators keep noisy counters on dyadic intervals of time, so every
//! answer combines a logarithmic number of Laplace terms:
//!
//! | decay                  | estimator                              |
//! |------------------------|----------------------------------------|
//! | window, `W = 2^k`      | [`WindowSum`]                          |
//! | window, any `W`        | [`AllWindowSum`]                       |
//! | `α^i`                  | [`ExponentialSum`]                     |
//! | `(i+1)^(−c)`           | [`PolynomialSum`]                      |
//! | none (running sum)     | [`RunningSum`]                         |
//!
//! ```
//! use privdecay::{Mechanism, Noise, RandomSource, WindowSum};
//!
//! let mut m = WindowSum::new(8, 1.0, Noise::laplace(RandomSource::new(7))).unwrap();
//! for x in [1.0, 0.0, 1.0, 1.0] {
//!     let _estimate = m.push(x).unwrap();
//! }
//! ```
//!
//! [`bounds`] turns noise profiles into explicit `(δ, γ)` guarantees and
//! checks the lower-bound construction; [`baselines`] has the exact oracle
//! and randomized response; [`harness`] runs seeded experiments.

// `!(x > 0.0)` style checks are deliberate: they reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod baselines;
pub mod bounds;
mod error;
pub mod extensions;
pub mod harness;
pub mod mechanisms;
pub mod noise;
pub mod tree;

pub use baselines::{ExactOracle, RandomizedResponse, RunningDifference};
pub use bounds::NoiseProfile;
pub use error::{Error, Result};
pub use mechanisms::{
    AllWindowSum, DecaySpec, ExponentialSum, Mechanism, PolynomialSum, Retention, RunningSum,
    WindowSum,
};
pub use noise::{LaplaceScale, Noise, PrivacyBudget, RandomSource};
pub use tree::{DyadicTree, Interval};
