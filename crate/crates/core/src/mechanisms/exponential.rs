// SPDX-License-Identifier: Apache-2.0

//! Exponentially decayed sums on a single growing tree.
//!
//! A node `[l, u]` holds `Σ x_i α^(u−i)` over its interval. Only left nodes
//! and the current root are ever written; a prefix `[1, j]` is recombined as
//! `Σ c_node α^(j − u_node)`. When the tree doubles, the new root is seeded
//! with the old root shifted by `α^(i−1)`.

use crate::bounds::NoiseProfile;
use crate::error::{check_unit, domain, parameter, Result};
use crate::mechanisms::{clamp_weight, CounterKey, CounterRecord, Mechanism, Retention};
use crate::noise::{LaplaceScale, Noise};
use crate::tree::{prefix_nodes, DyadicTree};

fn in_regime(alpha: f64) -> bool {
    alpha > 2.0 / 3.0 && alpha < 1.0
}

/// L1 sensitivity bound of the counter vector, for `α ∈ (2/3, 1)`.
pub fn sensitivity_lambda_exp(alpha: f64) -> Result<f64> {
    if !in_regime(alpha) {
        return Err(domain(format!("alpha must lie in (2/3, 1), got {alpha}")));
    }
    let ln2 = std::f64::consts::LN_2;
    Ok(((2.0 * alpha / (1.0 - alpha)).ln() + 0.5 + ln2) / (alpha * ln2))
}

#[derive(Clone, Debug)]
pub struct ExponentialSum {
    alpha: f64,
    epsilon: f64,
    lambda: f64,
    scale: LaplaceScale,
    tree: DyadicTree,
    step: u64,
    retention: Retention,
    noise: Noise,
}

impl ExponentialSum {
    pub fn new(alpha: f64, epsilon: f64, noise: Noise) -> Result<Self> {
        if !in_regime(alpha) {
            return Err(parameter(format!(
                "alpha must lie in (2/3, 1), got {alpha}; below that the decayed sum stays in [0, 3]"
            )));
        }
        if !(epsilon > 0.0 && epsilon.is_finite()) {
            return Err(parameter(format!("epsilon must be positive, got {epsilon}")));
        }
        let lambda = sensitivity_lambda_exp(alpha)?;
        Ok(Self {
            alpha,
            epsilon,
            lambda,
            scale: LaplaceScale::new(lambda / epsilon)?,
            tree: DyadicTree::new(1, 1)?,
            step: 0,
            retention: Retention::Minimal,
            noise,
        })
    }

    pub fn with_retention(mut self, retention: Retention) -> Self {
        self.retention = retention;
        self
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn scale(&self) -> LaplaceScale {
        self.scale
    }

    pub fn tree(&self) -> &DyadicTree {
        &self.tree
    }

    fn decay(&self, age: u64) -> f64 {
        clamp_weight(self.alpha.powf(age as f64))
    }
}

impl Mechanism for ExponentialSum {
    fn push(&mut self, x: f64) -> Result<f64> {
        check_unit(x)?;
        let i = self.step + 1;
        let alpha = self.alpha;
        let decay = |age: u64| clamp_weight(alpha.powf(age as f64));
        let Self { tree, noise, scale, .. } = self;
        let mut draw = |_: u32| noise.sample(*scale);
        if tree.hi() + 1 == i && i > 1 {
            tree.grow_double(i, decay(i - 1), &mut draw)?;
        }
        let root = tree.root();
        for iv in tree.path_intervals(i)? {
            if iv == root || tree.is_left_node(iv)? {
                tree.add(iv, x * decay(iv.u - i), &mut draw)?;
            }
        }
        self.step = i;
        if self.retention == Retention::Minimal {
            self.tree
                .evict(|t, iv| matches!(t.parent(iv), Ok(Some(p)) if p.u <= i));
        }
        let Self { tree, noise, scale, .. } = self;
        let mut draw = |_: u32| noise.sample(*scale);
        let mut estimate = 0.0;
        for iv in prefix_nodes(1, i) {
            estimate += tree.value(iv, &mut draw)? * decay(i - iv.u);
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
        let b = self.scale.get();
        NoiseProfile::new(
            prefix_nodes(1, j)
                .map(|iv| b * self.decay(j - iv.u))
                .filter(|&s| s > 0.0)
                .collect(),
        )
        .ok()
    }

    fn counters(&self) -> Vec<CounterRecord> {
        self.tree
            .iter()
            .map(|(interval, n)| CounterRecord {
                key: CounterKey { instance: 0, interval },
                c0: n.c0(),
                z: n.z(),
                scale: self.scale.get(),
            })
            .collect()
    }
}
