// SPDX-License-Identifier: Apache-2.0

//! Sliding-window sums over blocks of dyadic trees.
//!
//! The stream is cut into blocks of `B ≥ W` steps, each covered by its own
//! tree. A window ending at step `i` is either a difference of two prefixes of
//! the current block, or a suffix of the previous block (root minus prefix)
//! plus a prefix of the current one. Only the two most recent blocks are kept.

use crate::bounds::NoiseProfile;
use crate::error::{check_unit, parameter, range, Result};
use crate::mechanisms::{CounterKey, CounterRecord, Mechanism, Retention};
use crate::noise::{LaplaceScale, Noise};
use crate::tree::{prefix_nodes, DyadicTree, Interval};

/// Which block tree a term reads from.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Side {
    Previous,
    Current,
}

/// One signed counter in an estimate.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Term {
    pub side: Side,
    pub interval: Interval,
    pub coeff: f64,
}

/// Signed node combination estimating the window `[i − W + 1, i]` with blocks
/// of size `block`. Shared nodes of two prefixes cancel.
pub(crate) fn window_terms(window: u64, block: u64, i: u64) -> Vec<Term> {
    debug_assert!(i >= 1 && window >= 1 && window <= block);
    let lo = ((i - 1) / block) * block + 1;
    let start = i.saturating_sub(window);
    let mut terms: Vec<Term> = Vec::with_capacity(2 * block.trailing_zeros() as usize + 3);
    let mut put = |side: Side, interval: Interval, coeff: f64| {
        match terms.iter_mut().find(|t| t.side == side && t.interval == interval) {
            Some(t) => t.coeff += coeff,
            None => terms.push(Term { side, interval, coeff }),
        }
    };
    if start + 1 >= lo {
        for iv in prefix_nodes(lo, i) {
            put(Side::Current, iv, 1.0);
        }
        for iv in prefix_nodes(lo, start) {
            put(Side::Current, iv, -1.0);
        }
    } else {
        let plo = lo - block;
        put(Side::Previous, Interval { l: plo, u: lo - 1 }, 1.0);
        for iv in prefix_nodes(plo, start) {
            put(Side::Previous, iv, -1.0);
        }
        for iv in prefix_nodes(lo, i) {
            put(Side::Current, iv, 1.0);
        }
    }
    terms.retain(|t| t.coeff != 0.0);
    terms
}

/// Private sliding-window sum.
#[derive(Clone, Debug)]
pub struct WindowSum {
    window: u64,
    block: u64,
    epsilon: f64,
    scale: LaplaceScale,
    instance: u32,
    prev: Option<DyadicTree>,
    cur: DyadicTree,
    retired: Vec<DyadicTree>,
    retention: Retention,
    step: u64,
    noise: Noise,
}

impl WindowSum {
    /// Window of `w` steps (a power of two), every counter noised with scale
    /// `(log₂ w + 1)/ε`. For other window sizes use [`AllWindowSum`].
    ///
    /// [`AllWindowSum`]: crate::mechanisms::AllWindowSum
    pub fn new(w: u64, epsilon: f64, noise: Noise) -> Result<Self> {
        if !w.is_power_of_two() {
            return Err(parameter(format!(
                "window size {w} is not a power of two; use the all-window estimator (allwindow) for arbitrary windows"
            )));
        }
        if !(epsilon > 0.0 && epsilon.is_finite()) {
            return Err(parameter(format!("epsilon must be positive, got {epsilon}")));
        }
        let scale = LaplaceScale::new((w.trailing_zeros() as f64 + 1.0) / epsilon)?;
        Self::build(w, w, epsilon, scale, noise)
    }

    /// Window of any size `w ≥ 1` over blocks of the next power of two, with an
    /// explicit per-counter scale.
    pub(crate) fn with_scale(w: u64, epsilon: f64, scale: LaplaceScale, noise: Noise) -> Result<Self> {
        if w == 0 {
            return Err(parameter("window size must be at least 1"));
        }
        Self::build(w, w.next_power_of_two(), epsilon, scale, noise)
    }

    fn build(window: u64, block: u64, epsilon: f64, scale: LaplaceScale, noise: Noise) -> Result<Self> {
        Ok(Self {
            window,
            block,
            epsilon,
            scale,
            instance: 0,
            prev: None,
            cur: DyadicTree::new(1, block)?,
            retired: Vec::new(),
            retention: Retention::Minimal,
            step: 0,
            noise,
        })
    }

    pub fn with_retention(mut self, retention: Retention) -> Self {
        self.retention = retention;
        self
    }

    pub(crate) fn with_instance(mut self, instance: u32) -> Self {
        self.instance = instance;
        self
    }

    pub fn window(&self) -> u64 {
        self.window
    }

    pub fn block(&self) -> u64 {
        self.block
    }

    pub fn scale(&self) -> LaplaceScale {
        self.scale
    }

    /// Counters per update: one per level of a block tree.
    pub fn counters_per_update(&self) -> u32 {
        self.block.trailing_zeros() + 1
    }

    /// Counters currently held by the two live blocks.
    pub fn live_counters(&self) -> usize {
        self.cur.len() + self.prev.as_ref().map_or(0, DyadicTree::len)
    }

    /// The signed counters combined into the estimate at step `i`.
    pub fn composition(&self, i: u64) -> Result<Vec<Term>> {
        if i == 0 {
            return Err(range("steps are numbered from 1"));
        }
        Ok(window_terms(self.window, self.block, i))
    }

    pub fn node_value(&self, side: Side, iv: Interval) -> Option<f64> {
        let tree = match side {
            Side::Current => Some(&self.cur),
            Side::Previous => self.prev.as_ref(),
        };
        tree.and_then(|t| t.node(iv)).map(|n| n.value())
    }

    pub fn node_noise(&self, side: Side, iv: Interval) -> Option<f64> {
        let tree = match side {
            Side::Current => Some(&self.cur),
            Side::Previous => self.prev.as_ref(),
        };
        tree.and_then(|t| t.node(iv)).map(|n| n.z())
    }
}

impl Mechanism for WindowSum {
    fn push(&mut self, x: f64) -> Result<f64> {
        check_unit(x)?;
        self.step += 1;
        let i = self.step;
        let Self {
            block,
            scale,
            prev,
            cur,
            retired,
            retention,
            noise,
            window,
            ..
        } = self;
        let mut draw = |_: u32| noise.sample(*scale);
        if i > cur.hi() {
            let next = DyadicTree::new(cur.hi() + 1, cur.hi() + *block)?;
            let finished = std::mem::replace(cur, next);
            if let Some(old) = prev.replace(finished) {
                if *retention == Retention::Full {
                    retired.push(old);
                }
            }
        }
        cur.add_to_path(i, x, &mut draw)?;
        let mut estimate = 0.0;
        for t in window_terms(*window, *block, i) {
            let tree = match t.side {
                Side::Current => &mut *cur,
                Side::Previous => prev
                    .as_mut()
                    .expect("a window reaching back one block has a previous block"),
            };
            estimate += t.coeff * tree.value(t.interval, &mut draw)?;
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
        if j == 0 {
            return None;
        }
        let b = self.scale.get();
        NoiseProfile::new(
            window_terms(self.window, self.block, j)
                .iter()
                .map(|t| t.coeff.abs() * b)
                .collect(),
        )
        .ok()
    }

    fn counters(&self) -> Vec<CounterRecord> {
        let b = self.scale.get();
        self.retired
            .iter()
            .chain(self.prev.iter())
            .chain(std::iter::once(&self.cur))
            .flat_map(|t| t.iter())
            .map(|(interval, n)| CounterRecord {
                key: CounterKey {
                    instance: self.instance,
                    interval,
                },
                c0: n.c0(),
                z: n.z(),
                scale: b,
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::noise::RandomSource;

    fn iv(l: u64, u: u64) -> Interval {
        Interval::new(l, u).unwrap()
    }

    fn naive_window(xs: &[f64], w: usize, j: usize) -> f64 {
        xs[j.saturating_sub(w)..j].iter().sum()
    }

    #[test]
    fn scale_follows_window() {
        let m = WindowSum::new(4, 1.0, Noise::disabled()).unwrap();
        assert_eq!(m.scale().get(), 3.0);
        let m = WindowSum::new(4, 0.5, Noise::disabled()).unwrap();
        assert_eq!(m.scale().get(), 6.0);
        let m = WindowSum::new(1, 1.0, Noise::disabled()).unwrap();
        assert_eq!(m.scale().get(), 1.0);
        assert!(WindowSum::new(6, 1.0, Noise::disabled()).is_err());
        assert!(WindowSum::new(4, 0.0, Noise::disabled()).is_err());
    }

    #[test]
    fn figure_two_composition() {
        let m = WindowSum::new(4, 1.0, Noise::disabled()).unwrap();
        let terms = m.composition(7).unwrap();
        let expect = vec![
            Term { side: Side::Previous, interval: iv(1, 4), coeff: 1.0 },
            Term { side: Side::Previous, interval: iv(1, 2), coeff: -1.0 },
            Term { side: Side::Previous, interval: iv(3, 3), coeff: -1.0 },
            Term { side: Side::Current, interval: iv(5, 6), coeff: 1.0 },
            Term { side: Side::Current, interval: iv(7, 7), coeff: 1.0 },
        ];
        assert_eq!(terms, expect);
    }

    #[test]
    fn figure_two_values() {
        let xs = [1.0, 0.0, 1.0, 1.0, 0.0, 1.0, 1.0];
        let mut m = WindowSum::new(4, 1.0, Noise::disabled()).unwrap();
        let out: Vec<f64> = xs.iter().map(|&x| m.push(x).unwrap()).collect();
        assert_eq!(out[6], 3.0);
    }

    #[test]
    fn noise_terms_match_figure_two() {
        let xs = [0.3, 0.9, 0.1, 1.0, 0.5, 0.2, 0.7];
        let mut m = WindowSum::new(4, 1.0, Noise::laplace(RandomSource::new(5))).unwrap();
        let mut last = 0.0;
        for &x in &xs {
            last = m.push(x).unwrap();
        }
        let z = |s, l, u| m.node_noise(s, iv(l, u)).unwrap();
        let noise = z(Side::Previous, 1, 4) - z(Side::Previous, 1, 2) - z(Side::Previous, 3, 3)
            + z(Side::Current, 5, 6)
            + z(Side::Current, 7, 7);
        let truth = xs[3] + xs[4] + xs[5] + xs[6];
        assert!((last - truth - noise).abs() < 1e-12);
    }

    #[test]
    fn saturated_window() {
        let mut m = WindowSum::new(8, 1.0, Noise::disabled()).unwrap();
        for i in 1..=40u64 {
            let y = m.push(1.0).unwrap();
            assert_eq!(y, i.min(8) as f64);
        }
    }

    #[test]
    fn matches_naive_on_random_streams() {
        let mut rng = RandomSource::new(1);
        for w in [1u64, 2, 4, 16] {
            let xs: Vec<f64> = (0..200).map(|_| rng.uniform_open()).collect();
            let mut m = WindowSum::new(w, 1.0, Noise::disabled()).unwrap();
            for (j, &x) in xs.iter().enumerate() {
                let y = m.push(x).unwrap();
                assert!((y - naive_window(&xs, w as usize, j + 1)).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn unaligned_windows_with_wide_blocks() {
        let mut rng = RandomSource::new(2);
        for w in [3u64, 5, 6, 7, 9] {
            let xs: Vec<f64> = (0..100).map(|_| rng.uniform_open()).collect();
            let scale = LaplaceScale::new(1.0).unwrap();
            let mut m = WindowSum::with_scale(w, 1.0, scale, Noise::disabled()).unwrap();
            for (j, &x) in xs.iter().enumerate() {
                let y = m.push(x).unwrap();
                assert!((y - naive_window(&xs, w as usize, j + 1)).abs() < 1e-9, "w={w} j={j}");
            }
        }
    }

    #[test]
    fn keeps_two_blocks() {
        let mut m = WindowSum::new(16, 1.0, Noise::laplace(RandomSource::new(3))).unwrap();
        for _ in 0..200 {
            m.push(1.0).unwrap();
            assert!(m.live_counters() <= 2 * 31);
        }
    }

    #[test]
    fn rejects_out_of_range() {
        let mut m = WindowSum::new(4, 1.0, Noise::disabled()).unwrap();
        assert!(m.push(1.5).is_err());
        assert!(m.push(-0.1).is_err());
        assert!(m.push(f64::NAN).is_err());
    }

    #[test]
    fn each_update_touches_one_counter_per_level() {
        let mut m = WindowSum::new(8, 1.0, Noise::disabled()).unwrap().with_retention(Retention::Full);
        let mut before = 0.0;
        for i in 1..=40 {
            m.push(1.0).unwrap();
            let total: f64 = m.counters().iter().map(|c| c.c0).sum();
            assert_eq!(total - before, 4.0, "step {i}");
            before = total;
        }
    }
}
