// SPDX-License-Identifier: Apache-2.0

//! Interval-indexed complete binary trees over time steps.
//!
//! A tree `T(L, U)` has `U − L + 1 = 2^(h−1)` leaves. At level `k` (leaves are
//! level 1) the node intervals are `[L + (i−1)·2^(k−1), L + i·2^(k−1) − 1]`.
//! Each node carries a noiseless accumulator `c0` and a noise term `z` fixed
//! when the node is first touched; the published value is always `c0 + z`.

use std::fmt;

use rustc_hash::FxHashMap;
use serde::{Deserialize, Serialize};

use crate::error::{parameter, range, Error, Result};

/// Closed interval `[l, u]` of 1-based time steps.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Interval {
    pub l: u64,
    pub u: u64,
}

impl Interval {
    pub fn new(l: u64, u: u64) -> Result<Self> {
        if l == 0 || l > u {
            return Err(parameter(format!("[{l}, {u}] is not a valid interval")));
        }
        Ok(Self { l, u })
    }

    #[allow(clippy::len_without_is_empty)] // an interval always holds at least one step
    pub fn len(&self) -> u64 {
        self.u - self.l + 1
    }

    pub fn contains(&self, i: u64) -> bool {
        self.l <= i && i <= self.u
    }
}

impl fmt::Display for Interval {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{},{}]", self.l, self.u)
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TreeNode {
    c0: f64,
    z: f64,
}

impl TreeNode {
    fn new(z: f64) -> Self {
        Self { c0: 0.0, z }
    }

    /// Noiseless accumulator.
    pub fn c0(&self) -> f64 {
        self.c0
    }

    /// Noise drawn at creation.
    pub fn z(&self) -> f64 {
        self.z
    }

    /// Published (noisy) value.
    pub fn value(&self) -> f64 {
        self.c0 + self.z
    }
}

/// Iterator over the nodes whose disjoint union is a prefix `[L, u]`, largest
/// first. Interval lengths are the set bits of `u − L + 1`.
#[derive(Clone, Debug)]
pub struct PrefixDecomposition {
    next: u64,
    remaining: u64,
}

impl Iterator for PrefixDecomposition {
    type Item = Interval;

    fn next(&mut self) -> Option<Interval> {
        if self.remaining == 0 {
            return None;
        }
        let chunk = 1u64 << (63 - self.remaining.leading_zeros());
        let iv = Interval {
            l: self.next,
            u: self.next + chunk - 1,
        };
        self.next += chunk;
        self.remaining -= chunk;
        Some(iv)
    }

    fn size_hint(&self) -> (usize, Option<usize>) {
        let n = self.remaining.count_ones() as usize;
        (n, Some(n))
    }
}

impl ExactSizeIterator for PrefixDecomposition {}

/// Prefix decomposition for any dyadic-aligned range starting at `lo`.
pub(crate) fn prefix_nodes(lo: u64, u: u64) -> PrefixDecomposition {
    PrefixDecomposition {
        next: lo,
        remaining: (u + 1).saturating_sub(lo),
    }
}

type NodeKey = (u32, u64);

#[derive(Clone, Debug)]
pub struct DyadicTree {
    lo: u64,
    hi: u64,
    height: u32,
    nodes: FxHashMap<NodeKey, TreeNode>,
}

impl DyadicTree {
    /// Empty tree over `[lo, hi]`; the span must be a power of two.
    pub fn new(lo: u64, hi: u64) -> Result<Self> {
        let span = Interval::new(lo, hi)?.len();
        if !span.is_power_of_two() {
            return Err(parameter(format!(
                "tree span {span} over [{lo}, {hi}] is not a power of two"
            )));
        }
        Ok(Self {
            lo,
            hi,
            height: span.trailing_zeros() + 1,
            nodes: FxHashMap::default(),
        })
    }

    pub fn lo(&self) -> u64 {
        self.lo
    }

    pub fn hi(&self) -> u64 {
        self.hi
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn root(&self) -> Interval {
        Interval {
            l: self.lo,
            u: self.hi,
        }
    }

    /// Number of materialized nodes.
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn key(&self, iv: Interval) -> Result<NodeKey> {
        let len = iv.len();
        if iv.l < self.lo || iv.u > self.hi || !len.is_power_of_two() || !(iv.l - self.lo).is_multiple_of(len) {
            return Err(parameter(format!(
                "{iv} is not a node of the tree over [{}, {}]",
                self.lo, self.hi
            )));
        }
        Ok((len.trailing_zeros() + 1, (iv.l - self.lo) / len))
    }

    fn interval_of(&self, (level, index): NodeKey) -> Interval {
        let len = 1u64 << (level - 1);
        let l = self.lo + index * len;
        Interval { l, u: l + len - 1 }
    }

    /// Level of a node interval (leaves are level 1).
    pub fn level_of(&self, iv: Interval) -> Result<u32> {
        self.key(iv).map(|k| k.0)
    }

    /// The nodes tiling `[L, u]`, largest first. `u = L − 1` gives the empty
    /// prefix.
    pub fn decompose_prefix(&self, u: u64) -> Result<PrefixDecomposition> {
        if u > self.hi || u + 1 < self.lo {
            return Err(range(format!(
                "prefix end {u} outside [{}, {}]",
                self.lo as i128 - 1,
                self.hi
            )));
        }
        Ok(prefix_nodes(self.lo, u))
    }

    /// Ancestors of leaf `i`, leaf first, one per level.
    pub fn path_intervals(&self, i: u64) -> Result<Vec<Interval>> {
        if i < self.lo || i > self.hi {
            return Err(range(format!("leaf {i} outside [{}, {}]", self.lo, self.hi)));
        }
        Ok((0..self.height)
            .map(|k| {
                let len = 1u64 << k;
                let l = self.lo + ((i - self.lo) / len) * len;
                Interval { l, u: l + len - 1 }
            })
            .collect())
    }

    /// True iff `iv` precedes its sibling. The root has no sibling and is
    /// reported as not-left.
    pub fn is_left_node(&self, iv: Interval) -> Result<bool> {
        let (level, index) = self.key(iv)?;
        Ok(level < self.height && index % 2 == 0)
    }

    /// Parent interval, or `None` for the root.
    pub fn parent(&self, iv: Interval) -> Result<Option<Interval>> {
        let (level, index) = self.key(iv)?;
        if level == self.height {
            return Ok(None);
        }
        Ok(Some(self.interval_of((level + 1, index / 2))))
    }

    pub fn node(&self, iv: Interval) -> Option<&TreeNode> {
        self.key(iv).ok().and_then(|k| self.nodes.get(&k))
    }

    /// Materializes the node if needed, drawing its noise from `draw(level)`.
    pub fn touch(&mut self, iv: Interval, draw: &mut impl FnMut(u32) -> f64) -> Result<&mut TreeNode> {
        let key = self.key(iv)?;
        Ok(self
            .nodes
            .entry(key)
            .or_insert_with(|| TreeNode::new(draw(key.0))))
    }

    pub fn add(&mut self, iv: Interval, amount: f64, draw: &mut impl FnMut(u32) -> f64) -> Result<()> {
        self.touch(iv, draw)?.c0 += amount;
        Ok(())
    }

    /// Published value of a node, materializing it if it was never touched.
    pub fn value(&mut self, iv: Interval, draw: &mut impl FnMut(u32) -> f64) -> Result<f64> {
        Ok(self.touch(iv, draw)?.value())
    }

    /// Noisy prefix sum `s(u, T)`; zero for the empty prefix.
    pub fn prefix_sum(&mut self, u: u64, draw: &mut impl FnMut(u32) -> f64) -> Result<f64> {
        let mut total = 0.0;
        for iv in self.decompose_prefix(u)? {
            total += self.value(iv, draw)?;
        }
        Ok(total)
    }

    /// Adds `amount` to every ancestor of leaf `i`.
    pub fn add_to_path(&mut self, i: u64, amount: f64, draw: &mut impl FnMut(u32) -> f64) -> Result<()> {
        if i < self.lo || i > self.hi {
            return Err(range(format!("leaf {i} outside [{}, {}]", self.lo, self.hi)));
        }
        for k in 0..self.height {
            let len = 1u64 << k;
            let key = (k + 1, (i - self.lo) / len);
            self.nodes
                .entry(key)
                .or_insert_with(|| TreeNode::new(draw(key.0)))
                .c0 += amount;
        }
        Ok(())
    }

    /// Doubles a tree `T(1, i−1)` into `T(1, 2(i−1))` ahead of update `i`.
    /// The new root starts at `carry_weight · c0` of the old root plus fresh
    /// noise.
    pub fn grow_double(
        &mut self,
        i: u64,
        carry_weight: f64,
        draw: &mut impl FnMut(u32) -> f64,
    ) -> Result<()> {
        if self.lo != 1 || self.hi + 1 != i {
            return Err(Error::State(format!(
                "cannot grow tree over [{}, {}] before update {i}",
                self.lo, self.hi
            )));
        }
        if !(carry_weight >= 0.0) {
            return Err(parameter(format!("carry weight {carry_weight} is negative")));
        }
        let old_root = self.root();
        let carried = self.node(old_root).map_or(0.0, TreeNode::c0) * carry_weight;
        self.hi *= 2;
        self.height += 1;
        let root = self.root();
        self.touch(root, draw)?.c0 += carried;
        Ok(())
    }

    /// Drops every materialized node for which `evict` returns true.
    pub fn evict(&mut self, mut evict: impl FnMut(&Self, Interval) -> bool) {
        let doomed: Vec<NodeKey> = self
            .nodes
            .keys()
            .copied()
            .filter(|&k| evict(self, self.interval_of(k)))
            .collect();
        for k in doomed {
            self.nodes.remove(&k);
        }
    }

    /// Materialized nodes with their intervals, in no particular order.
    pub fn iter(&self) -> impl Iterator<Item = (Interval, &TreeNode)> + '_ {
        self.nodes.iter().map(|(&k, n)| (self.interval_of(k), n))
    }
}
