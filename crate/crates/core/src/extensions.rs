// SPDX-License-Identifier: Apache-2.0

//! Estimators over streams of universe elements: predicate sums, distinct
//! counts, and per-key histograms.

use std::collections::{HashMap, HashSet};
use std::hash::Hash;

use crate::bounds::NoiseProfile;
use crate::error::{parameter, Error, Result};
use crate::mechanisms::{Mechanism, RunningSum};
use crate::noise::Noise;

/// Maps one universe element to `[0, 1]`, without memory of earlier calls.
pub trait IndividualPredicate<U: ?Sized> {
    fn eval(&self, u: &U) -> f64;
}

impl<U: ?Sized, F: Fn(&U) -> f64> IndividualPredicate<U> for F {
    fn eval(&self, u: &U) -> f64 {
        self(u)
    }
}

fn forward<M: Mechanism>(mech: &mut M, v: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&v) {
        return Err(Error::Contract(format!("predicate returned {v}, outside [0, 1]")));
    }
    mech.push(v)
}

/// Feeds `P(u_i)` to a decayed-sum estimator.
#[derive(Clone, Debug)]
pub struct PredicateStream<P, M> {
    predicate: P,
    mech: M,
}

impl<P, M: Mechanism> PredicateStream<P, M> {
    pub fn new(predicate: P, mech: M) -> Result<Self> {
        if mech.steps() != 0 {
            return Err(parameter("the estimator must not have seen any update"));
        }
        Ok(Self { predicate, mech })
    }

    pub fn push<U: ?Sized>(&mut self, u: &U) -> Result<f64>
    where
        P: IndividualPredicate<U>,
    {
        let v = self.predicate.eval(u);
        forward(&mut self.mech, v)
    }

    pub fn inner(&self) -> &M {
        &self.mech
    }
}

/// A predicate of the whole stream so far whose output sequence changes in
/// at most `sensitivity()` positions when one element is substituted.
pub trait HolisticPredicate<U: ?Sized> {
    fn sensitivity(&self) -> u32;
    fn observe(&mut self, u: &U) -> f64;
}

/// `1` on the first occurrence of an element, `0` afterwards.
#[derive(Clone, Debug)]
pub struct FirstOccurrence<U> {
    seen: HashSet<U>,
}

impl<U> Default for FirstOccurrence<U> {
    fn default() -> Self {
        Self {
            seen: HashSet::new(),
        }
    }
}

impl<U: Hash + Eq + Clone> HolisticPredicate<U> for FirstOccurrence<U> {
    fn sensitivity(&self) -> u32 {
        2
    }

    fn observe(&mut self, u: &U) -> f64 {
        if self.seen.insert(u.clone()) {
            1.0
        } else {
            0.0
        }
    }
}

/// First-occurrence indicators of a whole sequence.
pub fn first_occurrence<U: Hash + Eq + Clone>(seq: &[U]) -> Vec<f64> {
    let mut p = FirstOccurrence::default();
    seq.iter().map(|u| p.observe(u)).collect()
}

/// Runs a `k`-sensitive predicate through an `ε`-private estimator, which
/// makes the composite `kε`-private.
#[derive(Clone, Debug)]
pub struct KSensitive<P, M> {
    predicate: P,
    inner: M,
    epsilon: f64,
}

impl<P, M: Mechanism> KSensitive<P, M> {
    pub fn new<U: ?Sized>(predicate: P, inner: M) -> Result<Self>
    where
        P: HolisticPredicate<U>,
    {
        let inner_eps = inner
            .epsilon()
            .ok_or_else(|| parameter("the inner estimator must be private"))?;
        Ok(Self {
            epsilon: predicate.sensitivity() as f64 * inner_eps,
            predicate,
            inner,
        })
    }

    pub fn push<U: ?Sized>(&mut self, u: &U) -> Result<f64>
    where
        P: HolisticPredicate<U>,
    {
        let v = self.predicate.observe(u);
        forward(&mut self.inner, v)
    }

    /// Privacy parameter of the composite.
    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn inner(&self) -> &M {
        &self.inner
    }
}

/// Private count of distinct elements seen so far.
#[derive(Clone, Debug)]
pub struct DistinctCount<U> {
    wrapped: KSensitive<FirstOccurrence<U>, RunningSum>,
}

impl<U: Hash + Eq + Clone> DistinctCount<U> {
    pub fn new(epsilon: f64, noise: Noise) -> Result<Self> {
        let inner = RunningSum::new(epsilon / 2.0, noise)?;
        let wrapped = KSensitive::new::<U>(FirstOccurrence::default(), inner)?;
        assert!(
            (wrapped.epsilon() - epsilon).abs() <= 1e-12 * epsilon,
            "budget split must compose back to epsilon"
        );
        Ok(Self { wrapped })
    }

    pub fn push(&mut self, u: &U) -> Result<f64> {
        self.wrapped.push(u)
    }

    pub fn epsilon(&self) -> f64 {
        self.wrapped.epsilon()
    }

    pub fn inner_epsilon(&self) -> f64 {
        self.wrapped.inner().epsilon().expect("running sums are private")
    }

    pub fn noise_profile(&self, j: u64) -> Option<NoiseProfile> {
        self.wrapped.inner().noise_profile(j)
    }
}

type Factory<M> = Box<dyn Fn(Noise) -> Result<M> + Send>;

/// One independent estimator per key. The key set is treated as public.
pub struct Histogram<M> {
    factory: Factory<M>,
    noise: Noise,
    index: HashMap<Vec<u8>, usize>,
    slots: Vec<(Vec<u8>, M, f64)>,
}

impl<M: Mechanism> Histogram<M> {
    /// `factory` receives the key's noise source, a child of `noise` indexed by
    /// the order in which keys first appear.
    pub fn new(factory: impl Fn(Noise) -> Result<M> + Send + 'static, noise: Noise) -> Self {
        Self {
            factory: Box::new(factory),
            noise,
            index: HashMap::new(),
            slots: Vec::new(),
        }
    }

    pub fn push(&mut self, key: &[u8], x: f64) -> Result<f64> {
        let k = match self.index.get(key) {
            Some(&k) => k,
            None => {
                let k = self.slots.len();
                let mech = (self.factory)(self.noise.child(k as u64))?;
                self.slots.push((key.to_vec(), mech, 0.0));
                self.index.insert(key.to_vec(), k);
                k
            }
        };
        let (_, mech, last) = &mut self.slots[k];
        *last = mech.push(x)?;
        Ok(*last)
    }

    /// Latest estimate for `key`.
    pub fn estimate(&self, key: &[u8]) -> Option<f64> {
        self.index.get(key).map(|&k| self.slots[k].2)
    }

    /// Keys in order of first appearance.
    pub fn keys(&self) -> impl Iterator<Item = &[u8]> {
        self.slots.iter().map(|(k, _, _)| k.as_slice())
    }

    pub fn get(&self, key: &[u8]) -> Option<&M> {
        self.index.get(key).map(|&k| &self.slots[k].1)
    }

    pub fn len(&self) -> usize {
        self.slots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.slots.is_empty()
    }
}
