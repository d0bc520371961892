// SPDX-License-Identifier: Apache-2.0

//! Theory calculators: tail bounds for sums of Laplace variables, explicit
//! `(δ, γ)` utility, and the lower-bound instance family with its checks.

use serde::Serialize;

use crate::baselines::ExactOracle;
use crate::error::{domain, parameter, Result};
use crate::mechanisms::DecaySpec;

/// Scales `b_i` of the independent Laplace terms summed into one estimate.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct NoiseProfile {
    scales: Vec<f64>,
    sigma: f64,
    max_scale: f64,
}

impl NoiseProfile {
    pub fn new(scales: Vec<f64>) -> Result<Self> {
        if scales.is_empty() {
            return Err(parameter("noise profile needs at least one scale"));
        }
        if let Some(b) = scales.iter().find(|b| !(**b > 0.0 && b.is_finite())) {
            return Err(parameter(format!("Laplace scales must be positive, got {b}")));
        }
        let sigma = (2.0 * scales.iter().map(|b| b * b).sum::<f64>()).sqrt();
        let max_scale = scales.iter().cloned().fold(0.0, f64::max);
        Ok(Self {
            scales,
            sigma,
            max_scale,
        })
    }

    /// `√(2 Σ b_i²)`
    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn max_scale(&self) -> f64 {
        self.max_scale
    }

    pub fn scales(&self) -> &[f64] {
        &self.scales
    }

    /// Largest admissible Chernoff parameter, exclusive.
    pub fn lambda_limit(&self) -> f64 {
        0.75 / self.max_scale
    }
}

/// Bound on `Pr[|S| ≥ tσ]` for `S` the sum of the profile's Laplace terms:
/// `2 exp(0.75 λ²σ² − λtσ)`, clamped to `[0, 1]`.
pub fn laplace_tail(profile: &NoiseProfile, t: f64, lam: f64) -> Result<f64> {
    if !(t > 0.0) {
        return Err(domain(format!("t must be positive, got {t}")));
    }
    if !(lam > 0.0 && lam < profile.lambda_limit()) {
        return Err(domain(format!(
            "lambda must lie in (0, {}), got {lam}",
            profile.lambda_limit()
        )));
    }
    let s = profile.sigma;
    Ok((2.0 * (0.75 * lam * lam * s * s - lam * t * s).exp()).clamp(0.0, 1.0))
}

/// Smallest `δ` for which the tail bound certifies `Pr[|S| > δ] ≤ γ`.
pub fn utility_delta(profile: &NoiseProfile, gamma: f64) -> Result<f64> {
    if !(gamma > 0.0 && gamma < 1.0) {
        return Err(domain(format!("gamma must lie in (0, 1), got {gamma}")));
    }
    let s2 = profile.sigma * profile.sigma;
    let log_term = (2.0 / gamma).ln();
    let objective = |lam: f64| 0.75 * lam * s2 + log_term / lam;
    let unconstrained = (log_term / (0.75 * s2)).sqrt();
    if unconstrained < profile.lambda_limit() {
        Ok(2.0 * profile.sigma * (0.75 * log_term).sqrt())
    } else {
        // The objective decreases up to the unconstrained minimizer, so the
        // infimum over the open interval is its value at the limit.
        Ok(objective(profile.lambda_limit()))
    }
}

/// `H_c(k) = Σ_{i=1..k} i^(−c)`.
pub fn generalized_harmonic(k: u64, c: f64) -> f64 {
    // Smallest terms first.
    (1..=k).rev().map(|i| (i as f64).powf(-c)).sum()
}

/// Instances `x⁰ = 0^(Dq)` and `x^a = (0^((a−1)D), 1^D, 0^((q−a)D))`, with
/// query steps `Q = {j : D | j}`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LbFamily {
    pub q: u64,
    pub d: u64,
    pub instances: Vec<Vec<u8>>,
    pub queries: Vec<u64>,
}

impl LbFamily {
    /// `T = D·q`
    pub fn len(&self) -> u64 {
        self.d * self.q
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

pub fn lb_family_build(q: u64, d: u64) -> Result<LbFamily> {
    if q == 0 || d == 0 {
        return Err(parameter("q and D must be at least 1"));
    }
    let t = (q * d) as usize;
    let mut instances = vec![vec![0u8; t]];
    for a in 1..=q {
        let mut x = vec![0u8; t];
        let start = ((a - 1) * d) as usize;
        x[start..start + d as usize].fill(1);
        instances.push(x);
    }
    Ok(LbFamily {
        q,
        d,
        instances,
        queries: (1..=q).map(|k| k * d).collect(),
    })
}

/// Evidence for one unordered pair of instances: the query step with the
/// largest gap, or the first one exceeding `2δ`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PairWitness {
    pub a: u64,
    pub b: u64,
    pub j: u64,
    pub gap: f64,
    pub separated: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct IndependenceReport {
    pub holds: bool,
    pub delta: f64,
    pub pairs: Vec<PairWitness>,
}

impl IndependenceReport {
    pub fn first_failure(&self) -> Option<&PairWitness> {
        self.pairs.iter().find(|p| !p.separated)
    }
}

fn oracle_series(decay: DecaySpec, x: &[u8]) -> Result<Vec<f64>> {
    let mut oracle = ExactOracle::new(decay)?;
    Ok(x.iter().map(|&b| oracle.accumulate(b as f64)).collect())
}

/// Checks `(Q, δ)`-independence with exact decayed sums.
pub fn lb_check_independence(
    family: &LbFamily,
    decay: DecaySpec,
    delta: f64,
) -> Result<IndependenceReport> {
    decay.validate()?;
    let series = family
        .instances
        .iter()
        .map(|x| oracle_series(decay, x))
        .collect::<Result<Vec<_>>>()?;
    let mut pairs = Vec::new();
    for a in 0..series.len() {
        for b in a + 1..series.len() {
            let mut best = PairWitness {
                a: a as u64,
                b: b as u64,
                j: 0,
                gap: f64::NEG_INFINITY,
                separated: false,
            };
            for &j in &family.queries {
                let k = (j - 1) as usize;
                let gap = (series[a][k] - series[b][k]).abs();
                if gap > 2.0 * delta {
                    best.j = j;
                    best.gap = gap;
                    best.separated = true;
                    break;
                }
                if gap > best.gap {
                    best.j = j;
                    best.gap = gap;
                }
            }
            pairs.push(best);
        }
    }
    Ok(IndependenceReport {
        holds: pairs.iter().all(|p| p.separated),
        delta,
        pairs,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ClosenessReport {
    /// `d_H(x⁰, x^a) ≤ D` for every `a ≥ 1`.
    pub holds: bool,
    pub max_to_zero: u64,
    pub max_all_pairs: u64,
}

fn hamming(x: &[u8], y: &[u8]) -> u64 {
    x.iter().zip(y).filter(|(a, b)| a != b).count() as u64
}

pub fn lb_check_closeness(family: &LbFamily, d: u64) -> ClosenessReport {
    let zero = &family.instances[0];
    let max_to_zero = family.instances[1..]
        .iter()
        .map(|x| hamming(zero, x))
        .max()
        .unwrap_or(0);
    let mut max_all_pairs = 0;
    for (a, x) in family.instances.iter().enumerate() {
        for y in &family.instances[a + 1..] {
            max_all_pairs = max_all_pairs.max(hamming(x, y));
        }
    }
    ClosenessReport {
        holds: max_to_zero <= d,
        max_to_zero,
        max_all_pairs,
    }
}

/// `(ln N + ln 2)/ε`: families of `N` instances that are `D`-close for `D` at
/// or below this value rule out `(δ, 2/3N)`-utility.
pub fn lb_framework_d(n: u64, epsilon: f64) -> Result<f64> {
    if n == 0 {
        return Err(domain("N must be at least 1"));
    }
    if !(epsilon > 0.0 && epsilon.is_finite()) {
        return Err(domain(format!("epsilon must be positive, got {epsilon}")));
    }
    Ok(((n as f64).ln() + std::f64::consts::LN_2) / epsilon)
}

/// Reference lower-bound curve `G(m)/2` with `m = max(1, ⌊ln(1/γ)/ε⌋)` and
/// `G(x) = Σ_{i<x} g(i)`. The constant in front is 1 by convention.
pub fn lb_reference_delta(decay: DecaySpec, gamma: f64, epsilon: f64) -> Result<f64> {
    if !(gamma > 0.0 && gamma < 1.0) {
        return Err(domain(format!("gamma must lie in (0, 1), got {gamma}")));
    }
    if !(epsilon > 0.0 && epsilon.is_finite()) {
        return Err(domain(format!("epsilon must be positive, got {epsilon}")));
    }
    decay.validate().map_err(|e| domain(e.to_string()))?;
    let m = ((1.0 / gamma).ln() / epsilon).floor().max(1.0);
    let m_int = if m >= u64::MAX as f64 { u64::MAX } else { m as u64 };
    Ok(match decay {
        DecaySpec::Window { w } => w.min(m_int) as f64 / 2.0,
        DecaySpec::Exponential { alpha } => (1.0 - alpha.powf(m)) / (2.0 * (1.0 - alpha)),
        DecaySpec::Polynomial { c, .. } => generalized_harmonic(m_int, c) / 2.0,
        DecaySpec::Running => m / 2.0,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::noise::{laplace_sample, LaplaceScale, RandomSource};

    #[test]
    fn sigma_formula() {
        let p = NoiseProfile::new(vec![1.0, 2.0, 3.0]).unwrap();
        assert!((p.sigma() - 28f64.sqrt()).abs() < 1e-12 * p.sigma());
        assert_eq!(p.max_scale(), 3.0);
        assert!(NoiseProfile::new(vec![]).is_err());
        assert!(NoiseProfile::new(vec![1.0, 0.0]).is_err());
    }

    #[test]
    fn tail_example() {
        let p = NoiseProfile::new(vec![1.0]).unwrap();
        let v = laplace_tail(&p, 2.5, 0.5).unwrap();
        let e = 2.0 * (0.375f64 - 0.5 * 2.5 * 2f64.sqrt()).exp();
        assert!((v - e).abs() < 1e-12);
        assert!((v - 0.497).abs() < 1e-3);
        assert!(laplace_tail(&p, 1e6, 0.5).unwrap() < 1e-100);
        assert!(laplace_tail(&p, 2.5, 0.75).is_err());
        assert!(laplace_tail(&p, 2.5, 0.0).is_err());
    }

    #[test]
    fn tail_is_decreasing_in_t() {
        let p = NoiseProfile::new(vec![0.5, 1.0, 1.5]).unwrap();
        let mut prev = f64::INFINITY;
        for k in 1..100 {
            let v = laplace_tail(&p, k as f64 * 0.1, 0.3).unwrap();
            assert!(v <= prev);
            prev = v;
        }
    }

    #[test]
    fn delta_branches() {
        let p = NoiseProfile::new(vec![1.0; 16]).unwrap();
        let g: f64 = 0.05;
        let d = utility_delta(&p, g).unwrap();
        let closed = 2.0 * p.sigma() * (0.75 * (2.0 / g).ln()).sqrt();
        assert!((d - closed).abs() < 1e-12);
        // A single term puts the minimizer outside the admissible range.
        let one = NoiseProfile::new(vec![1.0]).unwrap();
        let d1 = utility_delta(&one, 1e-6).unwrap();
        let lam = 0.75;
        let boundary = 0.75 * lam * 2.0 + (2.0f64 / 1e-6).ln() / lam;
        assert!((d1 - boundary).abs() < 1e-12);
        assert!(utility_delta(&p, 0.999).unwrap() < utility_delta(&p, 0.01).unwrap());
        assert!(utility_delta(&p, 0.0).is_err());
    }

    #[test]
    fn delta_dominates_sampled_quantile() {
        let b = 2.0;
        let p = NoiseProfile::new(vec![b]).unwrap();
        let d = utility_delta(&p, 0.05).unwrap();
        let mut rng = RandomSource::new(5);
        let s = LaplaceScale::new(b).unwrap();
        let mut xs: Vec<f64> = (0..100_000).map(|_| laplace_sample(&mut rng, s).abs()).collect();
        xs.sort_by(f64::total_cmp);
        assert!(xs[94_999] <= d);
    }

    #[test]
    fn family_shape() {
        let f = lb_family_build(2, 2).unwrap();
        assert_eq!(f.instances, vec![vec![0, 0, 0, 0], vec![1, 1, 0, 0], vec![0, 0, 1, 1]]);
        assert_eq!(f.queries, vec![2, 4]);
        let f = lb_family_build(5, 3).unwrap();
        assert!(f.instances[1..].iter().all(|x| x.iter().map(|&b| b as u64).sum::<u64>() == 3));
        assert!(f.instances.iter().all(|x| x.len() == 15));
        assert!(lb_family_build(0, 3).is_err());
    }

    #[test]
    fn window_independence_examples() {
        let f = lb_family_build(4, 8).unwrap();
        let w = DecaySpec::Window { w: 8 };
        let r = lb_check_independence(&f, w, 3.5).unwrap();
        assert!(r.holds);
        assert!(r.pairs.iter().all(|p| p.gap == 8.0));
        let r = lb_check_independence(&f, w, 4.5).unwrap();
        assert!(!r.holds);
        assert!(r.first_failure().is_some());
        assert!(!lb_check_independence(&f, w, 8.0).unwrap().holds);
        let single = lb_family_build(1, 8).unwrap();
        assert!(lb_check_independence(&single, w, 3.5).unwrap().holds);
    }

    #[test]
    fn closeness() {
        let f = lb_family_build(3, 4).unwrap();
        let r = lb_check_closeness(&f, 4);
        assert!(r.holds);
        assert_eq!((r.max_to_zero, r.max_all_pairs), (4, 8));
        assert!(!lb_check_closeness(&f, 0).holds);
    }

    #[test]
    fn framework_threshold() {
        assert!((lb_framework_d(8, 1.0).unwrap() - 16f64.ln()).abs() < 1e-12);
        assert!((lb_framework_d(1, 2.0).unwrap() - 2f64.ln() / 2.0).abs() < 1e-12);
        let a = lb_framework_d(5, 0.5).unwrap();
        assert!((lb_framework_d(5, 1.0).unwrap() - a / 2.0).abs() < 1e-12);
        assert!(lb_framework_d(0, 1.0).is_err());
    }

    #[test]
    fn reference_curves() {
        let w = DecaySpec::Window { w: 4 };
        assert_eq!(lb_reference_delta(w, 1e-6, 0.1).unwrap(), 2.0);
        let e = DecaySpec::Exponential { alpha: 0.9 };
        assert!((lb_reference_delta(e, 1e-300, 1e-3).unwrap() - 5.0).abs() < 1e-9);
        let p = DecaySpec::Polynomial { c: 2.0, beta: 0.5 };
        // ln(1/γ) = 3.5 with ε = 1 gives m = 3.
        let v = lb_reference_delta(p, (-3.5f64).exp(), 1.0).unwrap();
        assert!((v - (1.0 + 0.25 + 1.0 / 9.0) / 2.0).abs() < 1e-12);
    }

    #[test]
    fn reference_grows_like_log_t() {
        let eps = 1.0;
        let mut prev = 0.0;
        for k in 2..20 {
            let t = 1u64 << k;
            let v = lb_reference_delta(DecaySpec::Window { w: t }, 2.0 / (3.0 * t as f64), eps).unwrap();
            assert!(v >= prev);
            let m = ((1.5 * t as f64).ln() / eps).floor();
            assert_eq!(v, m.min(t as f64) / 2.0);
            prev = v;
        }
    }
}
