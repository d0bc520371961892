// SPDX-License-Identifier: Apache-2.0

//! Polynomially decayed sums as a sum of geometrically scaled window sums.
//!
//! With breakpoints `b(j) = max{i : (i+1)^(−c) ≥ (1−β)^j}`, the decay is
//! replaced by a step function equal to 1 at age 0 and to `(1−β)^j` on ages
//! `(b(j−1), b(j)]`. That step function lies between `(1−β)·g` and `g`, so the
//! estimate brackets the true sum from below within a factor `1−β`. Each step
//! is one window sum over a lagged, scaled copy of the stream.

use crate::bounds::NoiseProfile;
use crate::error::{check_unit, domain, parameter, Result};
use crate::mechanisms::window::window_terms;
use crate::mechanisms::{clamp_weight, CounterRecord, Mechanism, Retention, WindowSum};
use crate::noise::{LaplaceScale, Noise};

fn check_params(c: f64, beta: f64) -> Result<()> {
    if !(c > 1.0 && c.is_finite()) {
        return Err(domain(format!("c must exceed 1, got {c}")));
    }
    if !(beta > 0.0 && beta < 1.0) {
        return Err(domain(format!("beta must lie in (0, 1), got {beta}")));
    }
    Ok(())
}

/// Sensitivity bound `log₂(1/(1−β))/(cβ²) + 1/β` of all child counters.
pub fn sensitivity_lambda_poly(c: f64, beta: f64) -> Result<f64> {
    check_params(c, beta)?;
    Ok((1.0 / (1.0 - beta)).log2() / (c * beta * beta) + 1.0 / beta)
}

/// `b(j) = ⌊(1−β)^(−j/c)⌋ − 1`, with `b(0) = 0`.
pub fn breakpoint(j: u32, c: f64, beta: f64) -> u64 {
    if j == 0 {
        return 0;
    }
    let x = (1.0 - beta).powf(-(j as f64) / c);
    // Values within rounding of an integer are exact powers, e.g. 4^(1/2).
    let r = x.round();
    let m = if (x - r).abs() <= 1e-9 * x.max(1.0) { r } else { x.floor() };
    if m >= (u64::MAX / 4) as f64 {
        u64::MAX / 4
    } else {
        (m as u64).saturating_sub(1)
    }
}

/// Placement of one child window sum: it covers ages `[lag, lag + window − 1]`
/// with weight `weight`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ChildLayout {
    pub index: u32,
    pub lag: u64,
    pub window: u64,
    pub weight: f64,
}

impl ChildLayout {
    pub fn new(index: u32, c: f64, beta: f64) -> Self {
        if index == 0 {
            return Self {
                index,
                lag: 0,
                window: 1,
                weight: 1.0,
            };
        }
        let prev = breakpoint(index - 1, c, beta);
        Self {
            index,
            lag: prev + 1,
            window: breakpoint(index, c, beta) - prev,
            weight: clamp_weight((1.0 - beta).powi(index as i32)),
        }
    }
}

#[derive(Clone, Debug)]
pub struct PolynomialSum {
    c: f64,
    beta: f64,
    epsilon: f64,
    lambda: f64,
    scale: LaplaceScale,
    history: Vec<f64>,
    children: Vec<(ChildLayout, WindowSum)>,
    next_child: u32,
    step: u64,
    retention: Retention,
    noise: Noise,
}

impl PolynomialSum {
    pub fn new(c: f64, beta: f64, epsilon: f64, noise: Noise) -> Result<Self> {
        check_params(c, beta).map_err(|e| parameter(e.to_string()))?;
        if !(epsilon > 0.0 && epsilon.is_finite()) {
            return Err(parameter(format!("epsilon must be positive, got {epsilon}")));
        }
        let lambda = sensitivity_lambda_poly(c, beta)?;
        Ok(Self {
            c,
            beta,
            epsilon,
            lambda,
            scale: LaplaceScale::new(lambda / epsilon)?,
            history: Vec::new(),
            children: Vec::new(),
            next_child: 0,
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

    /// Layouts of the children that have started.
    pub fn layouts(&self) -> impl Iterator<Item = &ChildLayout> {
        self.children.iter().map(|(l, _)| l)
    }

    /// Children (including empty ones) whose lag is below `j`.
    fn layouts_until(&self, j: u64) -> impl Iterator<Item = ChildLayout> + '_ {
        (0u32..)
            .map(|k| ChildLayout::new(k, self.c, self.beta))
            .take_while(move |l| l.lag < j)
            .filter(|l| l.window > 0)
    }
}

impl Mechanism for PolynomialSum {
    fn push(&mut self, x: f64) -> Result<f64> {
        check_unit(x)?;
        let i = self.step + 1;
        loop {
            let layout = ChildLayout::new(self.next_child, self.c, self.beta);
            if layout.lag >= i {
                break;
            }
            if layout.window > 0 {
                let child = WindowSum::with_scale(
                    layout.window,
                    self.epsilon,
                    self.scale,
                    self.noise.child(layout.index as u64),
                )?
                .with_retention(self.retention)
                .with_instance(layout.index);
                self.children.push((layout, child));
            }
            self.next_child += 1;
        }
        self.history.push(x);
        self.step = i;
        let mut estimate = 0.0;
        for (layout, child) in &mut self.children {
            let lagged = self.history[(i - layout.lag - 1) as usize];
            estimate += child.push(layout.weight * lagged)?;
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
        let mut scales = Vec::new();
        for l in self.layouts_until(j) {
            let block = l.window.next_power_of_two();
            for t in window_terms(l.window, block, j - l.lag) {
                let s = b * t.coeff.abs();
                if s > 0.0 {
                    scales.push(s);
                }
            }
        }
        NoiseProfile::new(scales).ok()
    }

    fn counters(&self) -> Vec<CounterRecord> {
        self.children.iter().flat_map(|(_, c)| c.counters()).collect()
    }
}
