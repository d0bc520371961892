// SPDX-License-Identifier: Apache-2.0

//! Experiment plumbing: configurations, stream sources, record formats, the
//! Monte-Carlo benchmark, and the theory tables.
//!
//! Seeds are laid out as children of the base seed: `child(0)` generates the
//! input stream, `child(1).child(t)` drives the estimator in trial `t`,
//! `child(2)` and `child(3)` the randomized-response and running-difference
//! baselines. `run` uses trial 0.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::baselines::{ExactOracle, RandomizedResponse, RunningDifference};
use crate::bounds::{
    lb_check_closeness, lb_check_independence, lb_family_build, lb_framework_d,
    lb_reference_delta, utility_delta, ClosenessReport, IndependenceReport, NoiseProfile,
};
use crate::error::{Error, Result};
use crate::extensions::Histogram;
use crate::mechanisms::{
    sensitivity_lambda_exp, sensitivity_lambda_poly, AllWindowSum, DecaySpec, ExponentialSum,
    Mechanism, PolynomialSum, RunningSum, WindowSum,
};
use crate::noise::{Noise, RandomSource};

fn usage(msg: impl Into<String>) -> Error {
    Error::Usage(msg.into())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MechKind {
    Window,
    AllWindow,
    Exp,
    Poly,
    Running,
    Rr,
    Oracle,
}

impl MechKind {
    pub const ALL: [MechKind; 7] = [
        MechKind::Window,
        MechKind::AllWindow,
        MechKind::Exp,
        MechKind::Poly,
        MechKind::Running,
        MechKind::Rr,
        MechKind::Oracle,
    ];

    pub fn name(self) -> &'static str {
        match self {
            MechKind::Window => "window",
            MechKind::AllWindow => "allwindow",
            MechKind::Exp => "exp",
            MechKind::Poly => "poly",
            MechKind::Running => "running",
            MechKind::Rr => "rr",
            MechKind::Oracle => "oracle",
        }
    }

    /// The tree estimator that serves `decay` by default.
    pub fn for_decay(decay: DecaySpec) -> Self {
        match decay {
            DecaySpec::Window { w } if w.is_power_of_two() => MechKind::Window,
            DecaySpec::Window { .. } => MechKind::AllWindow,
            DecaySpec::Exponential { .. } => MechKind::Exp,
            DecaySpec::Polynomial { .. } => MechKind::Poly,
            DecaySpec::Running => MechKind::Running,
        }
    }
}

impl FromStr for MechKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| usage(format!("unknown mechanism {s:?}")))
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OutputFormat {
    #[default]
    Csv,
    Ndjson,
}

impl FromStr for OutputFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(OutputFormat::Csv),
            "ndjson" => Ok(OutputFormat::Ndjson),
            _ => Err(usage(format!("unknown format {s:?}"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum StreamSource {
    /// Read by the caller; `-` is standard input.
    File { path: String },
    Bernoulli { p: f64 },
    Ones,
    /// Alternating runs of `d` ones and `d` zeros.
    Blocks { d: u64 },
}

impl FromStr for StreamSource {
    type Err = Error;

    /// `bernoulli:P`, `ones` or `blocks:D`.
    fn from_str(s: &str) -> Result<Self> {
        let (name, arg) = match s.split_once(':') {
            Some((n, a)) => (n, Some(a)),
            None => (s, None),
        };
        let bad = || usage(format!("bad stream generator {s:?}"));
        match (name, arg) {
            ("ones", None) => Ok(StreamSource::Ones),
            ("bernoulli", Some(a)) => {
                let p: f64 = a.parse().map_err(|_| bad())?;
                if !(0.0..=1.0).contains(&p) {
                    return Err(bad());
                }
                Ok(StreamSource::Bernoulli { p })
            }
            ("blocks", Some(a)) => match a.parse::<u64>() {
                Ok(d) if d > 0 => Ok(StreamSource::Blocks { d }),
                _ => Err(bad()),
            },
            _ => Err(bad()),
        }
    }
}

impl StreamSource {
    pub fn generate(&self, t: u64, rng: &mut RandomSource) -> Result<Vec<f64>> {
        Ok(match *self {
            StreamSource::File { .. } => return Err(usage("file streams are read by the caller")),
            StreamSource::Bernoulli { p } => (0..t).map(|_| rng.bernoulli(p) as u8 as f64).collect(),
            StreamSource::Ones => vec![1.0; t as usize],
            StreamSource::Blocks { d } => (0..t).map(|i| ((i / d) % 2 == 0) as u8 as f64).collect(),
        })
    }
}

/// Everything that determines the output of `run` and `bench`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub mech: MechKind,
    pub decay: DecaySpec,
    pub epsilon: f64,
    pub gamma: f64,
    /// Budget schedule exponent of the growing-tree estimators.
    pub schedule_exponent: f64,
    pub trials: u64,
    pub t: u64,
    pub seed: u64,
    pub source: StreamSource,
    pub noise: bool,
    pub format: OutputFormat,
}

impl ExperimentConfig {
    pub fn new(mech: MechKind, decay: DecaySpec, epsilon: f64) -> Self {
        Self {
            mech,
            decay,
            epsilon,
            gamma: 0.05,
            schedule_exponent: crate::mechanisms::DEFAULT_SCHEDULE_EXPONENT,
            trials: 100,
            t: 4096,
            seed: 0,
            source: StreamSource::Bernoulli { p: 0.5 },
            noise: true,
            format: OutputFormat::Csv,
        }
    }

    fn root(&self) -> RandomSource {
        RandomSource::new(self.seed)
    }

    /// Generated input stream; file sources must be parsed by the caller.
    pub fn stream(&self) -> Result<Vec<f64>> {
        self.source.generate(self.t, &mut self.root().child(0))
    }

    fn noise_for(&self, stream: u64, trial: u64) -> Noise {
        if self.noise {
            Noise::laplace(self.root().child(stream).child(trial))
        } else {
            Noise::disabled()
        }
    }

    pub fn build(&self, noise: Noise) -> Result<Box<dyn Mechanism>> {
        build_mechanism(
            self.mech,
            self.decay,
            self.epsilon,
            self.schedule_exponent,
            noise,
        )
    }
}

/// Constructs the estimator `mech` for `decay`. Randomized response draws its
/// coins from the noise source and keeps every bit when noise is disabled.
pub fn build_mechanism(
    mech: MechKind,
    decay: DecaySpec,
    epsilon: f64,
    schedule_exponent: f64,
    noise: Noise,
) -> Result<Box<dyn Mechanism>> {
    decay.validate()?;
    let mismatch = || {
        usage(format!(
            "mechanism {} does not estimate {decay:?}",
            mech.name()
        ))
    };
    Ok(match (mech, decay) {
        (MechKind::Window, DecaySpec::Window { w }) => Box::new(WindowSum::new(w, epsilon, noise)?),
        (MechKind::AllWindow, DecaySpec::Window { w }) => Box::new(
            AllWindowSum::new(epsilon, schedule_exponent, noise)?.with_tracked_window(w)?,
        ),
        (MechKind::AllWindow | MechKind::Running, DecaySpec::Running) => Box::new(
            RunningSum::with_schedule(epsilon, schedule_exponent, noise)?,
        ),
        (MechKind::Exp, DecaySpec::Exponential { alpha }) => {
            Box::new(ExponentialSum::new(alpha, epsilon, noise)?)
        }
        (MechKind::Poly, DecaySpec::Polynomial { c, beta }) => {
            Box::new(PolynomialSum::new(c, beta, epsilon, noise)?)
        }
        (MechKind::Rr, _) => match noise.source() {
            Some(rng) => Box::new(RandomizedResponse::matched(decay, epsilon, rng.clone())?),
            None => Box::new(RandomizedResponse::new(decay, 1.0, RandomSource::new(0))?),
        },
        (MechKind::Oracle, _) => Box::new(ExactOracle::new(decay)?),
        _ => return Err(mismatch()),
    })
}

/// Values one per line; blank lines are skipped.
pub fn parse_scalar_stream(text: &str) -> Result<Vec<f64>> {
    let mut out = Vec::new();
    for (k, line) in text.lines().enumerate() {
        let s = line.trim();
        if s.is_empty() {
            continue;
        }
        out.push(parse_value(s, k + 1)?);
    }
    Ok(out)
}

/// `key,value` records; the value follows the last comma.
pub fn parse_keyed_stream(text: &str) -> Result<Vec<(String, f64)>> {
    let mut out = Vec::new();
    for (k, line) in text.lines().enumerate() {
        let s = line.trim();
        if s.is_empty() {
            continue;
        }
        let (key, v) = s.rsplit_once(',').ok_or(Error::Data {
            line: k + 1,
            message: format!("expected key,value but got {s:?}"),
        })?;
        out.push((key.to_string(), parse_value(v.trim(), k + 1)?));
    }
    Ok(out)
}

fn parse_value(s: &str, line: usize) -> Result<f64> {
    let v: f64 = s.parse().map_err(|_| Error::Data {
        line,
        message: format!("not a number: {s:?}"),
    })?;
    if !(0.0..=1.0).contains(&v) {
        return Err(Error::Data {
            line,
            message: format!("value {v} is outside [0, 1]"),
        });
    }
    Ok(v)
}

/// One output row of `run`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub t: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub key: Option<String>,
    pub estimate: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub exact: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub abs_error: Option<f64>,
}

fn with_step(err: Error, step: usize) -> Error {
    match err {
        Error::Range(message) | Error::Parameter(message) => Error::Data { line: step, message },
        e => e,
    }
}

/// Streams `values` through the configured estimator (trial 0).
pub fn run_stream(cfg: &ExperimentConfig, values: &[f64], with_exact: bool) -> Result<Vec<RunRecord>> {
    let mut mech = cfg.build(cfg.noise_for(1, 0))?;
    let mut oracle = if with_exact {
        Some(ExactOracle::new(cfg.decay)?)
    } else {
        None
    };
    let mut out = Vec::with_capacity(values.len());
    for (k, &x) in values.iter().enumerate() {
        let estimate = mech.push(x).map_err(|e| with_step(e, k + 1))?;
        let exact = oracle.as_mut().map(|o| o.accumulate(x));
        out.push(RunRecord {
            t: k as u64 + 1,
            key: None,
            estimate,
            exact,
            abs_error: exact.map(|e| (estimate - e).abs()),
        });
    }
    Ok(out)
}

/// Streams keyed updates through one estimator per key. `t` counts steps of
/// the merged input.
pub fn run_histogram(
    cfg: &ExperimentConfig,
    items: &[(String, f64)],
    with_exact: bool,
) -> Result<Vec<RunRecord>> {
    let c = cfg.clone();
    // Surface configuration errors before the first key arrives.
    c.build(Noise::disabled())?;
    let mut hist = Histogram::new(move |n| c.build(n), cfg.noise_for(1, 0));
    let mut oracles: HashMap<&str, ExactOracle> = HashMap::new();
    let mut out = Vec::with_capacity(items.len());
    for (k, (key, x)) in items.iter().enumerate() {
        let estimate = hist.push(key.as_bytes(), *x).map_err(|e| with_step(e, k + 1))?;
        let exact = if with_exact {
            let o = match oracles.get_mut(key.as_str()) {
                Some(o) => o,
                None => oracles
                    .entry(key.as_str())
                    .or_insert(ExactOracle::new(cfg.decay)?),
            };
            Some(o.accumulate(*x))
        } else {
            None
        };
        out.push(RunRecord {
            t: k as u64 + 1,
            key: Some(key.clone()),
            estimate,
            exact,
            abs_error: exact.map(|e| (estimate - e).abs()),
        });
    }
    Ok(out)
}

fn csv_error(e: csv::Error) -> Error {
    let line = e.position().map_or(0, |p| p.line() as usize);
    Error::Data {
        line,
        message: e.to_string(),
    }
}

pub fn write_records(records: &[RunRecord], format: OutputFormat) -> Result<String> {
    match format {
        OutputFormat::Ndjson => {
            let mut s = String::new();
            for r in records {
                s.push_str(&serde_json::to_string(r).expect("records serialize"));
                s.push('\n');
            }
            Ok(s)
        }
        OutputFormat::Csv => {
            let keyed = records.iter().any(|r| r.key.is_some());
            let exact = records.iter().any(|r| r.exact.is_some());
            let mut w = csv::Writer::from_writer(Vec::new());
            let mut header = vec!["t"];
            if keyed {
                header.push("key");
            }
            header.push("estimate");
            if exact {
                header.extend(["exact", "abs_error"]);
            }
            w.write_record(&header).map_err(csv_error)?;
            let opt = |v: Option<f64>| v.map(|v| v.to_string()).unwrap_or_default();
            for r in records {
                let mut row = vec![r.t.to_string()];
                if keyed {
                    row.push(r.key.clone().unwrap_or_default());
                }
                row.push(r.estimate.to_string());
                if exact {
                    row.push(opt(r.exact));
                    row.push(opt(r.abs_error));
                }
                w.write_record(&row).map_err(csv_error)?;
            }
            let bytes = w.into_inner().map_err(|e| usage(e.to_string()))?;
            Ok(String::from_utf8(bytes).expect("fields are UTF-8"))
        }
    }
}

pub fn parse_records(text: &str, format: OutputFormat) -> Result<Vec<RunRecord>> {
    match format {
        OutputFormat::Ndjson => text
            .lines()
            .enumerate()
            .filter(|(_, l)| !l.trim().is_empty())
            .map(|(k, l)| {
                serde_json::from_str(l).map_err(|e| Error::Data {
                    line: k + 1,
                    message: e.to_string(),
                })
            })
            .collect(),
        OutputFormat::Csv => parse_records_csv(text),
    }
}

fn parse_records_csv(text: &str) -> Result<Vec<RunRecord>> {
    let mut reader = csv::Reader::from_reader(text.as_bytes());
    let header = reader.headers().map_err(csv_error)?.clone();
    let col = |name: &str| header.iter().position(|h| h == name);
    let (t, key, estimate, exact, abs_error) =
        (col("t"), col("key"), col("estimate"), col("exact"), col("abs_error"));
    let (Some(t), Some(estimate)) = (t, estimate) else {
        return Err(Error::Data {
            line: 1,
            message: "header needs t and estimate columns".into(),
        });
    };
    let mut out = Vec::new();
    for row in reader.records() {
        let row = row.map_err(csv_error)?;
        let line = row.position().map_or(0, |p| p.line() as usize);
        let bad = |field: &str| Error::Data {
            line,
            message: format!("bad {field} field"),
        };
        // Parsed with `str::parse`, which round-trips the shortest representation.
        let num = |k: Option<usize>, field: &str| -> Result<Option<f64>> {
            match k.and_then(|k| row.get(k)).filter(|s| !s.is_empty()) {
                Some(s) => s.parse().map(Some).map_err(|_| bad(field)),
                None => Ok(None),
            }
        };
        out.push(RunRecord {
            t: row.get(t).and_then(|s| s.parse().ok()).ok_or_else(|| bad("t"))?,
            key: key.and_then(|k| row.get(k)).map(str::to_string),
            estimate: num(Some(estimate), "estimate")?.ok_or_else(|| bad("estimate"))?,
            exact: num(exact, "exact")?,
            abs_error: num(abs_error, "abs_error")?,
        });
    }
    Ok(out)
}

/// Powers of two up to `t`.
pub fn checkpoints(t: u64) -> Vec<u64> {
    (0..64).map(|k| 1u64 << k).take_while(|&j| j <= t).collect()
}

/// Nearest-rank `p`-quantile of `values`, which must be sorted ascending.
pub fn nearest_rank(sorted: &[f64], p: f64) -> f64 {
    assert!(!sorted.is_empty(), "quantile of an empty sample");
    let rank = ((p * sorted.len() as f64).ceil() as usize).clamp(1, sorted.len());
    sorted[rank - 1]
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ErrorSummary {
    pub estimator: String,
    pub j: u64,
    pub mean_error: f64,
    pub std_error: f64,
    /// Nearest-rank `(1−γ)`-quantile of `|error|`.
    pub quantile: f64,
    pub theory_delta: Option<f64>,
    pub lower_bound_ref: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BenchReport {
    pub config: ExperimentConfig,
    pub rows: Vec<ErrorSummary>,
    pub notes: Vec<String>,
}

impl BenchReport {
    pub fn row(&self, estimator: &str, j: u64) -> Option<&ErrorSummary> {
        self.rows.iter().find(|r| r.estimator == estimator && r.j == j)
    }
}

struct Contender {
    label: String,
    stream: u64,
    build: Box<dyn Fn(Noise) -> Result<Box<dyn Mechanism>> + Sync>,
    /// Extra deterministic error allowance added to the noise bound.
    bias: Option<f64>,
}

fn trial_errors(
    mech: &mut dyn Mechanism,
    stream: &[f64],
    exact: &[f64],
    checks: &[u64],
) -> Result<Vec<f64>> {
    let mut out = Vec::with_capacity(checks.len());
    let mut next = 0;
    for (k, &x) in stream.iter().enumerate() {
        let y = mech.push(x)?;
        if next < checks.len() && checks[next] == k as u64 + 1 {
            out.push(y - exact[k]);
            next += 1;
        }
    }
    Ok(out)
}

/// Runs `cfg.trials` independent trials of the estimator and its baselines
/// on `stream`, in parallel on `threads` threads. The result does not depend
/// on `threads`.
pub fn run_bench(cfg: &ExperimentConfig, stream: &[f64], threads: usize) -> Result<BenchReport> {
    if cfg.trials < 30 {
        return Err(usage(format!("bench needs at least 30 trials, got {}", cfg.trials)));
    }
    if stream.is_empty() {
        return Err(usage("bench needs a non-empty stream"));
    }
    let t = stream.len() as u64;
    let checks = checkpoints(t);
    let mut oracle = ExactOracle::new(cfg.decay)?;
    let exact: Vec<f64> = stream.iter().map(|&x| oracle.accumulate(x)).collect();
    let lower = lb_reference_delta(cfg.decay, cfg.gamma, cfg.epsilon)?;
    let binary = stream.iter().all(|&x| x == 0.0 || x == 1.0);
    let mut notes = Vec::new();

    let mut contenders = Vec::new();
    {
        let c = cfg.clone();
        let bias = match cfg.decay {
            DecaySpec::Polynomial { beta, .. } if cfg.mech == MechKind::Poly => Some(beta),
            _ => None,
        };
        contenders.push(Contender {
            label: cfg.mech.name().to_string(),
            stream: 1,
            build: Box::new(move |n| c.build(n)),
            bias,
        });
    }
    let private = !matches!(cfg.mech, MechKind::Rr | MechKind::Oracle);
    if private && binary {
        let (d, e) = (cfg.decay, cfg.epsilon);
        contenders.push(Contender {
            label: "rr-matched".into(),
            stream: 2,
            build: Box::new(move |n| build_mechanism(MechKind::Rr, d, e, 2.0, n)),
            bias: None,
        });
        if cfg.epsilon < 1.0 {
            contenders.push(Contender {
                label: "rr-raw".into(),
                stream: 2,
                build: Box::new(move |n: Noise| -> Result<Box<dyn Mechanism>> {
                    match n.source() {
                        Some(r) => Ok(Box::new(RandomizedResponse::new(d, e, r.clone())?)),
                        None => Ok(Box::new(RandomizedResponse::new(d, 1.0, RandomSource::new(0))?)),
                    }
                }),
                bias: None,
            });
        }
    } else if private {
        notes.push("randomized response skipped: stream is not binary".into());
    }
    if let (true, DecaySpec::Window { w }) = (private, cfg.decay) {
        let e = cfg.epsilon;
        contenders.push(Contender {
            label: "strawman".into(),
            stream: 3,
            build: Box::new(move |n| Ok(Box::new(RunningDifference::new(w, t, e, n)?) as Box<dyn Mechanism>)),
            bias: None,
        });
    }

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads.max(1))
        .build()
        .map_err(|e| usage(e.to_string()))?;
    let mut rows = Vec::new();
    for c in &contenders {
        let per_trial: Vec<Vec<f64>> = pool.install(|| {
            (0..cfg.trials)
                .into_par_iter()
                .map(|trial| {
                    let mut m = (c.build)(cfg.noise_for(c.stream, trial))?;
                    trial_errors(m.as_mut(), stream, &exact, &checks)
                })
                .collect::<Result<Vec<_>>>()
        })?;
        let reference = (c.build)(Noise::disabled())?;
        for (k, &j) in checks.iter().enumerate() {
            let errs: Vec<f64> = per_trial.iter().map(|e| e[k]).collect();
            let n = errs.len() as f64;
            let mean = errs.iter().sum::<f64>() / n;
            let var = errs.iter().map(|e| (e - mean).powi(2)).sum::<f64>() / (n - 1.0);
            let mut abs: Vec<f64> = errs.iter().map(|e| e.abs()).collect();
            abs.sort_by(f64::total_cmp);
            let noise_bound = match reference.noise_profile(j) {
                Some(p) => Some(utility_delta(&p, cfg.gamma)?),
                None => None,
            };
            let theory_delta = noise_bound.map(|d| d + c.bias.map_or(0.0, |b| b * exact[(j - 1) as usize]));
            rows.push(ErrorSummary {
                estimator: c.label.clone(),
                j,
                mean_error: mean,
                std_error: var.sqrt(),
                quantile: nearest_rank(&abs, 1.0 - cfg.gamma),
                theory_delta,
                lower_bound_ref: lower,
            });
        }
    }
    Ok(BenchReport {
        config: cfg.clone(),
        rows,
        notes,
    })
}

fn opt_num(v: Option<f64>) -> String {
    v.map(|v| v.to_string()).unwrap_or_default()
}

pub fn format_bench(report: &BenchReport, format: OutputFormat) -> String {
    let mut s = String::new();
    match format {
        OutputFormat::Csv => {
            for n in &report.notes {
                let _ = writeln!(s, "# {n}");
            }
            s.push_str("estimator,j,mean_error,std_error,quantile,theory_delta,lower_bound_ref\n");
            for r in &report.rows {
                let _ = writeln!(
                    s,
                    "{},{},{},{},{},{},{}",
                    r.estimator,
                    r.j,
                    r.mean_error,
                    r.std_error,
                    r.quantile,
                    opt_num(r.theory_delta),
                    r.lower_bound_ref
                );
            }
        }
        OutputFormat::Ndjson => {
            for r in &report.rows {
                s.push_str(&serde_json::to_string(r).expect("rows serialize"));
                s.push('\n');
            }
        }
    }
    s
}

/// Theory numbers for one estimator.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BoundReport {
    pub mech: MechKind,
    pub decay: DecaySpec,
    pub epsilon: f64,
    pub gamma: f64,
    /// Sensitivity of the counter vector, for single-scale estimators.
    pub lambda: Option<f64>,
    /// Laplace scale of every counter, for single-scale estimators.
    pub counter_scale: Option<f64>,
    /// Per-level scales of the growing-tree estimators, leaves first.
    pub level_scales: Vec<f64>,
    /// Step whose noise profile gives the largest `δ`.
    pub worst_j: u64,
    pub sigma: f64,
    pub max_scale: f64,
    pub delta: f64,
    /// `interior` when the Chernoff optimum is admissible (σ-dominated, many
    /// comparable terms), `boundary` when the largest single scale dominates.
    pub branch: String,
    /// Multiplicative bias `β` of the polynomial estimator.
    pub bias_factor: Option<f64>,
    pub lower_bound_ref: f64,
}

/// Worst case over steps `1..=horizon`, or over two blocks for windows.
pub fn bound_table(
    mech: MechKind,
    decay: DecaySpec,
    epsilon: f64,
    gamma: f64,
    schedule_exponent: f64,
    horizon: u64,
) -> Result<BoundReport> {
    let m = build_mechanism(mech, decay, epsilon, schedule_exponent, Noise::disabled())?;
    let (lambda, counter_scale, level_scales, bias_factor) = match (mech, decay) {
        (MechKind::Window, DecaySpec::Window { w }) => {
            let l = (w.trailing_zeros() + 1) as f64;
            (Some(l), Some(l / epsilon), vec![], None)
        }
        (MechKind::Exp, DecaySpec::Exponential { alpha }) => {
            let l = sensitivity_lambda_exp(alpha)?;
            (Some(l), Some(l / epsilon), vec![], None)
        }
        (MechKind::Poly, DecaySpec::Polynomial { c, beta }) => {
            let l = sensitivity_lambda_poly(c, beta)?;
            (Some(l), Some(l / epsilon), vec![], Some(beta))
        }
        (MechKind::AllWindow | MechKind::Running, _) => {
            let a = AllWindowSum::new(epsilon, schedule_exponent, Noise::disabled())?;
            let top = match decay {
                DecaySpec::Window { w } => w.next_power_of_two().trailing_zeros() + 1,
                _ => horizon.max(1).next_power_of_two().trailing_zeros() + 1,
            };
            (None, None, (1..=top).map(|k| a.level_scale(k)).collect(), None)
        }
        _ => return Err(usage(format!("no noise bound for {}", mech.name()))),
    };
    let last = match decay {
        DecaySpec::Window { w } => 2 * w.next_power_of_two(),
        _ => horizon.max(1),
    };
    let mut worst: Option<(u64, NoiseProfile, f64)> = None;
    for j in 1..=last {
        if let Some(p) = m.noise_profile(j) {
            let d = utility_delta(&p, gamma)?;
            if worst.as_ref().is_none_or(|w| d > w.2) {
                worst = Some((j, p, d));
            }
        }
    }
    let (worst_j, profile, delta) = worst.ok_or_else(|| usage("estimator has no noise profile"))?;
    let log_term = (2.0 / gamma).ln();
    let interior = (log_term / (0.75 * profile.sigma().powi(2))).sqrt() < profile.lambda_limit();
    Ok(BoundReport {
        mech,
        decay,
        epsilon,
        gamma,
        lambda,
        counter_scale,
        level_scales,
        worst_j,
        sigma: profile.sigma(),
        max_scale: profile.max_scale(),
        delta,
        branch: if interior { "interior" } else { "boundary" }.into(),
        bias_factor,
        lower_bound_ref: lb_reference_delta(decay, gamma, epsilon)?,
    })
}

pub fn format_bound(r: &BoundReport, format: OutputFormat) -> String {
    match format {
        OutputFormat::Ndjson => serde_json::to_string(r).expect("report serializes") + "\n",
        OutputFormat::Csv => {
            let levels: Vec<String> = r.level_scales.iter().map(|v| v.to_string()).collect();
            format!(
                "mech,lambda,counter_scale,level_scales,worst_j,sigma,max_scale,delta,branch,bias_factor,lower_bound_ref\n\
                 {},{},{},{},{},{},{},{},{},{},{}\n",
                r.mech.name(),
                opt_num(r.lambda),
                opt_num(r.counter_scale),
                levels.join(";"),
                r.worst_j,
                r.sigma,
                r.max_scale,
                r.delta,
                r.branch,
                opt_num(r.bias_factor),
                r.lower_bound_ref
            )
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LbVerifyReport {
    pub q: u64,
    pub d: u64,
    pub decay: DecaySpec,
    pub independence: IndependenceReport,
    pub closeness: ClosenessReport,
    /// `(ε, (ln q + ln 2)/ε)`
    pub thresholds: Vec<(f64, f64)>,
    pub pass: bool,
}

pub fn lbverify(q: u64, d: u64, decay: DecaySpec, delta: f64, eps_grid: &[f64]) -> Result<LbVerifyReport> {
    let family = lb_family_build(q, d)?;
    let independence = lb_check_independence(&family, decay, delta)?;
    let closeness = lb_check_closeness(&family, d);
    let thresholds = eps_grid
        .iter()
        .map(|&e| lb_framework_d(q, e).map(|v| (e, v)))
        .collect::<Result<Vec<_>>>()?;
    Ok(LbVerifyReport {
        q,
        d,
        decay,
        pass: independence.holds && closeness.holds,
        independence,
        closeness,
        thresholds,
    })
}

pub fn format_lbverify(r: &LbVerifyReport, format: OutputFormat) -> String {
    if format == OutputFormat::Ndjson {
        return serde_json::to_string(r).expect("report serializes") + "\n";
    }
    let verdict = |b: bool| if b { "PASS" } else { "FAIL" };
    let mut s = String::new();
    let _ = writeln!(
        s,
        "# independence: {} (delta = {})",
        verdict(r.independence.holds),
        r.independence.delta
    );
    let _ = writeln!(
        s,
        "# closeness: {} (max distance to x0 = {}, max over all pairs = {}, D = {})",
        verdict(r.closeness.holds),
        r.closeness.max_to_zero,
        r.closeness.max_all_pairs,
        r.d
    );
    s.push_str("a,b,j,gap,separated\n");
    for p in &r.independence.pairs {
        let _ = writeln!(s, "{},{},{},{},{}", p.a, p.b, p.j, p.gap, p.separated);
    }
    s.push_str("eps,threshold_d\n");
    for (e, v) in &r.thresholds {
        let _ = writeln!(s, "{e},{v}");
    }
    let _ = writeln!(s, "verdict,{}", verdict(r.pass));
    s
}
