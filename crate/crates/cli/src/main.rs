// SPDX-License-Identifier: Apache-2.0

//! `privdecay`: run, benchmark and analyze private decayed-sum estimators.
//!
//! Exit status: 0 on success, 1 when `lbverify` finds a failing check, 2 for
//! usage and parameter errors, 3 for malformed or out-of-range input data.

use std::io::{self, Read, Write};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use privdecay::harness::{
    bound_table, format_bench, format_bound, format_lbverify, lbverify, parse_keyed_stream,
    parse_scalar_stream, run_bench, run_histogram, run_stream, write_records, ExperimentConfig,
    MechKind, OutputFormat, StreamSource,
};
use privdecay::mechanisms::DEFAULT_SCHEDULE_EXPONENT;
use privdecay::{DecaySpec, Error, Result};

const POLY_DEFAULT_SLACK: f64 = 0.5;

#[derive(Parser)]
#[command(name = "privdecay", version, about = "Private decayed sums under continual observation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Stream input through one estimator and print one record per step.
    Run(RunArgs),
    /// Monte-Carlo error summary against the exact sum and baselines.
    Bench(BenchArgs),
    /// Print sensitivity, noise scales and the explicit (δ, γ) bound.
    Bound(BoundArgs),
    /// Build the lower-bound instance family and check its two properties.
    Lbverify(LbArgs),
}

#[derive(Args, Clone)]
struct DecayArgs {
    /// window | allwindow | exp | poly | running | rr | oracle
    #[arg(long)]
    mech: Option<MechKind>,
    /// Window size.
    #[arg(long = "W")]
    w: Option<u64>,
    /// Exponential decay rate, in (2/3, 1) for the private estimator.
    #[arg(long)]
    alpha: Option<f64>,
    /// Polynomial decay exponent, above 1.
    #[arg(long)]
    c: Option<f64>,
    /// Multiplicative slack for poly (default 0.5); budget schedule exponent
    /// for allwindow and running (default 2).
    #[arg(long)]
    beta: Option<f64>,
}

impl DecayArgs {
    /// Decay named by the flags, `None` when no decay flag is present.
    fn flagged_decay(&self) -> Result<Option<DecaySpec>> {
        let given = [self.w.is_some(), self.alpha.is_some(), self.c.is_some()];
        if given.iter().filter(|&&g| g).count() > 1 {
            return Err(Error::Usage("give only one of --W, --alpha, --c".into()));
        }
        Ok(if let Some(w) = self.w {
            Some(DecaySpec::Window { w })
        } else if let Some(alpha) = self.alpha {
            Some(DecaySpec::Exponential { alpha })
        } else {
            self.c.map(|c| DecaySpec::Polynomial {
                c,
                beta: self.beta.unwrap_or(POLY_DEFAULT_SLACK),
            })
        })
    }

    fn resolve(&self) -> Result<(MechKind, DecaySpec, f64)> {
        let flagged = self.flagged_decay()?;
        let mech = match (self.mech, flagged) {
            (Some(m), _) => m,
            (None, Some(d)) => MechKind::for_decay(d),
            (None, None) => MechKind::Running,
        };
        let missing = |flag: &str| Error::Usage(format!("--mech {} needs {flag}", mech.name()));
        let decay = match mech {
            MechKind::Window | MechKind::AllWindow => match flagged {
                Some(d @ DecaySpec::Window { .. }) => d,
                None if mech == MechKind::AllWindow => DecaySpec::Running,
                None => return Err(missing("--W")),
                Some(_) => return Err(missing("--W and no other decay flag")),
            },
            MechKind::Exp => match flagged {
                Some(d @ DecaySpec::Exponential { .. }) => d,
                _ => return Err(missing("--alpha")),
            },
            MechKind::Poly => match flagged {
                Some(d @ DecaySpec::Polynomial { .. }) => d,
                _ => return Err(missing("--c")),
            },
            MechKind::Running => match flagged {
                None => DecaySpec::Running,
                Some(_) => return Err(missing("no decay flag")),
            },
            MechKind::Rr | MechKind::Oracle => flagged.unwrap_or(DecaySpec::Running),
        };
        let schedule = match decay {
            DecaySpec::Polynomial { .. } => DEFAULT_SCHEDULE_EXPONENT,
            _ => self.beta.unwrap_or(DEFAULT_SCHEDULE_EXPONENT),
        };
        Ok((mech, decay, schedule))
    }
}

#[derive(Args, Clone)]
struct ExperimentArgs {
    #[command(flatten)]
    decay: DecayArgs,
    #[arg(long, default_value_t = 1.0)]
    eps: f64,
    #[arg(long, default_value_t = 0.05)]
    gamma: f64,
    /// Stream length for generated input.
    #[arg(long = "T", default_value_t = 4096)]
    t: u64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Read values (one per line) from a file, or `-` for standard input.
    #[arg(long)]
    input: Option<String>,
    /// Generated input when --input is absent: bernoulli:P | ones | blocks:D
    #[arg(long, default_value = "bernoulli:0.5")]
    stream: String,
    /// Disable all noise. The output is NOT private.
    #[arg(long)]
    no_noise: bool,
    /// csv | ndjson
    #[arg(long, default_value = "csv")]
    format: OutputFormat,
}

impl ExperimentArgs {
    fn config(&self, trials: u64) -> Result<ExperimentConfig> {
        let (mech, decay, schedule) = self.decay.resolve()?;
        let mut cfg = ExperimentConfig::new(mech, decay, self.eps);
        cfg.gamma = self.gamma;
        cfg.schedule_exponent = schedule;
        cfg.trials = trials;
        cfg.t = self.t;
        cfg.seed = self.seed;
        cfg.noise = !self.no_noise;
        cfg.format = self.format;
        cfg.source = match &self.input {
            Some(path) => StreamSource::File { path: path.clone() },
            None => self.stream.parse()?,
        };
        Ok(cfg)
    }
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    exp: ExperimentArgs,
    /// Add the exact decayed sum and the absolute error to every record.
    #[arg(long)]
    with_exact: bool,
    /// Input records are `key,value`; one estimator runs per key.
    #[arg(long)]
    histogram: bool,
}

#[derive(Args)]
struct BenchArgs {
    #[command(flatten)]
    exp: ExperimentArgs,
    #[arg(long, default_value_t = 200)]
    trials: u64,
    /// Worker threads; results do not depend on this.
    #[arg(long)]
    threads: Option<usize>,
}

#[derive(Args)]
struct BoundArgs {
    #[command(flatten)]
    decay: DecayArgs,
    #[arg(long, default_value_t = 1.0)]
    eps: f64,
    #[arg(long, default_value_t = 0.05)]
    gamma: f64,
    /// Horizon for the worst case over steps (non-window decays).
    #[arg(long = "T", default_value_t = 4096)]
    t: u64,
    #[arg(long, default_value = "csv")]
    format: OutputFormat,
}

#[derive(Args)]
struct LbArgs {
    #[command(flatten)]
    decay: DecayArgs,
    /// Number of non-zero instances.
    #[arg(long)]
    q: u64,
    /// Block length and closeness radius.
    #[arg(long = "D")]
    d: u64,
    #[arg(long)]
    delta: f64,
    /// Comma-separated ε values for the framework threshold.
    #[arg(long, value_delimiter = ',', default_value = "1")]
    eps: Vec<f64>,
    #[arg(long, default_value = "csv")]
    format: OutputFormat,
}

fn read_input(path: &str) -> Result<String> {
    let mut text = String::new();
    let res = if path == "-" {
        io::stdin().read_to_string(&mut text).map(|_| ())
    } else {
        std::fs::read_to_string(path).map(|t| text = t)
    };
    res.map_err(|e| Error::Usage(format!("cannot read {path}: {e}")))?;
    Ok(text)
}

fn warn_if_noiseless(cfg: &ExperimentConfig) {
    if !cfg.noise {
        eprintln!("WARNING: --no-noise is set. Output is NOT differentially private; use it for testing only.");
    }
}

fn emit(text: &str) -> Result<()> {
    let mut out = io::stdout().lock();
    out.write_all(text.as_bytes())
        .and_then(|_| out.flush())
        .map_err(|e| Error::Usage(format!("cannot write output: {e}")))
}

fn cmd_run(args: RunArgs) -> Result<ExitCode> {
    let cfg = args.exp.config(1)?;
    warn_if_noiseless(&cfg);
    let records = match (&cfg.source, args.histogram) {
        (StreamSource::File { path }, true) => {
            run_histogram(&cfg, &parse_keyed_stream(&read_input(path)?)?, args.with_exact)?
        }
        (_, true) => return Err(Error::Usage("--histogram needs --input".into())),
        (StreamSource::File { path }, false) => {
            run_stream(&cfg, &parse_scalar_stream(&read_input(path)?)?, args.with_exact)?
        }
        (_, false) => run_stream(&cfg, &cfg.stream()?, args.with_exact)?,
    };
    emit(&write_records(&records, cfg.format)?)?;
    Ok(ExitCode::SUCCESS)
}

fn cmd_bench(args: BenchArgs) -> Result<ExitCode> {
    if args.trials == 0 {
        return Err(Error::Usage("--trials must be positive".into()));
    }
    let cfg = args.exp.config(args.trials)?;
    warn_if_noiseless(&cfg);
    let stream = match &cfg.source {
        StreamSource::File { path } => parse_scalar_stream(&read_input(path)?)?,
        _ => cfg.stream()?,
    };
    let threads = args
        .threads
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()));
    let report = run_bench(&cfg, &stream, threads)?;
    emit(&format_bench(&report, cfg.format))?;
    Ok(ExitCode::SUCCESS)
}

fn cmd_bound(args: BoundArgs) -> Result<ExitCode> {
    let (mech, decay, schedule) = args.decay.resolve()?;
    let report = bound_table(mech, decay, args.eps, args.gamma, schedule, args.t)?;
    emit(&format_bound(&report, args.format))?;
    Ok(ExitCode::SUCCESS)
}

fn cmd_lbverify(args: LbArgs) -> Result<ExitCode> {
    let decay = args
        .decay
        .flagged_decay()?
        .ok_or_else(|| Error::Usage("lbverify needs one of --W, --alpha, --c".into()))?;
    let report = lbverify(args.q, args.d, decay, args.delta, &args.eps)?;
    emit(&format_lbverify(&report, args.format))?;
    Ok(if report.pass {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run(a) => cmd_run(a),
        Command::Bench(a) => cmd_bench(a),
        Command::Bound(a) => cmd_bound(a),
        Command::Lbverify(a) => cmd_lbverify(a),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                Error::Data { .. } => ExitCode::from(3),
                _ => ExitCode::from(2),
            }
        }
    }
}
