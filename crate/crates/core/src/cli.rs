//! Command-line front end: flag and config-file resolution, CSV output.

use std::ffi::OsString;
use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::channel::{DecoherenceExponent, LossModel};
use crate::engine::{self, SweepAxis, SweepConfig, TrialConfig, TrialResult, DEFAULT_SPAN_KM};
use crate::error::SimError;
use crate::routing::AlgorithmKind;
use crate::topology::Placement;

/// Environment variable capping worker threads (`0` or unset = one per core).
pub const THREADS_ENV: &str = "QKDSIM_THREADS";

/// CSV header, in column order.
pub const CSV_COLUMNS: [&str; 14] = [
    "algorithm",
    "placement",
    "n",
    "fiber_length_km",
    "alpha_db_per_km",
    "bsm_success",
    "decoherence",
    "rounds",
    "seed",
    "key_rate",
    "flow_bits",
    "raw_bits_ab",
    "secret_bits_ab",
    "elapsed_ms",
];

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("config error: {0}")]
    Invalid(#[from] SimError),
    #[error("I/O error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: io::Error,
    },
    #[error("CSV error: {0}")]
    Csv(#[from] csv::Error),
}

fn io_error(path: &Path) -> impl FnOnce(io::Error) -> CliError + '_ {
    move |source| CliError::Io {
        path: path.display().to_string(),
        source,
    }
}

#[derive(Debug, Parser)]
#[command(name = "qkdsim", version, about = "Entanglement-based QKD over repeater/trusted-node grids")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run one trial and write one CSV row.
    Run(Flags),
    /// Run a parameter sweep and write one CSV row per trial.
    Sweep(Flags),
    /// Resolve and echo the configuration without simulating.
    Validate(Flags),
}

#[derive(Debug, Clone, Default, Args)]
pub struct Flags {
    /// Grid side length N.
    #[arg(long = "grid-size")]
    pub grid_size: Option<usize>,
    /// Fiber length between neighboring nodes, in km.
    #[arg(long = "fiber-length")]
    pub fiber_length: Option<f64>,
    /// Fiber attenuation in dB/km.
    #[arg(long)]
    pub alpha: Option<f64>,
    /// Bell-state measurement success probability.
    #[arg(long)]
    pub bsm: Option<f64>,
    /// Decoherence probability.
    #[arg(long)]
    pub decoherence: Option<f64>,
    #[arg(long)]
    pub rounds: Option<u64>,
    /// global | nia | ia
    #[arg(long)]
    pub algorithm: Option<AlgorithmKind>,
    /// none | central | corner | diagonal | asymmetric | custom=<id:id:...>
    #[arg(long)]
    pub placement: Option<Placement>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// heralded | silent
    #[arg(long = "loss-model")]
    pub loss_model: Option<LossModel>,
    /// swaps | links
    #[arg(long = "decoherence-exponent")]
    pub decoherence_exponent: Option<DecoherenceExponent>,
    /// fiber_length | decoherence | bsm | grid_size | fixed_span
    #[arg(long)]
    pub axis: Option<SweepAxis>,
    /// Comma-separated sweep values.
    #[arg(long, value_delimiter = ',')]
    pub values: Option<Vec<f64>>,
    /// Comma-separated algorithms to sweep.
    #[arg(long, value_delimiter = ',')]
    pub algorithms: Option<Vec<AlgorithmKind>>,
    /// Comma-separated placements to sweep.
    #[arg(long)]
    pub placements: Option<String>,
    /// Trials per sweep point.
    #[arg(long)]
    pub trials: Option<usize>,
    /// Grid side in km for the fixed-span axis.
    #[arg(long = "span-km")]
    pub span_km: Option<f64>,
    /// JSON config file; explicit flags override its values.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// CSV output path; stdout when omitted.
    #[arg(long)]
    pub output: Option<PathBuf>,
}

/// JSON config file. Every key is optional; keys match the CSV columns.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub algorithm: Option<AlgorithmKind>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub placement: Option<Placement>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub fiber_length_km: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub alpha_db_per_km: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub bsm_success: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub decoherence: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rounds: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub loss_model: Option<LossModel>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub decoherence_exponent: Option<DecoherenceExponent>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub axis: Option<SweepAxis>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub values: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub algorithms: Option<Vec<AlgorithmKind>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub placements: Option<Vec<Placement>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub trials: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub span_km: Option<f64>,
}

impl ConfigFile {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = fs::read_to_string(path).map_err(io_error(path))?;
        serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
    }

    /// Overlays explicit flags on top of the file values.
    fn overlay(mut self, flags: &Flags) -> Result<Self, CliError> {
        macro_rules! take {
            ($field:ident, $flag:expr) => {
                if let Some(v) = $flag.clone() {
                    self.$field = Some(v);
                }
            };
        }
        take!(n, flags.grid_size);
        take!(fiber_length_km, flags.fiber_length);
        take!(alpha_db_per_km, flags.alpha);
        take!(bsm_success, flags.bsm);
        take!(decoherence, flags.decoherence);
        take!(rounds, flags.rounds);
        take!(algorithm, flags.algorithm);
        take!(placement, flags.placement);
        take!(seed, flags.seed);
        take!(loss_model, flags.loss_model);
        take!(decoherence_exponent, flags.decoherence_exponent);
        take!(axis, flags.axis);
        take!(values, flags.values);
        take!(algorithms, flags.algorithms);
        take!(trials, flags.trials);
        take!(span_km, flags.span_km);
        if let Some(list) = &flags.placements {
            self.placements = Some(parse_placement_list(list)?);
        }
        Ok(self)
    }

    fn trial_config(&self) -> TrialConfig {
        let d = TrialConfig::default();
        TrialConfig {
            n: self.n.unwrap_or(d.n),
            fiber_length_km: self.fiber_length_km.unwrap_or(d.fiber_length_km),
            alpha_db_per_km: self.alpha_db_per_km.unwrap_or(d.alpha_db_per_km),
            bsm_success: self.bsm_success.unwrap_or(d.bsm_success),
            decoherence: self.decoherence.unwrap_or(d.decoherence),
            rounds: self.rounds.unwrap_or(d.rounds),
            algorithm: self.algorithm.unwrap_or(d.algorithm),
            placement: self.placement.clone().unwrap_or(d.placement),
            seed: self.seed.unwrap_or(d.seed),
            loss_model: self.loss_model.unwrap_or(d.loss_model),
            decoherence_exponent: self.decoherence_exponent.unwrap_or(d.decoherence_exponent),
        }
    }

    fn sweep_config(&self) -> Result<SweepConfig, CliError> {
        let base = self.trial_config();
        let axis = self
            .axis
            .ok_or_else(|| CliError::Config("a sweep needs --axis".into()))?;
        let values = self
            .values
            .clone()
            .filter(|v| !v.is_empty())
            .ok_or_else(|| CliError::Config("a sweep needs --values".into()))?;
        let mut sweep = SweepConfig::new(base, axis, values);
        sweep.algorithms = self.algorithms.clone().unwrap_or_default();
        sweep.placements = self.placements.clone().unwrap_or_default();
        sweep.trials_per_point = self.trials.unwrap_or(1);
        sweep.span_km = self.span_km.unwrap_or(DEFAULT_SPAN_KM);
        Ok(sweep)
    }

    /// The fully resolved file: trial keys always present, sweep keys when
    /// an axis is set.
    fn resolved(&self, sweep: Option<&SweepConfig>) -> ConfigFile {
        let t = self.trial_config();
        let mut out = ConfigFile {
            algorithm: Some(t.algorithm),
            placement: Some(t.placement),
            n: Some(t.n),
            fiber_length_km: Some(t.fiber_length_km),
            alpha_db_per_km: Some(t.alpha_db_per_km),
            bsm_success: Some(t.bsm_success),
            decoherence: Some(t.decoherence),
            rounds: Some(t.rounds),
            seed: Some(t.seed),
            loss_model: Some(t.loss_model),
            decoherence_exponent: Some(t.decoherence_exponent),
            ..ConfigFile::default()
        };
        if let Some(s) = sweep {
            out.axis = Some(s.axis);
            out.values = Some(s.values.clone());
            out.algorithms = Some(s.algorithms.clone());
            out.placements = Some(s.placements.clone());
            out.trials = Some(s.trials_per_point);
            out.span_km = Some(s.span_km);
        }
        out
    }
}

/// Splits a comma-separated placement list. Bare integers following a
/// `custom=` entry extend it, so `central,custom=6,42` is two placements.
pub fn parse_placement_list(list: &str) -> Result<Vec<Placement>, CliError> {
    let mut out: Vec<Placement> = Vec::new();
    for token in list.split(',').map(str::trim).filter(|t| !t.is_empty()) {
        if let (Ok(id), Some(Placement::Custom(ids))) = (token.parse::<usize>(), out.last_mut()) {
            ids.push(crate::topology::NodeId(id));
            continue;
        }
        out.push(token.parse()?);
    }
    Ok(out)
}

/// Writes the header and one row per result.
pub fn write_csv<W: Write>(results: &[TrialResult], out: W) -> Result<(), CliError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(CSV_COLUMNS)?;
    for r in results {
        let c = &r.config;
        w.write_record([
            c.algorithm.to_string(),
            c.placement.to_string(),
            c.n.to_string(),
            c.fiber_length_km.to_string(),
            c.alpha_db_per_km.to_string(),
            c.bsm_success.to_string(),
            c.decoherence.to_string(),
            c.rounds.to_string(),
            c.seed.to_string(),
            r.key_rate.to_string(),
            r.flow_bits.to_string(),
            r.raw_bits_ab().to_string(),
            r.secret_bits_ab().to_string(),
            r.elapsed.as_millis().to_string(),
        ])?;
    }
    w.flush().map_err(|source| CliError::Io {
        path: "csv output".into(),
        source,
    })?;
    Ok(())
}

fn write_results(results: &[TrialResult], output: Option<&Path>) -> Result<(), CliError> {
    match output {
        Some(path) => {
            let file = fs::File::create(path).map_err(io_error(path))?;
            write_csv(results, io::BufWriter::new(file))
        }
        None => write_csv(results, io::stdout().lock()),
    }
}

fn summarize(results: &[TrialResult], err: &mut impl Write) {
    for r in results {
        let c = &r.config;
        let _ = writeln!(
            err,
            "{:<6} {:<12} n={:<2} L={}km B={} D={} seed={}: key rate {:.5} bits/round \
             ({:.1} secret bits over {} rounds, {:.2}s)",
            c.algorithm,
            c.placement,
            c.n,
            c.fiber_length_km,
            c.bsm_success,
            c.decoherence,
            c.seed,
            r.key_rate,
            r.flow_bits,
            c.rounds,
            r.elapsed.as_secs_f64(),
        );
    }
}

fn threads_from_env() -> Result<usize, CliError> {
    match std::env::var(THREADS_ENV) {
        Ok(v) if !v.trim().is_empty() => v
            .trim()
            .parse()
            .map_err(|_| CliError::Config(format!("{THREADS_ENV}={v} is not a thread count"))),
        _ => Ok(0),
    }
}

/// Runs a parsed invocation.
pub fn execute(command: Command) -> Result<(), CliError> {
    let (flags, kind) = match &command {
        Command::Run(f) => (f, "run"),
        Command::Sweep(f) => (f, "sweep"),
        Command::Validate(f) => (f, "validate"),
    };
    let file = match &flags.config {
        Some(path) => ConfigFile::load(path)?,
        None => ConfigFile::default(),
    };
    let merged = file.overlay(flags)?;
    let trial = merged.trial_config();
    trial.validate()?;
    let threads = threads_from_env()?;

    match kind {
        "validate" => {
            let sweep = match merged.axis {
                Some(_) => {
                    let s = merged.sweep_config()?;
                    s.trial_configs()?;
                    Some(s)
                }
                None => None,
            };
            let echo = serde_json::to_string_pretty(&merged.resolved(sweep.as_ref()))
                .map_err(|e| CliError::Config(e.to_string()))?;
            match &flags.output {
                Some(path) => fs::write(path, echo + "\n").map_err(io_error(path))?,
                None => println!("{echo}"),
            }
            Ok(())
        }
        "run" => {
            let result = engine::with_threads(threads, || engine::run_trial(&trial))?;
            let results = [result];
            write_results(&results, flags.output.as_deref())?;
            summarize(&results, &mut io::stderr());
            Ok(())
        }
        _ => {
            let sweep = merged.sweep_config()?;
            let results = engine::with_threads(threads, || engine::run_sweep(&sweep))?;
            write_results(&results, flags.output.as_deref())?;
            summarize(&results, &mut io::stderr());
            Ok(())
        }
    }
}

/// Entry point shared by the binary: parses `args` and returns the process
/// exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match execute(cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("qkdsim: {e}");
            match e {
                CliError::Io { .. } | CliError::Csv(_) => 3,
                _ => 2,
            }
        }
    }
}
