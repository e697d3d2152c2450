//! Command-line flags and the JSON config file that can stand in for them.
//!
//! The config file is a JSON object whose keys are the long flag names
//! (`"N"`, `"alpha"`, `"models"`, ...). A flag given on the command line
//! overrides the same key in the file.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use serde::Deserialize;
use serde_json::{Map, Value};

#[derive(Debug, Parser)]
#[command(name = "crib-bse", version, about = "ISR bounds and estimators for dynamic blind source extraction")]
pub struct Cli {
    /// JSON file with default values for the subcommand's flags.
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Evaluate bounds over a grid of one parameter.
    Sweep(SweepArgs),
    /// Run self-check suites and emit a JSON report.
    Validate(ValidateArgs),
    /// Generate a synthetic dataset.
    Simulate(SimulateArgs),
    /// Fit the separating vector and compare its ISR with the bound.
    Estimate(EstimateArgs),
}

/// Model and profile parameters shared by all subcommands.
#[derive(Debug, Clone, Default, Args, Deserialize)]
pub struct Common {
    /// Number of sensors.
    #[arg(long)]
    pub d: Option<usize>,
    /// Number of samples.
    #[arg(long = "N")]
    #[serde(rename = "N")]
    pub n: Option<usize>,
    /// Number of blocks.
    #[arg(long = "T")]
    #[serde(rename = "T")]
    pub blocks: Option<usize>,
    /// GGD shape.
    #[arg(long)]
    pub alpha: Option<f64>,
    /// GGD circularity coefficient in [0, 1).
    #[arg(long)]
    pub gamma: Option<f64>,
    /// Floor of the SOI variance profile in [0, 1]; 1 is stationary.
    #[arg(long)]
    pub tau: Option<f64>,
    /// Blending schedule (only `linear`).
    #[arg(long)]
    pub schedule: Option<String>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output file; standard output when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// csv | json for results, json | bin for datasets.
    #[arg(long)]
    pub format: Option<String>,
}

impl Common {
    fn merge(self, file: Common) -> Common {
        Common {
            d: self.d.or(file.d),
            n: self.n.or(file.n),
            blocks: self.blocks.or(file.blocks),
            alpha: self.alpha.or(file.alpha),
            gamma: self.gamma.or(file.gamma),
            tau: self.tau.or(file.tau),
            schedule: self.schedule.or(file.schedule),
            seed: self.seed.or(file.seed),
            out: self.out.or(file.out),
            format: self.format.or(file.format),
        }
    }
}

#[derive(Debug, Clone, Default, Args, Deserialize)]
pub struct SweepArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub common: Common,
    /// chart1 (alpha), chart2 (gamma) or chart3 (tau); other flags override it.
    #[arg(long)]
    pub preset: Option<String>,
    /// Comma-separated subset of cvxcsv,csv,bice.
    #[arg(long)]
    pub models: Option<String>,
    /// alpha | gamma | tau.
    #[arg(long)]
    pub axis: Option<String>,
    /// min:max:points, optionally followed by :lin or :log.
    #[arg(long)]
    pub grid: Option<String>,
    /// Also write a gnuplot script that plots the CSV output.
    #[arg(long, value_name = "FILE")]
    pub gnuplot: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, Args, Deserialize)]
pub struct ValidateArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub common: Common,
    /// fim-oracle, sampler-moments, closed-form, coincidence, ordering,
    /// gradient, or all.
    #[arg(long)]
    pub suite: Option<String>,
    /// Scales the sampler's rho in the sampler-moments suite.
    #[arg(long, hide = true)]
    #[serde(alias = "rho-factor")]
    pub rho_factor: Option<f64>,
}

#[derive(Debug, Clone, Default, Args, Deserialize)]
pub struct SimulateArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub common: Common,
    /// equivariant (all vectors e_1) or random.
    #[arg(long)]
    pub geometry: Option<String>,
}

#[derive(Debug, Clone, Default, Args, Deserialize)]
pub struct EstimateArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub common: Common,
    /// Dataset written by `simulate`.
    #[arg(long)]
    pub dataset: Option<PathBuf>,
    /// Instead of reading a dataset, simulate this many equivariant datasets
    /// from the model flags and summarize the fits.
    #[arg(long)]
    pub batch: Option<usize>,
    /// random (small random starts), truth (start at the true parameters)
    /// or oracle (report the true parameters without fitting).
    #[arg(long)]
    pub init: Option<String>,
    #[arg(long)]
    pub restarts: Option<usize>,
    #[arg(long)]
    #[serde(alias = "max-iters")]
    pub max_iters: Option<usize>,
}

macro_rules! merge_fields {
    ($flags:expr, $file:expr, $($f:ident),*) => {{
        let (flags, file) = ($flags, $file);
        Self { common: flags.common.merge(file.common), $($f: flags.$f.or(file.$f)),* }
    }};
}

impl SweepArgs {
    pub fn merge(self, file: Self) -> Self {
        merge_fields!(self, file, preset, models, axis, grid, gnuplot)
    }
}

impl ValidateArgs {
    pub fn merge(self, file: Self) -> Self {
        merge_fields!(self, file, suite, rho_factor)
    }
}

impl SimulateArgs {
    pub fn merge(self, file: Self) -> Self {
        merge_fields!(self, file, geometry)
    }
}

impl EstimateArgs {
    pub fn merge(self, file: Self) -> Self {
        merge_fields!(self, file, dataset, batch, init, restarts, max_iters)
    }
}

const KNOWN_KEYS: &[&str] = &[
    "d", "N", "T", "alpha", "gamma", "tau", "schedule", "seed", "out", "format", "preset", "models", "axis", "grid",
    "gnuplot", "suite", "rho_factor", "geometry", "dataset", "batch", "init", "restarts", "max_iters", "rho-factor", "max-iters",
];

/// Reads a config file; keys must be known flag names. Keys belonging to
/// other subcommands are accepted and ignored.
pub fn load_config<T: for<'de> Deserialize<'de> + Default>(path: Option<&Path>) -> Result<T> {
    let Some(path) = path else {
        return Ok(T::default());
    };
    let text = std::fs::read_to_string(path).with_context(|| format!("config: cannot read {}", path.display()))?;
    let map: Map<String, Value> =
        serde_json::from_str(&text).with_context(|| format!("config: {} is not a JSON object", path.display()))?;
    if let Some(bad) = map.keys().find(|k| !KNOWN_KEYS.contains(&k.as_str())) {
        bail!("config: unknown field '{bad}'");
    }
    serde_json::from_value(Value::Object(map)).context("config: invalid value")
}
