//! `qeep`: generate spectra and signals, run the estimators, and regenerate
//! the figure data sets.

mod commands;
mod config;
mod reproduce;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use qeep_core::{MpFilter, TruncationMode};

use crate::config::ExperimentConfig;

#[derive(Parser, Debug)]
#[command(name = "qeep", version, about = "Time-series eigenvalue estimation experiments")]
struct Cli {
    /// JSON experiment config; command-line flags take precedence over it.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Write a spectrum as JSON.
    Synth(commands::SynthArgs),
    /// Sample the time series of a spectrum.
    Signal(commands::SignalArgs),
    /// Run the TS or MP estimator on a signal file.
    Estimate(commands::EstimateArgs),
    /// Regenerate a reference data set (fig3, fig4, fig5, fig6, appc).
    Reproduce(reproduce::ReproduceArgs),
    /// Hoeffding shot count for a signal length and precision.
    PlanShots(commands::PlanShotsArgs),
}

/// Flags that override fields of the config file.
#[derive(Args, Debug, Clone, Default)]
pub struct Overrides {
    #[arg(long)]
    pub eps: Option<f64>,
    #[arg(long)]
    pub eps_prime: Option<f64>,
    /// Number of eigenvalues in random spectra.
    #[arg(long = "d")]
    pub d_spectrum: Option<usize>,
    /// Truncation order; overrides the truncation mode.
    #[arg(long = "n")]
    pub n_trunc: Option<usize>,
    /// Pencil dimension L (default N - 1).
    #[arg(long)]
    pub l_dim: Option<usize>,
    #[arg(long, value_delimiter = ',')]
    pub seeds: Option<Vec<u64>>,
    #[arg(long, value_delimiter = ',')]
    pub moments: Option<Vec<u32>>,
    #[arg(long, value_enum)]
    pub truncation: Option<Truncation>,
}

impl Overrides {
    pub fn apply(&self, cfg: &mut ExperimentConfig) {
        if let Some(v) = self.eps {
            cfg.eps = v;
        }
        if let Some(v) = self.eps_prime {
            cfg.eps_prime = v;
        }
        if let Some(v) = self.d_spectrum {
            cfg.d_spectrum = v;
        }
        if let Some(v) = self.n_trunc {
            cfg.n_override = Some(v);
        }
        if let Some(v) = self.l_dim {
            cfg.l_override = Some(v);
        }
        if let Some(v) = &self.seeds {
            cfg.seeds = v.clone();
        }
        if let Some(v) = &self.moments {
            cfg.moments = v.clone();
        }
        if let Some(v) = self.truncation {
            cfg.truncation_mode = v.into();
        }
    }
}

#[derive(ValueEnum, Debug, Clone, Copy)]
pub enum Truncation {
    Empirical,
    Strict,
}

impl From<Truncation> for TruncationMode {
    fn from(t: Truncation) -> Self {
        match t {
            Truncation::Empirical => TruncationMode::Empirical,
            Truncation::Strict => TruncationMode::Strict,
        }
    }
}

/// Post-filter applied to pencil roots.
#[derive(ValueEnum, Debug, Clone, Copy, Default)]
pub enum RootFilter {
    #[default]
    None,
    /// Keep roots with `| |mu| - 1 | <= 0.5`.
    UnitCircle,
    /// Keep eigenphases in `[-1/2, 1/2]`.
    Range,
    /// Both of the above.
    Both,
}

impl From<RootFilter> for MpFilter {
    fn from(f: RootFilter) -> Self {
        let circle = MpFilter::unit_circle();
        match f {
            RootFilter::None => MpFilter::default(),
            RootFilter::UnitCircle => circle,
            RootFilter::Range => MpFilter {
                range_only: true,
                ..MpFilter::default()
            },
            RootFilter::Both => MpFilter {
                range_only: true,
                ..circle
            },
        }
    }
}

fn load_config(path: Option<&PathBuf>) -> anyhow::Result<ExperimentConfig> {
    Ok(match path {
        Some(p) => ExperimentConfig::load(p)?,
        None => ExperimentConfig::default(),
    })
}

fn run(cli: Cli) -> anyhow::Result<()> {
    let cfg = load_config(cli.config.as_ref())?;
    match cli.command {
        Command::Synth(args) => commands::synth(&cfg, &args),
        Command::Signal(args) => commands::signal(&cfg, &args),
        Command::Estimate(args) => commands::estimate(&cfg, &args),
        Command::Reproduce(args) => reproduce::reproduce(cfg, &args),
        Command::PlanShots(args) => commands::plan_shots(&cfg, &args),
    }
}

/// 2 for invalid input, 3 for numerical failure, 1 for anything else.
fn exit_code(err: &anyhow::Error) -> u8 {
    match err.chain().find_map(|e| e.downcast_ref::<qeep_core::Error>()) {
        Some(e) if e.is_numeric() => 3,
        Some(qeep_core::Error::InvalidArgument(_)) => 2,
        _ => 1,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
