use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::Context;
use clap::{Args, ValueEnum};
use qeep_core::filterbank::{build_filterbank, choose_truncation};
use qeep_core::matrix_pencil::{mp_estimate, mp_moment};
use qeep_core::signal::{add_noise, generate_clean, hoeffding_shots, sample_shots};
use qeep_core::spectrum::{exact_moment, fig6_spectrum, random_spectrum};
use qeep_core::ts_estimator::{estimate_bins, estimate_moment};
use qeep_core::{AmplitudeMode, BinDistribution, Error, FilterBank, MpEstimate, MpOptions, Spectrum, TimeSeries};
use serde::Serialize;

use crate::config::ExperimentConfig;
use crate::{RootFilter, Truncation};

/// Environment variable naming the filter-bank cache directory.
pub const CACHE_ENV: &str = "QEEP_CACHE_DIR";

/// Loads the bank from `$QEEP_CACHE_DIR` when set, building (and storing) it
/// on a miss; builds in memory otherwise.
pub fn filter_bank(eps: f64, n_trunc: usize) -> qeep_core::Result<FilterBank> {
    match std::env::var_os(CACHE_ENV) {
        Some(dir) if !dir.is_empty() => FilterBank::load_or_build(Path::new(&dir), eps, n_trunc),
        _ => build_filterbank(eps, n_trunc),
    }
}

/// Opens `path` for writing, or stdout when absent.
pub fn output(path: Option<&Path>) -> anyhow::Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => {
            let f = File::create(p).with_context(|| format!("cannot write {}", p.display()))?;
            Box::new(BufWriter::new(f))
        }
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

pub fn write_json<T: Serialize>(path: Option<&Path>, value: &T) -> anyhow::Result<()> {
    let mut out = output(path)?;
    serde_json::to_writer_pretty(&mut out, value)?;
    writeln!(out)?;
    out.flush()?;
    Ok(())
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> anyhow::Result<T> {
    let text = std::fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))?;
    serde_json::from_str(&text).map_err(|e| Error::invalid(format!("{}: {e}", path.display())).into())
}

#[derive(Args, Debug)]
pub struct SynthArgs {
    /// The built-in five-eigenvalue reference spectrum.
    #[arg(long, conflicts_with_all = ["d", "seed"])]
    pub fig6: bool,
    /// Number of eigenvalues of a random spectrum.
    #[arg(long)]
    pub d: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output file (stdout if omitted).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

pub fn synth(cfg: &ExperimentConfig, args: &SynthArgs) -> anyhow::Result<()> {
    let spec = if args.fig6 {
        fig6_spectrum()
    } else {
        let d = args.d.unwrap_or(cfg.d_spectrum);
        let seed = args.seed.or(cfg.seeds.first().copied()).unwrap_or(0);
        random_spectrum(d, seed)?
    };
    write_json(args.out.as_deref(), &spec)
}

#[derive(ValueEnum, Debug, Clone, Copy, Default, PartialEq, Eq)]
pub enum Format {
    #[default]
    Json,
    Csv,
}

#[derive(Args, Debug)]
pub struct SignalArgs {
    /// Spectrum JSON file.
    #[arg(long)]
    pub spectrum: PathBuf,
    /// Number of samples N.
    #[arg(long = "n")]
    pub n_len: Option<usize>,
    /// Derive N from this eps instead (see --truncation).
    #[arg(long)]
    pub eps: Option<f64>,
    #[arg(long, value_enum)]
    pub truncation: Option<Truncation>,
    /// Additive noise magnitude bound eps'.
    #[arg(long, conflicts_with_all = ["shots", "plan"])]
    pub noise: Option<f64>,
    /// Shots per sample for measurement-sampled signals.
    #[arg(long, conflicts_with = "plan")]
    pub shots: Option<u64>,
    /// Plan the shots with the Hoeffding bound at this confidence, targeting
    /// precision --eps-prime.
    #[arg(long)]
    pub plan: Option<f64>,
    #[arg(long)]
    pub eps_prime: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, value_enum, default_value_t)]
    pub format: Format,
    /// Output file (stdout if omitted).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Serialize)]
struct SignalSummary {
    n_len: usize,
    provenance: qeep_core::Provenance,
    #[serde(skip_serializing_if = "Option::is_none")]
    planned_total_shots: Option<u64>,
}

pub fn signal(cfg: &ExperimentConfig, args: &SignalArgs) -> anyhow::Result<()> {
    let spec: Spectrum = read_json(&args.spectrum)?;
    let n = match (args.n_len, args.eps) {
        (Some(n), _) => n,
        (None, Some(eps)) => {
            choose_truncation(eps, args.truncation.map(Into::into).unwrap_or(cfg.truncation_mode))?
        }
        (None, None) => cfg.n_trunc()?,
    };
    let seed = args.seed.or(cfg.seeds.first().copied()).unwrap_or(0);
    let mut planned = None;
    let shots = match (args.shots, args.plan) {
        (Some(s), _) => Some(s),
        (None, Some(c)) => {
            let total = hoeffding_shots(n, args.eps_prime.unwrap_or(cfg.eps_prime), c)?;
            planned = Some(total);
            Some(total.div_ceil(n as u64))
        }
        (None, None) => None,
    };
    let ts: TimeSeries = match shots {
        Some(s) => sample_shots(&spec, n, s, seed)?,
        None => {
            let clean = generate_clean(&spec, n)?;
            match args.noise {
                Some(e) if e > 0.0 => add_noise(&clean, e, seed)?,
                Some(e) if e < 0.0 => return Err(Error::invalid(format!("noise must be non-negative, got {e}")).into()),
                _ => clean,
            }
        }
    };
    match args.format {
        Format::Json => write_json(args.out.as_deref(), &ts)?,
        Format::Csv => {
            let mut out = output(args.out.as_deref())?;
            ts.write_csv(&mut out)?;
            out.flush()?;
        }
    }
    if args.out.is_some() {
        let summary = SignalSummary {
            n_len: n,
            provenance: ts.provenance(),
            planned_total_shots: planned,
        };
        println!("{}", serde_json::to_string(&summary)?);
    }
    Ok(())
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    Ts,
    Mp,
}

#[derive(Args, Debug)]
pub struct EstimateArgs {
    /// Signal JSON file.
    #[arg(long)]
    pub signal: PathBuf,
    #[arg(long, value_enum)]
    pub method: Method,
    #[arg(long)]
    pub eps: Option<f64>,
    /// Use only the first N samples (default: all).
    #[arg(long = "n")]
    pub n_trunc: Option<usize>,
    /// True spectrum, for exact moments and errors.
    #[arg(long)]
    pub spectrum: Option<PathBuf>,
    #[arg(long, value_delimiter = ',')]
    pub moments: Option<Vec<u32>>,
    /// Pencil dimension L (default N - 1).
    #[arg(long)]
    pub l_dim: Option<usize>,
    #[arg(long, value_enum, default_value_t)]
    pub mp_filter: RootFilter,
    /// JSON report (stdout if omitted).
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Also write the bins (ts) or pencil estimates (mp) as CSV.
    #[arg(long)]
    pub csv: Option<PathBuf>,
}

#[derive(Debug, Serialize)]
pub struct MomentReport {
    pub s: u32,
    pub estimate: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub exact: Option<f64>,
    /// `(exact - estimate) / eps`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub delta: Option<f64>,
}

#[derive(Debug, Serialize)]
struct EstimateReport {
    method: &'static str,
    eps: f64,
    n_trunc: usize,
    moments: Vec<MomentReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    q: Option<BinDistribution>,
    #[serde(skip_serializing_if = "Option::is_none")]
    mp: Option<MpEstimate>,
}

pub fn write_mp_csv<W: Write>(est: &MpEstimate, out: W) -> anyhow::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["lambda", "modulus", "amplitude_re", "amplitude_im"])?;
    for ((l, m), a) in est.eigenphases.iter().zip(&est.moduli).zip(&est.amplitudes) {
        w.write_record([l.to_string(), m.to_string(), a.re.to_string(), a.im.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

pub fn estimate(cfg: &ExperimentConfig, args: &EstimateArgs) -> anyhow::Result<()> {
    let full: TimeSeries = read_json(&args.signal)?;
    let ts = match args.n_trunc {
        Some(n) => full.truncated(n)?,
        None => full,
    };
    let eps = args.eps.unwrap_or(cfg.eps);
    let spec: Option<Spectrum> = args.spectrum.as_deref().map(read_json).transpose()?;
    let orders = args.moments.clone().unwrap_or_else(|| cfg.moments.clone());

    let (estimates, q, mp) = match args.method {
        Method::Ts => {
            let bank = filter_bank(eps, ts.n_len())?;
            let q = estimate_bins(&ts, &bank)?;
            let est = orders.iter().map(|&s| estimate_moment(&q, s)).collect::<Result<Vec<_>, _>>()?;
            if let Some(path) = &args.csv {
                let mut out = output(Some(path))?;
                q.write_csv(&mut out)?;
                out.flush()?;
            }
            (est, Some(q), None)
        }
        Method::Mp => {
            let opts = MpOptions {
                l_dim: args.l_dim.or(cfg.l_override),
                filter: args.mp_filter.into(),
            };
            let est = mp_estimate(&ts, opts)?;
            let moments = orders
                .iter()
                .map(|&s| mp_moment(&est, s, AmplitudeMode::default()))
                .collect();
            if let Some(path) = &args.csv {
                write_mp_csv(&est, output(Some(path))?)?;
            }
            (moments, None, Some(est))
        }
    };
    let moments = orders
        .iter()
        .zip(estimates)
        .map(|(&s, estimate)| {
            let exact = spec.as_ref().map(|sp| exact_moment(sp, s));
            MomentReport {
                s,
                estimate,
                exact,
                delta: exact.map(|t| (t - estimate) / eps),
            }
        })
        .collect();
    let report = EstimateReport {
        method: match args.method {
            Method::Ts => "ts",
            Method::Mp => "mp",
        },
        eps,
        n_trunc: ts.n_len(),
        moments,
        q,
        mp,
    };
    write_json(args.out.as_deref(), &report)
}

#[derive(Args, Debug)]
pub struct PlanShotsArgs {
    /// Signal length N (default: from the config's eps and truncation mode).
    #[arg(long = "n")]
    pub n_len: Option<usize>,
    #[arg(long)]
    pub eps_prime: Option<f64>,
    #[arg(long, default_value_t = 0.99)]
    pub confidence: f64,
}

#[derive(Serialize)]
struct ShotPlan {
    n_len: usize,
    eps_prime: f64,
    confidence: f64,
    total_shots: u64,
    shots_per_point: u64,
}

pub fn plan_shots(cfg: &ExperimentConfig, args: &PlanShotsArgs) -> anyhow::Result<()> {
    let n = match args.n_len {
        Some(n) => n,
        None => cfg.n_trunc()?,
    };
    let eps_prime = args.eps_prime.unwrap_or(cfg.eps_prime);
    let total = hoeffding_shots(n, eps_prime, args.confidence)?;
    let plan = ShotPlan {
        n_len: n,
        eps_prime,
        confidence: args.confidence,
        total_shots: total,
        shots_per_point: total.div_ceil(n as u64),
    };
    println!("{}", serde_json::to_string(&plan)?);
    Ok(())
}
