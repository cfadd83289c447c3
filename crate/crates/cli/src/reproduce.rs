use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::Context;
use clap::{Args, ValueEnum};
use qeep_core::dft::{dft, single_tone};
use qeep_core::experiment::{run_trial, summarize, trial_signal, DeltaSummary, MomentRecord, TrialConfig};
use qeep_core::filterbank::{evaluate_filter, write_filter_grid_csv};
use qeep_core::matrix_pencil::{mp_estimate, mp_moment};
use qeep_core::spectrum::{exact_moment, fig6_spectrum, random_spectrum};
use qeep_core::ts_estimator::{estimate_bins, estimate_moment, exact_bins};
use qeep_core::{AmplitudeMode, MpOptions, Spectrum};
use rayon::prelude::*;
use serde::Serialize;

use crate::commands::{filter_bank, write_mp_csv, MomentReport};
use crate::config::ExperimentConfig;
use crate::{Overrides, RootFilter};

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
pub enum Figure {
    /// DFT leakage of an off-grid tone (M = 20, lambda = 2pi/80).
    Fig3,
    /// Filter family and its sum at eps = 1/4.
    Fig4,
    /// Normalized moment errors of TS and MP over seeded random spectra.
    Fig5,
    /// TS, MP and exact distributions for the five-eigenvalue spectrum.
    Fig6,
    /// The fig5 runs plus the sampled spectra, one record per run.
    Appc,
}

#[derive(Args, Debug)]
pub struct ReproduceArgs {
    #[arg(value_enum)]
    pub figure: Figure,
    /// Output directory (default from the config).
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t)]
    pub mp_filter: RootFilter,
    #[command(flatten)]
    pub overrides: Overrides,
}

fn create(dir: &Path, name: &str) -> anyhow::Result<BufWriter<File>> {
    let path = dir.join(name);
    let f = File::create(&path).with_context(|| format!("cannot write {}", path.display()))?;
    Ok(BufWriter::new(f))
}

fn write_summary<T: Serialize>(dir: &Path, name: &str, value: &T) -> anyhow::Result<()> {
    let mut out = create(dir, name)?;
    serde_json::to_writer_pretty(&mut out, value)?;
    writeln!(out)?;
    out.flush()?;
    Ok(())
}

pub fn reproduce(mut cfg: ExperimentConfig, args: &ReproduceArgs) -> anyhow::Result<()> {
    args.overrides.apply(&mut cfg);
    if let Some(dir) = &args.out {
        cfg.output_dir = dir.clone();
    }
    cfg.validate()?;
    fs::create_dir_all(&cfg.output_dir)
        .with_context(|| format!("cannot create {}", cfg.output_dir.display()))?;
    match args.figure {
        Figure::Fig3 => fig3(&cfg.output_dir),
        Figure::Fig4 => fig4(&cfg.output_dir),
        Figure::Fig5 => seeded_runs(&cfg, args.mp_filter, "fig5", false),
        Figure::Appc => seeded_runs(&cfg, args.mp_filter, "appc", true),
        Figure::Fig6 => fig6(&cfg, args.mp_filter),
    }
}

#[derive(Serialize)]
struct Fig3Summary {
    m: usize,
    lambda: f64,
    peak_frequency: f64,
    min_magnitude: f64,
    /// `(offset, left, right)` magnitudes around the peak.
    leakage: Vec<(usize, f64, f64)>,
}

fn fig3(dir: &Path) -> anyhow::Result<()> {
    let m = 20;
    let lambda = std::f64::consts::PI / 40.0;
    let r = dft(&single_tone(lambda, m))?;
    let mut out = create(dir, "fig3_dft.csv")?;
    r.write_csv(&mut out)?;
    out.flush()?;
    write_summary(
        dir,
        "fig3_summary.json",
        &Fig3Summary {
            m,
            lambda,
            peak_frequency: r.frequency_grid[r.peak()],
            min_magnitude: r.coefficients.iter().map(|c| c.norm()).fold(f64::INFINITY, f64::min),
            leakage: r.leakage_profile(m / 4),
        },
    )
}

fn fig4(dir: &Path) -> anyhow::Result<()> {
    let eps = 0.25;
    let xs: Vec<f64> = (0..=400).map(|i| -0.5 + i as f64 / 400.0).collect();
    let mut out = create(dir, "fig4_filters.csv")?;
    write_filter_grid_csv(eps, &xs, &mut out)?;
    out.flush()?;
    for j in 0..5 {
        let mut w = csv::Writer::from_writer(create(dir, &format!("fig4_f{j}.csv"))?);
        w.write_record(["x", "f"])?;
        for &x in &xs {
            w.write_record([x.to_string(), evaluate_filter(j, x, eps)?.to_string()])?;
        }
        w.flush()?;
    }
    Ok(())
}

#[derive(Serialize)]
struct RunRecord {
    seed: u64,
    noise_seed: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    spectrum: Option<Spectrum>,
    moments: Vec<MomentRecord>,
    mp_roots: usize,
    mp_residual: f64,
}

#[derive(Serialize)]
struct RunsSummary<'a> {
    config: &'a ExperimentConfig,
    n_trunc: usize,
    l_dim: usize,
    runs: Vec<RunRecord>,
    aggregate: Vec<DeltaSummary>,
}

fn seeded_runs(cfg: &ExperimentConfig, filter: RootFilter, prefix: &str, with_spectra: bool) -> anyhow::Result<()> {
    let n = cfg.n_trunc()?;
    let bank = filter_bank(cfg.eps, n)?;
    let trial = TrialConfig {
        eps: cfg.eps,
        eps_prime: cfg.eps_prime,
        moments: cfg.moments.clone(),
        l_dim: cfg.l_override,
        mp_filter: filter.into(),
        amplitude_mode: AmplitudeMode::default(),
    };
    let outcomes = cfg
        .seeds
        .par_iter()
        .map(|&seed| {
            let spec = random_spectrum(cfg.d_spectrum, seed)?;
            run_trial(&trial, &bank, &spec, seed)
        })
        .collect::<qeep_core::Result<Vec<_>>>()?;

    let mut w = csv::Writer::from_writer(create(&cfg.output_dir, &format!("{prefix}_deltas.csv"))?);
    w.write_record(["seed", "s", "exact", "ts", "mp", "delta_ts", "delta_mp"])?;
    for o in &outcomes {
        for r in &o.moments {
            w.write_record([
                o.seed.to_string(),
                r.s.to_string(),
                r.exact.to_string(),
                r.ts.to_string(),
                r.mp.to_string(),
                r.delta_ts.to_string(),
                r.delta_mp.to_string(),
            ])?;
        }
    }
    w.flush()?;

    if with_spectra {
        let mut w = csv::Writer::from_writer(create(&cfg.output_dir, &format!("{prefix}_spectra.csv"))?);
        w.write_record(["seed", "lambda", "weight"])?;
        for o in &outcomes {
            for line in o.spectrum.entries() {
                w.write_record([o.seed.to_string(), line.lambda.to_string(), line.weight.to_string()])?;
            }
        }
        w.flush()?;
    }

    let aggregate = summarize(&outcomes, &cfg.moments);
    let l_dim = outcomes.first().map_or(n - 1, |o| o.mp.l_dim);
    let runs = outcomes
        .into_iter()
        .map(|o| RunRecord {
            seed: o.seed,
            noise_seed: o.noise_seed,
            spectrum: with_spectra.then_some(o.spectrum),
            moments: o.moments,
            mp_roots: o.mp.eigenphases.len(),
            mp_residual: o.mp.residual,
        })
        .collect();
    write_summary(
        &cfg.output_dir,
        &format!("{prefix}_summary.json"),
        &RunsSummary {
            config: cfg,
            n_trunc: n,
            l_dim,
            runs,
            aggregate,
        },
    )
}

#[derive(Serialize)]
struct Fig6Summary<'a> {
    config: &'a ExperimentConfig,
    seed: u64,
    n_trunc: usize,
    /// Signed fraction of the TS weight within `2 eps` of a true eigenvalue.
    ts_mass_near_true: f64,
    exact_mass_near_true: f64,
    ts_moments: Vec<MomentReport>,
    mp_moments: Vec<MomentReport>,
}

fn fig6(cfg: &ExperimentConfig, filter: RootFilter) -> anyhow::Result<()> {
    let dir = &cfg.output_dir;
    let n = cfg.n_trunc()?;
    let bank = filter_bank(cfg.eps, n)?;
    let spec = fig6_spectrum();
    let seed = cfg.seeds[0];
    let ts = trial_signal(&spec, n, cfg.eps_prime, seed)?;
    let q = estimate_bins(&ts, &bank)?;
    let p = exact_bins(&spec, cfg.eps)?;
    let mp = mp_estimate(
        &ts,
        MpOptions {
            l_dim: cfg.l_override,
            filter: filter.into(),
        },
    )?;

    let mut w = csv::Writer::from_writer(create(dir, "fig6_bins.csv")?);
    w.write_record(["j", "lambda_tilde", "p", "q"])?;
    for (j, (pj, qj)) in p.values.iter().zip(&q.values).enumerate() {
        w.write_record([j.to_string(), q.lambda_tilde(j).to_string(), pj.to_string(), qj.to_string()])?;
    }
    w.flush()?;
    write_mp_csv(&mp, create(dir, "fig6_mp.csv")?)?;
    let mut w = csv::Writer::from_writer(create(dir, "fig6_true.csv")?);
    w.write_record(["lambda", "weight"])?;
    for line in spec.entries() {
        w.write_record([line.lambda.to_string(), line.weight.to_string()])?;
    }
    w.flush()?;

    let centres: Vec<f64> = spec.eigenvalues().collect();
    let report = |s: u32, estimate: f64| {
        let exact = exact_moment(&spec, s);
        MomentReport {
            s,
            estimate,
            exact: Some(exact),
            delta: Some((exact - estimate) / cfg.eps),
        }
    };
    let ts_moments = cfg
        .moments
        .iter()
        .map(|&s| Ok(report(s, estimate_moment(&q, s)?)))
        .collect::<qeep_core::Result<Vec<_>>>()?;
    let mp_moments = cfg
        .moments
        .iter()
        .map(|&s| report(s, mp_moment(&mp, s, AmplitudeMode::default())))
        .collect();
    write_summary(
        dir,
        "fig6_summary.json",
        &Fig6Summary {
            config: cfg,
            seed,
            n_trunc: n,
            ts_mass_near_true: q.mass_fraction_near(&centres, 2.0 * cfg.eps),
            exact_mass_near_true: p.mass_fraction_near(&centres, 2.0 * cfg.eps),
            ts_moments,
            mp_moments,
        },
    )
}
