//! Seeded TS-versus-MP comparison runs on a shared noisy signal.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::filterbank::FilterBank;
use crate::matrix_pencil::{mp_estimate, mp_moment, AmplitudeMode, MpEstimate, MpFilter, MpOptions};
use crate::signal::{add_noise, generate_clean, TimeSeries};
use crate::spectrum::{exact_moment, Spectrum};
use crate::ts_estimator::{estimate_bins, estimate_moment, BinDistribution};

/// Parameters shared by every seed of an experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialConfig {
    pub eps: f64,
    pub eps_prime: f64,
    pub moments: Vec<u32>,
    /// Pencil dimension, `N - 1` when absent.
    pub l_dim: Option<usize>,
    pub mp_filter: MpFilter,
    pub amplitude_mode: AmplitudeMode,
}

/// Exact and estimated moment of one order, with `delta = (tau - tau~)/eps`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MomentRecord {
    pub s: u32,
    pub exact: f64,
    pub ts: f64,
    pub mp: f64,
    pub delta_ts: f64,
    pub delta_mp: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialOutcome {
    pub seed: u64,
    pub noise_seed: u64,
    pub spectrum: Spectrum,
    pub moments: Vec<MomentRecord>,
    pub q: BinDistribution,
    pub mp: MpEstimate,
}

impl TrialOutcome {
    pub fn moment(&self, s: u32) -> Option<&MomentRecord> {
        self.moments.iter().find(|m| m.s == s)
    }
}

/// Seed of the noise stream paired with a run seed, so the spectrum and
/// noise draws never share a generator.
pub fn noise_seed(seed: u64) -> u64 {
    seed ^ 0x9E37_79B9_7F4A_7C15
}

/// The noisy signal both methods consume: `N` exact samples plus bounded
/// additive noise of magnitude at most `eps_prime`.
pub fn trial_signal(spectrum: &Spectrum, n_len: usize, eps_prime: f64, seed: u64) -> Result<TimeSeries> {
    let clean = generate_clean(spectrum, n_len)?;
    add_noise(&clean, eps_prime, noise_seed(seed))
}

/// Runs both estimators on the same signal.
pub fn run_trial(cfg: &TrialConfig, bank: &FilterBank, spectrum: &Spectrum, seed: u64) -> Result<TrialOutcome> {
    if (bank.eps() - cfg.eps).abs() > 1e-15 {
        return Err(Error::invalid(format!(
            "filter bank eps {} does not match experiment eps {}",
            bank.eps(),
            cfg.eps
        )));
    }
    let ts = trial_signal(spectrum, bank.n_trunc(), cfg.eps_prime, seed)?;
    let q = estimate_bins(&ts, bank)?;
    let mp = mp_estimate(
        &ts,
        MpOptions {
            l_dim: cfg.l_dim,
            filter: cfg.mp_filter,
        },
    )?;
    let moments = cfg
        .moments
        .iter()
        .map(|&s| {
            let exact = exact_moment(spectrum, s);
            let ts_est = estimate_moment(&q, s)?;
            let mp_est = mp_moment(&mp, s, cfg.amplitude_mode);
            Ok(MomentRecord {
                s,
                exact,
                ts: ts_est,
                mp: mp_est,
                delta_ts: (exact - ts_est) / cfg.eps,
                delta_mp: (exact - mp_est) / cfg.eps,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(TrialOutcome {
        seed,
        noise_seed: noise_seed(seed),
        spectrum: spectrum.clone(),
        moments,
        q,
        mp,
    })
}

/// Per-order aggregate of the normalized errors over all seeds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DeltaSummary {
    pub s: u32,
    pub mean_ts: f64,
    pub mean_abs_ts: f64,
    pub max_abs_ts: f64,
    pub mean_mp: f64,
    pub mean_abs_mp: f64,
    pub max_abs_mp: f64,
}

pub fn summarize(outcomes: &[TrialOutcome], moments: &[u32]) -> Vec<DeltaSummary> {
    moments
        .iter()
        .map(|&s| {
            let recs: Vec<&MomentRecord> = outcomes.iter().filter_map(|o| o.moment(s)).collect();
            let n = recs.len().max(1) as f64;
            let stat = |f: &dyn Fn(&MomentRecord) -> f64| {
                let vals: Vec<f64> = recs.iter().map(|r| f(r)).collect();
                (
                    vals.iter().sum::<f64>() / n,
                    vals.iter().map(|v| v.abs()).sum::<f64>() / n,
                    vals.iter().map(|v| v.abs()).fold(0.0, f64::max),
                )
            };
            let (mean_ts, mean_abs_ts, max_abs_ts) = stat(&|r| r.delta_ts);
            let (mean_mp, mean_abs_mp, max_abs_mp) = stat(&|r| r.delta_mp);
            DeltaSummary {
                s,
                mean_ts,
                mean_abs_ts,
                max_abs_ts,
                mean_mp,
                mean_abs_mp,
                max_abs_mp,
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::filterbank::build_filterbank;
    use crate::spectrum::fig6_spectrum;

    fn cfg() -> TrialConfig {
        TrialConfig {
            eps: 0.05,
            eps_prime: 0.0,
            moments: vec![0, 1, 2],
            l_dim: None,
            mp_filter: MpFilter::default(),
            amplitude_mode: AmplitudeMode::RealPerTerm,
        }
    }

    #[test]
    fn noiseless_trial() {
        let bank = build_filterbank(0.05, 40).unwrap();
        let out = run_trial(&cfg(), &bank, &fig6_spectrum(), 1).unwrap();
        let s1 = *out.moment(1).unwrap();
        assert!((s1.exact - 0.15240).abs() < 1e-12);
        assert!(s1.delta_mp.abs() < 1e-4);
        assert!(s1.delta_ts.abs() < 1.5);
        assert_eq!(out.q.values.len(), 21);
        let summary = summarize(&[out.clone(), out], &[1]);
        assert_eq!(summary[0].max_abs_ts, s1.delta_ts.abs());
    }

    #[test]
    fn mismatched_bank_is_rejected() {
        let bank = build_filterbank(0.25, 10).unwrap();
        assert!(run_trial(&cfg(), &bank, &fig6_spectrum(), 0).is_err());
    }
}
