//! Ground-truth spectra: eigenvalues in `[-1/2, 1/2]` with the support
//! probability of the state on each of them.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const WEIGHT_SUM_TOL: f64 = 1e-12;

/// One eigenvalue together with its support probability.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpectralLine {
    pub lambda: f64,
    pub weight: f64,
}

/// A validated spectrum. Entries are sorted by eigenvalue, distinct, and
/// their weights sum to one.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawSpectrum")]
pub struct Spectrum {
    entries: Vec<SpectralLine>,
}

#[derive(Deserialize)]
struct RawSpectrum {
    entries: Vec<SpectralLine>,
}

impl TryFrom<RawSpectrum> for Spectrum {
    type Error = Error;

    fn try_from(raw: RawSpectrum) -> Result<Self> {
        Spectrum::new(raw.entries)
    }
}

impl Spectrum {
    /// Validates and normalizes the storage order. Entries with bitwise-equal
    /// eigenvalues are merged by summing their weights.
    pub fn new(mut entries: Vec<SpectralLine>) -> Result<Self> {
        if entries.is_empty() {
            return Err(Error::invalid("spectrum must have at least one entry"));
        }
        for e in &entries {
            if !(-0.5..=0.5).contains(&e.lambda) {
                return Err(Error::invalid(format!(
                    "eigenvalue {} outside [-1/2, 1/2]",
                    e.lambda
                )));
            }
            if !(e.weight >= 0.0 && e.weight <= 1.0) {
                return Err(Error::invalid(format!("weight {} outside [0, 1]", e.weight)));
            }
        }
        let total: f64 = entries.iter().map(|e| e.weight).sum();
        if (total - 1.0).abs() > WEIGHT_SUM_TOL {
            return Err(Error::invalid(format!("weights sum to {total}, expected 1")));
        }
        entries.sort_by(|a, b| a.lambda.total_cmp(&b.lambda));
        let mut merged: Vec<SpectralLine> = Vec::with_capacity(entries.len());
        for e in entries {
            match merged.last_mut() {
                Some(last) if last.lambda.to_bits() == e.lambda.to_bits() => last.weight += e.weight,
                _ => merged.push(e),
            }
        }
        Ok(Self { entries: merged })
    }

    pub fn entries(&self) -> &[SpectralLine] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn eigenvalues(&self) -> impl Iterator<Item = f64> + '_ {
        self.entries.iter().map(|e| e.lambda)
    }

    /// Smallest distance between two distinct eigenvalues, `None` for a
    /// single-entry spectrum.
    pub fn min_gap(&self) -> Option<f64> {
        self.entries
            .windows(2)
            .map(|w| w[1].lambda - w[0].lambda)
            .reduce(f64::min)
    }
}

/// Draws `d` eigenvalues uniformly from `[-1/2, 1/2]` and weights uniformly
/// from `[0, 1)`, normalized by their sum.
pub fn random_spectrum(d: usize, seed: u64) -> Result<Spectrum> {
    if d == 0 {
        return Err(Error::invalid("spectrum size d must be at least 1"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut raw: Vec<(f64, f64)> = (0..d)
        .map(|_| (rng.random_range(-0.5..=0.5), rng.random::<f64>()))
        .collect();
    // All-zero draws are practically impossible but would break normalization.
    if raw.iter().all(|&(_, w)| w == 0.0) {
        raw.iter_mut().for_each(|(_, w)| *w = 1.0);
    }
    let total: f64 = raw.iter().map(|&(_, w)| w).sum();
    let entries = raw
        .into_iter()
        .map(|(lambda, w)| SpectralLine {
            lambda,
            weight: w / total,
        })
        .collect();
    Spectrum::new(entries)
}

/// The five-eigenvalue spectrum used for the distribution comparison
/// experiment.
pub fn fig6_spectrum() -> Spectrum {
    let pairs = [
        (-0.134, 0.33),
        (-0.130, 0.08),
        (0.208, 0.20),
        (0.408, 0.18),
        (0.438, 0.21),
    ];
    Spectrum::new(
        pairs
            .iter()
            .map(|&(lambda, weight)| SpectralLine { lambda, weight })
            .collect(),
    )
    .expect("fixed spectrum is valid")
}

/// `sum_d w_d * lambda_d^s`.
pub fn exact_moment(spec: &Spectrum, s: u32) -> f64 {
    spec.entries
        .iter()
        .map(|e| e.weight * e.lambda.powi(s as i32))
        .sum()
}
