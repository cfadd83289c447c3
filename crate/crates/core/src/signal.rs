//! Time series `g_k = Tr[rho exp(-iHk)]` at integer times, either exact,
//! perturbed by bounded additive noise, or estimated from simulated ±1
//! ancilla measurements.
//!
//! Every stochastic entry `k` draws from its own ChaCha8 stream
//! `(seed, stream = k)`, so the output does not depend on evaluation order.

use std::f64::consts::TAU;
use std::io::Write;
use std::path::Path;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::spectrum::Spectrum;

/// How a [`TimeSeries`] was produced.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Provenance {
    Clean,
    AdditiveNoise { eps_prime: f64, seed: u64 },
    ShotSampled { shots_per_point: u64, seed: u64 },
}

/// Signal samples `g~_0, ..., g~_{N-1}` with `g~_0 = 1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawTimeSeries")]
pub struct TimeSeries {
    n_len: usize,
    #[serde(with = "crate::complex_serde")]
    values: Vec<Complex64>,
    provenance: Provenance,
}

#[derive(Deserialize)]
struct RawTimeSeries {
    n_len: usize,
    #[serde(with = "crate::complex_serde")]
    values: Vec<Complex64>,
    provenance: Provenance,
}

impl TryFrom<RawTimeSeries> for TimeSeries {
    type Error = Error;

    fn try_from(raw: RawTimeSeries) -> Result<Self> {
        if raw.n_len != raw.values.len() {
            return Err(Error::invalid(format!(
                "n_len {} does not match {} values",
                raw.n_len,
                raw.values.len()
            )));
        }
        TimeSeries::new(raw.values, raw.provenance)
    }
}

fn entry_rng(seed: u64, k: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(k as u64);
    rng
}

impl TimeSeries {
    /// Wraps raw samples; the first sample is pinned to exactly `1`.
    pub fn new(mut values: Vec<Complex64>, provenance: Provenance) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::invalid("time series must have at least one sample"));
        }
        if values.iter().any(|v| !v.re.is_finite() || !v.im.is_finite()) {
            return Err(Error::invalid("time series contains non-finite samples"));
        }
        values[0] = Complex64::new(1.0, 0.0);
        Ok(Self {
            n_len: values.len(),
            values,
            provenance,
        })
    }

    pub fn n_len(&self) -> usize {
        self.n_len
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn provenance(&self) -> Provenance {
        self.provenance
    }

    /// Sample at a signed time index, using `g~_{-k} = conj(g~_k)`.
    pub fn at(&self, k: i64) -> Complex64 {
        let idx = k.unsigned_abs() as usize;
        if k < 0 {
            self.values[idx].conj()
        } else {
            self.values[idx]
        }
    }

    /// The first `n` samples as a new series with the same provenance.
    pub fn truncated(&self, n: usize) -> Result<Self> {
        if n == 0 || n > self.n_len {
            return Err(Error::invalid(format!(
                "cannot truncate a length-{} series to {n}",
                self.n_len
            )));
        }
        Self::new(self.values[..n].to_vec(), self.provenance)
    }

    /// `sum_k |self_k - other_k|` over the common prefix.
    pub fn l1_distance(&self, other: &TimeSeries) -> f64 {
        self.values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b).norm())
            .sum()
    }

    /// Writes `k,re,im` rows.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["k", "re", "im"])?;
        for (k, v) in self.values.iter().enumerate() {
            w.write_record([k.to_string(), v.re.to_string(), v.im.to_string()])?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn save_json(&self, path: &Path) -> Result<()> {
        std::fs::write(path, serde_json::to_string_pretty(self)?)?;
        Ok(())
    }

    pub fn load_json(path: &Path) -> Result<Self> {
        Ok(serde_json::from_str(&std::fs::read_to_string(path)?)?)
    }
}

/// Exact series `g_k = sum_d w_d exp(-i lambda_d k)`.
pub fn generate_clean(spec: &Spectrum, n_len: usize) -> Result<TimeSeries> {
    if n_len == 0 {
        return Err(Error::invalid("signal length must be at least 1"));
    }
    let values = (0..n_len)
        .map(|k| {
            let t = k as f64;
            spec.entries()
                .iter()
                .map(|e| Complex64::from_polar(e.weight, -e.lambda * t))
                .sum()
        })
        .collect();
    TimeSeries::new(values, Provenance::Clean)
}

/// Adds `eta_k` with magnitude uniform on `[0, eps_prime]` and phase uniform
/// on `[0, 2pi)` to every sample with `k >= 1`.
pub fn add_noise(ts: &TimeSeries, eps_prime: f64, seed: u64) -> Result<TimeSeries> {
    if ts.provenance != Provenance::Clean {
        return Err(Error::invalid("noise can only be added to a clean signal"));
    }
    if !(eps_prime >= 0.0 && eps_prime.is_finite()) {
        return Err(Error::invalid(format!(
            "noise magnitude must be finite and non-negative, got {eps_prime}"
        )));
    }
    let mut values = ts.values.clone();
    for (k, v) in values.iter_mut().enumerate().skip(1) {
        let mut rng = entry_rng(seed, k);
        let magnitude = eps_prime * rng.random::<f64>();
        let phase = TAU * rng.random::<f64>();
        *v += Complex64::from_polar(magnitude, phase);
    }
    TimeSeries::new(values, Provenance::AdditiveNoise { eps_prime, seed })
}

/// Simulates the one-ancilla interferometer: for each `k >= 1` the real and
/// imaginary parts are sample means of `shots_per_point` ±1 outcomes with
/// `P(+1) = (1 + Re g_k) / 2` and `(1 + Im g_k) / 2` respectively.
///
/// The number of `+1` outcomes is drawn as a single binomial variate, which
/// has the same law as summing the individual Bernoulli trials.
pub fn sample_shots(
    spec: &Spectrum,
    n_len: usize,
    shots_per_point: u64,
    seed: u64,
) -> Result<TimeSeries> {
    if shots_per_point == 0 {
        return Err(Error::invalid("shots_per_point must be at least 1"));
    }
    let clean = generate_clean(spec, n_len)?;
    let shots = shots_per_point as f64;
    let quadrature = |rng: &mut ChaCha8Rng, expectation: f64| -> Result<f64> {
        let p = ((1.0 + expectation) / 2.0).clamp(0.0, 1.0);
        let plus = Binomial::new(shots_per_point, p)
            .map_err(|e| Error::numeric(format!("binomial sampler: {e}")))?
            .sample(rng) as f64;
        Ok((2.0 * plus - shots) / shots)
    };
    let mut values = clean.values;
    for (k, v) in values.iter_mut().enumerate().skip(1) {
        let mut rng = entry_rng(seed, k);
        let re = quadrature(&mut rng, v.re)?;
        let im = quadrature(&mut rng, v.im)?;
        *v = Complex64::new(re, im);
    }
    TimeSeries::new(
        values,
        Provenance::ShotSampled {
            shots_per_point,
            seed,
        },
    )
}

/// Total number of ±1 measurements sufficient to estimate `n_len` samples to
/// precision `eps_prime` with overall confidence `confidence`:
/// `ceil((2N / eps'^2) * ln(2N / (1 - c)))`.
pub fn hoeffding_shots(n_len: usize, eps_prime: f64, confidence: f64) -> Result<u64> {
    if n_len == 0 {
        return Err(Error::invalid("signal length must be at least 1"));
    }
    if !(eps_prime > 0.0 && eps_prime.is_finite()) {
        return Err(Error::invalid(format!("precision must be positive, got {eps_prime}")));
    }
    if !(confidence > 0.0 && confidence < 1.0) {
        return Err(Error::invalid(format!(
            "confidence must lie in (0, 1), got {confidence}"
        )));
    }
    let n = n_len as f64;
    let r = (2.0 * n / (eps_prime * eps_prime)) * (2.0 * n / (1.0 - confidence)).ln();
    if r >= u64::MAX as f64 {
        return Err(Error::invalid("shot count overflows u64"));
    }
    Ok(r.ceil() as u64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectrum::{fig6_spectrum, random_spectrum, SpectralLine};
    use proptest::prelude::*;

    fn zero_spectrum() -> Spectrum {
        Spectrum::new(vec![SpectralLine { lambda: 0.0, weight: 1.0 }]).unwrap()
    }

    #[test]
    fn clean_zero_eigenvalue_is_constant() {
        let ts = generate_clean(&zero_spectrum(), 4).unwrap();
        assert!(ts.values().iter().all(|v| *v == Complex64::new(1.0, 0.0)));
        assert_eq!(ts.provenance(), Provenance::Clean);
    }

    #[test]
    fn clean_fig6_first_step() {
        let ts = generate_clean(&fig6_spectrum(), 3).unwrap();
        assert_eq!(ts.values()[0], Complex64::new(1.0, 0.0));
        // Five-term brute-force sum, written out independently.
        let pairs = [(-0.134, 0.33), (-0.130, 0.08), (0.208, 0.20), (0.408, 0.18), (0.438, 0.21)];
        let re: f64 = pairs.iter().map(|(l, w)| w * f64::cos(*l)).sum();
        let im: f64 = pairs.iter().map(|(l, w)| -w * f64::sin(*l)).sum();
        assert!((ts.values()[1].re - re).abs() < 1e-15);
        assert!((ts.values()[1].im - im).abs() < 1e-15);
        assert!((re - 0.957457).abs() < 1e-6);
    }

    #[test]
    fn zero_length_is_rejected() {
        assert!(generate_clean(&zero_spectrum(), 0).is_err());
    }

    #[test]
    fn zero_noise_is_identity() {
        let ts = generate_clean(&fig6_spectrum(), 64).unwrap();
        let noisy = add_noise(&ts, 0.0, 3).unwrap();
        assert_eq!(noisy.values(), ts.values());
    }

    #[test]
    fn noise_is_bounded_and_deterministic() {
        let ts = generate_clean(&fig6_spectrum(), 566).unwrap();
        let a = add_noise(&ts, 0.005, 11).unwrap();
        let b = add_noise(&ts, 0.005, 11).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.values()[0], Complex64::new(1.0, 0.0));
        let max = a.values().iter().zip(ts.values()).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max);
        assert!(max <= 0.005 && max > 0.004);
        assert_ne!(a, add_noise(&ts, 0.005, 12).unwrap());
    }

    #[test]
    fn noise_requires_clean_input_and_valid_magnitude() {
        let ts = generate_clean(&fig6_spectrum(), 8).unwrap();
        assert!(add_noise(&ts, -1e-3, 0).is_err());
        let noisy = add_noise(&ts, 1e-3, 0).unwrap();
        assert!(add_noise(&noisy, 1e-3, 0).is_err());
    }

    #[test]
    fn certain_outcomes_are_exact() {
        let ts = sample_shots(&zero_spectrum(), 16, 7, 5).unwrap();
        assert!(ts.values().iter().all(|v| v.re == 1.0));
        assert!(ts.values().iter().all(|v| v.norm() <= 2f64.sqrt()));
    }

    #[test]
    fn shot_zero_is_rejected() {
        assert!(sample_shots(&zero_spectrum(), 4, 0, 0).is_err());
    }

    #[test]
    fn shot_estimates_are_unbiased() {
        let spec = fig6_spectrum();
        let exact = generate_clean(&spec, 6).unwrap();
        let shots = 50u64;
        let runs = 1000;
        let mut sum = [Complex64::new(0.0, 0.0); 6];
        let mut sum_sq = [(0.0, 0.0); 6];
        for seed in 0..runs {
            let ts = sample_shots(&spec, 6, shots, seed).unwrap();
            for (k, v) in ts.values().iter().enumerate() {
                sum[k] += v;
                sum_sq[k].0 += v.re * v.re;
                sum_sq[k].1 += v.im * v.im;
            }
        }
        let n = runs as f64;
        for k in 1..6 {
            let mean = sum[k] / n;
            let var_re = sum_sq[k].0 / n - mean.re * mean.re;
            let var_im = sum_sq[k].1 / n - mean.im * mean.im;
            let g = exact.values()[k];
            assert!((mean.re - g.re).abs() <= 4.0 * (var_re / n).sqrt() + 1e-12, "k={k} re");
            assert!((mean.im - g.im).abs() <= 4.0 * (var_im / n).sqrt() + 1e-12, "k={k} im");
        }
    }

    #[test]
    fn shot_error_scales_as_inverse_sqrt() {
        let spec = random_spectrum(4, 9).unwrap();
        let n_len = 400;
        let exact = generate_clean(&spec, n_len).unwrap();
        let shots: [f64; 4] = [1e2, 1e3, 1e4, 1e5];
        let pts: Vec<(f64, f64)> = shots
            .iter()
            .map(|&s| {
                let ts = sample_shots(&spec, n_len, s as u64, 21).unwrap();
                let mean_err = ts.l1_distance(&exact) / (n_len - 1) as f64;
                (s.ln(), mean_err.ln())
            })
            .collect();
        let mx = pts.iter().map(|p| p.0).sum::<f64>() / 4.0;
        let my = pts.iter().map(|p| p.1).sum::<f64>() / 4.0;
        let slope = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum::<f64>()
            / pts.iter().map(|p| (p.0 - mx).powi(2)).sum::<f64>();
        assert!((slope + 0.5).abs() < 0.05, "slope {slope}");
    }

    #[test]
    fn hoeffding_values() {
        let r = hoeffding_shots(566, 0.005, 0.99).unwrap();
        assert!((5.2e8..=5.3e8).contains(&(r as f64)), "R = {r}");
        assert_eq!(hoeffding_shots(1, 1.0, 0.5).unwrap(), 3);
        assert!(hoeffding_shots(10, 0.0, 0.5).is_err());
        assert!(hoeffding_shots(10, 0.1, 1.0).is_err());
        assert!(hoeffding_shots(10, 0.1, 0.0).is_err());
        assert!(hoeffding_shots(0, 0.1, 0.5).is_err());
    }

    #[test]
    fn negative_indices_conjugate() {
        let ts = generate_clean(&fig6_spectrum(), 10).unwrap();
        for k in 0..10i64 {
            assert_eq!(ts.at(-k), ts.at(k).conj());
        }
    }

    #[test]
    fn csv_and_json_export() {
        let ts = add_noise(&generate_clean(&fig6_spectrum(), 3).unwrap(), 0.01, 1).unwrap();
        let mut buf = Vec::new();
        ts.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("k,re,im\n0,1,0\n"));
        assert_eq!(text.lines().count(), 4);
        let json = serde_json::to_string(&ts).unwrap();
        assert!(json.contains("\"kind\":\"additive_noise\""));
        let back: TimeSeries = serde_json::from_str(&json).unwrap();
        assert_eq!(back, ts);
    }

    proptest! {
        #[test]
        fn l1_noise_budget_holds(seed in any::<u64>(), n_len in 2usize..300) {
            let eps = 0.01;
            let spec = random_spectrum(3, seed).unwrap();
            let clean = generate_clean(&spec, n_len).unwrap();
            let noisy = add_noise(&clean, eps / n_len as f64, seed).unwrap();
            prop_assert!(noisy.l1_distance(&clean) <= eps);
        }

        #[test]
        fn hoeffding_is_monotone_in_length(n in 1usize..5000) {
            let a = hoeffding_shots(n, 0.01, 0.95).unwrap();
            let b = hoeffding_shots(2 * n, 0.01, 0.95).unwrap();
            prop_assert!(b > 2 * a);
        }
    }
}
