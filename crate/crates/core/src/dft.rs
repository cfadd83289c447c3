//! Unitary DFT of a time series, used to show the leakage an off-grid
//! frequency produces.
//!
//! Convention: `X_m = (1/sqrt(M)) sum_k g_k exp(-2 pi i k m / M)`, and bin
//! `m` is reported at `lambda' = 2 pi m / M` wrapped to `(-pi, pi]`.

use std::f64::consts::{PI, TAU};
use std::io::Write;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DftResult {
    #[serde(with = "crate::complex_serde")]
    pub coefficients: Vec<Complex64>,
    /// Ascending, in `(-pi, pi]`, aligned with `coefficients`.
    pub frequency_grid: Vec<f64>,
}

fn wrap(angle: f64) -> f64 {
    if angle > PI {
        angle - TAU
    } else {
        angle
    }
}

/// Direct `O(M^2)` unitary transform, output sorted by frequency.
pub fn dft(signal: &[Complex64]) -> Result<DftResult> {
    let m = signal.len();
    if m == 0 {
        return Err(Error::invalid("DFT input must be non-empty"));
    }
    let twiddles: Vec<Complex64> = (0..m)
        .map(|i| Complex64::from_polar(1.0, -TAU * i as f64 / m as f64))
        .collect();
    let scale = 1.0 / (m as f64).sqrt();
    let mut bins: Vec<(f64, Complex64)> = (0..m)
        .map(|bin| {
            let sum: Complex64 = signal
                .iter()
                .enumerate()
                .map(|(k, g)| g * twiddles[(k * bin) % m])
                .sum();
            (wrap(TAU * bin as f64 / m as f64), sum * scale)
        })
        .collect();
    bins.sort_by(|a, b| a.0.total_cmp(&b.0));
    Ok(DftResult {
        frequency_grid: bins.iter().map(|b| b.0).collect(),
        coefficients: bins.into_iter().map(|b| b.1).collect(),
    })
}

impl DftResult {
    /// Index of the largest-magnitude coefficient.
    pub fn peak(&self) -> usize {
        self.coefficients
            .iter()
            .enumerate()
            .fold((0, f64::NEG_INFINITY), |acc, (i, c)| {
                if c.norm() > acc.1 {
                    (i, c.norm())
                } else {
                    acc
                }
            })
            .0
    }

    /// Magnitudes at circular offsets `1..=max_offset` on either side of the
    /// peak, as `(offset, left, right)`.
    pub fn leakage_profile(&self, max_offset: usize) -> Vec<(usize, f64, f64)> {
        let m = self.coefficients.len();
        let peak = self.peak();
        (1..=max_offset)
            .map(|d| {
                let left = self.coefficients[(peak + m - d % m) % m].norm();
                let right = self.coefficients[(peak + d) % m].norm();
                (d, left, right)
            })
            .collect()
    }

    /// Writes `lambda_prime,re,im` rows.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["lambda_prime", "re", "im"])?;
        for (f, c) in self.frequency_grid.iter().zip(&self.coefficients) {
            w.write_record([f.to_string(), c.re.to_string(), c.im.to_string()])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// `g_k = exp(-i lambda k)` for `k = 0..m`.
pub fn single_tone(lambda: f64, m: usize) -> Vec<Complex64> {
    (0..m).map(|k| Complex64::from_polar(1.0, -lambda * k as f64)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn empty_input_is_rejected() {
        assert!(dft(&[]).is_err());
    }

    #[test]
    fn on_grid_tone_has_one_bin() {
        let m = 16;
        let lambda = TAU * 3.0 / m as f64;
        let r = dft(&single_tone(lambda, m)).unwrap();
        let peak = r.peak();
        assert!((r.frequency_grid[peak] + lambda).abs() < 1e-12);
        assert!((r.coefficients[peak].norm() - (m as f64).sqrt()).abs() < 1e-12);
        for (i, c) in r.coefficients.iter().enumerate() {
            if i != peak {
                assert!(c.norm() < 1e-12);
            }
        }
    }

    #[test]
    fn grid_is_sorted_and_wrapped() {
        let r = dft(&single_tone(0.0, 7)).unwrap();
        assert!(r.frequency_grid.windows(2).all(|w| w[0] < w[1]));
        assert!(r.frequency_grid.iter().all(|f| *f > -PI && *f <= PI));
        let even = dft(&single_tone(0.0, 8)).unwrap();
        assert_eq!(*even.frequency_grid.last().unwrap(), PI);
    }

    #[test]
    fn off_grid_tone_leaks_everywhere() {
        let r = dft(&single_tone(TAU / 80.0, 20)).unwrap();
        assert!(r.coefficients.iter().all(|c| c.norm() > 1e-3));
        assert_eq!(r.frequency_grid[r.peak()], 0.0);
        let first = r.leakage_profile(1)[0];
        for (d, left, right) in r.leakage_profile(5) {
            assert!(d as f64 * left >= 0.5 * first.1);
            assert!(d as f64 * right >= 0.5 * first.2);
        }
    }

    #[test]
    fn csv_header() {
        let mut buf = Vec::new();
        dft(&single_tone(0.1, 4)).unwrap().write_csv(&mut buf).unwrap();
        assert!(String::from_utf8(buf).unwrap().starts_with("lambda_prime,re,im\n"));
    }

    proptest! {
        #[test]
        fn parseval(len in 1usize..300, seed in any::<u64>()) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let x: Vec<Complex64> = (0..len).map(|_| Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))).collect();
            let r = dft(&x).unwrap();
            let e_in: f64 = x.iter().map(|c| c.norm_sqr()).sum();
            let e_out: f64 = r.coefficients.iter().map(|c| c.norm_sqr()).sum();
            prop_assert!((e_in - e_out).abs() <= 1e-10 * e_in.max(1.0));
        }
    }

    #[test]
    fn parseval_at_4096() {
        let mut rng = ChaCha8Rng::seed_from_u64(4096);
        let x: Vec<Complex64> = (0..4096).map(|_| Complex64::new(rng.random(), rng.random())).collect();
        let r = dft(&x).unwrap();
        let e_in: f64 = x.iter().map(|c| c.norm_sqr()).sum();
        let e_out: f64 = r.coefficients.iter().map(|c| c.norm_sqr()).sum();
        assert!((e_in - e_out).abs() <= 1e-10 * e_in);
    }
}
