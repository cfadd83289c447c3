//! The time-series estimator: bin probabilities from the filter bank, and
//! spectral expectations computed from them.
//!
//! All bin sums run sequentially in increasing `k`, so results are
//! reproducible bit for bit.

use std::f64::consts::PI;
use std::io::Write;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::filterbank::{evaluate_filter, BinGrid, FilterBank};
use crate::signal::{generate_clean, TimeSeries};
use crate::spectrum::Spectrum;

/// Largest supported moment order.
pub const MAX_MOMENT: u32 = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BinKind {
    /// `p_j` from the filters evaluated at the true eigenvalues.
    ExactP,
    /// `p'_j` from the truncated series and the exact signal.
    TruncatedP,
    /// `q_j` from a (possibly noisy) signal.
    EstimatedQ,
}

/// A weight per eigenvalue estimate `l_j = -1/2 + j eps`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BinDistribution {
    pub values: Vec<f64>,
    pub eps: f64,
    pub kind: BinKind,
}

impl BinDistribution {
    pub fn grid(&self) -> Result<BinGrid> {
        BinGrid::new(self.eps)
    }

    pub fn lambda_tilde(&self, j: usize) -> f64 {
        -0.5 + j as f64 * self.eps
    }

    pub fn total(&self) -> f64 {
        self.values.iter().sum()
    }

    pub fn l1_distance(&self, other: &BinDistribution) -> Result<f64> {
        if self.values.len() != other.values.len() {
            return Err(Error::invalid(format!(
                "distributions have {} and {} bins",
                self.values.len(),
                other.values.len()
            )));
        }
        Ok(self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b).abs())
            .sum())
    }

    /// Fraction of the total (signed) weight on bins within `radius` of one of
    /// `centres`.
    pub fn mass_fraction_near(&self, centres: &[f64], radius: f64) -> f64 {
        let near: f64 = self
            .values
            .iter()
            .enumerate()
            .filter(|(j, _)| {
                let l = self.lambda_tilde(*j);
                centres.iter().any(|c| (l - c).abs() <= radius + 1e-12)
            })
            .map(|(_, v)| v)
            .sum();
        near / self.total()
    }

    /// Euclidean projection onto the probability simplex. Not part of the
    /// estimator itself; `q` is reported unprojected.
    pub fn project_to_simplex(&self) -> BinDistribution {
        let mut sorted = self.values.clone();
        sorted.sort_by(|a, b| b.total_cmp(a));
        let mut cumulative = 0.0;
        let mut theta = 0.0;
        for (i, v) in sorted.iter().enumerate() {
            cumulative += v;
            let t = (cumulative - 1.0) / (i + 1) as f64;
            if v - t > 0.0 {
                theta = t;
            }
        }
        BinDistribution {
            values: self.values.iter().map(|v| (v - theta).max(0.0)).collect(),
            eps: self.eps,
            kind: self.kind,
        }
    }

    /// Writes `j,lambda_tilde,value` rows.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["j", "lambda_tilde", "value"])?;
        for (j, v) in self.values.iter().enumerate() {
            w.write_record([j.to_string(), self.lambda_tilde(j).to_string(), v.to_string()])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// `p_j = sum_{lambda in V_j} f_j(lambda) r_lambda` by direct quadrature of
/// the filters.
pub fn exact_bins(spec: &Spectrum, eps: f64) -> Result<BinDistribution> {
    let grid = BinGrid::new(eps)?;
    let mut values = vec![0.0; grid.m_bins()];
    for e in spec.entries() {
        for j in grid.bins_containing(e.lambda) {
            values[j] += e.weight * evaluate_filter(j, e.lambda, eps)?;
        }
    }
    Ok(BinDistribution {
        values,
        eps,
        kind: BinKind::ExactP,
    })
}

/// `p'_j = (1/sqrt(2pi)) sum_{|k|<N} F_j(k) conj(g_k)` on the exact signal,
/// summed over negative and positive `k` explicitly.
pub fn truncated_bins(spec: &Spectrum, bank: &FilterBank) -> Result<BinDistribution> {
    let n = bank.n_trunc() as i64;
    let clean = generate_clean(spec, bank.n_trunc())?;
    let norm = 1.0 / (2.0 * PI).sqrt();
    let values = (0..bank.m_bins())
        .map(|j| {
            let sum: Complex64 = (1 - n..n).map(|k| bank.coeff(j, k) * clean.at(k).conj()).sum();
            sum.re * norm
        })
        .collect();
    Ok(BinDistribution {
        values,
        eps: bank.eps(),
        kind: BinKind::TruncatedP,
    })
}

/// `q_j = eps/(2pi) + sqrt(2/pi) Re sum_{k=1}^{N-1} F_j(k) conj(g~_k)`,
/// using only the first `N` samples of `ts`.
pub fn estimate_bins(ts: &TimeSeries, bank: &FilterBank) -> Result<BinDistribution> {
    let n = bank.n_trunc();
    if ts.n_len() < n {
        return Err(Error::invalid(format!(
            "signal has {} samples but the filter bank needs {n}",
            ts.n_len()
        )));
    }
    let g = &ts.values()[..n];
    let base = bank.eps() / (2.0 * PI);
    let scale = (2.0 / PI).sqrt();
    let values = (0..bank.m_bins())
        .map(|j| {
            let row = bank.row(j);
            let mut acc = 0.0;
            for k in 1..n {
                // Re(F conj(g)) = F.re g.re + F.im g.im
                acc += row[k].re * g[k].re + row[k].im * g[k].im;
            }
            base + scale * acc
        })
        .collect();
    Ok(BinDistribution {
        values,
        eps: bank.eps(),
        kind: BinKind::EstimatedQ,
    })
}

fn check_moment(s: u32) -> Result<()> {
    if s > MAX_MOMENT {
        return Err(Error::invalid(format!("moment order {s} exceeds {MAX_MOMENT}")));
    }
    Ok(())
}

/// `sum_j values_j l_j^s`.
pub fn estimate_moment(dist: &BinDistribution, s: u32) -> Result<f64> {
    check_moment(s)?;
    Ok(dist
        .values
        .iter()
        .enumerate()
        .map(|(j, v)| v * dist.lambda_tilde(j).powi(s as i32))
        .sum())
}

/// `sum_j values_j T(l_j)` for a function tabulated on the estimate grid.
pub fn expectation_from_function(dist: &BinDistribution, t_values: &[f64]) -> Result<f64> {
    if t_values.len() != dist.values.len() {
        return Err(Error::invalid(format!(
            "expected {} function values, got {}",
            dist.values.len(),
            t_values.len()
        )));
    }
    Ok(dist.values.iter().zip(t_values).map(|(q, t)| q * t).sum())
}

/// `eps (max|T| + max|T'|)` over `|lambda| <= 1/2`, for differentiable `T`.
pub fn moment_error_bound(eps: f64, t_max: f64, t_prime_max: f64) -> f64 {
    eps * (t_max + t_prime_max)
}

/// The bound above for `T(x) = x^s`: `eps (2^-s + s 2^-(s-1))`.
pub fn power_moment_error_bound(eps: f64, s: u32) -> f64 {
    let t_max = 0.5f64.powi(s as i32);
    let t_prime_max = if s == 0 {
        0.0
    } else {
        s as f64 * 0.5f64.powi(s as i32 - 1)
    };
    moment_error_bound(eps, t_max, t_prime_max)
}

/// Converts a moment of the dimensionless `H = H_phys / (2 ||H_phys||)` back
/// to physical units.
pub fn rescale_physical(moment: f64, s: u32, h_norm: f64) -> Result<f64> {
    if !(h_norm > 0.0 && h_norm.is_finite()) {
        return Err(Error::invalid(format!("energy scale must be positive, got {h_norm}")));
    }
    check_moment(s)?;
    Ok(moment * (2.0 * h_norm).powi(s as i32))
}
