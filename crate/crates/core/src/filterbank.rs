//! Smooth bin filters built from the bump mollifier, their Fourier
//! coefficients, and the truncation machinery for the coefficient series.
//!
//! The filter for bin `j` is the indicator of `[l_j - eps/2, l_j + eps/2)`
//! convolved with `h_eps(y) = (2/eps) h(2y/eps)`, where
//! `h(x) = a exp(-1/(1-x^2))` on `|x| < 1`. Substituting `y -> 2y/eps`
//! turns every filter value into a partial integral of `h` over a
//! subinterval of `[-1, 1]`, which is how [`evaluate_filter`] computes it.

use std::f64::consts::PI;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::OnceLock;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quadrature::{integrate, QuadratureOptions};

/// Absolute tolerance of each Fourier-transform quadrature.
pub const COEFF_QUAD_TOL: f64 = 1e-13;

const FILTER_QUAD: QuadratureOptions = QuadratureOptions {
    abs_tol: 1e-13,
    rel_tol: 1e-13,
    max_intervals: 2000,
};

const CACHE_FORMAT: &str = "qeep-filterbank";
const CACHE_VERSION: u32 = 1;

/// The estimate grid `l_j = -1/2 + j*eps`, `0 <= j < M = 1 + 1/eps`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BinGrid {
    eps: f64,
    m_bins: usize,
}

impl BinGrid {
    /// Requires `1/eps` to be a positive integer (up to rounding of `eps`).
    pub fn new(eps: f64) -> Result<Self> {
        if !(eps > 0.0 && eps <= 1.0) {
            return Err(Error::invalid(format!("eps must lie in (0, 1], got {eps}")));
        }
        let inv = 1.0 / eps;
        let rounded = inv.round();
        if (inv - rounded).abs() > 1e-9 * rounded {
            return Err(Error::invalid(format!("1/eps must be an integer, got 1/{eps} = {inv}")));
        }
        Ok(Self {
            eps,
            m_bins: rounded as usize + 1,
        })
    }

    pub fn eps(&self) -> f64 {
        self.eps
    }

    pub fn m_bins(&self) -> usize {
        self.m_bins
    }

    pub fn lambda_tilde(&self, j: usize) -> f64 {
        -0.5 + j as f64 * self.eps
    }

    pub fn lambdas(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.m_bins).map(|j| self.lambda_tilde(j))
    }

    pub(crate) fn check_bin(&self, j: usize) -> Result<()> {
        if j >= self.m_bins {
            return Err(Error::invalid(format!(
                "bin index {j} out of range 0..{}",
                self.m_bins
            )));
        }
        Ok(())
    }

    /// Bins whose support `[l_j - eps, l_j + eps]` contains `x`.
    pub fn bins_containing(&self, x: f64) -> impl Iterator<Item = usize> + '_ {
        let centre = ((x + 0.5) / self.eps).round() as i64;
        (centre - 1..=centre + 1)
            .filter(|&j| j >= 0 && (j as usize) < self.m_bins)
            .map(|j| j as usize)
            .filter(move |&j| (x - self.lambda_tilde(j)).abs() <= self.eps)
    }
}

fn bump_shape(x: f64) -> f64 {
    if x.abs() >= 1.0 {
        0.0
    } else {
        (-1.0 / (1.0 - x * x)).exp()
    }
}

/// Normalization `a = 1 / int_{-1}^{1} exp(-1/(1-x^2)) dx`.
pub fn bump_norm() -> f64 {
    static NORM: OnceLock<f64> = OnceLock::new();
    *NORM.get_or_init(|| {
        let opts = QuadratureOptions {
            abs_tol: 0.0,
            rel_tol: 1e-14,
            max_intervals: 2000,
        };
        let half = integrate(bump_shape, 0.0, 1.0, opts).expect("bump integral converges");
        1.0 / (2.0 * half)
    })
}

/// The normalized bump `h(x)`.
pub fn bump(x: f64) -> f64 {
    bump_norm() * bump_shape(x)
}

/// Fourier transform `H(k') = (1/sqrt(2pi)) int h(x) cos(k' x) dx` of the
/// bump (real and even).
pub fn bump_fourier(kp: f64) -> Result<f64> {
    let kp = kp.abs();
    let opts = QuadratureOptions {
        abs_tol: COEFF_QUAD_TOL / 2.0,
        rel_tol: 0.0,
        max_intervals: 4000,
    };
    let a = bump_norm();
    let half = integrate(|x| a * bump_shape(x) * (kp * x).cos(), 0.0, 1.0, opts)?;
    Ok(2.0 * half / (2.0 * PI).sqrt())
}

fn coefficient_from_transform(h_val: f64, lambda: f64, k: i64, eps: f64) -> Complex64 {
    let kf = k as f64;
    let sinc = if k == 0 {
        eps / 2.0
    } else {
        (kf * eps / 2.0).sin() / kf
    };
    Complex64::from_polar(1.0, -lambda * kf) * (2.0 * h_val * sinc)
}

/// `F_j(k) = 2 H(k eps/2) exp(-i l_j k) sin(k eps/2) / k`, with the `k = 0`
/// limit `eps / sqrt(2pi)`.
pub fn filter_coefficient(j: usize, k: i64, eps: f64) -> Result<Complex64> {
    let grid = BinGrid::new(eps)?;
    grid.check_bin(j)?;
    let h_val = bump_fourier(k as f64 * eps / 2.0)?;
    Ok(coefficient_from_transform(h_val, grid.lambda_tilde(j), k, eps))
}

/// Direct quadrature of the filter `f_j(x)`.
pub fn evaluate_filter(j: usize, x: f64, eps: f64) -> Result<f64> {
    let grid = BinGrid::new(eps)?;
    grid.check_bin(j)?;
    let centre = grid.lambda_tilde(j);
    let lo = (2.0 * (centre - eps / 2.0 - x) / eps).max(-1.0);
    let hi = (2.0 * (centre + eps / 2.0 - x) / eps).min(1.0);
    if hi <= lo {
        return Ok(0.0);
    }
    Ok(bump_norm() * integrate(bump_shape, lo, hi, FILTER_QUAD)?)
}

/// Writes `x, f_0, ..., f_{M-1}, sum` rows for plotting the filter family.
pub fn write_filter_grid_csv<W: Write>(eps: f64, xs: &[f64], out: W) -> Result<()> {
    let grid = BinGrid::new(eps)?;
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["x".to_string()];
    header.extend((0..grid.m_bins()).map(|j| format!("f_{j}")));
    header.push("sum".into());
    w.write_record(&header)?;
    for &x in xs {
        let vals = (0..grid.m_bins())
            .map(|j| evaluate_filter(j, x, eps))
            .collect::<Result<Vec<_>>>()?;
        let mut row = vec![x.to_string()];
        row.extend(vals.iter().map(|v| v.to_string()));
        row.push(vals.iter().sum::<f64>().to_string());
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

/// Upper bound `4 exp(-sqrt(y)) (1 + sqrt(y))`, `y = (N-1) eps/2`, on the
/// pointwise error of the series truncated to `|k| < N`. Only meaningful once
/// `N eps / 2` lies in the decay regime of the bump transform.
pub fn tail_bound(n_trunc: usize, eps: f64) -> f64 {
    let root = ((n_trunc.saturating_sub(1)) as f64 * eps / 2.0).sqrt();
    4.0 * (-root).exp() * (1.0 + root)
}

/// How the truncation order `N` is chosen.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TruncationMode {
    /// `ceil(ln(M)^2 M / 10)`.
    Empirical,
    /// Smallest `N` with `tail_bound(N, eps) <= eps / (2M)`.
    Strict,
}

pub fn choose_truncation(eps: f64, mode: TruncationMode) -> Result<usize> {
    let grid = BinGrid::new(eps)?;
    let m = grid.m_bins() as f64;
    match mode {
        TruncationMode::Empirical => Ok((m.ln().powi(2) * m / 10.0).ceil() as usize),
        TruncationMode::Strict => {
            let target = eps / (2.0 * m);
            // tail_bound(1) = 4 exceeds every target, so `lo` always fails.
            let mut lo = 1usize;
            let mut hi = 2usize;
            while tail_bound(hi, eps) > target {
                lo = hi;
                hi = hi
                    .checked_mul(2)
                    .ok_or_else(|| Error::numeric("strict truncation search overflowed"))?;
            }
            while hi - lo > 1 {
                let mid = lo + (hi - lo) / 2;
                if tail_bound(mid, eps) <= target {
                    hi = mid;
                } else {
                    lo = mid;
                }
            }
            Ok(hi)
        }
    }
}

/// Precomputed table of `F_j(k)` for `0 <= j < M`, `0 <= k < N`.
#[derive(Debug, Clone, PartialEq)]
pub struct FilterBank {
    grid: BinGrid,
    n_trunc: usize,
    bump_norm: f64,
    quad_tol: f64,
    coeffs: Vec<Complex64>,
}

impl FilterBank {
    pub fn eps(&self) -> f64 {
        self.grid.eps()
    }

    pub fn m_bins(&self) -> usize {
        self.grid.m_bins()
    }

    pub fn n_trunc(&self) -> usize {
        self.n_trunc
    }

    pub fn grid(&self) -> BinGrid {
        self.grid
    }

    pub fn bump_norm(&self) -> f64 {
        self.bump_norm
    }

    pub fn quad_tol(&self) -> f64 {
        self.quad_tol
    }

    /// Coefficients `F_j(0..N)` of bin `j`.
    pub fn row(&self, j: usize) -> &[Complex64] {
        &self.coeffs[j * self.n_trunc..(j + 1) * self.n_trunc]
    }

    /// `F_j(k)` for `|k| < N`, using `F_j(-k) = conj(F_j(k))`.
    pub fn coeff(&self, j: usize, k: i64) -> Complex64 {
        let c = self.row(j)[k.unsigned_abs() as usize];
        if k < 0 {
            c.conj()
        } else {
            c
        }
    }

    /// Cache file name for this `(eps, N, tolerance)` triple.
    pub fn cache_file_name(eps: f64, n_trunc: usize) -> String {
        format!(
            "filterbank_inv{}_n{}_tol{:e}.json",
            (1.0 / eps).round() as u64,
            n_trunc,
            COEFF_QUAD_TOL
        )
    }

    pub fn save_json(&self, path: &Path) -> Result<()> {
        let record = CacheRecord {
            format: CACHE_FORMAT.into(),
            version: CACHE_VERSION,
            eps: self.eps(),
            n_trunc: self.n_trunc,
            m_bins: self.m_bins(),
            quad_tol: self.quad_tol,
            bump_norm: self.bump_norm,
            coeffs: self.coeffs.iter().flat_map(|c| [c.re, c.im]).collect(),
        };
        let tmp = path.with_extension("json.tmp");
        std::fs::write(&tmp, serde_json::to_vec(&record)?)?;
        std::fs::rename(tmp, path)?;
        Ok(())
    }

    pub fn load_json(path: &Path) -> Result<Self> {
        let record: CacheRecord = serde_json::from_slice(&std::fs::read(path)?)?;
        if record.format != CACHE_FORMAT || record.version != CACHE_VERSION {
            return Err(Error::invalid(format!(
                "{}: unsupported cache format {} v{}",
                path.display(),
                record.format,
                record.version
            )));
        }
        let grid = BinGrid::new(record.eps)?;
        if grid.m_bins() != record.m_bins || record.coeffs.len() != 2 * record.m_bins * record.n_trunc
        {
            return Err(Error::invalid(format!("{}: inconsistent table shape", path.display())));
        }
        Ok(Self {
            grid,
            n_trunc: record.n_trunc,
            bump_norm: record.bump_norm,
            quad_tol: record.quad_tol,
            coeffs: record
                .coeffs
                .chunks_exact(2)
                .map(|c| Complex64::new(c[0], c[1]))
                .collect(),
        })
    }

    /// Loads the table from `dir` if a matching file exists, otherwise
    /// builds it and writes it there.
    pub fn load_or_build(dir: &Path, eps: f64, n_trunc: usize) -> Result<Self> {
        let path: PathBuf = dir.join(Self::cache_file_name(eps, n_trunc));
        if path.exists() {
            if let Ok(bank) = Self::load_json(&path) {
                if bank.n_trunc == n_trunc && bank.eps() == eps && bank.quad_tol == COEFF_QUAD_TOL {
                    return Ok(bank);
                }
            }
        }
        let bank = build_filterbank(eps, n_trunc)?;
        std::fs::create_dir_all(dir)?;
        bank.save_json(&path)?;
        Ok(bank)
    }
}

#[derive(Serialize, Deserialize)]
struct CacheRecord {
    format: String,
    version: u32,
    eps: f64,
    n_trunc: usize,
    m_bins: usize,
    quad_tol: f64,
    bump_norm: f64,
    /// Row-major `M x N`, interleaved re/im.
    coeffs: Vec<f64>,
}

/// Tabulates `H(k eps/2)` once per `k` and fills the `M x N` table.
pub fn build_filterbank(eps: f64, n_trunc: usize) -> Result<FilterBank> {
    let grid = BinGrid::new(eps)?;
    if n_trunc < 2 {
        return Err(Error::invalid(format!("n_trunc must be at least 2, got {n_trunc}")));
    }
    let transform = (0..n_trunc)
        .map(|k| {
            bump_fourier(k as f64 * eps / 2.0)
                .map_err(|e| Error::numeric(format!("bump transform at k = {k}: {e}")))
        })
        .collect::<Result<Vec<f64>>>()?;
    let mut coeffs = Vec::with_capacity(grid.m_bins() * n_trunc);
    for j in 0..grid.m_bins() {
        let lambda = grid.lambda_tilde(j);
        coeffs.extend(
            transform
                .iter()
                .enumerate()
                .map(|(k, &h)| coefficient_from_transform(h, lambda, k as i64, eps)),
        );
    }
    Ok(FilterBank {
        grid,
        n_trunc,
        bump_norm: bump_norm(),
        quad_tol: COEFF_QUAD_TOL,
        coeffs,
    })
}

/// Truncated series `(1/sqrt(2pi)) sum_{|k|<N} F_j(k) exp(ixk)`, evaluated
/// as `F_j(0) + 2 Re sum_{k>=1}` so the result is real by construction.
pub fn evaluate_filter_series(j: usize, x: f64, bank: &FilterBank) -> Result<f64> {
    bank.grid.check_bin(j)?;
    let row = bank.row(j);
    let tail: Complex64 = row
        .iter()
        .enumerate()
        .skip(1)
        .map(|(k, c)| c * Complex64::from_polar(1.0, x * k as f64))
        .sum();
    Ok((row[0].re + 2.0 * tail.re) / (2.0 * PI).sqrt())
}

/// One sample of the bump-transform decay scan.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DecaySample {
    pub kp: f64,
    pub transform: f64,
    pub envelope: f64,
}

/// Scan of `|H(k')|` against `exp(-sqrt(k'))`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DecayScan {
    pub samples: Vec<DecaySample>,
    /// Smallest scanned `k'` from which every later scanned point satisfies
    /// `|H(k')| <= exp(-sqrt(k'))`; `None` if the last point violates it.
    pub onset: Option<f64>,
}

/// Evaluates the decay scan on the given ascending `k'` values.
pub fn decay_scan(kps: &[f64]) -> Result<DecayScan> {
    let samples = kps
        .iter()
        .map(|&kp| {
            Ok(DecaySample {
                kp,
                transform: bump_fourier(kp)?,
                envelope: (-kp.abs().sqrt()).exp(),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let mut onset = None;
    for s in samples.iter().rev() {
        if s.transform.abs() <= s.envelope {
            onset = Some(s.kp);
        } else {
            break;
        }
    }
    Ok(DecayScan { samples, onset })
}
