//! Matrix-pencil baseline: shifted Hankel matrices of the signal, the
//! least-squares pencil `K = argmin ||K H0 - H1||_F`, its eigenphases as
//! eigenvalue estimates, and a Vandermonde fit for the amplitudes.
//!
//! Sign convention: the signal is `sum_l q_l exp(-i lambda_l k)`, so an
//! eigenvalue `mu` of `K` maps to `lambda = -arg(mu)`.

use std::f64::consts::PI;

use faer::Mat;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{eigenvalues, frobenius, truncated_svd};
use crate::signal::TimeSeries;

/// `l_dim x (2N - l_dim - 1)` Hankel matrix with entries
/// `g~_{l + l' + shift - N + 1}`; negative indices use `conj(g~_{-k})`.
pub fn build_hankel(ts: &TimeSeries, l_dim: usize, shift: usize) -> Result<Mat<Complex64>> {
    let n = ts.n_len();
    if l_dim == 0 || l_dim + 1 > n {
        return Err(Error::invalid(format!(
            "pencil dimension {l_dim} must lie in 1..={}",
            n.saturating_sub(1)
        )));
    }
    if shift > 1 {
        return Err(Error::invalid(format!("Hankel shift must be 0 or 1, got {shift}")));
    }
    let cols = 2 * n - l_dim - 1;
    let offset = shift as i64 - n as i64 + 1;
    Ok(Mat::from_fn(l_dim, cols, |l, lp| ts.at(l as i64 + lp as i64 + offset)))
}

/// Least-squares pencil `K = H1 pinv(H0)` with the pseudoinverse cut at
/// `1e-12` times the largest singular value.
pub fn solve_pencil(h0: &Mat<Complex64>, h1: &Mat<Complex64>) -> Result<Mat<Complex64>> {
    if h0.nrows() != h1.nrows() || h0.ncols() != h1.ncols() {
        return Err(Error::invalid(format!(
            "pencil shapes differ: {}x{} vs {}x{}",
            h0.nrows(),
            h0.ncols(),
            h1.nrows(),
            h1.ncols()
        )));
    }
    let svd = truncated_svd(h0)?;
    if svd.rank() == 0 {
        return Err(Error::DegeneratePencil("H0 has no nonzero singular value".into()));
    }
    Ok(svd.right_solve(h1))
}

/// `||K H0 - H1||_F`.
pub fn pencil_residual(k: &Mat<Complex64>, h0: &Mat<Complex64>, h1: &Mat<Complex64>) -> f64 {
    frobenius(&(k * h0 - h1))
}

fn eigenphase(mu: Complex64) -> f64 {
    let phase = -mu.arg();
    // -arg lies in [-pi, pi); fold -pi onto pi.
    if phase <= -PI {
        PI
    } else {
        phase
    }
}

/// All eigenvalues `mu` of the pencil matrix.
pub fn pencil_roots(k: &Mat<Complex64>) -> Result<Vec<Complex64>> {
    if k.nrows() != k.ncols() {
        return Err(Error::invalid("pencil matrix must be square"));
    }
    eigenvalues(k)
}

/// Eigenphases `-arg(mu)` in `(-pi, pi]`, sorted ascending.
pub fn pencil_eigenphases(k: &Mat<Complex64>) -> Result<Vec<f64>> {
    let mut phases: Vec<f64> = pencil_roots(k)?.into_iter().map(eigenphase).collect();
    phases.sort_by(f64::total_cmp);
    Ok(phases)
}

/// Least-squares amplitudes against the first `l_dim` samples.
#[derive(Debug, Clone, PartialEq)]
pub struct AmplitudeFit {
    pub amplitudes: Vec<Complex64>,
    /// `||B q' - g~_0||_2`.
    pub residual: f64,
    /// True when singular values of `B` were dropped by the cutoff.
    pub rank_deficient: bool,
}

/// Solves `min ||B q' - (g~_0, ..., g~_{l_dim-1})||` with
/// `B_{l,l'} = exp(-i lambda_{l'} l)`.
pub fn solve_amplitudes(eigenphases: &[f64], ts: &TimeSeries, l_dim: usize) -> Result<AmplitudeFit> {
    if eigenphases.is_empty() {
        return Err(Error::invalid("no eigenphases to fit"));
    }
    if l_dim == 0 || l_dim > ts.n_len() {
        return Err(Error::invalid(format!(
            "amplitude fit needs 1..={} samples, got {l_dim}",
            ts.n_len()
        )));
    }
    let b = Mat::from_fn(l_dim, eigenphases.len(), |l, lp| {
        Complex64::from_polar(1.0, -eigenphases[lp] * l as f64)
    });
    let g0 = Mat::from_fn(l_dim, 1, |l, _| ts.values()[l]);
    let svd = truncated_svd(&b)?;
    if svd.rank() == 0 {
        return Err(Error::numeric("Vandermonde matrix has no nonzero singular value"));
    }
    let q = svd.left_solve(&g0);
    let residual = frobenius(&(&b * &q - &g0));
    Ok(AmplitudeFit {
        amplitudes: (0..q.nrows()).map(|i| q[(i, 0)]).collect(),
        residual,
        rank_deficient: svd.rank() < svd.full,
    })
}

/// Optional post-filters on the pencil roots. The default keeps every root.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct MpFilter {
    /// Keep roots with `| |mu| - 1 | <= delta`.
    pub modulus_window: Option<f64>,
    /// Keep eigenphases inside `[-1/2, 1/2]`.
    pub range_only: bool,
}

impl MpFilter {
    /// The modulus window with the customary `delta = 0.5`.
    pub fn unit_circle() -> Self {
        Self {
            modulus_window: Some(0.5),
            range_only: false,
        }
    }

    fn keeps(&self, phase: f64, modulus: f64) -> bool {
        let modulus_ok = self
            .modulus_window
            .is_none_or(|delta| (modulus - 1.0).abs() <= delta);
        let range_ok = !self.range_only || (-0.5..=0.5).contains(&phase);
        modulus_ok && range_ok
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct MpOptions {
    /// Pencil dimension `L`; defaults to `N - 1`.
    pub l_dim: Option<usize>,
    pub filter: MpFilter,
}

/// Output of the pencil method. Without filtering there are exactly `l_dim`
/// estimates; filters can only remove some.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MpEstimate {
    /// Sorted ascending, in `(-pi, pi]`.
    pub eigenphases: Vec<f64>,
    /// `|mu|` of the root behind each eigenphase.
    pub moduli: Vec<f64>,
    #[serde(with = "crate::complex_serde")]
    pub amplitudes: Vec<Complex64>,
    pub l_dim: usize,
    pub residual: f64,
    pub rank_deficient: bool,
    pub filter: MpFilter,
}

impl MpEstimate {
    pub fn len(&self) -> usize {
        self.eigenphases.len()
    }

    pub fn is_empty(&self) -> bool {
        self.eigenphases.is_empty()
    }
}

/// Full pencil pipeline: both Hankel shifts, the pencil, its eigenphases and
/// the amplitude fit against the first `L` samples.
pub fn mp_estimate(ts: &TimeSeries, opts: MpOptions) -> Result<MpEstimate> {
    let l_dim = opts.l_dim.unwrap_or(ts.n_len().saturating_sub(1));
    let h0 = build_hankel(ts, l_dim, 0)?;
    let h1 = build_hankel(ts, l_dim, 1)?;
    let k = solve_pencil(&h0, &h1)?;
    let mut roots: Vec<(f64, f64)> = pencil_roots(&k)?
        .into_iter()
        .map(|mu| (eigenphase(mu), mu.norm()))
        .filter(|&(phase, modulus)| opts.filter.keeps(phase, modulus))
        .collect();
    if roots.is_empty() {
        return Err(Error::numeric("every pencil root was removed by the filter"));
    }
    roots.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
    let eigenphases: Vec<f64> = roots.iter().map(|r| r.0).collect();
    let fit = solve_amplitudes(&eigenphases, ts, l_dim)?;
    Ok(MpEstimate {
        moduli: roots.iter().map(|r| r.1).collect(),
        eigenphases,
        amplitudes: fit.amplitudes,
        l_dim,
        residual: fit.residual,
        rank_deficient: fit.rank_deficient,
        filter: opts.filter,
    })
}

/// How complex amplitudes enter the moment sum.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AmplitudeMode {
    /// `sum_l Re(q'_l) lambda_l^s`.
    #[default]
    RealPerTerm,
    /// `Re(sum_l q'_l lambda_l^s)`.
    ComplexTotal,
}

/// `sum_l q'_l lambda_l^s` under the chosen amplitude mode.
pub fn mp_moment(est: &MpEstimate, s: u32, mode: AmplitudeMode) -> f64 {
    let terms = est
        .eigenphases
        .iter()
        .zip(&est.amplitudes)
        .map(|(l, q)| (q, l.powi(s as i32)));
    match mode {
        AmplitudeMode::RealPerTerm => terms.map(|(q, p)| q.re * p).sum(),
        AmplitudeMode::ComplexTotal => terms.map(|(q, p)| q * p).sum::<Complex64>().re,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::signal::{add_noise, generate_clean, Provenance};
    use crate::spectrum::{exact_moment, fig6_spectrum, random_spectrum, SpectralLine, Spectrum};

    fn single(lambda: f64) -> Spectrum {
        Spectrum::new(vec![SpectralLine { lambda, weight: 1.0 }]).unwrap()
    }

    #[test]
    fn hankel_indexing() {
        let ts = generate_clean(&fig6_spectrum(), 3).unwrap();
        let h = build_hankel(&ts, 2, 0).unwrap();
        assert_eq!((h.nrows(), h.ncols()), (2, 3));
        // l + l' + a - N + 1 with N = 3: (0,0) -> -2
        assert_eq!(h[(0, 0)], ts.values()[2].conj());
        assert_eq!(h[(1, 2)], ts.values()[1]);
        let h1 = build_hankel(&ts, 2, 1).unwrap();
        assert_eq!(h1[(1, 2)], ts.values()[2]);
        for l in 0..2 {
            for lp in 0..2 {
                assert_eq!(h1[(l, lp)], h[(l, lp + 1)]);
            }
        }
        assert!(build_hankel(&ts, 3, 0).is_err());
        assert!(build_hankel(&ts, 0, 0).is_err());
        assert!(build_hankel(&ts, 1, 2).is_err());
    }

    #[test]
    fn hankel_shape_follows_formula() {
        let ts = generate_clean(&fig6_spectrum(), 20).unwrap();
        let h = build_hankel(&ts, 10, 0).unwrap();
        assert_eq!((h.nrows(), h.ncols()), (10, 2 * 20 - 10 - 1));
        // Entry (1, 3) at N = 3, L = 2 from the worked example above.
        let small = build_hankel(&generate_clean(&fig6_spectrum(), 3).unwrap(), 2, 0).unwrap();
        assert_eq!(small.ncols(), 3);
    }

    #[test]
    fn constant_signal_gives_all_ones() {
        let ts = generate_clean(&single(0.0), 8).unwrap();
        for shift in 0..2 {
            let h = build_hankel(&ts, 4, shift).unwrap();
            for c in 0..h.ncols() {
                for r in 0..h.nrows() {
                    assert_eq!(h[(r, c)], Complex64::new(1.0, 0.0));
                }
            }
        }
    }

    #[test]
    fn single_tone_pencil() {
        let lambda = 0.37;
        let ts = generate_clean(&single(lambda), 12).unwrap();
        let h0 = build_hankel(&ts, 5, 0).unwrap();
        let h1 = build_hankel(&ts, 5, 1).unwrap();
        let k = solve_pencil(&h0, &h1).unwrap();
        let roots = pencil_roots(&k).unwrap();
        let big: Vec<_> = roots.iter().filter(|m| m.norm() > 0.5).collect();
        assert_eq!(big.len(), 1);
        assert!((big[0] - Complex64::from_polar(1.0, -lambda)).norm() < 1e-10);
        assert!(pencil_residual(&k, &h0, &h1) < 1e-8);
    }

    #[test]
    fn identity_shift_has_unit_root() {
        let ts = generate_clean(&single(0.2), 10).unwrap();
        let h0 = build_hankel(&ts, 4, 0).unwrap();
        let k = solve_pencil(&h0, &h0).unwrap();
        let roots = pencil_roots(&k).unwrap();
        assert!(roots.iter().any(|m| (m - Complex64::new(1.0, 0.0)).norm() < 1e-10));
    }

    #[test]
    fn zero_pencil_is_degenerate() {
        let z = Mat::<Complex64>::zeros(3, 4);
        assert!(matches!(solve_pencil(&z, &z), Err(Error::DegeneratePencil(_))));
    }

    #[test]
    fn diagonal_eigenphase() {
        let k = Mat::from_fn(1, 1, |_, _| Complex64::from_polar(1.0, -0.3));
        let phases = pencil_eigenphases(&k).unwrap();
        assert!((phases[0] - 0.3).abs() < 1e-15);
        let k = Mat::from_fn(1, 1, |_, _| Complex64::new(-1.0, 0.0));
        assert_eq!(pencil_eigenphases(&k).unwrap(), vec![PI]);
    }

    #[test]
    fn five_roots_on_unit_circle() {
        let ts = generate_clean(&fig6_spectrum(), 20).unwrap();
        let h0 = build_hankel(&ts, 10, 0).unwrap();
        let h1 = build_hankel(&ts, 10, 1).unwrap();
        let k = solve_pencil(&h0, &h1).unwrap();
        let roots = pencil_roots(&k).unwrap();
        let on_circle = roots.iter().filter(|m| (m.norm() - 1.0).abs() < 1e-6).count();
        let near_zero = roots.iter().filter(|m| m.norm() < 1e-6).count();
        assert_eq!((on_circle, near_zero), (5, 5));
    }

    #[test]
    fn single_amplitude() {
        let ts = generate_clean(&single(0.1), 4).unwrap();
        let fit = solve_amplitudes(&[0.1], &ts, 1).unwrap();
        assert!((fit.amplitudes[0] - Complex64::new(1.0, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn amplitudes_from_exact_phases() {
        let spec = fig6_spectrum();
        let ts = generate_clean(&spec, 20).unwrap();
        let phases: Vec<f64> = spec.eigenvalues().collect();
        let fit = solve_amplitudes(&phases, &ts, 10).unwrap();
        for (q, e) in fit.amplitudes.iter().zip(spec.entries()) {
            assert!((q.re - e.weight).abs() < 1e-6);
            assert!(q.im.abs() < 1e-6);
        }
        assert!(fit.residual < 1e-10);
        assert!(!fit.rank_deficient);
    }

    #[test]
    fn duplicate_phases_stay_finite() {
        let ts = generate_clean(&single(0.25), 6).unwrap();
        let fit = solve_amplitudes(&[0.25, 0.25, 0.25], &ts, 5).unwrap();
        assert!(fit.rank_deficient);
        assert!(fit.amplitudes.iter().all(|q| q.re.is_finite() && q.im.is_finite()));
        let total: Complex64 = fit.amplitudes.iter().sum();
        assert!((total - Complex64::new(1.0, 0.0)).norm() < 1e-10);
    }

    #[test]
    fn noiseless_recovery_of_fig6() {
        let spec = fig6_spectrum();
        let ts = generate_clean(&spec, 20).unwrap();
        let est = mp_estimate(&ts, MpOptions { l_dim: Some(10), filter: MpFilter::unit_circle() }).unwrap();
        assert_eq!(est.len(), 5);
        for ((phase, q), e) in est.eigenphases.iter().zip(&est.amplitudes).zip(spec.entries()) {
            assert!((phase - e.lambda).abs() < 1e-6);
            assert!((q.re - e.weight).abs() < 1e-6);
        }
        assert!((mp_moment(&est, 0, AmplitudeMode::RealPerTerm) - 1.0).abs() < 1e-9);
        assert!((mp_moment(&est, 1, AmplitudeMode::RealPerTerm) - 0.15240).abs() < 1e-6);
    }

    #[test]
    fn unfiltered_estimate_keeps_every_root() {
        let ts = generate_clean(&fig6_spectrum(), 20).unwrap();
        let est = mp_estimate(&ts, MpOptions { l_dim: Some(10), ..Default::default() }).unwrap();
        assert_eq!(est.len(), 10);
        assert_eq!(est.amplitudes.len(), 10);
        assert!(est.eigenphases.windows(2).all(|w| w[0] <= w[1]));
        assert!(est.eigenphases.iter().all(|p| *p > -PI && *p <= PI));
        assert!((mp_moment(&est, 0, AmplitudeMode::RealPerTerm) - 1.0).abs() < 1e-9);
        let default_l = mp_estimate(&ts, MpOptions::default()).unwrap();
        assert_eq!(default_l.l_dim, 19);
    }

    #[test]
    fn noiseless_recovery_random_spectra() {
        let mut checked = 0;
        for seed in 0..40 {
            let spec = random_spectrum(3, seed).unwrap();
            if spec.min_gap().unwrap() < 1e-3 || spec.entries().iter().any(|e| e.weight < 1e-3) {
                continue;
            }
            let n = 16;
            for l_dim in [3, 8, 15] {
                let ts = generate_clean(&spec, n).unwrap();
                let est = mp_estimate(&ts, MpOptions { l_dim: Some(l_dim), filter: MpFilter::unit_circle() }).unwrap();
                assert_eq!(est.len(), 3, "seed {seed} L {l_dim}");
                for ((phase, q), e) in est.eigenphases.iter().zip(&est.amplitudes).zip(spec.entries()) {
                    assert!((phase - e.lambda).abs() < 1e-6, "seed {seed} L {l_dim}");
                    assert!((q.re - e.weight).abs() < 1e-6, "seed {seed} L {l_dim}");
                }
            }
            checked += 1;
        }
        assert!(checked >= 10);
    }

    #[test]
    fn noise_can_push_roots_outside_range() {
        let spec = fig6_spectrum();
        let ts = add_noise(&generate_clean(&spec, 120).unwrap(), 0.005, 4).unwrap();
        let est = mp_estimate(&ts, MpOptions::default()).unwrap();
        assert!(est.eigenphases.iter().any(|p| p.abs() > 0.5));
        let ranged = mp_estimate(
            &ts,
            MpOptions { l_dim: None, filter: MpFilter { modulus_window: None, range_only: true } },
        )
        .unwrap();
        assert!(ranged.eigenphases.iter().all(|p| p.abs() <= 0.5));
        assert!(ranged.len() < est.len());
    }

    #[test]
    fn amplitude_modes_agree_on_real_amplitudes() {
        let est = MpEstimate {
            eigenphases: vec![-0.2, 0.3],
            moduli: vec![1.0, 1.0],
            amplitudes: vec![Complex64::new(0.4, 0.1), Complex64::new(0.6, -0.1)],
            l_dim: 2,
            residual: 0.0,
            rank_deficient: false,
            filter: MpFilter::default(),
        };
        let a = mp_moment(&est, 2, AmplitudeMode::RealPerTerm);
        let b = mp_moment(&est, 2, AmplitudeMode::ComplexTotal);
        assert!((a - b).abs() < 1e-15);
        assert!((a - (0.4 * 0.04 + 0.6 * 0.09)).abs() < 1e-15);
    }

    #[test]
    fn estimate_is_deterministic() {
        let ts = add_noise(&generate_clean(&fig6_spectrum(), 60).unwrap(), 0.005, 2).unwrap();
        assert!(matches!(ts.provenance(), Provenance::AdditiveNoise { .. }));
        let a = mp_estimate(&ts, MpOptions::default()).unwrap();
        let b = mp_estimate(&ts, MpOptions::default()).unwrap();
        assert_eq!(a, b);
        let s1 = exact_moment(&fig6_spectrum(), 1);
        assert!(mp_moment(&a, 1, AmplitudeMode::RealPerTerm).is_finite());
        assert!(s1.is_finite());
    }
}
