//! Thin wrappers over faer for the pencil method: SVD-based
//! pseudoinverse products and general complex eigenvalues.
//!
//! faer is built without its rayon feature, so every kernel runs
//! sequentially and results do not depend on the machine's thread count.

use faer::Mat;
use num_complex::Complex64;

use crate::error::{Error, Result};

/// Relative singular-value cutoff for every pseudoinverse.
pub const PINV_RCOND: f64 = 1e-12;

/// Truncated SVD factors `A ~ U diag(s) V^H`, keeping singular values above
/// `PINV_RCOND * s_max`.
pub(crate) struct TruncatedSvd {
    pub u: Mat<Complex64>,
    pub s: Vec<f64>,
    pub v: Mat<Complex64>,
    /// Full rank (number of singular values computed).
    pub full: usize,
}

pub(crate) fn truncated_svd(a: &Mat<Complex64>) -> Result<TruncatedSvd> {
    let svd = a
        .thin_svd()
        .map_err(|e| Error::numeric(format!("SVD failed to converge: {e:?}")))?;
    let s_all: Vec<f64> = svd.S().column_vector().iter().map(|c| c.re).collect();
    let full = s_all.len();
    let s_max = s_all.first().copied().unwrap_or(0.0);
    let kept = s_all.iter().take_while(|&&s| s > PINV_RCOND * s_max && s > 0.0).count();
    Ok(TruncatedSvd {
        u: svd.U().subcols(0, kept).to_owned(),
        s: s_all[..kept].to_vec(),
        v: svd.V().subcols(0, kept).to_owned(),
        full,
    })
}

impl TruncatedSvd {
    pub fn rank(&self) -> usize {
        self.s.len()
    }

    /// `rhs * pinv(A) = (rhs V) diag(1/s) U^H`.
    pub fn right_solve(&self, rhs: &Mat<Complex64>) -> Mat<Complex64> {
        let mut rv = rhs * &self.v;
        for (c, s) in self.s.iter().enumerate() {
            for r in 0..rv.nrows() {
                rv[(r, c)] /= *s;
            }
        }
        &rv * self.u.adjoint()
    }

    /// `pinv(A) b = V diag(1/s) U^H b`.
    pub fn left_solve(&self, b: &Mat<Complex64>) -> Mat<Complex64> {
        let mut ub = self.u.adjoint() * b;
        for (r, s) in self.s.iter().enumerate() {
            for c in 0..ub.ncols() {
                ub[(r, c)] /= *s;
            }
        }
        &self.v * &ub
    }
}

pub(crate) fn eigenvalues(a: &Mat<Complex64>) -> Result<Vec<Complex64>> {
    a.eigenvalues()
        .map_err(|e| Error::numeric(format!("eigensolver failed: {e:?}")))
}

pub(crate) fn frobenius(a: &Mat<Complex64>) -> f64 {
    let mut acc = 0.0;
    for c in 0..a.ncols() {
        for r in 0..a.nrows() {
            acc += a[(r, c)].norm_sqr();
        }
    }
    acc.sqrt()
}
