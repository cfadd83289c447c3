//! Eigenvalue estimation from the time series `g_k = Tr[rho exp(-iHk)]`.
//!
//! The signal is turned into probabilities over the estimate grid
//! `-1/2 + j eps` by a bank of smooth filters built from a bump mollifier
//! ([`filterbank`], [`ts_estimator`]). The matrix-pencil method
//! ([`matrix_pencil`]) and a plain DFT ([`dft`]) serve as baselines, and
//! [`experiment`] wires everything into seeded comparison runs.

pub mod dft;
pub mod error;
pub mod experiment;
pub mod filterbank;
pub mod matrix_pencil;
pub mod quadrature;
pub mod signal;
pub mod spectrum;
pub mod ts_estimator;

mod complex_serde;
mod linalg;

pub use error::{Error, Result};
pub use filterbank::{BinGrid, FilterBank, TruncationMode};
pub use matrix_pencil::{AmplitudeMode, MpEstimate, MpFilter, MpOptions};
pub use signal::{Provenance, TimeSeries};
pub use spectrum::{SpectralLine, Spectrum};
pub use ts_estimator::{BinDistribution, BinKind};

pub use faer::Mat;
pub use num_complex::Complex64;
