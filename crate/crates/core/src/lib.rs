//! Estimation and forecasting of a latent distribution process observed
//! through daily panels of intra-cycle samples.
//!
//! The pipeline is:
//!
//! 1. [`ecdf`]: empirical CDFs per cycle and their exact inner products in
//!    `L²(μ)`, assembled into a centered Gram matrix.
//! 2. [`spectral`]: the lag-covariance operator is diagonalised through a
//!    small `(n−p)×(n−p)` matrix built from lagged Gram blocks; this yields
//!    eigenvalues, eigenfunctions (as combinations of ECDFs) and the latent
//!    score series.
//! 3. [`tsmodel`]: scalar machinery for the scores and the HAR-style
//!    baseline (ARMA, median regression, Ljung–Box, Diebold–Mariano).
//! 4. [`sim`]: an AR(1)-driven CDF process with known eigenstructure, used as
//!    ground truth by the Monte Carlo harness.
//!
//! Data-parallel loops (Gram pairs, replications) go through [`exec`], which
//! falls back to sequential iteration when the `parallel` feature is off.

pub mod ecdf;
pub mod error;
pub mod exec;
pub mod measure;
pub mod sim;
pub mod spectral;
pub mod tsmodel;

pub use ecdf::{CenteredGram, CyclePanel, EmpiricalCdf};
pub use error::{Error, ErrorKind, Result};
pub use exec::Exec;
pub use measure::WeightMeasure;
pub use spectral::{DimRule, SpectralConfig, SpectralModel};
