//! Joint estimation of a banded clutter covariance and a white noise floor
//! from limited samples.
//!
//! The model is `Σ = B + σ²I` where `B` is Hermitian, positive semidefinite
//! and banded. The pipeline is:
//!
//! 1. [`noise`]: estimate `σ²` from the median eigenvalue of the sample
//!    covariance normalised by the Marchenko–Pastur median.
//! 2. [`bcd`]: solve a hierarchical group-lasso problem that shrinks the
//!    sample covariance towards a banded matrix, by block coordinate descent
//!    on its dual.
//! 3. [`evaluation`]: score estimates by normalised SCNR over a
//!    Doppler–azimuth steering grid and run seeded Monte-Carlo sweeps.
//!
//! [`bounds`] evaluates the likelihoods and the convex upper bounds used to
//! justify the Frobenius-norm objective, and [`baselines`] holds the
//! comparison estimators.

pub mod baselines;
pub mod bcd;
pub mod bounds;
pub mod cmx;
pub mod error;
pub mod evaluation;
pub mod hermitian;
pub mod model;
pub mod noise;
mod quadrature;

pub use error::{Error, Result};
pub use hermitian::{HermitianMatrix, C64};
