//! Comparison estimators: diagonal loading, a hard band mask with noise
//! floor, and an eigenvalue-floor spiked shrinkage.
//!
//! `band_taper` is a plain 0/1 mask, not a tapering-and-shrinkage pipeline;
//! `spiked_shrinkage` keeps the top eigenvalues as observed, without
//! debiasing.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hermitian::{HermitianMatrix, C64};
use crate::noise::NoiseEstimate;

/// `S + δI`.
pub fn diagonal_loading(s: &HermitianMatrix, delta: f64) -> Result<HermitianMatrix> {
    if !(delta.is_finite() && delta >= 0.0) {
        return Err(Error::Domain(format!("loading level {delta} must be non-negative")));
    }
    Ok(s.add_identity(delta))
}

/// `(S ⊙ T) + σ̂²I` with `T` keeping offsets `|j − k| ≤ taper_l`.
///
/// May be indefinite.
pub fn band_taper(s: &HermitianMatrix, taper_l: usize, sigma2_hat: f64) -> Result<HermitianMatrix> {
    let p = s.dim();
    if taper_l == 0 || taper_l >= p {
        return Err(Error::Domain(format!("taper bandsize {taper_l} outside [1, {}]", p - 1)));
    }
    if !(sigma2_hat.is_finite() && sigma2_hat >= 0.0) {
        return Err(Error::Domain(format!("noise power {sigma2_hat} must be non-negative")));
    }
    let masked = HermitianMatrix::from_upper(p, |j, k| {
        if k - j <= taper_l {
            s.get(j, k)
        } else {
            C64::new(0.0, 0.0)
        }
    });
    Ok(masked.add_identity(sigma2_hat))
}

/// Floors the eigenvalues of `S` at `σ̂²`, leaving the `r̂` spikes as observed.
pub fn spiked_shrinkage(s: &HermitianMatrix, noise: &NoiseEstimate) -> Result<HermitianMatrix> {
    let sigma2 = noise.sigma2_hat;
    if !(sigma2.is_finite() && sigma2 > 0.0) {
        return Err(Error::Domain(format!("noise power {sigma2} must be positive")));
    }
    let eig = s.eigh();
    // The top r̂ exceed σ̂² whenever r̂ came from the same spectrum; flooring
    // them too keeps λ_min ≥ σ̂² for an externally supplied r̂.
    let values: Vec<f64> = eig.values.iter().map(|&l| l.max(sigma2)).collect();
    Ok(HermitianMatrix::from_eigen(&values, &eig.vectors))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "snake_case")]
pub enum BaselineConfig {
    /// `delta = None` loads with `σ̂²`.
    DiagonalLoading { delta: Option<f64> },
    BandTaper { taper_l: usize },
    SpikedShrinkage,
}

impl BaselineConfig {
    pub fn name(&self) -> String {
        match self {
            BaselineConfig::DiagonalLoading { .. } => "dl".into(),
            BaselineConfig::BandTaper { taper_l } => format!("band-taper-{taper_l}"),
            BaselineConfig::SpikedShrinkage => "spiked-shrinkage".into(),
        }
    }

    pub fn apply(&self, s: &HermitianMatrix, noise: &NoiseEstimate) -> Result<HermitianMatrix> {
        match *self {
            BaselineConfig::DiagonalLoading { delta } => diagonal_loading(s, delta.unwrap_or(noise.sigma2_hat)),
            BaselineConfig::BandTaper { taper_l } => band_taper(s, taper_l, noise.sigma2_hat),
            BaselineConfig::SpikedShrinkage => spiked_shrinkage(s, noise),
        }
    }
}
