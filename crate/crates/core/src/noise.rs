//! Noise-power estimation from the sample eigenvalue median.
//!
//! For white noise of power `σ²` the eigenvalues of the sample covariance
//! follow the Marchenko–Pastur law with ratio `c = p/K`, scaled by `σ²`.
//! Spikes only move a handful of eigenvalues, so the median eigenvalue
//! divided by the median of the MP law is a robust estimate of `σ²`.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::sync::{OnceLock, RwLock};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hermitian::HermitianMatrix;
use crate::quadrature::integrate;

const CDF_REL_TOL: f64 = 1e-10;
const ANGLE_TOL: f64 = 1e-13;

/// Aspect ratio `p/K` of the Marchenko–Pastur law.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MpRatio(f64);

impl MpRatio {
    pub fn new(ratio: f64) -> Result<Self> {
        if ratio.is_finite() && ratio > 0.0 {
            Ok(Self(ratio))
        } else {
            Err(Error::Domain(format!("MP ratio must be positive, got {ratio}")))
        }
    }

    pub fn from_dims(p: usize, k: usize) -> Result<Self> {
        if k == 0 {
            return Err(Error::Domain("sample count K must be at least 1".into()));
        }
        Self::new(p as f64 / k as f64)
    }

    pub fn value(self) -> f64 {
        self.0
    }

    /// Mass of the atom at zero, `1 − 1/c` when `c > 1`.
    pub fn atom_mass(self) -> f64 {
        if self.0 > 1.0 {
            1.0 - 1.0 / self.0
        } else {
            0.0
        }
    }

    /// Edges `[(1 − √c)², (1 + √c)²]` of the continuous bulk.
    pub fn support(self) -> (f64, f64) {
        let s = self.0.sqrt();
        ((1.0 - s).powi(2), (1.0 + s).powi(2))
    }
}

/// Density of the continuous bulk normalised to unit mass.
pub fn mp_bulk_density(c: MpRatio, x: f64) -> f64 {
    let (a, b) = c.support();
    if x <= a || x >= b {
        return 0.0;
    }
    ((b - x) * (x - a)).sqrt() / (2.0 * PI * x * c.value().min(1.0))
}

/// Bulk CDF in the angle `φ` of `x(φ) = a + h(1 − cos φ)`, `h = (b − a)/2`.
/// The substitution removes the square-root edges of the density.
fn bulk_cdf_angle(c: MpRatio, phi: f64) -> f64 {
    let (a, b) = c.support();
    let h = 0.5 * (b - a);
    let norm = 2.0 * PI * c.value().min(1.0);
    let integrand = |t: f64| {
        let s = (0.5 * t).sin();
        let x = a + 2.0 * h * s * s;
        let sin_t = t.sin();
        h * h * sin_t * sin_t / (norm * x)
    };
    integrate(integrand, 0.0, phi, CDF_REL_TOL)
}

/// CDF of the continuous bulk (the atom at zero excluded) at `x`.
pub fn mp_bulk_cdf(c: MpRatio, x: f64) -> f64 {
    let (a, b) = c.support();
    if x <= a {
        return 0.0;
    }
    if x >= b {
        return 1.0;
    }
    let h = 0.5 * (b - a);
    let phi = (1.0 - (x - a) / h).clamp(-1.0, 1.0).acos();
    bulk_cdf_angle(c, phi)
}

/// Quantile `q ∈ (0, 1)` of the continuous bulk by bisection on the angle.
pub fn mp_bulk_quantile(c: MpRatio, q: f64) -> Result<f64> {
    if !(q > 0.0 && q < 1.0) {
        return Err(Error::Domain(format!("quantile {q} outside (0, 1)")));
    }
    let (a, b) = c.support();
    let h = 0.5 * (b - a);
    let (mut lo, mut hi) = (0.0, PI);
    while hi - lo > ANGLE_TOL {
        let mid = 0.5 * (lo + hi);
        if bulk_cdf_angle(c, mid) < q {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let phi = 0.5 * (lo + hi);
    let s = (0.5 * phi).sin();
    Ok(a + 2.0 * h * s * s)
}

fn median_cache() -> &'static RwLock<HashMap<u64, f64>> {
    static CACHE: OnceLock<RwLock<HashMap<u64, f64>>> = OnceLock::new();
    CACHE.get_or_init(|| RwLock::new(HashMap::new()))
}

/// Median of the continuous MP bulk for ratio `c`, cached per ratio.
pub fn mp_median(c: MpRatio) -> f64 {
    let key = c.value().to_bits();
    if let Some(&v) = median_cache().read().expect("cache poisoned").get(&key) {
        return v;
    }
    let v = mp_bulk_quantile(c, 0.5).expect("0.5 is a valid quantile");
    median_cache().write().expect("cache poisoned").insert(key, v);
    v
}

/// Which eigenvalues the median is taken over.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MedianRule {
    /// The `min(p, K)` largest eigenvalues, normalised by the bulk median.
    #[default]
    NonzeroBulk,
    /// All `p` eigenvalues including the zeros of a rank-deficient SCM,
    /// normalised by the median of the full law (atom included).
    AllEigenvalues,
}

/// Threshold an eigenvalue must exceed to count as a spike.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SpikeThreshold {
    /// `σ̂²`.
    #[default]
    NoiseFloor,
    /// Upper bulk edge `σ̂²(1 + √(p/K))²`.
    BulkEdge,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct NoiseOptions {
    pub median: MedianRule,
    pub threshold: SpikeThreshold,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NoiseEstimate {
    pub sigma2_hat: f64,
    pub r_hat: usize,
    /// Eigenvalues of `S`, descending, negatives from rounding clipped to 0.
    pub spectrum: Vec<f64>,
}

pub fn estimate_noise(s: &HermitianMatrix, k: usize) -> Result<NoiseEstimate> {
    estimate_noise_with(s, k, NoiseOptions::default())
}

pub fn estimate_noise_with(s: &HermitianMatrix, k: usize, opts: NoiseOptions) -> Result<NoiseEstimate> {
    let mut spectrum = s.eigenvalues();
    spectrum.reverse();
    for v in spectrum.iter_mut() {
        *v = v.max(0.0);
    }
    estimate_noise_from_spectrum(spectrum, k, opts)
}

/// As [`estimate_noise_with`] for a precomputed descending spectrum.
pub fn estimate_noise_from_spectrum(
    spectrum: Vec<f64>,
    k: usize,
    opts: NoiseOptions,
) -> Result<NoiseEstimate> {
    let p = spectrum.len();
    let ratio = MpRatio::from_dims(p, k)?;
    if spectrum.first().map_or(true, |&top| top <= 0.0) {
        return Err(Error::DegenerateSpectrum("sample covariance is zero".into()));
    }

    let (lambda_med, zeta_med) = match opts.median {
        MedianRule::NonzeroBulk => (median(&spectrum[..p.min(k)]), mp_median(ratio)),
        MedianRule::AllEigenvalues => {
            let atom = ratio.atom_mass();
            if atom >= 0.5 {
                return Err(Error::DegenerateSpectrum(format!(
                    "atom at zero carries {atom:.3} of the MP mass; the full median is zero"
                )));
            }
            let q = (0.5 - atom) / (1.0 - atom);
            (median(&spectrum), mp_bulk_quantile(ratio, q)?)
        }
    };
    if !(lambda_med > 0.0) {
        return Err(Error::DegenerateSpectrum("median eigenvalue is zero".into()));
    }

    let sigma2_hat = lambda_med / zeta_med;
    let threshold = match opts.threshold {
        SpikeThreshold::NoiseFloor => sigma2_hat,
        SpikeThreshold::BulkEdge => sigma2_hat * ratio.support().1,
    };
    let r_hat = spectrum.iter().filter(|&&l| l > threshold).count();
    Ok(NoiseEstimate {
        sigma2_hat,
        r_hat,
        spectrum,
    })
}

/// Median of a descending slice.
fn median(desc: &[f64]) -> f64 {
    let n = desc.len();
    if n % 2 == 1 {
        desc[n / 2]
    } else {
        0.5 * (desc[n / 2 - 1] + desc[n / 2])
    }
}
