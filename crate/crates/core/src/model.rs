//! Synthetic banded+spiked ground truth, circular complex Gaussian sampling
//! and the sample covariance matrix.

use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hermitian::{HermitianMatrix, C64};

/// Relative height above `σ²` an eigenvalue of `Σ*` must reach to count as
/// a spike.
pub const SPIKE_MARGIN: f64 = 0.1;

/// Eigenvalues of a PSD input down to `-PSD_TOL·λ_max` are clipped to zero.
pub const PSD_TOL: f64 = 1e-10;

const MAX_TRUTH_ATTEMPTS: u64 = 64;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GroundTruthScenario {
    pub p: usize,
    pub band_size: usize,
    pub spike_count: usize,
    /// Noise power, linear scale.
    pub sigma2: f64,
    /// Largest clutter eigenvalue divided by `sigma2`.
    pub spike_gain: f64,
    pub seed: u64,
}

impl GroundTruthScenario {
    pub fn validate(&self) -> Result<()> {
        let GroundTruthScenario {
            p,
            band_size,
            spike_count,
            sigma2,
            spike_gain,
            ..
        } = *self;
        if p < 2 {
            return Err(Error::Config(format!("dimension p = {p} must be at least 2")));
        }
        if band_size < 1 || band_size >= p {
            return Err(Error::Config(format!(
                "band size {band_size} must lie in [1, {}]",
                p - 1
            )));
        }
        if spike_count >= p {
            return Err(Error::Config(format!(
                "spike count {spike_count} must be below p = {p} so that λ_min(Σ*) = σ²"
            )));
        }
        if !(sigma2.is_finite() && sigma2 > 0.0) {
            return Err(Error::Config(format!("noise power {sigma2} must be positive")));
        }
        if spike_count > 0 && !(spike_gain.is_finite() && spike_gain > 1.0) {
            return Err(Error::Config(format!("spike gain {spike_gain} must exceed 1")));
        }
        Ok(())
    }
}

/// Builds `Σ* = B* + σ²I`.
///
/// `B*` is a sum of `r` rank-one terms `g gᴴ`, each `g` supported on a
/// window of `L + 1` consecutive coordinates, so `B*` is exactly zero beyond
/// offset `L`, has rank `r`, and `λ_min(Σ*) = σ²`. Windows are spread evenly
/// along the diagonal; the clutter spectrum is rescaled so its top
/// eigenvalue is `spike_gain·σ²`.
pub fn make_banded_spiked_truth(cfg: &GroundTruthScenario) -> Result<HermitianMatrix> {
    cfg.validate()?;
    let p = cfg.p;
    let r = cfg.spike_count;
    if r == 0 {
        return Ok(HermitianMatrix::identity(p).scaled(cfg.sigma2));
    }

    let width = cfg.band_size + 1;
    let starts: Vec<usize> = if r + cfg.band_size <= p {
        let span = (p - width) as f64;
        (0..r)
            .map(|k| {
                if r == 1 {
                    (p - width) / 2
                } else {
                    (k as f64 * span / (r - 1) as f64).round() as usize
                }
            })
            .collect()
    } else {
        (0..r).collect()
    };

    for attempt in 0..MAX_TRUTH_ATTEMPTS {
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        rng.set_stream(attempt);
        let factors = draw_window_factors(cfg, &starts, width, &mut rng);
        if let Some(truth) = assemble_truth(cfg, &factors) {
            return Ok(truth);
        }
    }
    Err(Error::Config(format!(
        "could not realise {r} spikes above the {SPIKE_MARGIN} margin with band size {}",
        cfg.band_size
    )))
}

/// Window-supported clutter factors with a geometric norm profile from
/// `spike_gain·σ²` down to `spike_gain^(1/r)·σ²`, assigned to windows in a
/// random order.
fn draw_window_factors(
    cfg: &GroundTruthScenario,
    starts: &[usize],
    width: usize,
    rng: &mut ChaCha8Rng,
) -> DMatrix<C64> {
    let p = cfg.p;
    let r = starts.len();
    let mut powers: Vec<f64> = (0..r)
        .map(|k| cfg.sigma2 * cfg.spike_gain.powf(1.0 - k as f64 / r as f64))
        .collect();
    powers.shuffle(rng);

    let mut g = DMatrix::<C64>::zeros(p, r);
    for (k, (&start, &power)) in starts.iter().zip(&powers).enumerate() {
        let end = (start + width).min(p);
        let mut norm2 = 0.0;
        for j in start..end {
            let z = complex_normal(rng);
            norm2 += z.norm_sqr();
            g[(j, k)] = z;
        }
        let scale = (power / norm2).sqrt();
        for j in start..end {
            g[(j, k)] *= scale;
        }
    }
    g
}

fn assemble_truth(cfg: &GroundTruthScenario, g: &DMatrix<C64>) -> Option<HermitianMatrix> {
    let p = cfg.p;
    // Nonzero eigenvalues of G Gᴴ are the eigenvalues of Gᴴ G.
    let gram = HermitianMatrix::from_hermitian_part(g.adjoint() * g);
    let spectrum = gram.eigenvalues();
    let top = *spectrum.last()?;
    let alpha = cfg.spike_gain * cfg.sigma2 / top;
    if spectrum[0] * alpha <= SPIKE_MARGIN * cfg.sigma2 {
        return None;
    }

    let band = cfg.band_size;
    let g = g.scale(alpha.sqrt());
    let truth = HermitianMatrix::from_upper(p, |j, k| {
        if k - j > band {
            return C64::new(0.0, 0.0);
        }
        let b: C64 = (0..g.ncols()).map(|c| g[(j, c)] * g[(k, c)].conj()).sum();
        if j == k {
            b + cfg.sigma2
        } else {
            b
        }
    });
    Some(truth)
}

/// Standard circular complex normal: real and imaginary parts `N(0, 1/2)`.
pub(crate) fn complex_normal<R: rand::Rng + ?Sized>(rng: &mut R) -> C64 {
    let re: f64 = StandardNormal.sample(rng);
    let im: f64 = StandardNormal.sample(rng);
    C64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
}

/// `K` draws from `CN(0, Σ)`, stored as the columns of `samples`.
#[derive(Clone, Debug, PartialEq)]
pub struct SampleSet {
    pub seed: u64,
    pub samples: DMatrix<C64>,
}

impl SampleSet {
    pub fn p(&self) -> usize {
        self.samples.nrows()
    }

    pub fn k(&self) -> usize {
        self.samples.ncols()
    }

    pub fn from_vectors(vectors: &[DVector<C64>], seed: u64) -> Result<Self> {
        let p = vectors.first().map(|v| v.len()).unwrap_or(0);
        if let Some(bad) = vectors.iter().find(|v| v.len() != p) {
            return Err(Error::Dimension {
                expected: p,
                actual: bad.len(),
            });
        }
        Ok(Self {
            seed,
            samples: DMatrix::from_columns(vectors),
        })
    }
}

/// Draws `x = F z` with `F Fᴴ = Σ` from the eigen-decomposition of `Σ`
/// (negative eigenvalues within tolerance clipped to zero).
pub fn sample_gaussian(sigma: &HermitianMatrix, k: usize, seed: u64) -> Result<SampleSet> {
    if k == 0 {
        return Err(Error::Domain("sample count K must be at least 1".into()));
    }
    let factor = psd_factor(sigma)?;
    let p = sigma.dim();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let z = DMatrix::from_fn(p, k, |_, _| complex_normal(&mut rng));
    Ok(SampleSet {
        seed,
        samples: factor * z,
    })
}

fn psd_factor(sigma: &HermitianMatrix) -> Result<DMatrix<C64>> {
    let eig = sigma.eigh();
    let lmax = eig.values.iter().fold(0.0f64, |a, &b| a.max(b.abs()));
    if eig.values[0] < -PSD_TOL * lmax {
        return Err(Error::Domain(format!(
            "covariance is indefinite: λ_min = {:.3e}, λ_max = {:.3e}",
            eig.values[0], lmax
        )));
    }
    let mut f = eig.vectors;
    for (i, &v) in eig.values.iter().enumerate() {
        f.column_mut(i).scale_mut(v.max(0.0).sqrt());
    }
    Ok(f)
}

/// `S = (1/K) Σ xᵢ xᵢᴴ`.
pub fn scm(samples: &SampleSet) -> Result<HermitianMatrix> {
    let k = samples.k();
    if k == 0 || samples.p() == 0 {
        return Err(Error::Domain("sample set is empty".into()));
    }
    let x = &samples.samples;
    Ok(HermitianMatrix::from_hermitian_part(
        (x * x.adjoint()).unscale(k as f64),
    ))
}

/// Entry `d - 1` is the ℓ2 norm of all entries at offset `|j − k| = d`,
/// counting both triangles.
pub fn band_profile(m: &HermitianMatrix) -> Vec<f64> {
    let p = m.dim();
    (1..p)
        .map(|d| {
            (0..p - d)
                .map(|j| m.get(j, j + d).norm_sqr() + m.get(j + d, j).norm_sqr())
                .sum::<f64>()
                .sqrt()
        })
        .collect()
}

/// Converts a power in dB (10·log10) to linear scale.
pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

pub fn linear_to_db(x: f64) -> f64 {
    10.0 * x.log10()
}
