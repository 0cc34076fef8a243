//! Normalized SCNR over a Doppler–azimuth grid, Monte-Carlo sweeps and the
//! empirical positive-definiteness and bandsize checks.

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::baselines::{band_taper, diagonal_loading, spiked_shrinkage};
use crate::bcd::{estimate_banded_spiked, SolverConfig};
use crate::error::{Error, Result};
use crate::hermitian::{HermitianMatrix, C64};
use crate::model::{band_profile, sample_gaussian, scm};
use crate::noise::estimate_noise;

/// Eigenvalues of `Σ̂` below this fraction of `λ_max(Σ̂)` are raised to it
/// before inversion.
pub const INVERSE_FLOOR: f64 = 1e-10;

/// Default relative threshold for [`band_recovery`].
pub const BAND_REL_TOL: f64 = 1e-8;

/// Relative slack of [`min_eig_check`].
pub const MIN_EIG_SLACK: f64 = 1e-8;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SteeringGrid {
    /// Normalized Doppler frequencies in `[−0.5, 0.5]`.
    pub doppler: Vec<f64>,
    /// Azimuths in degrees, `[−180, 180]`.
    pub azimuth: Vec<f64>,
    pub q: usize,
    pub n_pulses: usize,
}

impl SteeringGrid {
    /// 21 Doppler bins in steps of 0.05 and 21 azimuths in steps of 18°,
    /// both endpoints included.
    pub fn standard(q: usize, n_pulses: usize) -> Result<Self> {
        let grid = Self {
            doppler: (0..21).map(|i| -0.5 + 0.05 * i as f64).collect(),
            azimuth: (0..21).map(|i| -180.0 + 18.0 * i as f64).collect(),
            q,
            n_pulses,
        };
        grid.validate()?;
        Ok(grid)
    }

    pub fn p(&self) -> usize {
        self.q * self.n_pulses
    }

    pub fn len(&self) -> usize {
        self.doppler.len() * self.azimuth.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn validate(&self) -> Result<()> {
        if self.q == 0 || self.n_pulses == 0 {
            return Err(Error::Config("q and n_pulses must be positive".into()));
        }
        if self.is_empty() {
            return Err(Error::Config("steering grid is empty".into()));
        }
        let eps = 1e-12;
        if let Some(fd) = self.doppler.iter().find(|fd| !(fd.abs() <= 0.5 + eps)) {
            return Err(Error::Config(format!("doppler {fd} outside [-0.5, 0.5]")));
        }
        if let Some(th) = self.azimuth.iter().find(|th| !(th.abs() <= 180.0 + eps)) {
            return Err(Error::Config(format!("azimuth {th} outside [-180, 180]")));
        }
        Ok(())
    }

    /// Steering vectors as columns, Doppler-major.
    pub fn steering_matrix(&self) -> DMatrix<C64> {
        let mut y = DMatrix::zeros(self.p(), self.len());
        let mut col = 0;
        for &fd in &self.doppler {
            for &th in &self.azimuth {
                y.set_column(col, &steering_vector(fd, th, self.q, self.n_pulses));
                col += 1;
            }
        }
        y
    }
}

/// `a(θ) ⊗ b(f_d)`, unit norm, with half-wavelength element spacing.
pub fn steering_vector(fd: f64, theta_deg: f64, q: usize, n_pulses: usize) -> DVector<C64> {
    use std::f64::consts::PI;
    let spatial = 0.5 * theta_deg.to_radians().sin();
    let norm = 1.0 / ((q * n_pulses) as f64).sqrt();
    DVector::from_fn(q * n_pulses, |i, _| {
        let (k, n) = (i / n_pulses, i % n_pulses);
        C64::from_polar(norm, 2.0 * PI * (spatial * k as f64 + fd * n as f64))
    })
}

/// `Σ̂⁻¹` through the eigendecomposition, with eigenvalues floored at
/// `INVERSE_FLOOR·λ_max`. The flag reports whether the floor was hit.
pub fn regularized_inverse(est: &HermitianMatrix) -> Result<(DMatrix<C64>, bool)> {
    let eig = est.eigh();
    let lmax = eig.values.iter().fold(0.0f64, |a, &b| a.max(b));
    if !(lmax > 0.0) {
        return Err(Error::Domain("estimate has no positive eigenvalue".into()));
    }
    let floor = INVERSE_FLOOR * lmax;
    let regularized = eig.values.iter().any(|&l| l < floor);
    let inv: Vec<f64> = eig.values.iter().map(|&l| 1.0 / l.max(floor)).collect();
    Ok((HermitianMatrix::from_eigen(&inv, &eig.vectors).into_inner(), regularized))
}

/// `(yᴴΣ̂⁻¹y)² / [(yᴴΣ⁻¹y)(yᴴΣ̂⁻¹ΣΣ̂⁻¹y)]`.
pub fn normalized_scnr(truth: &HermitianMatrix, est: &HermitianMatrix, y: &DVector<C64>) -> Result<f64> {
    if y.norm() == 0.0 {
        return Err(Error::Domain("steering vector is zero".into()));
    }
    let eval = ScnrEvaluator::with_steering(truth, DMatrix::from_columns(&[y.clone()]))?;
    Ok(eval.evaluate(est)?.0[0])
}

/// Precomputes everything about the truth and the grid so each estimate
/// costs one eigendecomposition and a few products.
#[derive(Clone, Debug)]
pub struct ScnrEvaluator {
    truth: HermitianMatrix,
    steering: DMatrix<C64>,
    /// `yᴴΣ⁻¹y` per column.
    optimal: Vec<f64>,
}

impl ScnrEvaluator {
    pub fn new(truth: &HermitianMatrix, grid: &SteeringGrid) -> Result<Self> {
        grid.validate()?;
        if grid.p() != truth.dim() {
            return Err(Error::Dimension {
                expected: truth.dim(),
                actual: grid.p(),
            });
        }
        Self::with_steering(truth, grid.steering_matrix())
    }

    pub fn with_steering(truth: &HermitianMatrix, steering: DMatrix<C64>) -> Result<Self> {
        if steering.nrows() != truth.dim() {
            return Err(Error::Dimension {
                expected: truth.dim(),
                actual: steering.nrows(),
            });
        }
        let chol = nalgebra::Cholesky::new(truth.matrix().clone())
            .ok_or_else(|| Error::Domain("true covariance is not positive definite".into()))?;
        let solved = chol.solve(&steering);
        let optimal = (0..steering.ncols())
            .map(|j| steering.column(j).dotc(&solved.column(j)).re)
            .collect();
        Ok(Self {
            truth: truth.clone(),
            steering,
            optimal,
        })
    }

    pub fn truth(&self) -> &HermitianMatrix {
        &self.truth
    }

    /// Normalized SCNR at every steering vector, and whether the inverse
    /// of `est` had to be regularised.
    pub fn evaluate(&self, est: &HermitianMatrix) -> Result<(Vec<f64>, bool)> {
        if est.dim() != self.truth.dim() {
            return Err(Error::Dimension {
                expected: self.truth.dim(),
                actual: est.dim(),
            });
        }
        let (inv, regularized) = regularized_inverse(est)?;
        let u = &inv * &self.steering;
        let su = self.truth.matrix() * &u;
        let values = (0..self.steering.ncols())
            .map(|j| {
                let num = self.steering.column(j).dotc(&u.column(j)).re;
                let den = self.optimal[j] * u.column(j).dotc(&su.column(j)).re;
                num * num / den
            })
            .collect();
        Ok((values, regularized))
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct ScnrReport {
    pub method: String,
    pub k: usize,
    pub seed: u64,
    pub mu: Option<f64>,
    /// Doppler-major, matching [`SteeringGrid::steering_matrix`].
    pub values: Vec<f64>,
    pub mean: f64,
    pub regularized_inverse: bool,
}

impl ScnrReport {
    pub fn new(method: String, k: usize, seed: u64, mu: Option<f64>, values: Vec<f64>, regularized: bool) -> Self {
        let mean = values.iter().sum::<f64>() / values.len() as f64;
        Self {
            method,
            k,
            seed,
            mu,
            values,
            mean,
            regularized_inverse: regularized,
        }
    }
}

/// Largest offset whose band norm exceeds `rel_tol` times the largest band
/// norm; 0 for a diagonal matrix.
///
/// Only off-diagonal entries enter, so a diagonal shift by `σ̂²` does not
/// change the answer.
pub fn band_recovery(est: &HermitianMatrix, rel_tol: f64) -> usize {
    let profile = band_profile(est);
    let top = profile.iter().fold(0.0f64, |a, &b| a.max(b));
    if top == 0.0 {
        return 0;
    }
    profile
        .iter()
        .rposition(|&b| b > rel_tol * top)
        .map_or(0, |i| i + 1)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct MinEigCheck {
    pub lambda_min: f64,
    pub passes: bool,
}

/// `λ_min(est) ≥ σ̂² − MIN_EIG_SLACK·‖est‖_op`.
pub fn min_eig_check(est: &HermitianMatrix, sigma2_hat: f64) -> MinEigCheck {
    let eig = est.eigenvalues();
    let lambda_min = eig[0];
    let op = eig[0].abs().max(eig[eig.len() - 1].abs());
    MinEigCheck {
        lambda_min,
        passes: lambda_min >= sigma2_hat - MIN_EIG_SLACK * op,
    }
}

/// Regularisation level for the banded+spiked estimator.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MuRule {
    /// `3√(log p / K)`.
    #[default]
    Default,
    Fixed(f64),
}

impl MuRule {
    pub fn mu(self, p: usize, k: usize) -> f64 {
        match self {
            MuRule::Default => SolverConfig::default_mu(p, k),
            MuRule::Fixed(mu) => mu,
        }
    }
}

impl FromStr for MuRule {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let t = s.trim();
        if t.eq_ignore_ascii_case("default") || t.replace(' ', "") == "3*sqrt(log(p)/K)" {
            return Ok(MuRule::Default);
        }
        t.parse::<f64>()
            .ok()
            .filter(|mu| mu.is_finite() && *mu >= 0.0)
            .map(MuRule::Fixed)
            .ok_or_else(|| Error::Config(format!("invalid mu rule '{s}'")))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum Method {
    BandedSpiked { mu: MuRule },
    /// `None` loads with `σ̂²`.
    DiagonalLoading { delta: Option<f64> },
    BandTaper { taper_l: usize },
    SpikedShrinkage,
    /// `Σ̂ = Σ*`.
    Truth,
    /// Raw SCM.
    Scm,
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Method::BandedSpiked { .. } => f.write_str("banded-spiked"),
            Method::DiagonalLoading { .. } => f.write_str("dl"),
            Method::BandTaper { taper_l } => write!(f, "band-taper-{taper_l}"),
            Method::SpikedShrinkage => f.write_str("spiked-shrinkage"),
            Method::Truth => f.write_str("truth"),
            Method::Scm => f.write_str("scm"),
        }
    }
}

impl FromStr for Method {
    type Err = Error;

    /// Names as printed by `Display`; `band-taper` alone is not accepted
    /// since the bandsize is part of the name.
    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "banded-spiked" => Method::BandedSpiked { mu: MuRule::Default },
            "dl" => Method::DiagonalLoading { delta: None },
            "spiked-shrinkage" => Method::SpikedShrinkage,
            "truth" => Method::Truth,
            "scm" => Method::Scm,
            _ => match s.strip_prefix("band-taper-").map(str::parse) {
                Some(Ok(taper_l)) => Method::BandTaper { taper_l },
                _ => return Err(Error::Config(format!("unknown method '{s}'"))),
            },
        })
    }
}

/// One estimator output with the bookkeeping the sweep table reports.
#[derive(Clone, Debug)]
pub struct MethodOutput {
    pub estimate: HermitianMatrix,
    pub mu: Option<f64>,
    pub converged: bool,
    pub sweeps: usize,
    pub duality_gap: Option<f64>,
}

/// Runs `method` on the SCM `s` of `k` samples with noise estimate `σ̂²`.
pub fn run_method(
    method: Method,
    s: &HermitianMatrix,
    k: usize,
    noise: &crate::noise::NoiseEstimate,
    truth: Option<&HermitianMatrix>,
) -> Result<MethodOutput> {
    let plain = |estimate| MethodOutput {
        estimate,
        mu: None,
        converged: true,
        sweeps: 0,
        duality_gap: None,
    };
    Ok(match method {
        Method::BandedSpiked { mu } => {
            let mu = mu.mu(s.dim(), k);
            let fit = estimate_banded_spiked(s, noise.sigma2_hat, &SolverConfig::new(mu))?;
            MethodOutput {
                estimate: fit.sigma_hat,
                mu: Some(mu),
                converged: fit.diagnostics.converged,
                sweeps: fit.diagnostics.sweeps,
                duality_gap: Some(fit.diagnostics.duality_gap),
            }
        }
        Method::DiagonalLoading { delta } => plain(diagonal_loading(s, delta.unwrap_or(noise.sigma2_hat))?),
        Method::BandTaper { taper_l } => plain(band_taper(s, taper_l, noise.sigma2_hat)?),
        Method::SpikedShrinkage => plain(spiked_shrinkage(s, noise)?),
        Method::Truth => plain(
            truth
                .ok_or_else(|| Error::Config("method 'truth' needs the true covariance".into()))?
                .clone(),
        ),
        Method::Scm => plain(s.clone()),
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SweepRow {
    pub method: String,
    #[serde(rename = "K")]
    pub k: usize,
    pub trial: usize,
    pub mean_scnr: f64,
    pub lambda_min: f64,
    #[serde(rename = "L_hat")]
    pub l_hat: usize,
    pub sigma2_hat: f64,
    pub converged: bool,
    pub regularized_inverse: bool,
    #[serde(skip)]
    pub error: Option<String>,
}

pub const SWEEP_HEADER: [&str; 9] = [
    "method",
    "K",
    "trial",
    "mean_scnr",
    "lambda_min",
    "L_hat",
    "sigma2_hat",
    "converged",
    "regularized_inverse",
];

#[derive(Clone, Debug)]
pub struct SweepConfig {
    pub methods: Vec<Method>,
    pub k_list: Vec<usize>,
    pub trials: usize,
    pub seed: u64,
}

impl SweepConfig {
    pub fn validate(&self) -> Result<()> {
        if self.methods.is_empty() || self.k_list.is_empty() || self.trials == 0 {
            return Err(Error::Config("sweep needs methods, K values and at least one trial".into()));
        }
        if self.k_list.contains(&0) {
            return Err(Error::Config("K must be positive".into()));
        }
        Ok(())
    }
}

/// Runs every method on every `(K, trial)` draw. Trial `t` draws its samples
/// with seed `seed + t`; all methods in a trial share one SCM. Estimator
/// failures become rows with `error` set and NaN metrics.
///
/// Rows are ordered by method (as listed), `K` (as listed) and trial.
pub fn monte_carlo_sweep(truth: &HermitianMatrix, grid: &SteeringGrid, cfg: &SweepConfig) -> Result<Vec<SweepRow>> {
    cfg.validate()?;
    let evaluator = ScnrEvaluator::new(truth, grid)?;
    let jobs: Vec<(usize, usize)> = (0..cfg.k_list.len())
        .flat_map(|ki| (0..cfg.trials).map(move |t| (ki, t)))
        .collect();
    let mut rows: Vec<(usize, usize, usize, SweepRow)> = jobs
        .par_iter()
        .flat_map_iter(|&(ki, trial)| {
            let k = cfg.k_list[ki];
            let seed = cfg.seed.wrapping_add(trial as u64);
            trial_rows(&evaluator, cfg, k, trial, seed)
                .into_iter()
                .enumerate()
                .map(move |(mi, row)| (mi, ki, trial, row))
        })
        .collect();
    rows.sort_by_key(|&(mi, ki, trial, _)| (mi, ki, trial));
    Ok(rows.into_iter().map(|r| r.3).collect())
}

fn trial_rows(evaluator: &ScnrEvaluator, cfg: &SweepConfig, k: usize, trial: usize, seed: u64) -> Vec<SweepRow> {
    let failed = |method: String, sigma2_hat: f64, e: Error| SweepRow {
        method,
        k,
        trial,
        mean_scnr: f64::NAN,
        lambda_min: f64::NAN,
        l_hat: 0,
        sigma2_hat,
        converged: false,
        regularized_inverse: false,
        error: Some(e.to_string()),
    };
    let truth = evaluator.truth();
    let prepared = sample_gaussian(truth, k, seed)
        .and_then(|x| scm(&x))
        .and_then(|s| estimate_noise(&s, k).map(|n| (s, n)));
    let (s, noise) = match prepared {
        Ok(v) => v,
        Err(e) => {
            let msg = e.to_string();
            return cfg
                .methods
                .iter()
                .map(|m| failed(m.to_string(), f64::NAN, Error::Numeric(msg.clone())))
                .collect();
        }
    };
    cfg.methods
        .iter()
        .map(|&method| {
            let out = run_method(method, &s, k, &noise, Some(truth))
                .and_then(|out| evaluator.evaluate(&out.estimate).map(|scnr| (out, scnr)));
            match out {
                Ok((out, (values, regularized))) => SweepRow {
                    method: method.to_string(),
                    k,
                    trial,
                    mean_scnr: values.iter().sum::<f64>() / values.len() as f64,
                    lambda_min: out.estimate.min_eigenvalue(),
                    l_hat: band_recovery(&out.estimate, BAND_REL_TOL),
                    sigma2_hat: noise.sigma2_hat,
                    converged: out.converged,
                    regularized_inverse: regularized,
                    error: None,
                },
                Err(e) => failed(method.to_string(), noise.sigma2_hat, e),
            }
        })
        .collect()
}

/// Mean and sample standard deviation of `mean_scnr` per `(method, K)`,
/// over successful rows, in first-appearance order.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SweepAggregate {
    pub method: String,
    #[serde(rename = "K")]
    pub k: usize,
    pub n: usize,
    pub mean: f64,
    pub std: f64,
}

impl SweepAggregate {
    /// `std / √n`.
    pub fn std_error(&self) -> f64 {
        self.std / (self.n as f64).sqrt()
    }
}

pub fn aggregate(rows: &[SweepRow]) -> Vec<SweepAggregate> {
    let mut keys: Vec<(String, usize)> = Vec::new();
    for r in rows {
        if !keys.iter().any(|(m, k)| *m == r.method && *k == r.k) {
            keys.push((r.method.clone(), r.k));
        }
    }
    keys.into_iter()
        .map(|(method, k)| {
            let xs: Vec<f64> = rows
                .iter()
                .filter(|r| r.method == method && r.k == k && r.error.is_none())
                .map(|r| r.mean_scnr)
                .collect();
            let n = xs.len();
            let mean = xs.iter().sum::<f64>() / n as f64;
            let std = if n > 1 {
                (xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt()
            } else {
                0.0
            };
            SweepAggregate { method, k, n, mean, std }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{make_banded_spiked_truth, GroundTruthScenario};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_pd(p: usize, seed: u64) -> HermitianMatrix {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a = DMatrix::from_fn(p, p, |_, _| C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)));
        HermitianMatrix::from_hermitian_part(&a * a.adjoint()).add_identity(0.1)
    }

    fn random_unit(p: usize, seed: u64) -> DVector<C64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let v = DVector::from_fn(p, |_, _| C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)));
        v.unscale(v.norm())
    }

    #[test]
    fn broadside_zero_doppler_is_flat() {
        let y = steering_vector(0.0, 0.0, 4, 16);
        for z in y.iter() {
            assert!((z - C64::new(0.125, 0.0)).norm() < 1e-15);
        }
    }

    #[test]
    fn steering_vectors_are_unit() {
        let grid = SteeringGrid::standard(4, 16).unwrap();
        let y = grid.steering_matrix();
        assert_eq!(y.ncols(), 441);
        for j in 0..y.ncols() {
            assert!((y.column(j).norm() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn half_spectrum_separation() {
        let b0 = steering_vector(0.0, 0.0, 1, 64);
        let b1 = steering_vector(0.5, 0.0, 1, 64);
        // Direct sum Σ exp(iπn) over an even count.
        assert!(b0.dotc(&b1).norm() <= 1e-12);
    }

    #[test]
    fn grid_endpoints_included() {
        let grid = SteeringGrid::standard(2, 2).unwrap();
        assert!((grid.doppler[0] + 0.5).abs() < 1e-15 && (grid.doppler[20] - 0.5).abs() < 1e-12);
        assert_eq!(grid.azimuth[0], -180.0);
        assert_eq!(grid.azimuth[20], 180.0);
        let mut bad = grid.clone();
        bad.doppler.push(0.6);
        assert!(bad.validate().is_err());
    }

    #[test]
    fn scnr_of_truth_is_one() {
        let truth = random_pd(8, 1);
        for seed in 0..10 {
            let y = random_unit(8, 100 + seed);
            let v = normalized_scnr(&truth, &truth, &y).unwrap();
            assert!((v - 1.0).abs() < 1e-10);
            let v = normalized_scnr(&truth, &truth.scaled(3.7), &y).unwrap();
            assert!((v - 1.0).abs() < 1e-10);
        }
    }

    #[test]
    fn scnr_matches_explicit_inverse_oracle() {
        for seed in 0..10 {
            let truth = random_pd(8, 2 * seed);
            let est = random_pd(8, 2 * seed + 1);
            let y = random_unit(8, 50 + seed);
            let ti = truth.matrix().clone().try_inverse().unwrap();
            let ei = est.matrix().clone().try_inverse().unwrap();
            let a = y.dotc(&(&ei * &y)).re;
            let b = y.dotc(&(&ti * &y)).re;
            let u = &ei * &y;
            let c = u.dotc(&(truth.matrix() * &u)).re;
            let oracle = a * a / (b * c);
            let v = normalized_scnr(&truth, &est, &y).unwrap();
            assert!((v - oracle).abs() < 1e-9 * oracle);
            assert!(v > 0.0 && v <= 1.0 + 1e-9);
        }
    }

    #[test]
    fn scnr_rejects_zero_steering() {
        let truth = random_pd(3, 3);
        assert!(normalized_scnr(&truth, &truth, &DVector::zeros(3)).is_err());
    }

    #[test]
    fn indefinite_estimate_is_flagged() {
        let truth = random_pd(4, 4);
        let est = HermitianMatrix::from_real_diagonal(&[2.0, 1.0, 0.5, -0.3]);
        let eval = ScnrEvaluator::with_steering(&truth, DMatrix::from_columns(&[random_unit(4, 5)])).unwrap();
        let (values, flagged) = eval.evaluate(&est).unwrap();
        assert!(flagged);
        assert!(values[0] > 0.0 && values[0] <= 1.0 + 1e-9);
        let (_, flagged) = eval.evaluate(&truth).unwrap();
        assert!(!flagged);
    }

    #[test]
    fn band_recovery_cases() {
        assert_eq!(band_recovery(&HermitianMatrix::identity(5).scaled(2.0), BAND_REL_TOL), 0);
        let banded = HermitianMatrix::from_upper(10, |j, k| {
            if k - j <= 4 {
                C64::new(1.0 / (1 + k - j) as f64, 0.1)
            } else {
                C64::new(0.0, 0.0)
            }
        });
        assert_eq!(band_recovery(&banded, 0.0), 4);
        assert_eq!(band_recovery(&banded.add_identity(0.7), 0.0), 4);
    }

    #[test]
    fn min_eig_cases() {
        let est = HermitianMatrix::identity(4).scaled(0.5);
        let c = min_eig_check(&est, 0.5);
        assert!(c.passes);
        assert!((c.lambda_min - 0.5).abs() < 1e-15);
        assert!(!min_eig_check(&est.add_identity(-1e-3), 0.5).passes);
    }

    #[test]
    fn method_names_round_trip() {
        for m in ["banded-spiked", "dl", "band-taper-8", "spiked-shrinkage", "truth", "scm"] {
            assert_eq!(m.parse::<Method>().unwrap().to_string(), m);
        }
        assert!("band-taper".parse::<Method>().is_err());
        assert!("tabasco".parse::<Method>().is_err());
        assert_eq!("3*sqrt(log(p)/K)".parse::<MuRule>().unwrap(), MuRule::Default);
        assert_eq!("0.25".parse::<MuRule>().unwrap(), MuRule::Fixed(0.25));
        assert!("-1".parse::<MuRule>().is_err());
    }

    fn small_sweep(methods: Vec<Method>, trials: usize) -> Vec<SweepRow> {
        let scenario = GroundTruthScenario {
            p: 16,
            band_size: 2,
            spike_count: 3,
            sigma2: 1.0,
            spike_gain: 20.0,
            seed: 3,
        };
        let truth = make_banded_spiked_truth(&scenario).unwrap();
        let grid = SteeringGrid::standard(2, 8).unwrap();
        let cfg = SweepConfig {
            methods,
            k_list: vec![8, 24],
            trials,
            seed: 11,
        };
        monte_carlo_sweep(&truth, &grid, &cfg).unwrap()
    }

    #[test]
    fn truth_method_scores_one() {
        let rows = small_sweep(vec![Method::Truth], 1);
        assert_eq!(rows.len(), 2);
        for r in rows {
            assert!((r.mean_scnr - 1.0).abs() < 1e-10);
            assert_eq!(r.l_hat, 2);
        }
    }

    #[test]
    fn sweep_is_deterministic_and_ordered() {
        let methods = vec![
            Method::BandedSpiked { mu: MuRule::Default },
            Method::Scm,
            Method::BandTaper { taper_l: 2 },
        ];
        let a = small_sweep(methods.clone(), 3);
        let b = small_sweep(methods, 3);
        assert_eq!(a.len(), 18);
        assert_eq!(a.len(), b.len());
        for (x, y) in a.iter().zip(&b) {
            assert_eq!(x.method, y.method);
            assert_eq!(x.mean_scnr.to_bits(), y.mean_scnr.to_bits());
        }
        assert_eq!(a[0].method, "banded-spiked");
        assert_eq!((a[0].k, a[0].trial), (8, 0));
        assert_eq!((a[5].k, a[5].trial), (24, 2));
        // Raw SCM is singular for K < p.
        assert!(a[6].regularized_inverse);
        let agg = aggregate(&a);
        assert_eq!(agg.len(), 6);
        assert!(agg.iter().all(|g| g.n == 3 && g.mean > 0.0 && g.mean <= 1.0 + 1e-9));
    }
}
