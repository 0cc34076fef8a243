//! Hierarchical group-lasso banding by block coordinate descent on the dual.
//!
//! Given the sample covariance `S` and a noise estimate `σ̂²`, the estimate
//! solves
//!
//! ```text
//! Σ̂ = argmin ½‖Σ − (S + σ̂²I)‖_F² + μ Σ_ℓ ‖(W⁽ℓ⁾ ⊙ Σ)_{g_ℓ}‖₂
//! ```
//!
//! Group `s_m` holds the entries at offset `|j − k| = p − m`, so `s_1` is the
//! two far corners and `s_{p−1}` is the first off-diagonal. Block `ℓ` covers
//! `g_ℓ = s_1 ∪ … ∪ s_ℓ`, the `ℓ` outermost subdiagonals, with weights
//! `w_{ℓm} = √(2ℓ)/(ℓ − m + 1)` that grow towards the corner. Outer
//! subdiagonals are therefore zeroed before inner ones and the estimate is
//! exactly banded.
//!
//! The dual variables `A⁽ℓ⁾` live on `g_ℓ` in a unit ball. Each block update
//! is a projection onto an ellipsoid, solved through the scalar root `ν̂_ℓ`
//! of [`h_ell`]. The diagonal is never penalised, so `σ̂²` only shifts the
//! final estimate.
//!
//! Matrices supported off the diagonal are stored as upper-triangle
//! subdiagonals: `bands[d − 1][j] = M[j, j + d]`.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::hermitian::{HermitianMatrix, C64};
use crate::model::band_profile;

/// Slack allowed on `‖A⁽ℓ⁾_{g_ℓ}‖₂ ≤ 1`.
pub const FEASIBILITY_TOL: f64 = 1e-9;

const MAX_BISECTION_STEPS: usize = 400;

/// Index set `s_m = {(j, k) : |j − k| = p − m}`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct GroupIndexSet {
    pub p: usize,
    pub m: usize,
}

impl GroupIndexSet {
    pub fn new(p: usize, m: usize) -> Result<Self> {
        if m == 0 || m >= p {
            return Err(Error::Domain(format!("group index {m} outside [1, {}]", p.saturating_sub(1))));
        }
        Ok(Self { p, m })
    }

    pub fn offset(&self) -> usize {
        self.p - self.m
    }

    /// All `2m` pairs, upper triangle first.
    pub fn pairs(&self) -> Vec<(usize, usize)> {
        let d = self.offset();
        let upper = (0..self.m).map(move |j| (j, j + d));
        let lower = (0..self.m).map(move |j| (j + d, j));
        upper.chain(lower).collect()
    }
}

/// Weights `w[ℓ][m] = √(2ℓ)/(ℓ − m + 1)` for `1 ≤ m ≤ ℓ ≤ p − 1`.
#[derive(Clone, Debug, PartialEq)]
pub struct WeightSchedule {
    p: usize,
    rows: Vec<Vec<f64>>,
}

impl WeightSchedule {
    pub fn new(p: usize) -> Result<Self> {
        if p < 2 {
            return Err(Error::Domain(format!("weights need p >= 2, got {p}")));
        }
        let rows = (1..p)
            .map(|ell| {
                let top = (2.0 * ell as f64).sqrt();
                (1..=ell).map(|m| top / (ell - m + 1) as f64).collect()
            })
            .collect();
        Ok(Self { p, rows })
    }

    pub fn p(&self) -> usize {
        self.p
    }

    /// `w_{ℓm}` with 1-based indices.
    pub fn get(&self, ell: usize, m: usize) -> f64 {
        self.rows[ell - 1][m - 1]
    }

    /// `w_{ℓ1}, …, w_{ℓℓ}`.
    pub fn row(&self, ell: usize) -> &[f64] {
        &self.rows[ell - 1]
    }

    /// Dense `W⁽ℓ⁾` with `W_{s_m} = w_{ℓm}` for `m ≤ ℓ` and zero elsewhere.
    pub fn weight_matrix(&self, ell: usize) -> nalgebra::DMatrix<f64> {
        let p = self.p;
        nalgebra::DMatrix::from_fn(p, p, |j, k| {
            let d = j.abs_diff(k);
            if d == 0 || d < p - ell {
                0.0
            } else {
                self.get(ell, p - d)
            }
        })
    }
}

/// Squared group norms `‖M_{s_m}‖²`, indexed by `m − 1`.
fn group_energies(m: &HermitianMatrix) -> Vec<f64> {
    let mut prof = band_profile(m);
    prof.reverse();
    prof.into_iter().map(|x| x * x).collect()
}

/// Hierarchical penalty `Σ_ℓ √(Σ_{m≤ℓ} w_{ℓm}² ‖M_{s_m}‖²)`.
pub fn penalty_value(m: &HermitianMatrix) -> f64 {
    if m.dim() < 2 {
        return 0.0;
    }
    let w = WeightSchedule::new(m.dim()).expect("p >= 2");
    penalty_value_with(m, &w)
}

pub fn penalty_value_with(m: &HermitianMatrix, w: &WeightSchedule) -> f64 {
    let energies = group_energies(m);
    (1..m.dim())
        .map(|ell| {
            w.row(ell)
                .iter()
                .zip(&energies)
                .map(|(wm, e)| wm * wm * e)
                .sum::<f64>()
                .sqrt()
        })
        .sum()
}

/// The same penalty as `Σ_ℓ ‖(W⁽ℓ⁾ ⊙ M)_{g_ℓ}‖₂` using dense weight matrices.
pub fn penalty_value_hadamard(m: &HermitianMatrix) -> f64 {
    let p = m.dim();
    if p < 2 {
        return 0.0;
    }
    let w = WeightSchedule::new(p).expect("p >= 2");
    (1..p)
        .map(|ell| {
            let wm = w.weight_matrix(ell);
            m.matrix()
                .iter()
                .zip(wm.iter())
                .map(|(z, wt)| (z * *wt).norm_sqr())
                .sum::<f64>()
                .sqrt()
        })
        .sum()
}

/// `h_ℓ(ν) = Σ_{m≤ℓ} w_{ℓm}²/(w_{ℓm}² + ν)² ‖R_{s_m}‖² − μ²`.
pub fn h_ell(nu: f64, ell: usize, r: &HermitianMatrix, mu: f64, w: &WeightSchedule) -> f64 {
    let energies = group_energies(r);
    h_from_energies(nu, w.row(ell), &energies[..ell], mu)
}

fn h_from_energies(nu: f64, weights: &[f64], energies: &[f64], mu: f64) -> f64 {
    weights
        .iter()
        .zip(energies)
        .map(|(w, e)| {
            let w2 = w * w;
            let t = w2 + nu;
            w2 / (t * t) * e
        })
        .sum::<f64>()
        - mu * mu
}

/// Regularisation and stopping rules for [`estimate_banded_spiked`].
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SolverConfig {
    /// `μ ≥ 0`; `μ = 0` switches the penalty off.
    pub mu: f64,
    pub max_sweeps: usize,
    /// Stop when a sweep moves `μ Σ W⊙A` by at most this fraction of `‖S‖_F`.
    pub sweep_tol: f64,
    /// Residual accepted for `h_ℓ(ν̂) = 0`.
    pub root_tol: f64,
}

impl SolverConfig {
    pub fn new(mu: f64) -> Self {
        Self {
            mu,
            max_sweeps: 500,
            sweep_tol: 1e-8,
            root_tol: 1e-13 * mu * mu,
        }
    }

    /// `μ = 3√(log p / K)`.
    pub fn default_mu(p: usize, k: usize) -> f64 {
        3.0 * ((p as f64).ln() / k as f64).sqrt()
    }

    pub fn for_dims(p: usize, k: usize) -> Self {
        Self::new(Self::default_mu(p, k))
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.mu.is_finite() && self.mu >= 0.0) {
            return Err(Error::Config(format!("mu = {} must be non-negative", self.mu)));
        }
        if self.max_sweeps == 0 {
            return Err(Error::Config("max_sweeps must be positive".into()));
        }
        if !(self.sweep_tol > 0.0) || !(self.root_tol > 0.0 || self.mu == 0.0) {
            return Err(Error::Config("tolerances must be positive".into()));
        }
        Ok(())
    }
}

/// Solves `h_ℓ(ν) = 0` for `ν ≥ 0`.
///
/// Returns 0 when `h_ℓ(0) ≤ 0`, i.e. the unconstrained block update already
/// lies in the ball.
pub fn solve_nu(
    ell: usize,
    r: &HermitianMatrix,
    mu: f64,
    w: &WeightSchedule,
    cfg: &SolverConfig,
) -> Result<f64> {
    let energies = group_energies(r);
    Ok(solve_nu_energies(w.row(ell), &energies[..ell], mu, cfg.root_tol)?.nu)
}

#[derive(Clone, Copy, Debug)]
struct RootSolution {
    nu: f64,
    /// `h_ℓ(ν̂)`; for the `ν̂ = 0` branch this is `h_ℓ(0) ≤ 0`.
    residual: f64,
}

fn solve_nu_energies(weights: &[f64], energies: &[f64], mu: f64, root_tol: f64) -> Result<RootSolution> {
    if energies.iter().any(|e| !e.is_finite()) {
        return Err(Error::Numeric("residual has non-finite entries".into()));
    }
    let h = |nu: f64| h_from_energies(nu, weights, energies, mu);
    let h0 = h(0.0);
    if h0 <= 0.0 {
        return Ok(RootSolution { nu: 0.0, residual: h0 });
    }

    if weights.len() == 1 {
        let w = weights[0];
        let nu = w * energies[0].sqrt() / mu - w * w;
        let residual = h(nu);
        if nu >= 0.0 && residual.abs() <= root_tol {
            return Ok(RootSolution { nu, residual });
        }
    }

    // h(ν) ≤ max w² Σ‖R‖² / ν², which is ≤ 0 at ν_hi.
    let w_max = weights.iter().fold(0.0f64, |a, &b| a.max(b));
    let total: f64 = energies.iter().sum();
    let (mut lo, mut hi) = (0.0, w_max * total.sqrt() / mu);
    let mut best = RootSolution { nu: hi, residual: h(hi) };
    for _ in 0..MAX_BISECTION_STEPS {
        let mid = 0.5 * (lo + hi);
        let hm = h(mid);
        if hm.abs() < best.residual.abs() {
            best = RootSolution { nu: mid, residual: hm };
        }
        if hm.abs() <= root_tol || mid <= lo || mid >= hi {
            break;
        }
        if hm > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(best)
}

/// Dual variables `A⁽ℓ⁾`, one block per `ℓ ∈ [1, p − 1]`.
#[derive(Clone, Debug, PartialEq)]
pub struct DualState {
    p: usize,
    blocks: Vec<DualBlock>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct DualBlock {
    /// `coeffs[m − 1]` is the upper triangle of `A⁽ℓ⁾` on offset `p − m`
    /// (length `m`).
    pub coeffs: Vec<Vec<C64>>,
    /// Last projection multiplier `ν̂_ℓ`.
    pub nu: f64,
}

impl DualState {
    pub fn zeros(p: usize) -> Self {
        let blocks = (1..p)
            .map(|ell| DualBlock {
                coeffs: (1..=ell).map(|m| vec![C64::new(0.0, 0.0); m]).collect(),
                nu: 0.0,
            })
            .collect();
        Self { p, blocks }
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn block(&self, ell: usize) -> &DualBlock {
        &self.blocks[ell - 1]
    }

    pub fn block_mut(&mut self, ell: usize) -> &mut DualBlock {
        &mut self.blocks[ell - 1]
    }

    /// `‖A⁽ℓ⁾_{g_ℓ}‖₂` over both triangles.
    pub fn block_norm(&self, ell: usize) -> f64 {
        (2.0 * self.blocks[ell - 1]
            .coeffs
            .iter()
            .flatten()
            .map(|z| z.norm_sqr())
            .sum::<f64>())
        .sqrt()
    }

    pub fn nu(&self) -> Vec<f64> {
        self.blocks.iter().map(|b| b.nu).collect()
    }

    /// Dense `A⁽ℓ⁾`.
    pub fn block_matrix(&self, ell: usize) -> HermitianMatrix {
        let p = self.p;
        let block = &self.blocks[ell - 1];
        HermitianMatrix::from_upper(p, |j, k| {
            let d = k - j;
            if d == 0 || d < p - ell {
                C64::new(0.0, 0.0)
            } else {
                block.coeffs[p - d - 1][j]
            }
        })
    }

    /// `Σ_ℓ W⁽ℓ⁾ ⊙ A⁽ℓ⁾`.
    pub fn weighted_sum(&self, w: &WeightSchedule) -> HermitianMatrix {
        let bands = self.weighted_bands(w, 1.0);
        from_bands(&vec![0.0; self.p], &bands)
    }

    fn weighted_bands(&self, w: &WeightSchedule, scale: f64) -> Vec<Vec<C64>> {
        let p = self.p;
        let mut bands: Vec<Vec<C64>> = (1..p).map(|d| vec![C64::new(0.0, 0.0); p - d]).collect();
        for (i, block) in self.blocks.iter().enumerate() {
            let ell = i + 1;
            for (mi, coeffs) in block.coeffs.iter().enumerate() {
                let factor = scale * w.get(ell, mi + 1);
                let band = &mut bands[p - mi - 2];
                for (z, a) in band.iter_mut().zip(coeffs) {
                    *z += a * factor;
                }
            }
        }
        bands
    }

    pub fn check_feasible(&self) -> Result<()> {
        for ell in 1..self.p {
            let norm = self.block_norm(ell);
            if !(norm <= 1.0 + FEASIBILITY_TOL) {
                return Err(Error::Infeasible { block: ell, norm });
            }
        }
        Ok(())
    }
}

fn upper_bands(m: &HermitianMatrix) -> Vec<Vec<C64>> {
    let p = m.dim();
    (1..p).map(|d| (0..p - d).map(|j| m.get(j, j + d)).collect()).collect()
}

fn from_bands(diag: &[f64], bands: &[Vec<C64>]) -> HermitianMatrix {
    HermitianMatrix::from_upper(diag.len(), |j, k| {
        if j == k {
            C64::new(diag[j], 0.0)
        } else {
            bands[k - j - 1][j]
        }
    })
}

/// `½‖Σ − (S + σ̂²I)‖_F² + μ·penalty(Σ)`.
pub fn primal_objective(sigma: &HermitianMatrix, s: &HermitianMatrix, sigma2_hat: f64, mu: f64) -> f64 {
    let fit = sigma.sub(&s.add_identity(sigma2_hat)).frobenius_norm();
    0.5 * fit * fit + mu * penalty_value(sigma)
}

/// `½‖S + σ̂²I − μ Σ_ℓ W⁽ℓ⁾ ⊙ A⁽ℓ⁾‖_F²` for a feasible `A`.
pub fn dual_objective(a: &DualState, s: &HermitianMatrix, sigma2_hat: f64, mu: f64) -> Result<f64> {
    if a.p() != s.dim() {
        return Err(Error::Dimension {
            expected: s.dim(),
            actual: a.p(),
        });
    }
    a.check_feasible()?;
    if s.dim() < 2 {
        let y = s.add_identity(sigma2_hat).frobenius_norm();
        return Ok(0.5 * y * y);
    }
    let w = WeightSchedule::new(s.dim())?;
    let z = a.weighted_bands(&w, mu);
    Ok(dual_value(s, sigma2_hat, &upper_bands(s), &z))
}

fn dual_value(s: &HermitianMatrix, sigma2_hat: f64, s_bands: &[Vec<C64>], z: &[Vec<C64>]) -> f64 {
    let diag: f64 = s.diagonal().iter().map(|x| (x + sigma2_hat).powi(2)).sum();
    let off: f64 = s_bands
        .iter()
        .zip(z)
        .flat_map(|(sb, zb)| sb.iter().zip(zb).map(|(a, b)| (a - b).norm_sqr()))
        .sum();
    0.5 * (diag + 2.0 * off)
}

#[derive(Clone, Debug, Serialize)]
pub struct SolveDiagnostics {
    pub sweeps: usize,
    pub converged: bool,
    /// Primal objective minus the dual lower bound `½‖S + σ̂²I‖² − dual`.
    pub duality_gap: f64,
    pub nu: Vec<f64>,
    /// Dual objective after each sweep.
    pub dual_trace: Vec<f64>,
    /// Largest `|h_ℓ(ν̂_ℓ)|` over updates that solved for a positive root.
    pub max_root_residual: f64,
    /// Relative change of the last sweep.
    pub last_change: f64,
}

#[derive(Clone, Debug)]
pub struct BandedSpikedEstimate {
    /// `Σ̂ = S + σ̂²I − μ Σ W⊙Â`.
    pub sigma_hat: HermitianMatrix,
    /// `Σ̂ − σ̂²I`, assembled without adding and removing the shift.
    pub clutter: HermitianMatrix,
    pub dual: DualState,
    pub diagnostics: SolveDiagnostics,
}

/// Block coordinate descent on the dual, repeated in full sweeps over
/// `ℓ = 1..p−1` until the relative change falls below `cfg.sweep_tol`.
///
/// On non-convergence the last iterate is returned with
/// `diagnostics.converged = false`.
pub fn estimate_banded_spiked(
    s: &HermitianMatrix,
    sigma2_hat: f64,
    cfg: &SolverConfig,
) -> Result<BandedSpikedEstimate> {
    cfg.validate()?;
    if !(sigma2_hat.is_finite() && sigma2_hat >= 0.0) {
        return Err(Error::Domain(format!("noise power {sigma2_hat} must be non-negative")));
    }
    if s.matrix().iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(Error::Numeric("sample covariance has non-finite entries".into()));
    }
    let p = s.dim();
    let s_bands = upper_bands(s);
    let s_diag = s.diagonal();
    let mut dual = DualState::zeros(p);

    if p < 2 || cfg.mu == 0.0 {
        let y = s.add_identity(sigma2_hat).frobenius_norm();
        return Ok(BandedSpikedEstimate {
            sigma_hat: s.add_identity(sigma2_hat),
            clutter: s.clone(),
            dual,
            diagnostics: SolveDiagnostics {
                sweeps: 0,
                converged: true,
                duality_gap: 0.0,
                nu: vec![0.0; p.saturating_sub(1)],
                dual_trace: vec![0.5 * y * y],
                max_root_residual: 0.0,
                last_change: 0.0,
            },
        });
    }

    let mu = cfg.mu;
    let w = WeightSchedule::new(p)?;
    let s_norm = s.frobenius_norm();
    let mut dual_trace = Vec::new();
    let mut max_root_residual = 0.0f64;
    let mut interior = vec![false; p - 1];
    let mut converged = false;
    let mut sweeps = 0;
    let mut last_change = f64::INFINITY;
    let mut residual: Vec<Vec<C64>> = Vec::with_capacity(p - 1);
    let mut energies = vec![0.0; p - 1];

    while sweeps < cfg.max_sweeps {
        sweeps += 1;
        // Rebuild μ Σ W⊙A from scratch so rounding does not accumulate.
        let mut z = dual.weighted_bands(&w, mu);
        let mut max_change = 0.0f64;

        for ell in 1..p {
            let weights = w.row(ell);
            let block = &mut dual.blocks[ell - 1];
            residual.clear();
            // R⁽ℓ⁾ = S − μ Σ_{ℓ'≠ℓ} W⁽ℓ'⁾⊙A⁽ℓ'⁾ on g_ℓ.
            for m in 1..=ell {
                let d = p - m;
                let wm = mu * weights[m - 1];
                let r: Vec<C64> = s_bands[d - 1]
                    .iter()
                    .zip(&z[d - 1])
                    .zip(&block.coeffs[m - 1])
                    .map(|((sv, zv), a)| sv - zv + a * wm)
                    .collect();
                energies[m - 1] = 2.0 * r.iter().map(|x| x.norm_sqr()).sum::<f64>();
                residual.push(r);
            }

            let (nu, is_interior) = if energies[..ell].iter().all(|&e| e == 0.0) {
                (0.0, true)
            } else {
                let root = solve_nu_energies(weights, &energies[..ell], mu, cfg.root_tol)?;
                if root.nu > 0.0 {
                    max_root_residual = max_root_residual.max(root.residual.abs());
                }
                (root.nu, root.nu == 0.0 && root.residual < 0.0)
            };
            block.nu = nu;
            interior[ell - 1] = is_interior;

            let mut change2 = 0.0;
            for m in 1..=ell {
                let d = p - m;
                let wm = weights[m - 1];
                let coef = wm / (mu * (wm * wm + nu));
                for ((a, r), zv) in block.coeffs[m - 1]
                    .iter_mut()
                    .zip(&residual[m - 1])
                    .zip(z[d - 1].iter_mut())
                {
                    let new = r * coef;
                    let delta = (new - *a) * (mu * wm);
                    change2 += 2.0 * delta.norm_sqr();
                    *zv += delta;
                    *a = new;
                }
            }
            max_change = max_change.max(change2.sqrt());
        }

        let z = dual.weighted_bands(&w, mu);
        dual_trace.push(dual_value(s, sigma2_hat, &s_bands, &z));
        last_change = if s_norm > 0.0 { max_change / s_norm } else { 0.0 };
        if last_change <= cfg.sweep_tol {
            converged = true;
            break;
        }
    }

    let z = dual.weighted_bands(&w, mu);
    let mut clutter_bands: Vec<Vec<C64>> = s_bands
        .iter()
        .zip(&z)
        .map(|(sb, zb)| sb.iter().zip(zb).map(|(a, b)| a - b).collect())
        .collect();
    if converged {
        // A block strictly inside its ball certifies that Σ̂ vanishes on g_ℓ.
        if let Some(widest) = interior.iter().rposition(|&b| b) {
            let ell = widest + 1;
            for band in &mut clutter_bands[p - ell - 1..] {
                band.fill(C64::new(0.0, 0.0));
            }
        }
    }

    let clutter = from_bands(&s_diag, &clutter_bands);
    let shifted: Vec<f64> = s_diag.iter().map(|x| x + sigma2_hat).collect();
    let sigma_hat = from_bands(&shifted, &clutter_bands);

    let y = s.add_identity(sigma2_hat).frobenius_norm();
    let dual_val = dual_trace.last().copied().unwrap_or(0.5 * y * y);
    let duality_gap = primal_objective(&sigma_hat, s, sigma2_hat, mu) - (0.5 * y * y - dual_val);

    Ok(BandedSpikedEstimate {
        sigma_hat,
        clutter,
        diagnostics: SolveDiagnostics {
            sweeps,
            converged,
            duality_gap,
            nu: dual.nu(),
            dual_trace,
            max_root_residual,
            last_change,
        },
        dual,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{make_banded_spiked_truth, sample_gaussian, scm, GroundTruthScenario};
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_hermitian(p: usize, seed: u64) -> HermitianMatrix {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        HermitianMatrix::from_upper(p, |_, _| C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
    }

    fn sample_problem(p: usize, k: usize, seed: u64) -> HermitianMatrix {
        let truth = make_banded_spiked_truth(&GroundTruthScenario {
            p,
            band_size: (p / 4).max(1),
            spike_count: (p / 3).max(1),
            sigma2: 1.0,
            spike_gain: 20.0,
            seed,
        })
        .unwrap();
        scm(&sample_gaussian(&truth, k, seed + 1).unwrap()).unwrap()
    }

    #[test]
    fn weight_values() {
        let w = WeightSchedule::new(5).unwrap();
        assert!((w.get(1, 1) - 2f64.sqrt()).abs() < 1e-15);
        assert!((w.get(3, 1) - 6f64.sqrt() / 3.0).abs() < 1e-15);
        assert!((w.get(3, 3) - 6f64.sqrt()).abs() < 1e-15);
        for ell in 1..5 {
            assert!((w.get(ell, ell) / w.get(ell, 1) - ell as f64).abs() < 1e-12);
            assert!(w.row(ell).windows(2).all(|x| x[0] < x[1]));
        }
        assert!(WeightSchedule::new(1).is_err());
    }

    #[test]
    fn group_index_sets() {
        let g = GroupIndexSet::new(5, 1).unwrap();
        assert_eq!(g.pairs(), vec![(0, 4), (4, 0)]);
        let g = GroupIndexSet::new(5, 4).unwrap();
        assert_eq!(g.pairs().len(), 8);
        assert!(g.pairs().iter().all(|&(j, k)| j.abs_diff(k) == 1));
        assert!(GroupIndexSet::new(5, 5).is_err());
        assert!(GroupIndexSet::new(5, 0).is_err());
    }

    #[test]
    fn weight_matrix_support() {
        let w = WeightSchedule::new(4).unwrap();
        let w2 = w.weight_matrix(2);
        assert_eq!(w2[(0, 3)], w.get(2, 1));
        assert_eq!(w2[(1, 3)], w.get(2, 2));
        assert_eq!(w2[(0, 1)], 0.0);
        assert_eq!(w2[(2, 2)], 0.0);
    }

    #[test]
    fn penalty_small_cases() {
        assert_eq!(penalty_value(&HermitianMatrix::from_real_diagonal(&[1.0, 2.0, 3.0])), 0.0);
        let z = C64::new(0.3, -0.4);
        let m = HermitianMatrix::from_upper(2, |j, k| if j == k { C64::new(1.0, 0.0) } else { z });
        assert!((penalty_value(&m) - 2.0 * z.norm()).abs() < 1e-15);
    }

    #[test]
    fn penalty_forms_agree() {
        for seed in 0..10 {
            let m = random_hermitian(6, seed);
            let a = penalty_value(&m);
            let b = penalty_value_hadamard(&m);
            assert!((a - b).abs() <= 1e-12 * a.abs(), "{a} vs {b}");
        }
    }

    #[test]
    fn h_limits_and_monotonicity() {
        let w = WeightSchedule::new(6).unwrap();
        let r = random_hermitian(6, 3);
        let mu = 0.7;
        assert!((h_ell(1e12, 4, &r, mu, &w) + mu * mu).abs() < 1e-9);
        let mut prev = f64::INFINITY;
        for i in 0..200 {
            let v = h_ell(i as f64 * 0.05, 4, &r, mu, &w);
            assert!(v < prev);
            prev = v;
        }
    }

    #[test]
    fn single_group_closed_form() {
        // ℓ = 1, ‖R_{s_1}‖² = 8: corners of a p = 2 matrix with |z|² = 4.
        let r = HermitianMatrix::from_upper(2, |j, k| if j == k { C64::new(0.0, 0.0) } else { C64::new(2.0, 0.0) });
        let w = WeightSchedule::new(2).unwrap();
        let cfg = SolverConfig::new(1.0);
        let nu = solve_nu(1, &r, 1.0, &w, &cfg).unwrap();
        assert!((nu - 2.0).abs() < 1e-10);

        // Bisection alone lands on the same root.
        let e = group_energies(&r);
        let (mut lo, mut hi) = (0.0, 100.0);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if h_from_energies(mid, w.row(1), &e[..1], 1.0) > 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        assert!((lo - 2.0).abs() < 1e-10);
    }

    #[test]
    fn two_group_root_matches_grid_scan() {
        // ℓ = 2 with ‖R_{s_1}‖² = ‖R_{s_2}‖² = 1 at p = 3, μ = 0.5.
        let r = HermitianMatrix::from_upper(3, |j, k| match k - j {
            2 => C64::new(0.5f64.sqrt(), 0.0),
            1 => C64::new(0.5, 0.0),
            _ => C64::new(0.0, 0.0),
        });
        let w = WeightSchedule::new(3).unwrap();
        let e = group_energies(&r);
        assert!((e[0] - 1.0).abs() < 1e-15 && (e[1] - 1.0).abs() < 1e-15);
        let cfg = SolverConfig::new(0.5);
        let nu = solve_nu(2, &r, 0.5, &w, &cfg).unwrap();

        // Grid scan for the sign change, refined by successively finer grids.
        let (mut lo, mut step) = (0.0f64, 1.0f64);
        for _ in 0..12 {
            let mut x = lo;
            while h_ell(x + step, 2, &r, 0.5, &w) > 0.0 {
                x += step;
            }
            lo = x;
            step /= 10.0;
        }
        assert!((nu - lo).abs() < 1e-8, "{nu} vs {lo}");
    }

    #[test]
    fn zero_residual_gives_zero_root() {
        let w = WeightSchedule::new(4).unwrap();
        let cfg = SolverConfig::new(0.3);
        assert_eq!(solve_nu(3, &HermitianMatrix::identity(4), 0.3, &w, &cfg).unwrap(), 0.0);
    }

    #[test]
    fn non_finite_residual_is_an_error() {
        let w = [1.0];
        assert!(matches!(
            solve_nu_energies(&w, &[f64::NAN], 1.0, 1e-12),
            Err(Error::Numeric(_))
        ));
    }

    #[test]
    fn tiny_mu_returns_shifted_scm() {
        let s = sample_problem(8, 20, 1);
        let est = estimate_banded_spiked(&s, 0.7, &SolverConfig::new(1e-12)).unwrap();
        assert!(est.sigma_hat.max_abs_diff(&s.add_identity(0.7)) < 1e-9);
    }

    #[test]
    fn zero_mu_is_unpenalised() {
        let s = sample_problem(6, 20, 2);
        let est = estimate_banded_spiked(&s, 0.5, &SolverConfig::new(0.0)).unwrap();
        assert_eq!(est.sigma_hat, s.add_identity(0.5));
    }

    #[test]
    fn huge_mu_keeps_only_the_diagonal() {
        let s = sample_problem(8, 20, 3);
        let cfg = SolverConfig::new(1e6 * s.frobenius_norm());
        let est = estimate_banded_spiked(&s, 0.4, &cfg).unwrap();
        let expected = HermitianMatrix::from_real_diagonal(&s.diagonal()).add_identity(0.4);
        assert!(est.sigma_hat.max_abs_diff(&expected) < 1e-9);
        assert!(band_profile(&est.clutter).iter().all(|&x| x == 0.0));
    }

    #[test]
    fn exact_zeros_above_twice_the_band_profile() {
        let s = sample_problem(10, 40, 4);
        let mu = 2.0 * band_profile(&s).iter().fold(0.0f64, |a, &b| a.max(b));
        let est = estimate_banded_spiked(&s, 0.0, &SolverConfig::new(mu)).unwrap();
        assert!(est.diagnostics.converged);
        assert!(band_profile(&est.clutter).iter().all(|&x| x == 0.0));
    }

    #[test]
    fn diagonal_shift_commutes() {
        let s = sample_problem(8, 12, 5);
        let cfg = SolverConfig::for_dims(8, 12);
        let shifted = estimate_banded_spiked(&s, 0.9, &cfg).unwrap();
        let plain = estimate_banded_spiked(&s, 0.0, &cfg).unwrap();
        assert_eq!(shifted.clutter, plain.clutter);
        let back = shifted.sigma_hat.add_identity(-0.9);
        for j in 0..8 {
            for k in 0..8 {
                if j != k {
                    assert_eq!(back.get(j, k), plain.sigma_hat.get(j, k));
                }
            }
            assert!((back.get(j, j).re - plain.sigma_hat.get(j, j).re).abs() <= 4.0 * f64::EPSILON * (1.0 + s.get(j, j).re));
        }
    }

    #[test]
    fn dual_objective_contract() {
        let s = sample_problem(6, 30, 6);
        let zero = DualState::zeros(6);
        let y = s.add_identity(0.3).frobenius_norm();
        assert!((dual_objective(&zero, &s, 0.3, 0.5).unwrap() - 0.5 * y * y).abs() < 1e-12);

        let mut bad = DualState::zeros(6);
        // ‖A‖ = 1.01 on block 1 (two corner entries).
        bad.block_mut(1).coeffs[0][0] = C64::new(1.01 / 2f64.sqrt(), 0.0);
        assert!((bad.block_norm(1) - 1.01).abs() < 1e-12);
        assert!(matches!(
            dual_objective(&bad, &s, 0.3, 0.5),
            Err(Error::Infeasible { block: 1, .. })
        ));
    }

    #[test]
    fn primal_objective_cases() {
        let s = sample_problem(5, 30, 7);
        let at_data = primal_objective(&s.add_identity(0.2), &s, 0.2, 0.8);
        assert!((at_data - 0.8 * penalty_value(&s.add_identity(0.2))).abs() < 1e-12);
        let d = HermitianMatrix::from_real_diagonal(&[1.0, 2.0, 3.0]);
        assert_eq!(primal_objective(&d, &d, 0.0, 1.0), 0.0);
    }

    #[test]
    fn solver_invariants_p12() {
        let s = sample_problem(12, 8, 8);
        let est = estimate_banded_spiked(&s, 0.5, &SolverConfig::for_dims(12, 8)).unwrap();
        let d = &est.diagnostics;
        assert!(d.converged);
        assert!(d.duality_gap >= -1e-9 && d.duality_gap < 1e-5 * (1.0 + d.dual_trace[0]), "{}", d.duality_gap);
        assert!(d.dual_trace.windows(2).all(|x| x[1] <= x[0] + 1e-10 * x[0].abs().max(1.0)));
        for ell in 1..12 {
            let norm = est.dual.block_norm(ell);
            assert!(norm <= 1.0 + FEASIBILITY_TOL);
            let nu = est.dual.block(ell).nu;
            assert!(nu >= 0.0);
            if nu > 0.0 {
                assert!((norm - 1.0).abs() < 1e-6);
            }
        }
        assert!(d.max_root_residual <= 1e-12 * SolverConfig::default_mu(12, 8).powi(2));
    }

    #[test]
    fn reported_dual_matches_recomputation() {
        let s = sample_problem(7, 10, 9);
        let cfg = SolverConfig::for_dims(7, 10);
        let est = estimate_banded_spiked(&s, 0.25, &cfg).unwrap();
        let recomputed = dual_objective(&est.dual, &s, 0.25, cfg.mu).unwrap();
        assert!((recomputed - est.diagnostics.dual_trace.last().unwrap()).abs() < 1e-10 * recomputed);
        let implied = s.add_identity(0.25).sub(&est.dual.weighted_sum(&WeightSchedule::new(7).unwrap()).scaled(cfg.mu));
        assert!(implied.max_abs_diff(&est.sigma_hat) < 1e-7);
    }

    #[test]
    fn max_sweeps_reports_non_convergence() {
        let s = sample_problem(10, 6, 10);
        let mut cfg = SolverConfig::for_dims(10, 6);
        cfg.max_sweeps = 1;
        cfg.sweep_tol = 1e-300;
        let est = estimate_banded_spiked(&s, 0.1, &cfg).unwrap();
        assert!(!est.diagnostics.converged);
        assert_eq!(est.diagnostics.sweeps, 1);
    }

    #[test]
    fn rejects_bad_inputs() {
        let s = sample_problem(4, 10, 11);
        assert!(estimate_banded_spiked(&s, -1.0, &SolverConfig::new(0.1)).is_err());
        assert!(estimate_banded_spiked(&s, 0.0, &SolverConfig::new(-0.1)).is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn estimate_is_hermitian_and_dual_feasible(p in 2usize..9, k in 2usize..20, seed in any::<u64>(), mu in 0.01f64..3.0) {
            let s = sample_problem(p.max(4), k, seed % 1000);
            let est = estimate_banded_spiked(&s, 0.3, &SolverConfig::new(mu)).unwrap();
            let m = est.sigma_hat.matrix();
            let scale = est.sigma_hat.max_abs_entry();
            for j in 0..m.nrows() {
                for kk in 0..m.ncols() {
                    prop_assert!((m[(j, kk)] - m[(kk, j)].conj()).norm() <= 1e-12 * scale);
                }
            }
            prop_assert!(est.dual.check_feasible().is_ok());
            prop_assert!(est.diagnostics.nu.iter().all(|&v| v >= 0.0));
        }
    }
}
