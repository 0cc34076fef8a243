//! Wishart negative log-likelihoods, their Frobenius-norm upper bounds and
//! the variational bound on the distance between their minimisers.
//!
//! Additive constants are fixed to zero on both sides of every inequality.

use nalgebra::Cholesky;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hermitian::HermitianMatrix;

/// Eigenvalues of `S` below this fraction of `λ_max(S)` are floored to it
/// before taking logarithms.
pub const EIGEN_FLOOR: f64 = 1e-12;

/// Relative threshold separating numerically zero eigenvalues when checking
/// the rank of a singular SCM.
pub const RANK_TOL: f64 = 1e-10;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Regime {
    /// `p ≤ K`: `S` has full rank.
    FullRank,
    /// `p > K`: `S` has rank `k`.
    Singular { k: usize },
}

impl Regime {
    pub fn for_dims(p: usize, k: usize) -> Self {
        if p <= k {
            Regime::FullRank
        } else {
            Regime::Singular { k }
        }
    }

    pub fn gamma(self) -> u8 {
        match self {
            Regime::FullRank => 2,
            Regime::Singular { .. } => 1,
        }
    }
}

/// `(log det M, M⁻¹)` through a Cholesky factorisation.
fn logdet_and_factor(m: &HermitianMatrix, name: &str) -> Result<(f64, Cholesky<crate::C64, nalgebra::Dyn>)> {
    let chol = Cholesky::new(m.matrix().clone())
        .ok_or_else(|| Error::Domain(format!("{name} is not positive definite")))?;
    let logdet = 2.0 * chol.l_dirty().diagonal().iter().map(|z| z.re.ln()).sum::<f64>();
    if !logdet.is_finite() {
        return Err(Error::Domain(format!("{name} is numerically singular")));
    }
    Ok((logdet, chol))
}

/// `tr(Σ⁻¹S)`.
fn trace_inv_product(chol: &Cholesky<crate::C64, nalgebra::Dyn>, s: &HermitianMatrix) -> f64 {
    chol.solve(s.matrix()).trace().re
}

fn check_dims(sigma: &HermitianMatrix, s: &HermitianMatrix) -> Result<()> {
    if sigma.dim() != s.dim() {
        return Err(Error::Dimension {
            expected: s.dim(),
            actual: sigma.dim(),
        });
    }
    Ok(())
}

/// `tr(Σ⁻¹S) + log det(ΣS⁻¹) − p` for `p ≤ K`.
pub fn neg_loglik(sigma: &HermitianMatrix, s: &HermitianMatrix) -> Result<f64> {
    check_dims(sigma, s)?;
    let (logdet_sigma, chol) = logdet_and_factor(sigma, "Σ")?;
    let (logdet_s, _) = logdet_and_factor(s, "S")?;
    Ok(trace_inv_product(&chol, s) + logdet_sigma - logdet_s - s.dim() as f64)
}

/// `log det Λ` over the `k` largest eigenvalues of `S`, floored at
/// `EIGEN_FLOOR·λ_max`. Fails when the numerical rank of `S` is not `k`.
pub fn logdet_nonzero(s: &HermitianMatrix, k: usize) -> Result<f64> {
    let p = s.dim();
    if k == 0 || k > p {
        return Err(Error::Domain(format!("rank {k} outside [1, {p}]")));
    }
    let eig = s.eigenvalues();
    let lmax = eig[p - 1];
    if !(lmax > 0.0) {
        return Err(Error::Domain("S is zero".into()));
    }
    let rank = eig.iter().filter(|&&l| l > RANK_TOL * lmax).count();
    if rank != k {
        return Err(Error::Domain(format!("S has numerical rank {rank}, expected {k}")));
    }
    let floor = EIGEN_FLOOR * lmax;
    Ok(eig[p - k..].iter().map(|&l| l.max(floor).ln()).sum())
}

/// `tr(Σ⁻¹S) + log det Σ − log det Λ` for `p > K`.
pub fn neg_loglik_singular(sigma: &HermitianMatrix, s: &HermitianMatrix, k: usize) -> Result<f64> {
    check_dims(sigma, s)?;
    let (logdet_sigma, chol) = logdet_and_factor(sigma, "Σ")?;
    let logdet_lambda = logdet_nonzero(s, k)?;
    Ok(trace_inv_product(&chol, s) + logdet_sigma - logdet_lambda)
}

/// Negative log-likelihood for the regime.
pub fn neg_loglik_for(sigma: &HermitianMatrix, s: &HermitianMatrix, regime: Regime) -> Result<f64> {
    match regime {
        Regime::FullRank => neg_loglik(sigma, s),
        Regime::Singular { k } => neg_loglik_singular(sigma, s, k),
    }
}

/// Convex upper bound on the negative log-likelihood:
///
/// * `p ≤ K`: `‖(Σ − S)/σ²‖_F²`
/// * `p > K`: `√p‖(Σ − S)/σ²‖_F + p + p log c − log det Λ`
pub fn upper_bound(
    sigma: &HermitianMatrix,
    s: &HermitianMatrix,
    sigma2: f64,
    regime: Regime,
    c: f64,
) -> Result<f64> {
    check_dims(sigma, s)?;
    if !(sigma2 > 0.0) {
        return Err(Error::Domain(format!("noise power {sigma2} must be positive")));
    }
    let dist = sigma.sub(s).frobenius_norm() / sigma2;
    match regime {
        Regime::FullRank => Ok(dist * dist),
        Regime::Singular { k } => {
            if !(c > 0.0) {
                return Err(Error::Domain(format!("eigenvalue cap {c} must be positive")));
            }
            let p = s.dim() as f64;
            Ok(p.sqrt() * dist + p + p * c.ln() - logdet_nonzero(s, k)?)
        }
    }
}

/// Scalars of `S` the variational bound depends on.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundInputs {
    pub p: usize,
    pub k: usize,
    pub sigma2: f64,
    /// Cap on `λ_max(Σ)`.
    pub c: f64,
    pub lambda_max_s: f64,
    pub trace_s: f64,
}

impl BoundInputs {
    pub fn from_scm(s: &HermitianMatrix, k: usize, sigma2: f64, c: f64) -> Result<Self> {
        let inputs = Self {
            p: s.dim(),
            k,
            sigma2,
            c,
            lambda_max_s: s.max_eigenvalue().max(0.0),
            trace_s: s.trace(),
        };
        inputs.validate()?;
        Ok(inputs)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.sigma2 > 0.0 && self.c >= self.sigma2) {
            return Err(Error::Domain(format!(
                "need c >= sigma2 > 0, got c = {}, sigma2 = {}",
                self.c, self.sigma2
            )));
        }
        if !(self.lambda_max_s >= 0.0 && self.trace_s >= self.lambda_max_s * (1.0 - 1e-12)) {
            return Err(Error::Domain(format!(
                "need tr(S) >= λ_max(S) >= 0, got {} and {}",
                self.trace_s, self.lambda_max_s
            )));
        }
        Ok(())
    }

    pub fn regime(&self) -> Regime {
        Regime::for_dims(self.p, self.k)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundResult {
    pub epsilon: f64,
    pub gamma: u8,
    /// `(2ε/p)^{1/γ} / c`.
    pub relative_bound: f64,
}

/// Sup-norm gap `ε` between the likelihood and its upper bound, with growth
/// exponent `γ`.
pub fn epsilon_bound(inputs: &BoundInputs, regime: Regime) -> BoundResult {
    let BoundInputs {
        p,
        sigma2,
        c,
        lambda_max_s,
        trace_s,
        ..
    } = *inputs;
    let p = p as f64;
    let epsilon = match regime {
        Regime::FullRank => {
            p / (sigma2 * sigma2) * (c + lambda_max_s).powi(2) + p * (lambda_max_s / sigma2).ln() + p
                - trace_s / c
        }
        Regime::Singular { .. } => {
            p / sigma2 * (c + lambda_max_s) + p * (c / sigma2).ln() + p - trace_s / c
        }
    };
    let gamma = regime.gamma();
    let relative_bound = (2.0 * epsilon / p).powf(1.0 / gamma as f64) / c;
    BoundResult {
        epsilon,
        gamma,
        relative_bound,
    }
}
