//! Independent reference computations shared by the integration tests.
//!
//! Nothing here calls into the solver; only matrix containers and the
//! generators are reused.

#![allow(dead_code)]

use bandspike::hermitian::{HermitianMatrix, C64};
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Weight of group `s_m` inside block `ℓ`, written out directly.
pub fn weight(ell: usize, m: usize) -> f64 {
    (2.0 * ell as f64).sqrt() / (ell - m + 1) as f64
}

/// Dense penalty: `Σ_ℓ ‖W⁽ℓ⁾ ⊙ M‖_F` restricted to the `ℓ` outer offsets.
pub fn dense_penalty(m: &HermitianMatrix) -> f64 {
    let p = m.dim();
    let mut total = 0.0;
    for ell in 1..p {
        let mut acc = 0.0;
        for j in 0..p {
            for k in 0..p {
                let d = j.abs_diff(k);
                if d >= p - ell && d > 0 {
                    let w = weight(ell, p - d);
                    acc += w * w * m.get(j, k).norm_sqr();
                }
            }
        }
        total += acc.sqrt();
    }
    total
}

pub fn primal(sigma: &HermitianMatrix, s: &HermitianMatrix, sigma2: f64, mu: f64) -> f64 {
    let mut fit = 0.0;
    for j in 0..s.dim() {
        for k in 0..s.dim() {
            let target = s.get(j, k) + if j == k { C64::new(sigma2, 0.0) } else { C64::new(0.0, 0.0) };
            fit += (sigma.get(j, k) - target).norm_sqr();
        }
    }
    0.5 * fit + mu * dense_penalty(sigma)
}

pub struct OracleResult {
    pub sigma: HermitianMatrix,
    pub primal: f64,
    pub gap: f64,
    pub iterations: usize,
}

/// Accelerated projected gradient (FISTA) on the dual
///
/// ```text
/// min_A ½‖T − μ Σ_ℓ W⁽ℓ⁾⊙A⁽ℓ⁾‖²   s.t. ‖A⁽ℓ⁾‖_F ≤ 1 on g_ℓ
/// ```
///
/// with `T = S + σ²I`, stopped once the duality gap is below
/// `gap_tol·(1 + |primal|)` or after `max_iter` iterations. The primal point
/// is `T − μ Σ W⊙A`.
pub fn fista_oracle(s: &HermitianMatrix, sigma2: f64, mu: f64, gap_tol: f64, max_iter: usize) -> OracleResult {
    let p = s.dim();
    // Upper-triangle entries (j, k), k > j, and the blocks that cover them.
    let entries: Vec<(usize, usize)> = (0..p).flat_map(|j| (j + 1..p).map(move |k| (j, k))).collect();
    let n = entries.len();
    let blocks = p - 1;
    // Coefficient of block ℓ on entry e, zero outside g_ℓ.
    let coef: Vec<Vec<f64>> = (1..=blocks)
        .map(|ell| {
            entries
                .iter()
                .map(|&(j, k)| {
                    let d = k - j;
                    if d >= p - ell { mu * weight(ell, p - d) } else { 0.0 }
                })
                .collect()
        })
        .collect();
    // Upper entries appear twice in the Frobenius norm, so the ball radius
    // in upper coordinates is 1/√2 and the objective carries a factor 2.
    let radius = std::f64::consts::FRAC_1_SQRT_2;
    let lipschitz = 2.0
        * (0..n)
            .map(|e| coef.iter().map(|c| c[e] * c[e]).sum::<f64>())
            .fold(0.0f64, f64::max);
    let t: Vec<C64> = entries.iter().map(|&(j, k)| s.get(j, k)).collect();
    let diag_sq: f64 = (0..p).map(|j| (s.get(j, j).re + sigma2).powi(2)).sum();

    let zero = C64::new(0.0, 0.0);
    let mut a = vec![vec![zero; n]; blocks];
    let mut y = a.clone();
    let mut tk = 1.0f64;

    let residual = |a: &[Vec<C64>]| -> Vec<C64> {
        (0..n)
            .map(|e| t[e] - (0..blocks).map(|b| a[b][e] * coef[b][e]).sum::<C64>())
            .collect()
    };
    let project = |v: &mut Vec<C64>| {
        let norm = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if norm > radius {
            let s = radius / norm;
            v.iter_mut().for_each(|z| *z *= s);
        }
    };
    let sigma_of = |r: &[C64]| -> HermitianMatrix {
        HermitianMatrix::from_upper(p, |j, k| {
            if j == k {
                C64::new(s.get(j, j).re + sigma2, 0.0)
            } else {
                r[entries.iter().position(|&x| x == (j, k)).unwrap()]
            }
        })
    };
    let y_norm_sq = diag_sq + 2.0 * t.iter().map(|z| z.norm_sqr()).sum::<f64>();

    let mut iterations = 0;
    let mut result = None;
    while iterations < max_iter {
        iterations += 1;
        let r = residual(&y);
        let mut next = y.clone();
        for b in 0..blocks {
            for e in 0..n {
                // ∇ = −2 coef · r; step 1/L.
                next[b][e] += r[e] * (2.0 * coef[b][e] / lipschitz);
            }
            project(&mut next[b]);
        }
        let t_next = 0.5 * (1.0 + (1.0 + 4.0 * tk * tk).sqrt());
        let momentum = (tk - 1.0) / t_next;
        for b in 0..blocks {
            for e in 0..n {
                y[b][e] = next[b][e] + (next[b][e] - a[b][e]) * momentum;
            }
        }
        a = next;
        tk = t_next;

        if iterations % 50 == 0 || iterations == max_iter {
            let r = residual(&a);
            let dual = 0.5 * (diag_sq + 2.0 * r.iter().map(|z| z.norm_sqr()).sum::<f64>());
            let sigma = sigma_of(&r);
            let obj = primal(&sigma, s, sigma2, mu);
            let gap = obj - (0.5 * y_norm_sq - dual);
            if gap <= gap_tol * (1.0 + obj.abs()) || iterations == max_iter {
                result = Some(OracleResult {
                    sigma,
                    primal: obj,
                    gap,
                    iterations,
                });
                break;
            }
            // Periodic momentum restart.
            if iterations % 1000 == 0 {
                tk = 1.0;
                y = a.clone();
            }
        }
    }
    result.expect("oracle loop ran at least once")
}

pub fn random_hermitian(p: usize, rng: &mut ChaCha8Rng, scale: f64) -> HermitianMatrix {
    HermitianMatrix::from_upper(p, |j, k| {
        let re = rng.random_range(-scale..scale);
        if j == k {
            C64::new(re, 0.0)
        } else {
            C64::new(re, rng.random_range(-scale..scale))
        }
    })
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Explicit inverse through LU.
pub fn inverse(m: &HermitianMatrix) -> DMatrix<C64> {
    m.matrix().clone().try_inverse().expect("invertible")
}

/// Reports one criterion and returns whether it passed.
pub fn report(id: u32, name: &str, passed: bool, detail: &str) -> bool {
    println!("[{}] criterion {id:>2} {name}: {detail}", if passed { "PASS" } else { "FAIL" });
    passed
}
