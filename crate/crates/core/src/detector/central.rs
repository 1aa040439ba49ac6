//! Central processing: precision-weighted combining, the constellation
//! denoiser and soft/hard outputs.

#[allow(unused_imports)]
use num_traits::Float;
use alloc::vec::Vec;
use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::linalg::{c64, CVector};
use crate::model::Constellation;

/// Extrinsic message of one subarray as seen by the combiner.
#[derive(Debug, Clone, Copy)]
pub struct Contribution<'a> {
    pub eta: f64,
    /// `η r` over the subarray's served users.
    pub p: &'a CVector,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Combined {
    /// `τ₀,k`; identical across users when every subarray serves everyone.
    pub tau0: Vec<f64>,
    /// `Σ_c η_c r_c,k` before normalisation.
    pub p0: CVector,
    pub gamma0: CVector,
}

/// Maximum-ratio combining over the subarrays serving each user.
///
/// `serving[k]` lists `(subarray, local index)` pairs in ascending subarray
/// order; sums run in that order.
pub fn cpm_mrc(contributions: &[Option<Contribution<'_>>], serving: &[Vec<(usize, usize)>]) -> Result<Combined> {
    let k = serving.len();
    let mut tau0 = Vec::with_capacity(k);
    let mut p0 = CVector::zeros(k);
    let mut gamma0 = CVector::zeros(k);
    for (user, links) in serving.iter().enumerate() {
        let mut terms = links.iter().filter_map(|&(c, local)| {
            contributions.get(c).copied().flatten().map(|m| (m.eta, m.p[local]))
        });
        let Some((mut tau, mut sum)) = terms.next() else {
            return Err(Error::Contract(alloc::format!("user {user} is served by no subarray")));
        };
        for (eta, p) in terms {
            tau += eta;
            sum += p;
        }
        tau0.push(tau);
        p0[user] = sum;
        gamma0[user] = sum / tau;
    }
    Ok(Combined { tau0, p0, gamma0 })
}

/// Posterior mean and variance of a uniform PAM symbol observed as
/// `obs = a + n`, with likelihood `exp(-τ (obs - a)²)`.
///
/// `levels` must be ascending and symmetric about zero. Mirrored levels are
/// accumulated in pairs, so an observation at the origin yields a mean of
/// exactly zero.
pub fn pam_posterior(levels: &[f64], obs: f64, tau: f64) -> (f64, f64) {
    let log_w = |a: f64| -tau * (obs - a) * (obs - a);
    let peak = levels.iter().map(|&a| log_w(a)).fold(f64::NEG_INFINITY, f64::max);
    let weights: Vec<f64> = levels.iter().map(|&a| (log_w(a) - peak).exp()).collect();
    let n = levels.len();
    let mut z = 0.0;
    let mut first = 0.0;
    for i in 0..n / 2 {
        let j = n - 1 - i;
        z += weights[i] + weights[j];
        first += levels[i] * weights[i] + levels[j] * weights[j];
    }
    let mean = first / z;
    let var = levels
        .iter()
        .zip(&weights)
        .map(|(&a, &w)| (a - mean) * (a - mean) * w)
        .sum::<f64>()
        / z;
    (mean, var)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Denoised {
    pub xhat: CVector,
    pub v: Vec<f64>,
    /// `(Σ_k v_k / K)⁻¹`, infinite when every variance vanishes.
    pub omega: f64,
}

/// MMSE estimate of each symbol from its AWGN observation `γ₀,k` with noise
/// power `1/τ₀,k`, evaluated per PAM axis.
pub fn cpm_denoise(gamma0: &CVector, tau0: &[f64], constellation: &Constellation) -> Denoised {
    let levels = constellation.levels();
    let e_x = constellation.avg_energy();
    let k = gamma0.len();
    let mut xhat = CVector::zeros(k);
    let mut v = Vec::with_capacity(k);
    for (user, (g, &tau)) in gamma0.iter().zip(tau0).enumerate() {
        let (m_re, v_re) = pam_posterior(levels, g.re, tau);
        let (m_im, v_im) = pam_posterior(levels, g.im, tau);
        xhat[user] = c64(m_re, m_im);
        v.push((v_re + v_im).clamp(0.0, e_x));
    }
    let omega = k as f64 / v.iter().sum::<f64>();
    Denoised { xhat, v, omega }
}

/// `ln Σ exp(v)` with terms accumulated in descending order, so equal
/// multisets always give bit-identical results.
fn log_sum_exp(values: &mut [f64]) -> f64 {
    values.sort_by(|a, b| b.total_cmp(a));
    let Some(&peak) = values.first() else {
        return f64::NEG_INFINITY;
    };
    let s: f64 = values.iter().map(|&v| (v - peak).exp()).sum();
    peak + s.ln()
}

/// Exact per-bit LLRs, positive when bit 0 is more likely. Returns a
/// `K x bits_per_symbol` matrix.
pub fn compute_llr(gamma0: &CVector, tau0: &[f64], constellation: &Constellation) -> DMatrix<f64> {
    let levels = constellation.levels();
    let labels = constellation.level_labels();
    let axis_bits = constellation.bits_per_axis();
    let k = gamma0.len();
    let mut out = DMatrix::zeros(k, constellation.bits_per_symbol());
    let mut zeros = Vec::with_capacity(levels.len());
    let mut ones = Vec::with_capacity(levels.len());
    for (user, (g, &tau)) in gamma0.iter().zip(tau0).enumerate() {
        for (axis, obs) in [g.re, g.im].into_iter().enumerate() {
            for b in 0..axis_bits {
                zeros.clear();
                ones.clear();
                let shift = axis_bits - 1 - b;
                for (&a, &label) in levels.iter().zip(labels) {
                    let w = -tau * (obs - a) * (obs - a);
                    if (label >> shift) & 1 == 0 {
                        zeros.push(w);
                    } else {
                        ones.push(w);
                    }
                }
                out[(user, axis * axis_bits + b)] = log_sum_exp(&mut zeros) - log_sum_exp(&mut ones);
            }
        }
    }
    out
}

/// Nearest constellation point to each `γ₀,k`.
pub fn hard_decisions(gamma0: &CVector, constellation: &Constellation) -> Vec<usize> {
    gamma0.iter().map(|&g| constellation.nearest(g)).collect()
}
