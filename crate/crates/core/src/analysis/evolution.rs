//! Scalar state evolution of the distributed detector.

#[allow(unused_imports)]
use num_traits::Float;
use alloc::vec::Vec;

use crate::detector::pam_posterior;
use crate::error::{check_dim, invalid, Result};
use crate::linalg::{gram, hermitian_eigenvalues, CMatrix};
use crate::model::Constellation;
use crate::partition::SubarrayPartition;

pub const QUADRATURE_NODES: usize = 64;

const CLAMP_LO: f64 = 1e-12;
const CLAMP_HI: f64 = 1e12;

/// Eigenvalues of `H_cᴴ H_c` for every subarray, `K` values each.
#[derive(Debug, Clone, PartialEq)]
pub struct EigenSpectrum {
    pub per_subarray: Vec<Vec<f64>>,
}

impl EigenSpectrum {
    pub fn new(per_subarray: Vec<Vec<f64>>) -> Result<Self> {
        let Some(k) = per_subarray.first().map(Vec::len) else {
            return Err(invalid("spectrum needs at least one subarray"));
        };
        for s in &per_subarray {
            check_dim("eigenvalues per subarray", k, s.len())?;
        }
        let per_subarray = per_subarray
            .into_iter()
            .map(|s| s.into_iter().map(|l| l.max(0.0)).collect())
            .collect();
        Ok(Self { per_subarray })
    }

    /// Spectra of the row blocks of `h`. Blocks with fewer rows than users
    /// use the smaller Gram matrix and pad with zeros.
    pub fn from_channel(h: &CMatrix, part: &SubarrayPartition) -> Result<Self> {
        check_dim("partition rows", h.nrows(), part.n_antennas())?;
        let k = h.ncols();
        let per_subarray = (0..part.n_subarrays())
            .map(|c| {
                let block = part.block(h, c);
                let mut values = if block.nrows() < k {
                    hermitian_eigenvalues(&(&block * block.adjoint()))
                } else {
                    hermitian_eigenvalues(&gram(&block))
                };
                values.resize(k, 0.0);
                values
            })
            .collect();
        Self::new(per_subarray)
    }

    pub fn n_subarrays(&self) -> usize {
        self.per_subarray.len()
    }

    pub fn n_users(&self) -> usize {
        self.per_subarray[0].len()
    }
}

/// Average LMMSE error of one subarray under prior variance `nu`:
/// `(1/K) Σ σ² ν / (λ ν + σ²)`.
pub fn mse_subarray(nu: f64, eigenvalues: &[f64], noise_var: f64) -> f64 {
    let sum: f64 = eigenvalues
        .iter()
        .map(|&l| noise_var * nu / (l * nu + noise_var))
        .sum();
    sum / eigenvalues.len() as f64
}

/// Precision gained by one subarray, `1/mse_c(ν) - 1/ν`.
pub fn phi(nu: f64, eigenvalues: &[f64], noise_var: f64) -> f64 {
    1.0 / mse_subarray(nu, eigenvalues, noise_var) - 1.0 / nu
}

/// Precision gained by the denoiser, `1/mse₀(ρ) - 1/ρ`.
pub fn psi(rho: f64, constellation: &Constellation) -> f64 {
    1.0 / mse_denoiser(rho, constellation) - 1.0 / rho
}

/// Nodes and weights of the `n`-point Gauss-Hermite rule for weight `exp(-x²)`.
pub fn gauss_hermite(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = alloc::vec![0.0; n];
    let mut w = alloc::vec![0.0; n];
    let pim4 = core::f64::consts::PI.powf(-0.25);
    let nf = n as f64;
    let mut z = 0.0;
    for i in 0..n.div_ceil(2) {
        z = match i {
            0 => (2.0 * nf + 1.0).sqrt() - 1.85575 * (2.0 * nf + 1.0).powf(-1.0 / 6.0),
            1 => z - 1.14 * nf.powf(0.426) / z,
            2 => 1.86 * z - 0.86 * x[0],
            3 => 1.91 * z - 0.91 * x[1],
            _ => 2.0 * z - x[i - 2],
        };
        let mut pp = 0.0;
        for _ in 0..100 {
            let mut p1 = pim4;
            let mut p2 = 0.0;
            for j in 1..=n {
                let p3 = p2;
                p2 = p1;
                let jf = j as f64;
                p1 = z * (2.0 / jf).sqrt() * p2 - ((jf - 1.0) / jf).sqrt() * p3;
            }
            pp = (2.0 * nf).sqrt() * p2;
            let step = p1 / pp;
            z -= step;
            if step.abs() <= 1e-15 * z.abs().max(1.0) {
                break;
            }
        }
        x[i] = z;
        x[n - 1 - i] = -z;
        w[i] = 2.0 / (pp * pp);
        w[n - 1 - i] = w[i];
    }
    (x, w)
}

/// MMSE of the constellation denoiser on a complex AWGN observation with
/// noise power `rho`, by Gauss-Hermite quadrature on each PAM axis.
pub fn mse_denoiser(rho: f64, constellation: &Constellation) -> f64 {
    let (nodes, weights) = gauss_hermite(QUADRATURE_NODES);
    let levels = constellation.levels();
    let scale = rho.sqrt();
    let tau = 1.0 / rho;
    let norm = core::f64::consts::PI.sqrt();
    let mut axis = 0.0;
    for &a in levels {
        let mut e = 0.0;
        for (&t, &wt) in nodes.iter().zip(&weights) {
            let (mean, _) = pam_posterior(levels, a + scale * t, tau);
            e += wt * (a - mean) * (a - mean);
        }
        axis += e / norm;
    }
    2.0 * axis / levels.len() as f64
}

/// Trajectories of the combined noise power `ρᵗ` and the per-subarray prior
/// variances `ν_cᵗ`, both indexed from iteration 1.
#[derive(Debug, Clone, PartialEq)]
pub struct EvolutionState {
    pub rho: Vec<f64>,
    pub nu: Vec<Vec<f64>>,
    /// Values pushed back into `[1e-12, 1e12]`.
    pub clamp_events: usize,
}

impl EvolutionState {
    pub fn t_max(&self) -> usize {
        self.rho.len()
    }
}

fn clamp(value: f64, events: &mut usize) -> f64 {
    if value.is_nan() || value > CLAMP_HI {
        *events += 1;
        CLAMP_HI
    } else if value < CLAMP_LO {
        *events += 1;
        CLAMP_LO
    } else {
        value
    }
}

/// Runs the scalar recursion for `t_max` iterations starting from `ν¹ = E_x`.
pub fn evolve(
    spectra: &EigenSpectrum,
    noise_var: f64,
    constellation: &Constellation,
    t_max: usize,
) -> Result<EvolutionState> {
    if t_max == 0 {
        return Err(invalid("t_max must be at least 1"));
    }
    if !(noise_var > 0.0) {
        return Err(invalid("noise variance must be positive"));
    }
    let e_x = constellation.avg_energy();
    let n_sub = spectra.n_subarrays();
    let mut nu: Vec<Vec<f64>> = alloc::vec![alloc::vec![e_x]; n_sub];
    let mut rho = Vec::with_capacity(t_max);
    let mut clamp_events = 0;
    for t in 0..t_max {
        let gains: Vec<f64> = spectra
            .per_subarray
            .iter()
            .zip(&nu)
            .map(|(eig, traj)| phi(traj[t], eig, noise_var))
            .collect();
        let r = clamp(1.0 / gains.iter().sum::<f64>(), &mut clamp_events);
        rho.push(r);
        if t + 1 == t_max {
            break;
        }
        let inv_mse0 = 1.0 / mse_denoiser(r, constellation);
        for (traj, g) in nu.iter_mut().zip(&gains) {
            let precision = inv_mse0 - g;
            let next = if precision > 0.0 { 1.0 / precision } else { f64::INFINITY };
            traj.push(clamp(next, &mut clamp_events));
        }
    }
    Ok(EvolutionState { rho, nu, clamp_events })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::make_qam;
    use alloc::vec;

    #[test]
    fn quadrature_integrates_moments() {
        let (x, w) = gauss_hermite(64);
        let pi = core::f64::consts::PI;
        assert!((w.iter().sum::<f64>() - pi.sqrt()).abs() < 1e-13);
        let second: f64 = x.iter().zip(&w).map(|(x, w)| w * x * x).sum();
        assert!((second - pi.sqrt() / 2.0).abs() < 1e-13);
        let fourth: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(4)).sum();
        assert!((fourth - 3.0 * pi.sqrt() / 4.0).abs() < 1e-12);
        assert!(x.windows(2).all(|p| p[0] > p[1]));
    }

    #[test]
    fn prior_only_subarray() {
        assert_eq!(mse_subarray(0.7, &[0.0; 5], 0.3), 0.7);
    }

    #[test]
    fn large_prior_limit() {
        let eig = [2.0, 0.5, 1.0];
        let limit = (0.1 / 2.0 + 0.1 / 0.5 + 0.1 / 1.0) / 3.0;
        assert!((mse_subarray(1e12, &eig, 0.1) - limit).abs() < 1e-9);
    }

    #[test]
    fn denoiser_mse_limits() {
        for order in [4, 16, 64] {
            let c = make_qam(order).unwrap();
            assert!(mse_denoiser(1e-10, &c) <= 1e-8);
            assert!((mse_denoiser(1e10, &c) - c.avg_energy()).abs() < 1e-6);
        }
    }

    #[test]
    fn qpsk_matches_monte_carlo() {
        use rand::SeedableRng;
        use rand_distr::{Distribution, StandardNormal};
        let c = make_qam(4).unwrap();
        let rho: f64 = 1.0;
        let s = 1.0 / 2f64.sqrt();
        let sd = (rho / 2.0).sqrt();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        let samples = 10_000_000usize;
        let (mut sum, mut sum_sq) = (0.0, 0.0);
        // one axis: symbol +s by symmetry, posterior mean s·tanh(2 s obs / ρ)
        for _ in 0..samples {
            let n: f64 = StandardNormal.sample(&mut rng);
            let obs = s + sd * n;
            let err = s - s * (2.0 * s * obs / rho).tanh();
            let e = 2.0 * err * err;
            sum += e;
            sum_sq += e * e;
        }
        let mean = sum / samples as f64;
        let se = ((sum_sq / samples as f64 - mean * mean) / samples as f64).sqrt();
        assert!((mse_denoiser(rho, &c) - mean).abs() <= 3.0 * se);
    }

    #[test]
    fn single_subarray_recursion() {
        let c = make_qam(4).unwrap();
        let eig = vec![3.0, 1.5, 0.2];
        let spectra = EigenSpectrum::new(vec![eig.clone()]).unwrap();
        let out = evolve(&spectra, 0.5, &c, 4).unwrap();
        let mut nu = c.avg_energy();
        for t in 0..4 {
            let rho = 1.0 / phi(nu, &eig, 0.5);
            assert_eq!(out.rho[t], rho);
            nu = 1.0 / (1.0 / mse_denoiser(rho, &c) - phi(nu, &eig, 0.5));
        }
        assert_eq!(out.nu[0].len(), 4);
        assert_eq!(out.nu[0][0], c.avg_energy());
    }

    #[test]
    fn small_blocks_pad_zero_eigenvalues() {
        let h = CMatrix::from_fn(4, 3, |i, j| crate::linalg::c64((i + j) as f64, 0.5));
        let part = crate::partition::partition_uniform(4, 2).unwrap();
        let s = EigenSpectrum::from_channel(&h, &part).unwrap();
        for (c, eig) in s.per_subarray.iter().enumerate() {
            assert_eq!(eig.len(), 3);
            assert_eq!(eig[2], 0.0);
            let trace = crate::linalg::real_trace(&gram(&part.block(&h, c)));
            assert!((eig.iter().sum::<f64>() - trace).abs() < 1e-10);
        }
    }
}
