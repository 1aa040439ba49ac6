//! Per-subarray processing: prior message, LMMSE belief and extrinsic message.

use nalgebra::Complex;

use crate::error::{check_dim, Error, Result};
use crate::linalg::{c64, gram, invert_hpd, real_trace, CMatrix, CVector};

/// Local observation `y_b = H_b x_b + n_b` with cached `H_bᴴ H_b` and `H_bᴴ y_b`.
#[derive(Debug, Clone, PartialEq)]
pub struct Block {
    h: CMatrix,
    y: CVector,
    gram: CMatrix,
    matched: CVector,
}

impl Block {
    pub fn new(h: CMatrix, y: CVector) -> Result<Self> {
        check_dim("local observation", h.nrows(), y.len())?;
        let gram = gram(&h);
        let matched = h.ad_mul(&y);
        Ok(Self {
            h,
            y,
            gram,
            matched,
        })
    }

    pub fn h(&self) -> &CMatrix {
        &self.h
    }

    pub fn y(&self) -> &CVector {
        &self.y
    }

    pub fn n_rows(&self) -> usize {
        self.h.nrows()
    }

    pub fn n_users(&self) -> usize {
        self.h.ncols()
    }

    pub fn gram(&self) -> &CMatrix {
        &self.gram
    }

    /// Rows `start..start + len` as a block of their own.
    pub fn sub_block(&self, start: usize, len: usize) -> Result<Self> {
        Self::new(
            self.h.rows(start, len).into_owned(),
            self.y.rows(start, len).into_owned(),
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Inversion {
    /// Recursive rank-one updates for blocks of at most four rows, Cholesky otherwise.
    #[default]
    Auto,
    Direct,
    Recursive,
}

impl Inversion {
    pub fn resolve(self, rows: usize) -> Inversion {
        match self {
            Inversion::Auto if rows <= 4 => Inversion::Recursive,
            Inversion::Auto => Inversion::Direct,
            other => other,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Prior {
    pub tau: f64,
    pub gamma: CVector,
    pub floored: bool,
}

/// `τ = ω₀ - η`, `γ = (ω₀ x̂₀ - p) / τ` where `p = η r` is the unscaled
/// extrinsic mean. A non-positive `τ` is replaced by `floor`.
pub fn lpm_prior(omega0: f64, xhat0: &CVector, eta: f64, p: &CVector, floor: f64) -> Prior {
    let mut tau = omega0 - eta;
    let floored = !(tau > 0.0);
    if floored {
        tau = floor;
    }
    let gamma = (xhat0 * c64(omega0, 0.0) - p) / c64(tau, 0.0);
    Prior {
        tau,
        gamma,
        floored,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Lmmse {
    pub sigma: CMatrix,
    pub xhat: CVector,
    pub omega: f64,
}

/// Gaussian posterior of `x_b` under prior `CN(γ, τ⁻¹ I)`:
/// `Σ = (σ⁻² HᴴH + τ I)⁻¹`, `x̂ = Σ (σ⁻² Hᴴ y + τ γ)`, `ω = (tr Σ / K)⁻¹`.
pub fn lpm_lmmse(
    block: &Block,
    tau: f64,
    gamma: &CVector,
    noise_var: f64,
    inversion: Inversion,
) -> Result<Lmmse> {
    check_dim("prior mean", block.n_users(), gamma.len())?;
    let sigma = match inversion.resolve(block.n_rows()) {
        Inversion::Recursive => recursive_sigma(&block.h, tau, noise_var),
        _ => direct_sigma(&block.gram, tau, noise_var)?,
    };
    let rhs = &block.matched / c64(noise_var, 0.0) + gamma * c64(tau, 0.0);
    let xhat = &sigma * rhs;
    let omega = block.n_users() as f64 / real_trace(&sigma);
    Ok(Lmmse { sigma, xhat, omega })
}

/// `(σ⁻² G + τ I)⁻¹` by Cholesky, `G = HᴴH`.
pub fn direct_sigma(gram: &CMatrix, tau: f64, noise_var: f64) -> Result<CMatrix> {
    let k = gram.nrows();
    let a = gram / c64(noise_var, 0.0) + CMatrix::identity(k, k) * c64(tau, 0.0);
    invert_hpd(a).ok_or_else(|| {
        Error::Contract(alloc::format!("LMMSE system not positive definite (tau={tau})"))
    })
}

/// Conjugated row `j` of `H`, i.e. column `j` of `Hᴴ`.
fn conj_row(h: &CMatrix, j: usize) -> CVector {
    CVector::from_iterator(h.ncols(), h.row(j).iter().map(|z| z.conj()))
}

/// Closed form of `(τ I + σ⁻² h̄ h̄ᴴ)⁻¹`.
pub fn rank_one_sigma(hbar: &CVector, tau: f64, noise_var: f64) -> CMatrix {
    let k = hbar.len();
    let inv_tau = 1.0 / tau;
    let inv_noise = 1.0 / noise_var;
    let denom = 1.0 + inv_tau * inv_noise * hbar.norm_squared();
    let scale = inv_tau * inv_tau * inv_noise / denom;
    let mut sigma = CMatrix::identity(k, k) * c64(inv_tau, 0.0);
    sigma.gerc(c64(-scale, 0.0), hbar, hbar, Complex::new(1.0, 0.0));
    sigma
}

/// `(σ⁻² HᴴH + τ I)⁻¹` by one rank-one update per row of `H`, starting from
/// `τ⁻¹ I`. The first row uses the closed form of [`rank_one_sigma`].
pub fn recursive_sigma(h: &CMatrix, tau: f64, noise_var: f64) -> CMatrix {
    let k = h.ncols();
    if h.nrows() == 0 {
        return CMatrix::identity(k, k) * c64(1.0 / tau, 0.0);
    }
    let inv_noise = 1.0 / noise_var;
    let mut a_inv = rank_one_sigma(&conj_row(h, 0), tau, noise_var);
    for j in 1..h.nrows() {
        let hbar = conj_row(h, j);
        let u = &a_inv * &hbar;
        let quad = hbar.dotc(&u).re;
        let scale = inv_noise / (1.0 + inv_noise * quad);
        a_inv.gerc(c64(-scale, 0.0), &u, &u, Complex::new(1.0, 0.0));
    }
    a_inv
}

#[derive(Debug, Clone, PartialEq)]
pub struct Extrinsic {
    pub eta: f64,
    /// `η r = ω x̂ - τ γ`.
    pub p: CVector,
    pub floored: bool,
}

/// `η = max(ω - τ, floor)` and the division-free mean `p = ω x̂ - τ γ`.
pub fn lpm_extrinsic(omega: f64, xhat: &CVector, tau: f64, gamma: &CVector, floor: f64) -> Extrinsic {
    let raw = omega - tau;
    let floored = !(raw >= floor);
    let eta = if floored { floor } else { raw };
    let p = xhat * c64(omega, 0.0) - gamma * c64(tau, 0.0);
    Extrinsic { eta, p, floored }
}
