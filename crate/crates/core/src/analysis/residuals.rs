//! Fixed-point diagnostics of a detector state.


#[allow(unused_imports)]
use num_traits::Float;
use crate::detector::EpState;
use crate::error::{invalid, Error, Result};
use crate::linalg::{hermitian_eigenvalues, gram, squared_norm, CMatrix};

/// Relative deviations from the fixed-point identities. Every field is zero
/// at an exact fixed point.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Residuals {
    /// `max_b |ω_b - ω₀| / ω₀` over active blocks.
    pub omega_spread: f64,
    /// `|ω₀ - (τ₀ + Σ_b τ_b) / B| / ω₀`; only defined when `τ₀` is shared by all users.
    pub omega_identity: Option<f64>,
    /// `max_b ‖x̂_b - x̂₀‖ / ‖x̂₀‖` with `x̂₀` restricted to the block's users.
    pub mean_spread: f64,
    /// Largest relative mismatch of the average second moments.
    pub second_moment_spread: f64,
}

fn relative(diff: f64, scale: f64) -> f64 {
    if scale > 0.0 {
        diff / scale
    } else {
        diff
    }
}

pub fn fixed_point_residuals(state: &EpState) -> Residuals {
    let mut out = Residuals::default();
    let omega0 = state.omega0;
    let mut tau_sum = 0.0;
    let mut n_blocks = 0usize;
    for sub in &state.subarrays {
        if sub.blocks.is_empty() {
            continue;
        }
        let xhat0 = state.restricted_xhat0(&sub.users);
        let k = sub.users.len() as f64;
        let x0_norm = squared_norm(&xhat0);
        let v0: f64 = sub.users.iter().map(|&u| state.v0[u]).sum();
        let m0 = (x0_norm + v0) / k;
        for b in &sub.blocks {
            n_blocks += 1;
            tau_sum += b.tau;
            out.omega_spread = out.omega_spread.max(relative((b.omega - omega0).abs(), omega0));
            let d = (&b.xhat - &xhat0).norm();
            out.mean_spread = out.mean_spread.max(relative(d, x0_norm.sqrt()));
            let m = (squared_norm(&b.xhat) + k / b.omega) / k;
            out.second_moment_spread = out.second_moment_spread.max(relative((m - m0).abs(), m0));
        }
    }
    if state.full_model && n_blocks > 0 {
        if let Some(&tau0) = state.tau0.first() {
            let avg = (tau0 + tau_sum) / n_blocks as f64;
            out.omega_identity = Some(relative((omega0 - avg).abs(), omega0));
        }
    }
    out
}

/// Relative gap between the detector's combined precision `tau0` and the
/// value predicted from the spectrum of `HᴴH` at posterior precision `omega`.
///
/// Solves `(1/K) Σ 1 / (λ_i/σ² + t) = 1/ω` for `t` by bisection on a
/// logarithmic bracket and returns `|τ₀ - (ω - t)| / τ₀`.
pub fn replica_check(h: &CMatrix, noise_var: f64, omega: f64, tau0: f64) -> Result<f64> {
    if !(noise_var > 0.0 && omega > 0.0 && tau0 > 0.0) {
        return Err(invalid("noise variance, omega and tau0 must be positive"));
    }
    let eig = hermitian_eigenvalues(&gram(h));
    let k = eig.len() as f64;
    let target = 1.0 / omega;
    let resolvent = |t: f64| eig.iter().map(|&l| 1.0 / (l.max(0.0) / noise_var + t)).sum::<f64>() / k;
    let (mut lo, mut hi) = (1e-12f64, 1e12f64);
    let (f_lo, f_hi) = (resolvent(lo), resolvent(hi));
    if !(f_lo >= target && target >= f_hi) {
        return Err(Error::NoRoot(alloc::format!(
            "resolvent range [{f_hi:e}, {f_lo:e}] does not contain 1/omega = {target:e}"
        )));
    }
    while hi / lo - 1.0 > 1e-10 {
        let mid = (lo * hi).sqrt();
        if resolvent(mid) >= target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let t = (lo * hi).sqrt();
    Ok((tau0 - (omega - t)).abs() / tau0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::detector::{BlockState, SubarrayState};
    use crate::linalg::{c64, CVector};
    use alloc::vec;

    fn exact_fixed_point() -> EpState {
        let xhat = CVector::from_vec(vec![c64(0.5, -0.5), c64(-0.7, 0.1)]);
        let omega = 4.0;
        let etas = [1.5, 2.5];
        let subarrays = etas
            .iter()
            .map(|&eta| SubarrayState {
                users: vec![0, 1],
                blocks: vec![BlockState {
                    tau: omega - eta,
                    gamma: xhat.clone(),
                    eta,
                    p: &xhat * c64(eta, 0.0),
                    omega,
                    xhat: xhat.clone(),
                }],
                eta,
                p: &xhat * c64(eta, 0.0),
            })
            .collect();
        EpState {
            subarrays,
            tau0: vec![4.0, 4.0],
            p0: &xhat * c64(4.0, 0.0),
            gamma0: xhat.clone(),
            omega0: omega,
            xhat0: xhat,
            v0: vec![0.25, 0.25],
            iteration: 1,
            full_model: true,
        }
    }

    #[test]
    fn exact_fixed_point_has_zero_residuals() {
        let r = fixed_point_residuals(&exact_fixed_point());
        assert_eq!(r.omega_spread, 0.0);
        assert_eq!(r.omega_identity, Some(0.0));
        assert_eq!(r.mean_spread, 0.0);
        assert_eq!(r.second_moment_spread, 0.0);
    }

    #[test]
    fn perturbation_shows_up() {
        let mut s = exact_fixed_point();
        s.subarrays[1].blocks[0].omega = 5.0;
        let r = fixed_point_residuals(&s);
        assert!((r.omega_spread - 0.25).abs() < 1e-15);
        assert!(r.second_moment_spread > 0.0);
    }

    #[test]
    fn replica_root_is_recovered() {
        let h = CMatrix::from_fn(6, 3, |i, j| c64((i * 3 + j) as f64 * 0.1, (i as f64 - j as f64) * 0.2));
        let eig = hermitian_eigenvalues(&gram(&h));
        let (noise, t) = (0.3, 0.8);
        let omega = 3.0 / eig.iter().map(|&l| 1.0 / (l / noise + t)).sum::<f64>();
        let err = replica_check(&h, noise, omega, omega - t).unwrap();
        assert!(err < 1e-8);
    }

    #[test]
    fn replica_without_root() {
        let h = CMatrix::identity(3, 3);
        // 1/omega above the resolvent at the smallest bracket point
        assert!(matches!(replica_check(&h, 1.0, 0.5, 1.0), Err(Error::NoRoot(_))));
    }
}
