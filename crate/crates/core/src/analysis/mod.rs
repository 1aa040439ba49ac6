//! State evolution, fixed-point diagnostics and complexity accounting.

mod complexity;
mod evolution;
mod residuals;

pub use complexity::{complexity_count, ComplexityParams, ComplexityReport, OpCounts, Scenario};
pub use evolution::{
    evolve, gauss_hermite, mse_denoiser, mse_subarray, phi, psi, EigenSpectrum, EvolutionState, QUADRATURE_NODES,
};
pub use residuals::{fixed_point_residuals, replica_check, Residuals};
