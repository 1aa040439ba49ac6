//! Thin helpers over `nalgebra` for the complex dense algebra used throughout.

use alloc::vec::Vec;
use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex;

pub type C64 = Complex<f64>;
pub type CMatrix = DMatrix<C64>;
pub type CVector = DVector<C64>;

#[inline]
pub fn c64(re: f64, im: f64) -> C64 {
    Complex::new(re, im)
}

/// `Hᴴ H`.
pub fn gram(h: &CMatrix) -> CMatrix {
    h.ad_mul(h)
}

/// Real part of the trace of a square matrix.
pub fn real_trace(a: &CMatrix) -> f64 {
    (0..a.nrows()).map(|i| a[(i, i)].re).sum()
}

/// Eigenvalues of a Hermitian matrix, sorted in descending order.
pub fn hermitian_eigenvalues(a: &CMatrix) -> Vec<f64> {
    if a.nrows() == 0 {
        return Vec::new();
    }
    let eig = SymmetricEigen::new(a.clone());
    let mut values: Vec<f64> = eig.eigenvalues.iter().copied().collect();
    values.sort_by(|x, y| y.total_cmp(x));
    values
}

/// Symmetric square root of a real symmetric positive-semidefinite matrix.
///
/// Eigenvalues below `1e-12` are treated as round-off and clamped to zero.
pub fn psd_sqrt(a: &DMatrix<f64>) -> DMatrix<f64> {
    let eig = SymmetricEigen::new(a.clone());
    let roots = eig
        .eigenvalues
        .map(|l| if l < 1e-12 { 0.0 } else { num_traits::Float::sqrt(l) });
    let v = &eig.eigenvectors;
    let scaled = DMatrix::from_fn(v.nrows(), v.ncols(), |i, j| v[(i, j)] * roots[j]);
    scaled * v.transpose()
}

/// Inverse of a Hermitian positive-definite matrix via Cholesky.
pub fn invert_hpd(a: CMatrix) -> Option<CMatrix> {
    a.cholesky().map(|c| c.inverse())
}

pub fn max_abs_diff(a: &CMatrix, b: &CMatrix) -> f64 {
    a.iter()
        .zip(b.iter())
        .map(|(x, y)| (x - y).norm())
        .fold(0.0, f64::max)
}

pub fn squared_norm(v: &CVector) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum()
}
