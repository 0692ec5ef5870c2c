//! Dense complex linear-algebra helpers shared by the solver blocks.
//!
//! Matrices and vectors are `nalgebra` dynamic types over `Complex64`.
//! Channel "row vectors" (for example `h_r`, `h_d`, `d`) are stored as
//! `DVector`s holding the row entries; callers transpose explicitly where
//! the algebra needs it.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

pub type C64 = Complex64;
pub type CMat = DMatrix<C64>;
pub type CVec = DVector<C64>;

pub const ZERO: C64 = C64 { re: 0.0, im: 0.0 };
pub const ONE: C64 = C64 { re: 1.0, im: 0.0 };

/// `e^{jθ}`.
#[inline]
pub fn cis(theta: f64) -> C64 {
    C64::from_polar(1.0, theta)
}

/// Unit-modulus phase vector for a list of phase shifts.
pub fn phase_vector(theta: &[f64]) -> CVec {
    CVec::from_iterator(theta.len(), theta.iter().map(|&t| cis(t)))
}

/// Wraps an angle into `[0, 2π)`.
pub fn wrap_phase(theta: f64) -> f64 {
    let tau = std::f64::consts::TAU;
    let w = theta.rem_euclid(tau);
    if w >= tau {
        0.0
    } else {
        w
    }
}

/// Wraps an angle into `(-π, π]`.
pub fn wrap_signed(theta: f64) -> f64 {
    let pi = std::f64::consts::PI;
    let w = wrap_phase(theta + pi) - pi;
    if w <= -pi {
        w + std::f64::consts::TAU
    } else {
        w
    }
}

/// Real part of `Tr(A^H B)`.
pub fn inner_real(a: &CMat, b: &CMat) -> f64 {
    debug_assert_eq!(a.shape(), b.shape());
    a.iter().zip(b.iter()).map(|(x, y)| (x.conj() * y).re).sum()
}

pub fn frobenius_sq(a: &CMat) -> f64 {
    a.iter().map(|z| z.norm_sqr()).sum()
}

/// Eigendecomposition of a Hermitian matrix. Eigenvalues are returned in
/// ascending order with the matching eigenvectors as columns.
///
/// Only the lower triangle is read.
pub fn hermitian_eigen(m: &CMat) -> (Vec<f64>, CMat) {
    let n = m.nrows();
    assert_eq!(n, m.ncols(), "hermitian_eigen needs a square matrix");
    if n == 0 {
        return (Vec::new(), CMat::zeros(0, 0));
    }
    let fm = faer::Mat::<faer::c64>::from_fn(n, n, |i, j| m[(i, j)]);
    let evd = fm
        .self_adjoint_eigen(faer::Side::Lower)
        .expect("self-adjoint eigendecomposition failed to converge");
    let s = evd.S().column_vector();
    let u = evd.U();
    let values = (0..n).map(|i| s[i].re).collect();
    let vectors = CMat::from_fn(n, n, |i, j| u[(i, j)]);
    (values, vectors)
}

/// Smallest eigenvalue of a Hermitian matrix.
pub fn min_eigenvalue(m: &CMat) -> f64 {
    let fm = faer::Mat::<faer::c64>::from_fn(m.nrows(), m.ncols(), |i, j| m[(i, j)]);
    let vals = fm
        .self_adjoint_eigenvalues(faer::Side::Lower)
        .expect("self-adjoint eigenvalues failed to converge");
    vals.into_iter().fold(f64::INFINITY, f64::min)
}

/// Forces exact Hermitian symmetry, `(A + A^H) / 2`.
pub fn hermitize(m: &mut CMat) {
    let n = m.nrows();
    for i in 0..n {
        m[(i, i)].im = 0.0;
        for j in 0..i {
            let avg = (m[(i, j)] + m[(j, i)].conj()) * 0.5;
            m[(i, j)] = avg;
            m[(j, i)] = avg.conj();
        }
    }
}

/// Largest deviation from Hermitian symmetry.
pub fn hermitian_defect(m: &CMat) -> f64 {
    let n = m.nrows();
    let mut worst: f64 = 0.0;
    for i in 0..n {
        for j in 0..=i {
            worst = worst.max((m[(i, j)] - m[(j, i)].conj()).norm());
        }
    }
    worst
}

/// Row vector (stored as column entries) times matrix: `r^T M`, returned as
/// a column holding the row entries.
pub fn row_times(row: &CVec, m: &CMat) -> CVec {
    m.tr_mul(row)
}

/// Unconjugated dot product `Σ a_i b_i`.
pub fn dotu(a: &CVec, b: &CVec) -> C64 {
    a.iter().zip(b.iter()).map(|(x, y)| x * y).sum()
}
