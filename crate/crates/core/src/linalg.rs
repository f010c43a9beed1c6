//! Dense complex linear algebra used throughout the crate.
//!
//! Everything here works on small Hermitian matrices (d up to a few thousand),
//! so a full symmetric eigendecomposition is always affordable.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

pub type C64 = Complex64;
pub type CMatrix = DMatrix<C64>;
pub type CVector = DVector<C64>;

pub const HERMITIAN_TOL: f64 = 1e-9;
pub const PSD_TOL: f64 = 1e-9;
pub const COMPLETENESS_TOL: f64 = 1e-8;

#[inline]
pub fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

#[inline]
pub fn re(x: f64) -> C64 {
    C64::new(x, 0.0)
}

pub fn hermitize(m: &CMatrix) -> CMatrix {
    (m + m.adjoint()) * re(0.5)
}

pub fn max_abs_entry(m: &CMatrix) -> f64 {
    m.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

pub fn is_hermitian(m: &CMatrix, tol: f64) -> bool {
    m.is_square() && max_abs_entry(&(m - m.adjoint())) <= tol
}

pub fn is_unitary(u: &CMatrix, tol: f64) -> bool {
    u.is_square()
        && max_abs_entry(&(u.adjoint() * u - CMatrix::identity(u.nrows(), u.ncols()))) <= tol
}

pub fn trace(m: &CMatrix) -> C64 {
    m.diagonal().iter().sum()
}

/// Eigenvalues (ascending) and matching eigenvector columns of the Hermitian
/// part of `m`.
pub fn hermitian_eigen(m: &CMatrix) -> (Vec<f64>, CMatrix) {
    let eig = hermitize(m).symmetric_eigen();
    let n = eig.eigenvalues.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vectors = CMatrix::from_fn(n, n, |r, col| eig.eigenvectors[(r, order[col])]);
    (values, vectors)
}

pub fn hermitian_eigenvalues(m: &CMatrix) -> Vec<f64> {
    let mut v: Vec<f64> = hermitize(m)
        .symmetric_eigenvalues()
        .iter()
        .copied()
        .collect();
    v.sort_by(f64::total_cmp);
    v
}

/// Sum of absolute eigenvalues of a Hermitian matrix.
pub fn trace_norm(m: &CMatrix) -> f64 {
    hermitian_eigenvalues(m).iter().map(|l| l.abs()).sum()
}

/// Applies `f` to the spectrum of a Hermitian matrix.
pub fn hermitian_map(m: &CMatrix, f: impl Fn(f64) -> f64) -> CMatrix {
    let (vals, vecs) = hermitian_eigen(m);
    let d = CMatrix::from_diagonal(&CVector::from_iterator(
        vals.len(),
        vals.iter().map(|&l| re(f(l))),
    ));
    &vecs * d * vecs.adjoint()
}

/// Principal square root of a PSD matrix; small negative eigenvalues are clipped.
pub fn psd_sqrt(m: &CMatrix) -> CMatrix {
    hermitian_map(m, |l| l.max(0.0).sqrt())
}

/// `exp(scale * m)` for Hermitian `m`, shifted by the top eigenvalue for
/// stability and renormalised to unit trace when `normalize` is set.
pub fn hermitian_exp(m: &CMatrix, scale: f64, normalize: bool) -> CMatrix {
    let (vals, vecs) = hermitian_eigen(m);
    let shift = vals
        .iter()
        .map(|&l| scale * l)
        .fold(f64::NEG_INFINITY, f64::max);
    let mut w: Vec<f64> = vals.iter().map(|&l| (scale * l - shift).exp()).collect();
    if normalize {
        let z: f64 = w.iter().sum();
        w.iter_mut().for_each(|x| *x /= z);
    } else {
        w.iter_mut().for_each(|x| *x *= shift.exp());
    }
    let d = CMatrix::from_diagonal(&CVector::from_iterator(w.len(), w.into_iter().map(re)));
    &vecs * d * vecs.adjoint()
}

pub fn kron(a: &CMatrix, b: &CMatrix) -> CMatrix {
    a.kronecker(b)
}

pub fn kron_vec(a: &CVector, b: &CVector) -> CVector {
    a.kronecker(b)
}

pub fn outer(v: &CVector) -> CMatrix {
    v * v.adjoint()
}

pub fn identity(d: usize) -> CMatrix {
    CMatrix::identity(d, d)
}

/// Single-qubit gates used as basis rotations.
pub mod gates {
    use super::{c, re, CMatrix};
    use std::f64::consts::FRAC_1_SQRT_2;

    pub fn hadamard() -> CMatrix {
        CMatrix::from_row_slice(
            2,
            2,
            &[
                re(FRAC_1_SQRT_2),
                re(FRAC_1_SQRT_2),
                re(FRAC_1_SQRT_2),
                re(-FRAC_1_SQRT_2),
            ],
        )
    }

    pub fn pauli_x() -> CMatrix {
        CMatrix::from_row_slice(2, 2, &[re(0.0), re(1.0), re(1.0), re(0.0)])
    }

    pub fn pauli_y() -> CMatrix {
        CMatrix::from_row_slice(2, 2, &[re(0.0), c(0.0, -1.0), c(0.0, 1.0), re(0.0)])
    }

    pub fn pauli_z() -> CMatrix {
        CMatrix::from_row_slice(2, 2, &[re(1.0), re(0.0), re(0.0), re(-1.0)])
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exp_of_diagonal() {
        let m = CMatrix::from_diagonal(&CVector::from_vec(vec![re(0.0), re(1.0)]));
        let e = hermitian_exp(&m, 1.0, false);
        assert!((e[(1, 1)].re - 1f64.exp()).abs() < 1e-12);
        let n = hermitian_exp(&m, 1.0, true);
        assert!((trace(&n).re - 1.0).abs() < 1e-12);
    }

    #[test]
    fn sqrt_squares_back() {
        let a = CMatrix::from_row_slice(2, 2, &[re(0.6), c(0.1, 0.2), c(0.1, -0.2), re(0.3)]);
        let s = psd_sqrt(&a);
        assert!(max_abs_entry(&(&s * &s - &a)) < 1e-12);
    }

    #[test]
    fn trace_norm_of_pauli() {
        assert!((trace_norm(&gates::pauli_y()) - 2.0).abs() < 1e-12);
        assert!(is_unitary(&gates::hadamard(), 1e-12));
    }
}
