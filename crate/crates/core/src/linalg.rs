//! Thin wrappers over the dense eigensolvers used throughout the crate.

use faer::{Mat, Side};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type RMat = Mat<f64>;
pub type CMat = Mat<Complex64>;

/// Eigenvalues of a real symmetric matrix, ascending.
pub fn sym_eigenvalues(a: &RMat) -> Result<Vec<f64>> {
    a.self_adjoint_eigenvalues(Side::Lower)
        .map_err(|e| Error::Linalg(format!("{e:?}")))
}

/// Eigenvalues (ascending) and eigenvectors (columns) of a real symmetric matrix.
pub fn sym_eigen(a: &RMat) -> Result<(Vec<f64>, RMat)> {
    let evd = a
        .self_adjoint_eigen(Side::Lower)
        .map_err(|e| Error::Linalg(format!("{e:?}")))?;
    let vals = evd.S().column_vector().iter().copied().collect();
    Ok((vals, evd.U().to_owned()))
}

/// Eigenvalues of a complex Hermitian matrix, ascending.
pub fn herm_eigenvalues(a: &CMat) -> Result<Vec<f64>> {
    a.self_adjoint_eigenvalues(Side::Lower)
        .map_err(|e| Error::Linalg(format!("{e:?}")))
}

/// Eigenvalues (ascending) and eigenvectors of a complex Hermitian matrix.
pub fn herm_eigen(a: &CMat) -> Result<(Vec<f64>, CMat)> {
    let evd = a
        .self_adjoint_eigen(Side::Lower)
        .map_err(|e| Error::Linalg(format!("{e:?}")))?;
    let vals = evd.S().column_vector().iter().map(|z| z.re).collect();
    Ok((vals, evd.U().to_owned()))
}

/// Singular values of a complex matrix, nonincreasing.
pub fn singular_values(a: &CMat) -> Result<Vec<f64>> {
    a.singular_values()
        .map_err(|e| Error::Linalg(format!("{e:?}")))
}

/// Full SVD `a = U diag(s) V^*`; returns `(U, s, V)`.
pub fn svd(a: &CMat) -> Result<(CMat, Vec<f64>, CMat)> {
    let d = a.svd().map_err(|e| Error::Linalg(format!("{e:?}")))?;
    let s = d.S().column_vector().iter().map(|z| z.re).collect();
    Ok((d.U().to_owned(), s, d.V().to_owned()))
}

/// Largest entrywise modulus of `a - a^*`.
pub fn hermitian_defect(a: &CMat) -> f64 {
    let n = a.nrows();
    let mut worst = 0.0f64;
    for i in 0..n {
        for j in 0..n {
            worst = worst.max((a[(i, j)] - a[(j, i)].conj()).norm());
        }
    }
    worst
}

/// Spectral norm of a real symmetric matrix.
pub fn sym_norm(a: &RMat) -> Result<f64> {
    Ok(sym_eigenvalues(a)?
        .iter()
        .fold(0.0f64, |acc, v| acc.max(v.abs())))
}

/// Operator 2-norm of a complex matrix.
pub fn op_norm(a: &CMat) -> Result<f64> {
    Ok(singular_values(a)?.first().copied().unwrap_or(0.0))
}

/// `sorted ascending` helper for symmetry checks: max_k |e_k + e_{n-1-k}|.
pub fn reflection_defect(sorted: &[f64]) -> f64 {
    let n = sorted.len();
    (0..n)
        .map(|k| (sorted[k] + sorted[n - 1 - k]).abs())
        .fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hermitian_eigenvalues_of_pauli_y() {
        let a = CMat::from_fn(2, 2, |i, j| match (i, j) {
            (0, 1) => Complex64::new(0.0, -1.0),
            (1, 0) => Complex64::new(0.0, 1.0),
            _ => Complex64::new(0.0, 0.0),
        });
        let e = herm_eigenvalues(&a).unwrap();
        assert!((e[0] + 1.0).abs() < 1e-14 && (e[1] - 1.0).abs() < 1e-14);
        assert_eq!(hermitian_defect(&a), 0.0);
    }

    #[test]
    fn reflection_defect_detects_asymmetry() {
        assert_eq!(reflection_defect(&[-2.0, -1.0, 1.0, 2.0]), 0.0);
        assert!(reflection_defect(&[-2.0, 0.0, 1.0]) > 0.5);
    }
}
