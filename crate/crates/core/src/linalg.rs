//! Small dense symmetric solves used by the least-squares fits.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{Error, Result};

fn to_matrix(a: &[Vec<f64>]) -> Result<DMatrix<f64>> {
    let n = a.len();
    if a.iter().any(|r| r.len() != n) {
        return Err(Error::domain("matrix must be square"));
    }
    Ok(DMatrix::from_fn(n, n, |i, j| a[i][j]))
}

/// Ratio of extreme eigenvalue magnitudes of a symmetric matrix.
pub fn condition_number(a: &[Vec<f64>]) -> Result<f64> {
    let m = to_matrix(a)?;
    let eig = SymmetricEigen::new(m).eigenvalues;
    let max = eig.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let min = eig.iter().fold(f64::INFINITY, |m, v| m.min(v.abs()));
    Ok(if min == 0.0 { f64::INFINITY } else { max / min })
}

/// Solves `A·x = b` for symmetric positive definite `A` by Cholesky.
pub fn solve_spd(a: &[Vec<f64>], b: &[f64]) -> Result<Vec<f64>> {
    let m = to_matrix(a)?;
    if b.len() != a.len() {
        return Err(Error::domain("right-hand side length mismatch"));
    }
    let chol = m
        .cholesky()
        .ok_or_else(|| Error::domain("matrix is not positive definite"))?;
    Ok(chol.solve(&DVector::from_column_slice(b)).iter().copied().collect())
}
