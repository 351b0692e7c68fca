//! Small dense linear-algebra helpers over `nalgebra`.

use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

pub type Matrix = DMatrix<f64>;

pub fn from_rows(rows: &[Vec<f64>]) -> Matrix {
    let n = rows.len();
    let m = rows.first().map_or(0, Vec::len);
    DMatrix::from_fn(n, m, |i, j| rows[i][j])
}

pub fn to_rows(m: &Matrix) -> Vec<Vec<f64>> {
    (0..m.nrows())
        .map(|i| (0..m.ncols()).map(|j| m[(i, j)]).collect())
        .collect()
}

pub fn diag(values: &[f64]) -> Matrix {
    DMatrix::from_diagonal(&DVector::from_column_slice(values))
}

pub fn symmetrize(m: &Matrix) -> Matrix {
    (m + m.transpose()) * 0.5
}

pub fn is_positive_definite(m: &Matrix) -> bool {
    m.is_square() && m.clone().cholesky().is_some()
}

/// Solves `a x = b` for symmetric positive definite `a`.
pub fn solve_spd(a: &Matrix, b: &[f64]) -> Option<Vec<f64>> {
    let chol = a.clone().cholesky()?;
    let x = chol.solve(&DVector::from_column_slice(b));
    x.iter().all(|v| v.is_finite()).then(|| x.iter().copied().collect())
}

/// Solves a general square system with full pivoting.
pub fn solve_general(a: Matrix, b: &[f64]) -> Option<Vec<f64>> {
    let x = a.full_piv_lu().solve(&DVector::from_column_slice(b))?;
    x.iter().all(|v| v.is_finite()).then(|| x.iter().copied().collect())
}

pub fn inverse(m: &Matrix) -> Result<Matrix> {
    if !m.is_square() {
        return Err(Error::DimensionMismatch("matrix is not square"));
    }
    let inv = m.clone().try_inverse().ok_or(Error::SingularMatrix)?;
    if inv.iter().all(|v| v.is_finite()) {
        Ok(inv)
    } else {
        Err(Error::SingularMatrix)
    }
}

/// `a⁻¹ m a⁻¹` for symmetric `a`, symmetrized against roundoff.
pub fn sandwich(a: &Matrix, m: &Matrix) -> Result<Matrix> {
    let inv = inverse(a)?;
    Ok(symmetrize(&(&inv * m * &inv)))
}
