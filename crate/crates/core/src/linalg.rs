//! Dense determinants and condition numbers.

use nalgebra::{DMatrix, Dyn, Matrix};

/// Determinant of a square row-major matrix by LU with partial pivoting.
pub fn det(n: usize, row_major: &[f64]) -> f64 {
    assert_eq!(row_major.len(), n * n, "matrix data must be n*n");
    if n == 0 {
        return 1.0;
    }
    DMatrix::from_row_slice(n, n, row_major).lu().determinant()
}

/// Determinant of a square matrix built entry-wise from `f(row, col)`.
pub fn det_from_fn(n: usize, f: impl FnMut(usize, usize) -> f64) -> f64 {
    if n == 0 {
        return 1.0;
    }
    let m: DMatrix<f64> = Matrix::from_fn_generic(Dyn(n), Dyn(n), f);
    m.lu().determinant()
}

/// 2-norm condition number `σ_max / σ_min`; infinite for singular input.
pub fn condition_number(n: usize, row_major: &[f64]) -> f64 {
    assert_eq!(row_major.len(), n * n, "matrix data must be n*n");
    let sv = DMatrix::from_row_slice(n, n, row_major).singular_values();
    let max = sv.max();
    let min = sv.min();
    if min == 0.0 {
        f64::INFINITY
    } else {
        max / min
    }
}
