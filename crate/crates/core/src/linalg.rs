//! Small dense helpers: spectral norms and column orthonormalization.

use nalgebra::DMatrix;

use crate::error::{dim_err, Result};
use crate::tensor::DenseMatrix;

const POWER_TOL: f64 = 1e-10;
const POWER_MAX_ITER: usize = 1000;

/// Outcome of a squared spectral norm computation.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NormEstimate {
    /// `|m|_2^2`, the largest eigenvalue of `m^T m`.
    pub value: f64,
    pub iterations: usize,
    /// True when power iteration hit its cap and the value came from a dense
    /// symmetric eigendecomposition instead.
    pub fallback: bool,
}

/// Squared spectral norm `|m|_2^2` by power iteration on the smaller Gram
/// matrix, with a dense eigensolver fallback when the iteration cap is hit.
///
/// The start vector is deterministic but deliberately not constant: constant
/// vectors lie in the null space of difference operators and would stall.
pub fn spectral_norm_sq(m: &DenseMatrix) -> NormEstimate {
    if m.rows() == 0 || m.cols() == 0 || m.frobenius_norm() == 0.0 {
        return NormEstimate {
            value: 0.0,
            iterations: 0,
            fallback: false,
        };
    }
    let a = m.to_nalgebra();
    let gram = if a.nrows() < a.ncols() {
        &a * a.transpose()
    } else {
        a.transpose() * &a
    };
    let n = gram.nrows();
    let mut v = nalgebra::DVector::from_fn(n, |j, _| 1.0 + ((j * 7919) % 101) as f64 / 101.0);
    v /= v.norm();
    let mut lambda = 0.0;
    for it in 1..=POWER_MAX_ITER {
        let w = &gram * &v;
        let next = v.dot(&w);
        let norm = w.norm();
        if norm == 0.0 {
            break;
        }
        v = w / norm;
        if it > 1 && (next - lambda).abs() <= POWER_TOL * next.abs() {
            return NormEstimate {
                value: next,
                iterations: it,
                fallback: false,
            };
        }
        lambda = next;
    }
    let eig = gram.symmetric_eigen();
    NormEstimate {
        value: eig.eigenvalues.iter().fold(0.0f64, |m, &e| m.max(e)),
        iterations: POWER_MAX_ITER,
        fallback: true,
    }
}

/// Orthonormalizes the columns of `m` with two passes of modified
/// Gram-Schmidt. Columns must be linearly independent.
pub fn orthonormalize_columns(m: &DenseMatrix) -> Result<DenseMatrix> {
    let (rows, cols) = (m.rows(), m.cols());
    if cols > rows {
        return dim_err(format!(
            "cannot orthonormalize {cols} columns in dimension {rows}"
        ));
    }
    let mut q: DMatrix<f64> = m.to_nalgebra();
    for j in 0..cols {
        for _ in 0..2 {
            for k in 0..j {
                let proj = q.column(k).dot(&q.column(j));
                let qk = q.column(k).into_owned();
                q.column_mut(j).axpy(-proj, &qk, 1.0);
            }
        }
        let norm = q.column(j).norm();
        if norm <= 1e-12 * m.frobenius_norm().max(1.0) {
            return dim_err(format!(
                "column {j} is linearly dependent on the previous ones"
            ));
        }
        q.column_mut(j).unscale_mut(norm);
    }
    Ok(DenseMatrix::from_nalgebra(&q))
}

/// Analytic `|D_N|_2^2 = 2 - 2 cos(pi (N - 1) / N)` for the forward difference.
pub fn diff_norm_sq(n: usize) -> f64 {
    if n < 2 {
        return 0.0;
    }
    2.0 - 2.0 * (std::f64::consts::PI * (n - 1) as f64 / n as f64).cos()
}
