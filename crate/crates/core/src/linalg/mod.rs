//! Dense linear algebra, FFT and the buffer ledger.
//!
//! Everything here is deterministic: each output element has a single fixed
//! reduction order, and parallelism only ever splits independent rows.

mod cholesky;
mod fft;
pub mod ledger;
mod matrix;
mod tridiag;

pub use cholesky::{
    cholesky, cholesky_with_policy, logdet_from_chol, trisolve, trisolve_vec, CholeskyFactor, JitterPolicy, TriMode,
};
pub(crate) use cholesky::solve_in_place;
pub use fft::{fft_circulant_matvec, fft_in_place, CirculantOperator};
pub use matrix::{Matrix, Vector};
pub use tridiag::symmetric_tridiagonal_eigen;

use crate::error::{check_dim, Result};
use crate::parallel;

/// Inner product with four interleaved partial sums.
///
/// The summation order depends only on the length, so the result is
/// reproducible bit-for-bit and `dot(a, b) == dot(b, a)`.
#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len().min(b.len());
    let (a, b) = (&a[..n], &b[..n]);
    if n < 4 {
        // Same value the general path produces: the partial sums are all zero.
        let mut tail = 0.0;
        for i in 0..n {
            tail += a[i] * b[i];
        }
        return tail;
    }
    let mut acc = [0.0f64; 4];
    let chunks = n / 4;
    for c in 0..chunks {
        let i = 4 * c;
        acc[0] += a[i] * b[i];
        acc[1] += a[i + 1] * b[i + 1];
        acc[2] += a[i + 2] * b[i + 2];
        acc[3] += a[i + 3] * b[i + 3];
    }
    let mut tail = 0.0;
    for i in 4 * chunks..n {
        tail += a[i] * b[i];
    }
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

/// `y += alpha * x`
#[inline]
pub fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    debug_assert_eq!(x.len(), y.len());
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

pub fn norm2(x: &[f64]) -> f64 {
    dot(x, x).sqrt()
}

pub fn norm_inf(x: &[f64]) -> f64 {
    x.iter().fold(0.0, |m, v| m.max(v.abs()))
}

/// `op(A) * op(B)` where `op` optionally transposes.
///
/// Each output element is `dot(row_i(op(A)), col_j(op(B)))`; operands that are
/// not already laid out that way are copied into a transposed buffer first.
pub fn matmul(a: &Matrix, b: &Matrix, transpose_a: bool, transpose_b: bool) -> Result<Matrix> {
    let a_t;
    let lhs = if transpose_a {
        a_t = a.transpose();
        &a_t
    } else {
        a
    };
    // `rhs_rows` holds op(B) transposed: one row per output column.
    let b_t;
    let rhs_rows = if transpose_b {
        b
    } else {
        b_t = b.transpose();
        &b_t
    };
    check_dim("matmul", lhs.cols(), rhs_rows.cols())?;
    let (m, n) = (lhs.rows(), rhs_rows.rows());
    let mut out = Matrix::zeros(m, n);
    parallel::for_each_row_mut(out.as_mut_slice(), n, |i, row| {
        let ai = lhs.row(i);
        for (j, c) in row.iter_mut().enumerate() {
            *c = dot(ai, rhs_rows.row(j));
        }
    });
    Ok(out)
}

/// Squared norm of every row.
pub fn row_sq_norms(x: &Matrix) -> Vector {
    let mut out = Vector::zeros(x.rows());
    parallel::for_each_mut(out.as_mut_slice(), |i, o| {
        let r = x.row(i);
        *o = dot(r, r);
    });
    out
}

/// Squared Euclidean distances between all rows of `x` and `y`.
///
/// Uses the expansion `|x|^2 + |y|^2 - 2 x.y`: the `X Y^T` product and the
/// row and column norm corrections are fused into a single pass per output
/// row. Cancellation can produce tiny negatives; those are clamped to zero.
pub fn pairwise_sqdist(x: &Matrix, y: &Matrix) -> Result<Matrix> {
    sqdist_map(x, y, |d| d)
}

/// `f` applied to every entry of [`pairwise_sqdist`], without a second pass.
pub(crate) fn sqdist_map(x: &Matrix, y: &Matrix, f: impl Fn(f64) -> f64 + Sync + Send) -> Result<Matrix> {
    check_dim("pairwise_sqdist", x.cols(), y.cols())?;
    let ny = row_sq_norms(y);
    let m = y.rows();
    let mut g = Matrix::zeros(x.rows(), m);
    parallel::for_each_row_mut(g.as_mut_slice(), m, |i, row| {
        let xi = x.row(i);
        let a = dot(xi, xi);
        for (j, (c, b)) in row.iter_mut().zip(ny.iter()).enumerate() {
            let d = a + b - 2.0 * dot(xi, y.row(j));
            *c = f(if d > 0.0 { d } else { 0.0 });
        }
    });
    Ok(g)
}
