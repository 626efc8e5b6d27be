use std::fmt;
use std::ops::{Deref, DerefMut, Index, IndexMut};

use super::ledger;
use crate::error::{GpError, Result};

/// Ledger-tracked `f64` storage shared by [`Vector`] and [`Matrix`].
struct Buffer {
    data: Vec<f64>,
}

impl Buffer {
    fn new(data: Vec<f64>) -> Self {
        ledger::register(data.len() * std::mem::size_of::<f64>());
        Buffer { data }
    }

    fn into_vec(mut self) -> Vec<f64> {
        let data = std::mem::take(&mut self.data);
        ledger::deregister(data.len() * std::mem::size_of::<f64>());
        data
    }
}

impl Clone for Buffer {
    fn clone(&self) -> Self {
        Buffer::new(self.data.clone())
    }
}

impl Drop for Buffer {
    fn drop(&mut self) {
        ledger::deregister(self.data.len() * std::mem::size_of::<f64>());
    }
}

/// A dense vector of 64-bit reals.
#[derive(Clone)]
pub struct Vector {
    buf: Buffer,
}

impl Vector {
    pub fn zeros(len: usize) -> Self {
        Vector {
            buf: Buffer::new(vec![0.0; len]),
        }
    }

    pub fn filled(len: usize, value: f64) -> Self {
        Vector {
            buf: Buffer::new(vec![value; len]),
        }
    }

    /// Wraps user data, rejecting NaN and infinities.
    pub fn new(data: Vec<f64>) -> Result<Self> {
        if data.iter().any(|x| !x.is_finite()) {
            return Err(GpError::NonFinite("vector"));
        }
        Ok(Vector::from(data))
    }

    pub fn from_slice(data: &[f64]) -> Self {
        Vector::from(data.to_vec())
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.buf.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.buf.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.buf.into_vec()
    }
}

impl From<Vec<f64>> for Vector {
    fn from(data: Vec<f64>) -> Self {
        Vector {
            buf: Buffer::new(data),
        }
    }
}

impl Deref for Vector {
    type Target = [f64];
    fn deref(&self) -> &[f64] {
        &self.buf.data
    }
}

impl DerefMut for Vector {
    fn deref_mut(&mut self) -> &mut [f64] {
        &mut self.buf.data
    }
}

impl PartialEq for Vector {
    fn eq(&self, other: &Self) -> bool {
        self.as_slice() == other.as_slice()
    }
}

impl fmt::Debug for Vector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_list().entries(self.iter()).finish()
    }
}

/// Dense row-major matrix of 64-bit reals.
#[derive(Clone)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    buf: Buffer,
}

impl Matrix {
    /// Builds a matrix from row-major data, checking shape and finiteness.
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(GpError::DimensionMismatch {
                op: "Matrix::new",
                expected: rows * cols,
                actual: data.len(),
            });
        }
        if data.iter().any(|x| !x.is_finite()) {
            return Err(GpError::NonFinite("matrix"));
        }
        Ok(Matrix::from_vec_unchecked(rows, cols, data))
    }

    pub(crate) fn from_vec_unchecked(rows: usize, cols: usize, data: Vec<f64>) -> Self {
        debug_assert_eq!(data.len(), rows * cols);
        Matrix {
            rows,
            cols,
            buf: Buffer::new(data),
        }
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix::from_vec_unchecked(rows, cols, vec![0.0; rows * cols])
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Matrix::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = 1.0;
        }
        m
    }

    pub fn from_diag(diag: &[f64]) -> Self {
        let n = diag.len();
        let mut m = Matrix::zeros(n, n);
        for (i, &d) in diag.iter().enumerate() {
            m[(i, i)] = d;
        }
        m
    }

    /// Builds a matrix from equal-length rows.
    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        let cols = rows.first().map_or(0, |r| r.as_ref().len());
        let mut data = Vec::with_capacity(rows.len() * cols);
        for r in rows {
            let r = r.as_ref();
            if r.len() != cols {
                return Err(GpError::DimensionMismatch {
                    op: "Matrix::from_rows",
                    expected: cols,
                    actual: r.len(),
                });
            }
            data.extend_from_slice(r);
        }
        Matrix::new(rows.len(), cols, data)
    }

    /// An `n x 1` matrix holding `values` as a column.
    pub fn column(values: &[f64]) -> Result<Self> {
        Matrix::new(values.len(), 1, values.to_vec())
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.buf.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.buf.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.buf.into_vec()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.buf.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        let c = self.cols;
        &mut self.buf.data[i * c..(i + 1) * c]
    }

    pub fn row_iter(&self) -> impl Iterator<Item = &[f64]> {
        // chunks_exact(0) panics, and a zero-width matrix still has rows.
        (0..self.rows).map(move |i| self.row(i))
    }

    /// Copies rows `start..end` into a new matrix.
    pub fn row_block(&self, start: usize, end: usize) -> Matrix {
        let data = self.buf.data[start * self.cols..end * self.cols].to_vec();
        Matrix::from_vec_unchecked(end - start, self.cols, data)
    }

    /// Gathers the listed rows, in order, into a new matrix.
    pub fn select_rows(&self, indices: &[usize]) -> Matrix {
        let mut data = Vec::with_capacity(indices.len() * self.cols);
        for &i in indices {
            data.extend_from_slice(self.row(i));
        }
        Matrix::from_vec_unchecked(indices.len(), self.cols, data)
    }

    pub fn diag(&self) -> Vector {
        let n = self.rows.min(self.cols);
        Vector::from((0..n).map(|i| self[(i, i)]).collect::<Vec<_>>())
    }

    pub fn transpose(&self) -> Matrix {
        let mut data = vec![0.0; self.rows * self.cols];
        for i in 0..self.rows {
            for j in 0..self.cols {
                data[j * self.rows + i] = self[(i, j)];
            }
        }
        Matrix::from_vec_unchecked(self.cols, self.rows, data)
    }

    /// Adds `value` to every diagonal entry.
    pub fn add_diag(&mut self, value: f64) {
        let n = self.rows.min(self.cols);
        for i in 0..n {
            self[(i, i)] += value;
        }
    }

    pub fn scale(&mut self, factor: f64) {
        self.buf.data.iter_mut().for_each(|x| *x *= factor);
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.buf.data.iter().map(|x| x * x).sum::<f64>().sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.buf.data.iter().fold(0.0, |m, x| m.max(x.abs()))
    }

    /// `self * v` for a vector `v`, one dot product per row.
    pub fn matvec(&self, v: &[f64]) -> Result<Vector> {
        crate::error::check_dim("Matrix::matvec", self.cols, v.len())?;
        let mut out = Vector::zeros(self.rows);
        crate::parallel::for_each_mut(out.as_mut_slice(), |i, o| {
            *o = super::dot(self.row(i), v);
        });
        Ok(out)
    }
}

impl Index<(usize, usize)> for Matrix {
    type Output = f64;
    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        debug_assert!(i < self.rows && j < self.cols);
        &self.buf.data[i * self.cols + j]
    }
}

impl IndexMut<(usize, usize)> for Matrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        debug_assert!(i < self.rows && j < self.cols);
        &mut self.buf.data[i * self.cols + j]
    }
}

impl PartialEq for Matrix {
    fn eq(&self, other: &Self) -> bool {
        self.shape() == other.shape() && self.as_slice() == other.as_slice()
    }
}

impl fmt::Debug for Matrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "Matrix {}x{} [", self.rows, self.cols)?;
        for r in self.row_iter() {
            writeln!(f, "  {:?}", r)?;
        }
        write!(f, "]")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_bad_shapes_and_nan() {
        assert!(Matrix::new(2, 2, vec![1.0; 3]).is_err());
        assert_eq!(
            Matrix::new(1, 2, vec![1.0, f64::NAN]),
            Err(GpError::NonFinite("matrix"))
        );
        assert!(Matrix::from_rows(&[vec![1.0, 2.0], vec![3.0]]).is_err());
        assert!(Vector::new(vec![f64::INFINITY]).is_err());
    }

    #[test]
    fn transpose_and_rows() {
        let a = Matrix::from_rows(&[[1.0, 2.0, 3.0], [4.0, 5.0, 6.0]]).unwrap();
        let t = a.transpose();
        assert_eq!(t.shape(), (3, 2));
        assert_eq!(t.row(2), &[3.0, 6.0]);
        assert_eq!(a.select_rows(&[1, 0]).row(0), &[4.0, 5.0, 6.0]);
        assert_eq!(a.row_block(1, 2).row(0), a.row(1));
    }
}
