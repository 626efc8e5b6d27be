//! Structured kernel interpolation on a regular 1-D grid.
//!
//! `K ~= W K_grid W^T`, where `W` holds local cubic-convolution weights (four
//! per row) and `K_grid` is Toeplitz because the kernel is stationary and the
//! grid is equispaced. `K_grid u` is computed by embedding the Toeplitz column
//! into a power-of-two circulant and multiplying through the FFT.

use super::LinearOperator;
use crate::error::{check_dim, GpError, Result};
use crate::kernels::KernelExpr;
use crate::linalg::{CirculantOperator, Matrix, Vector};

/// Keys cubic convolution coefficient.
const KEYS_A: f64 = -0.5;

fn keys_weight(s: f64) -> f64 {
    let s = s.abs();
    let a = KEYS_A;
    if s <= 1.0 {
        ((a + 2.0) * s - (a + 3.0)) * s * s + 1.0
    } else if s < 2.0 {
        ((a * s - 5.0 * a) * s + 8.0 * a) * s - 4.0 * a
    } else {
        0.0
    }
}

/// Sparse interpolation weights in compressed-row form, four entries per row.
#[derive(Clone, Debug, PartialEq)]
pub struct InterpWeights {
    pub row_offsets: Vec<usize>,
    pub col_indices: Vec<usize>,
    pub values: Vec<f64>,
    pub grid_size: usize,
}

impl InterpWeights {
    pub fn rows(&self) -> usize {
        self.row_offsets.len() - 1
    }

    pub fn row(&self, i: usize) -> (&[usize], &[f64]) {
        let (a, b) = (self.row_offsets[i], self.row_offsets[i + 1]);
        (&self.col_indices[a..b], &self.values[a..b])
    }

    /// `W u` for a grid vector `u`.
    pub fn apply(&self, u: &[f64]) -> Vector {
        let mut out = Vector::zeros(self.rows());
        for (i, o) in out.iter_mut().enumerate() {
            let (idx, w) = self.row(i);
            *o = idx.iter().zip(w).map(|(&j, &wj)| wj * u[j]).sum();
        }
        out
    }

    /// `W^T v`, scattering into the grid.
    pub fn apply_transpose(&self, v: &[f64]) -> Vector {
        let mut out = Vector::zeros(self.grid_size);
        for (i, &vi) in v.iter().enumerate() {
            let (idx, w) = self.row(i);
            for (&j, &wj) in idx.iter().zip(w) {
                out[j] += wj * vi;
            }
        }
        out
    }

    pub fn to_dense(&self) -> Matrix {
        let mut m = Matrix::zeros(self.rows(), self.grid_size);
        for i in 0..self.rows() {
            let (idx, w) = self.row(i);
            for (&j, &wj) in idx.iter().zip(w) {
                m[(i, j)] += wj;
            }
        }
        m
    }
}

/// Fitted SKI structures for one training set.
#[derive(Clone, Debug)]
pub struct SkiState {
    grid_lo: f64,
    spacing: f64,
    grid_size: usize,
    weights: InterpWeights,
    toeplitz_first_col: Vector,
    circulant: CirculantOperator,
}

impl SkiState {
    pub fn grid_lo(&self) -> f64 {
        self.grid_lo
    }

    pub fn grid_hi(&self) -> f64 {
        self.grid_lo + self.spacing * (self.grid_size - 1) as f64
    }

    pub fn spacing(&self) -> f64 {
        self.spacing
    }

    pub fn grid_size(&self) -> usize {
        self.grid_size
    }

    pub fn grid_points(&self) -> Vec<f64> {
        (0..self.grid_size)
            .map(|j| self.grid_lo + self.spacing * j as f64)
            .collect()
    }

    pub fn weights(&self) -> &InterpWeights {
        &self.weights
    }

    pub fn toeplitz_first_col(&self) -> &[f64] {
        &self.toeplitz_first_col
    }

    pub fn circulant_len(&self) -> usize {
        self.circulant.len()
    }

    pub fn circulant_spectrum(&self) -> &[num_complex::Complex64] {
        self.circulant.spectrum()
    }

    /// `K_grid u` through the circulant embedding.
    pub fn grid_matvec(&self, u: &[f64]) -> Result<Vector> {
        check_dim("SkiState::grid_matvec", self.grid_size, u.len())?;
        let mut padded = vec![0.0; self.circulant.len()];
        padded[..self.grid_size].copy_from_slice(u);
        let full = self.circulant.apply(&padded)?;
        Ok(Vector::from_slice(&full[..self.grid_size]))
    }

    /// Interpolation weights of arbitrary points against this grid. Points in
    /// the end cells are interpolated linearly; points past the ends take the
    /// end node's value.
    pub fn interpolate(&self, x: &Matrix) -> Result<InterpWeights> {
        if x.cols() != 1 {
            return Err(GpError::Unsupported(format!(
                "SKI interpolation is one-dimensional, got D = {}",
                x.cols()
            )));
        }
        if x.as_slice().iter().any(|v| !v.is_finite()) {
            return Err(GpError::NonFinite("SKI interpolation input"));
        }
        Ok(interp_weights(x.as_slice(), self.grid_lo, self.spacing, self.grid_size))
    }
}

fn interp_weights(xs: &[f64], lo: f64, h: f64, m: usize) -> InterpWeights {
    let mut row_offsets = Vec::with_capacity(xs.len() + 1);
    let mut col_indices = Vec::with_capacity(4 * xs.len());
    let mut values = Vec::with_capacity(4 * xs.len());
    row_offsets.push(0);
    let last = (m - 2) as f64;
    for &x in xs {
        let u = (x - lo) / h;
        // Cubic in [1, m - 2]; linear in the two end cells; constant beyond.
        let (j, w) = if u < 1.0 {
            let t = u.max(0.0);
            (1, [1.0 - t, t, 0.0, 0.0])
        } else if u > last {
            let t = (u - last).min(1.0);
            (m - 3, [0.0, 0.0, 1.0 - t, t])
        } else {
            let j = (u.floor() as usize).min(m - 3);
            let t = u - j as f64;
            (
                j,
                [
                    keys_weight(t + 1.0),
                    keys_weight(t),
                    keys_weight(1.0 - t),
                    keys_weight(2.0 - t),
                ],
            )
        };
        for (k, wk) in w.iter().enumerate() {
            col_indices.push(j - 1 + k);
            values.push(*wk);
        }
        row_offsets.push(col_indices.len());
    }
    InterpWeights {
        row_offsets,
        col_indices,
        values,
        grid_size: m,
    }
}

/// Builds the SKI grid, interpolation weights and circulant spectrum.
///
/// The grid has `m` equispaced nodes spanning `[min(X) - 2h, max(X) + 2h]`,
/// so every four-point stencil is interior.
pub fn build_ski(x: &Matrix, kernel: &KernelExpr, m: usize) -> Result<SkiState> {
    if x.cols() != 1 {
        return Err(GpError::Unsupported(format!(
            "SKI supports one input dimension, got D = {}",
            x.cols()
        )));
    }
    if m < 8 {
        return Err(GpError::InvalidParameter(format!(
            "SKI grid needs at least 8 nodes, got {m}"
        )));
    }
    if x.rows() == 0 {
        return Err(GpError::InvalidParameter("SKI needs at least one point".into()));
    }
    if !kernel.is_stationary() {
        return Err(GpError::Unsupported(
            "SKI requires a stationary kernel (Toeplitz grid covariance)".into(),
        ));
    }
    kernel.validate()?;
    let xs = x.as_slice();
    if xs.iter().any(|v| !v.is_finite()) {
        return Err(GpError::NonFinite("SKI input"));
    }
    let (min, max) = xs
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
    let range = max - min;
    let spacing = if range > 0.0 { range / (m - 5) as f64 } else { 1.0 };
    let grid_lo = min - 2.0 * spacing;

    let weights = interp_weights(xs, grid_lo, spacing, m);

    let origin = Matrix::from_vec_unchecked(1, 1, vec![0.0]);
    let offsets = Matrix::from_vec_unchecked(m, 1, (0..m).map(|j| spacing * j as f64).collect());
    let row0 = kernel.eval_unchecked(&origin, &offsets)?;
    let toeplitz_first_col = Vector::from_slice(row0.row(0));

    let c = (2 * m - 1).next_power_of_two();
    let mut embed = vec![0.0; c];
    embed[..m].copy_from_slice(&toeplitz_first_col);
    for j in 1..m {
        embed[c - j] = toeplitz_first_col[j];
    }
    let circulant = CirculantOperator::new(&embed)?;

    Ok(SkiState {
        grid_lo,
        spacing,
        grid_size: m,
        weights,
        toeplitz_first_col,
        circulant,
    })
}

/// `(W K_grid W^T + noise I) v`
pub fn ski_matvec(state: &SkiState, noise: f64, v: &[f64]) -> Result<Vector> {
    check_dim("ski_matvec", state.weights.rows(), v.len())?;
    let u = state.weights.apply_transpose(v);
    let g = state.grid_matvec(&u)?;
    let mut out = state.weights.apply(&g);
    out.iter_mut().zip(v).for_each(|(o, vi)| *o += noise * vi);
    Ok(out)
}

/// [`ski_matvec`] as a [`LinearOperator`].
pub struct SkiOperator<'a> {
    state: &'a SkiState,
    noise: f64,
}

impl<'a> SkiOperator<'a> {
    pub fn new(state: &'a SkiState, noise: f64) -> Self {
        SkiOperator { state, noise }
    }
}

impl LinearOperator for SkiOperator<'_> {
    fn dim(&self) -> usize {
        self.state.weights.rows()
    }

    fn apply(&self, v: &[f64]) -> Result<Vector> {
        ski_matvec(self.state, self.noise, v)
    }

    fn apply_many(&self, vs: &[&[f64]]) -> Result<Vec<Vector>> {
        crate::parallel::map_range(vs.len(), |i| self.apply(vs[i]))
            .into_iter()
            .collect()
    }
}
