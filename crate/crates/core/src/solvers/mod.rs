//! Linear-algebra engines behind the exact GP: conjugate gradients, stochastic
//! Lanczos quadrature, the blocked matrix-free kernel product and the 1-D
//! structured-interpolation operator.

mod cg;
mod matfree;
mod ski;
mod slq;

pub use cg::{cg_solve, cg_solve_batch, residual_norm, CgSolution};
pub use matfree::{matrix_free_matvec, MatrixFreeOperator, DEFAULT_BLOCK};
pub use ski::{build_ski, ski_matvec, InterpWeights, SkiOperator, SkiState};
pub use slq::slq_logdet;

use crate::error::{check_dim, GpError, Result};
use crate::linalg::{Matrix, Vector};

/// A symmetric linear map `v -> A v` that solvers only touch through products.
pub trait LinearOperator: Sync {
    fn dim(&self) -> usize;

    fn apply(&self, v: &[f64]) -> Result<Vector>;

    /// Applies the operator to several vectors.
    ///
    /// Implementations may share work across the batch but must return, for
    /// every input, exactly what [`apply`](Self::apply) would.
    fn apply_many(&self, vs: &[&[f64]]) -> Result<Vec<Vector>> {
        vs.iter().map(|v| self.apply(v)).collect()
    }
}

/// Settings for CG solves and SLQ log-determinants.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CgConfig {
    pub rel_tolerance: f64,
    /// `None` means `min(N, 1000)`.
    pub max_iterations: Option<usize>,
    /// Rademacher probe vectors for SLQ.
    pub probes: usize,
    pub lanczos_steps: usize,
}

impl Default for CgConfig {
    fn default() -> Self {
        CgConfig {
            rel_tolerance: 1e-6,
            max_iterations: None,
            probes: 16,
            lanczos_steps: 50,
        }
    }
}

impl CgConfig {
    pub fn max_iterations_for(&self, n: usize) -> usize {
        self.max_iterations.unwrap_or_else(|| n.min(1000)).max(1)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.rel_tolerance.is_finite() && self.rel_tolerance > 0.0) {
            return Err(GpError::InvalidParameter("rel_tolerance must be positive".into()));
        }
        if self.max_iterations == Some(0) || self.probes == 0 || self.lanczos_steps == 0 {
            return Err(GpError::InvalidParameter("CG counts must be at least 1".into()));
        }
        Ok(())
    }
}

/// `(A + shift I)` for a dense symmetric `A`.
pub struct DenseOperator<'a> {
    matrix: &'a Matrix,
    shift: f64,
}

impl<'a> DenseOperator<'a> {
    pub fn new(matrix: &'a Matrix, shift: f64) -> Result<Self> {
        if !matrix.is_square() {
            return Err(GpError::NonSquare {
                rows: matrix.rows(),
                cols: matrix.cols(),
            });
        }
        Ok(DenseOperator { matrix, shift })
    }
}

impl LinearOperator for DenseOperator<'_> {
    fn dim(&self) -> usize {
        self.matrix.rows()
    }

    fn apply(&self, v: &[f64]) -> Result<Vector> {
        let mut out = self.matrix.matvec(v)?;
        if self.shift != 0.0 {
            out.iter_mut().zip(v).for_each(|(o, x)| *o += self.shift * x);
        }
        Ok(out)
    }
}

/// Adapts a closure into a [`LinearOperator`].
pub struct FnOperator<F> {
    dim: usize,
    f: F,
}

impl<F> FnOperator<F>
where
    F: Fn(&[f64]) -> Vector + Sync,
{
    pub fn new(dim: usize, f: F) -> Self {
        FnOperator { dim, f }
    }
}

impl<F> LinearOperator for FnOperator<F>
where
    F: Fn(&[f64]) -> Vector + Sync,
{
    fn dim(&self) -> usize {
        self.dim
    }

    fn apply(&self, v: &[f64]) -> Result<Vector> {
        check_dim("FnOperator::apply", self.dim, v.len())?;
        let out = (self.f)(v);
        check_dim("FnOperator::apply output", self.dim, out.len())?;
        Ok(out)
    }
}
