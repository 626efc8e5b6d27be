use super::LinearOperator;
use crate::error::{check_dim, GpError, Result};
use crate::kernels::KernelExpr;
use crate::linalg::{dot, Matrix, Vector};
use crate::parallel;

pub const DEFAULT_BLOCK: usize = 256;

/// `(K(X, X) + noise I)` evaluated slab by slab, never holding more than
/// `block x N` kernel entries at once.
pub struct MatrixFreeOperator<'a> {
    kernel: &'a KernelExpr,
    x: &'a Matrix,
    noise: f64,
    block: usize,
}

impl<'a> MatrixFreeOperator<'a> {
    pub fn new(kernel: &'a KernelExpr, x: &'a Matrix, noise: f64, block: usize) -> Result<Self> {
        if block == 0 {
            return Err(GpError::InvalidParameter("block must be at least 1".into()));
        }
        if !noise.is_finite() || noise < 0.0 {
            return Err(GpError::InvalidParameter(format!("noise must be >= 0, got {noise}")));
        }
        kernel.validate()?;
        if x.as_slice().iter().any(|v| !v.is_finite()) {
            return Err(GpError::NonFinite("kernel input"));
        }
        Ok(MatrixFreeOperator {
            kernel,
            x,
            noise,
            block,
        })
    }

    pub fn block(&self) -> usize {
        self.block
    }

    /// Streams row slabs of `K`; `consume(start, slab)` sees rows `start..start + slab.rows()`.
    fn for_each_slab(&self, mut consume: impl FnMut(usize, &Matrix)) -> Result<()> {
        let n = self.x.rows();
        let mut start = 0;
        while start < n {
            let end = (start + self.block).min(n);
            let rows = self.x.row_block(start, end);
            let slab = self.kernel.eval_unchecked(&rows, self.x)?;
            consume(start, &slab);
            start = end;
        }
        Ok(())
    }
}

impl LinearOperator for MatrixFreeOperator<'_> {
    fn dim(&self) -> usize {
        self.x.rows()
    }

    fn apply(&self, v: &[f64]) -> Result<Vector> {
        check_dim("matrix_free_matvec", self.x.rows(), v.len())?;
        let mut out = Vector::zeros(v.len());
        let noise = self.noise;
        self.for_each_slab(|start, slab| {
            let seg = &mut out[start..start + slab.rows()];
            parallel::for_each_mut(seg, |r, o| {
                *o = dot(slab.row(r), v) + noise * v[start + r];
            });
        })?;
        Ok(out)
    }

    fn apply_many(&self, vs: &[&[f64]]) -> Result<Vec<Vector>> {
        let n = self.x.rows();
        for v in vs {
            check_dim("matrix_free_matvec", n, v.len())?;
        }
        let k = vs.len();
        let mut outs: Vec<Vector> = (0..k).map(|_| Vector::zeros(n)).collect();
        if k == 0 {
            return Ok(outs);
        }
        let noise = self.noise;
        self.for_each_slab(|start, slab| {
            let mut tile = Matrix::zeros(slab.rows(), k);
            parallel::for_each_row_mut(tile.as_mut_slice(), k, |r, row| {
                let kr = slab.row(r);
                for (c, o) in row.iter_mut().enumerate() {
                    *o = dot(kr, vs[c]) + noise * vs[c][start + r];
                }
            });
            for r in 0..slab.rows() {
                for (c, out) in outs.iter_mut().enumerate() {
                    out[start + r] = tile[(r, c)];
                }
            }
        })?;
        Ok(outs)
    }
}

/// `(K(X, X) + noise I) v` using row slabs of height `block`.
pub fn matrix_free_matvec(
    kernel: &KernelExpr,
    x: &Matrix,
    noise: f64,
    v: &[f64],
    block: usize,
) -> Result<Vector> {
    MatrixFreeOperator::new(kernel, x, noise, block)?.apply(v)
}
