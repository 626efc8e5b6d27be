//! Covariance functions as immutable expression trees.
//!
//! Leaves carry their own shape parameters but no amplitude; amplitude lives
//! in [`KernelExpr::Scale`] nodes, so `scale(rbf) + scale(periodic)` is the
//! usual way to build a composite with independent output scales.

mod params;
mod sexpr;

pub use params::{flatten_params, unflatten_params, ParamVector};
pub use sexpr::parse_kernel;

use std::f64::consts::PI;
use std::ops::{Add, Mul};

use crate::error::{check_dim, GpError, Result};
use crate::linalg::{matmul, row_sq_norms, sqdist_map, Matrix, Vector};
use crate::parallel;

#[derive(Clone, Debug, PartialEq)]
pub enum KernelExpr {
    /// `exp(-r^2 / (2 l^2))`
    Rbf { lengthscale: f64 },
    /// `exp(-r / l)`
    Matern12 { lengthscale: f64 },
    /// `(1 + sqrt(3) r / l) exp(-sqrt(3) r / l)`
    Matern32 { lengthscale: f64 },
    /// `(1 + sqrt(5) r / l + 5 r^2 / (3 l^2)) exp(-sqrt(5) r / l)`
    Matern52 { lengthscale: f64 },
    /// `exp(-2 sum_d sin^2(pi (x_d - y_d) / p) / l^2)`
    Periodic { lengthscale: f64, period: f64 },
    /// `variance * x.y`
    Linear { variance: f64 },
    Scale {
        outputscale: f64,
        child: Box<KernelExpr>,
    },
    Sum(Box<KernelExpr>, Box<KernelExpr>),
    Product(Box<KernelExpr>, Box<KernelExpr>),
}

fn positive(name: &str, v: f64) -> Result<f64> {
    if v.is_finite() && v > 0.0 {
        Ok(v)
    } else {
        Err(GpError::InvalidParameter(format!(
            "{name} must be finite and strictly positive, got {v}"
        )))
    }
}

impl KernelExpr {
    pub fn rbf(lengthscale: f64) -> Result<Self> {
        Ok(KernelExpr::Rbf {
            lengthscale: positive("lengthscale", lengthscale)?,
        })
    }

    pub fn matern12(lengthscale: f64) -> Result<Self> {
        Ok(KernelExpr::Matern12 {
            lengthscale: positive("lengthscale", lengthscale)?,
        })
    }

    pub fn matern32(lengthscale: f64) -> Result<Self> {
        Ok(KernelExpr::Matern32 {
            lengthscale: positive("lengthscale", lengthscale)?,
        })
    }

    pub fn matern52(lengthscale: f64) -> Result<Self> {
        Ok(KernelExpr::Matern52 {
            lengthscale: positive("lengthscale", lengthscale)?,
        })
    }

    pub fn periodic(lengthscale: f64, period: f64) -> Result<Self> {
        Ok(KernelExpr::Periodic {
            lengthscale: positive("lengthscale", lengthscale)?,
            period: positive("period", period)?,
        })
    }

    pub fn linear(variance: f64) -> Result<Self> {
        Ok(KernelExpr::Linear {
            variance: positive("variance", variance)?,
        })
    }

    pub fn scale(outputscale: f64, child: KernelExpr) -> Result<Self> {
        Ok(KernelExpr::Scale {
            outputscale: positive("outputscale", outputscale)?,
            child: Box::new(child),
        })
    }

    pub fn sum(a: KernelExpr, b: KernelExpr) -> Self {
        KernelExpr::Sum(Box::new(a), Box::new(b))
    }

    pub fn product(a: KernelExpr, b: KernelExpr) -> Self {
        KernelExpr::Product(Box::new(a), Box::new(b))
    }

    /// Checks that every hyperparameter is finite and strictly positive.
    pub fn validate(&self) -> Result<()> {
        use KernelExpr::*;
        match self {
            Rbf { lengthscale } | Matern12 { lengthscale } | Matern32 { lengthscale } | Matern52 { lengthscale } => {
                positive("lengthscale", *lengthscale).map(drop)
            }
            Periodic { lengthscale, period } => {
                positive("lengthscale", *lengthscale)?;
                positive("period", *period).map(drop)
            }
            Linear { variance } => positive("variance", *variance).map(drop),
            Scale { outputscale, child } => {
                positive("outputscale", *outputscale)?;
                child.validate()
            }
            Sum(a, b) | Product(a, b) => {
                a.validate()?;
                b.validate()
            }
        }
    }

    /// True when `k(x, y)` depends only on `x - y`.
    pub fn is_stationary(&self) -> bool {
        use KernelExpr::*;
        match self {
            Linear { .. } => false,
            Scale { child, .. } => child.is_stationary(),
            Sum(a, b) | Product(a, b) => a.is_stationary() && b.is_stationary(),
            _ => true,
        }
    }

    /// Number of hyperparameters in the tree.
    pub fn num_params(&self) -> usize {
        use KernelExpr::*;
        match self {
            Periodic { .. } => 2,
            Scale { child, .. } => 1 + child.num_params(),
            Sum(a, b) | Product(a, b) => a.num_params() + b.num_params(),
            _ => 1,
        }
    }

    /// Gram matrix between the rows of `x` and the rows of `y`.
    pub fn eval(&self, x: &Matrix, y: &Matrix) -> Result<Matrix> {
        check_dim("kernel_eval", x.cols(), y.cols())?;
        self.validate()?;
        if !all_finite(x) || !all_finite(y) {
            return Err(GpError::NonFinite("kernel input"));
        }
        self.eval_unchecked(x, y)
    }

    pub(crate) fn eval_unchecked(&self, x: &Matrix, y: &Matrix) -> Result<Matrix> {
        use KernelExpr::*;
        let out = match self {
            Rbf { lengthscale } => {
                let c = -0.5 / (lengthscale * lengthscale);
                map_sqdist(x, y, |d| exp_neg(c * d))?
            }
            Matern12 { lengthscale } => {
                let inv = 1.0 / lengthscale;
                map_sqdist(x, y, |d| exp_neg(-d.sqrt() * inv))?
            }
            Matern32 { lengthscale } => {
                let c = 3f64.sqrt() / lengthscale;
                map_sqdist(x, y, |d| {
                    let a = c * d.sqrt();
                    (1.0 + a) * exp_neg(-a)
                })?
            }
            Matern52 { lengthscale } => {
                let c = 5f64.sqrt() / lengthscale;
                map_sqdist(x, y, |d| {
                    let a = c * d.sqrt();
                    (1.0 + a + a * a / 3.0) * exp_neg(-a)
                })?
            }
            Periodic { lengthscale, period } => periodic_gram(x, y, *lengthscale, *period),
            Linear { variance } => {
                let mut g = matmul(x, y, false, true)?;
                g.scale(*variance);
                g
            }
            Scale { outputscale, child } => {
                let mut g = child.eval_unchecked(x, y)?;
                g.scale(*outputscale);
                g
            }
            Sum(a, b) => {
                let mut g = a.eval_unchecked(x, y)?;
                let h = b.eval_unchecked(x, y)?;
                g.as_mut_slice()
                    .iter_mut()
                    .zip(h.as_slice())
                    .for_each(|(p, q)| *p += q);
                g
            }
            Product(a, b) => {
                let mut g = a.eval_unchecked(x, y)?;
                let h = b.eval_unchecked(x, y)?;
                g.as_mut_slice()
                    .iter_mut()
                    .zip(h.as_slice())
                    .for_each(|(p, q)| *p *= q);
                g
            }
        };
        Ok(out)
    }

    /// `k(x_i, x_i)` for every row, in `O(N D)`.
    pub fn diag(&self, x: &Matrix) -> Result<Vector> {
        self.validate()?;
        if !all_finite(x) {
            return Err(GpError::NonFinite("kernel input"));
        }
        Ok(self.diag_unchecked(x))
    }

    fn diag_unchecked(&self, x: &Matrix) -> Vector {
        use KernelExpr::*;
        match self {
            Linear { variance } => {
                let mut d = row_sq_norms(x);
                d.iter_mut().for_each(|v| *v *= variance);
                d
            }
            Scale { outputscale, child } => {
                let mut d = child.diag_unchecked(x);
                d.iter_mut().for_each(|v| *v *= outputscale);
                d
            }
            Sum(a, b) => {
                let mut d = a.diag_unchecked(x);
                let e = b.diag_unchecked(x);
                d.iter_mut().zip(e.iter()).for_each(|(p, q)| *p += q);
                d
            }
            Product(a, b) => {
                let mut d = a.diag_unchecked(x);
                let e = b.diag_unchecked(x);
                d.iter_mut().zip(e.iter()).for_each(|(p, q)| *p *= q);
                d
            }
            _ => Vector::filled(x.rows(), 1.0),
        }
    }

    /// Prior variance `k(x, x)` of a stationary kernel, or `None` when it depends on `x`.
    pub fn stationary_variance(&self) -> Option<f64> {
        use KernelExpr::*;
        match self {
            Linear { .. } => None,
            Scale { outputscale, child } => child.stationary_variance().map(|v| v * outputscale),
            Sum(a, b) => Some(a.stationary_variance()? + b.stationary_variance()?),
            Product(a, b) => Some(a.stationary_variance()? * b.stationary_variance()?),
            _ => Some(1.0),
        }
    }
}

fn all_finite(x: &Matrix) -> bool {
    x.as_slice().iter().all(|v| v.is_finite())
}

/// `exp(a)` for `a <= 0`, flushed to zero where the result would be subnormal.
/// Subnormal results take a slow path on common CPUs and are below `2.3e-308` anyway.
#[inline]
fn exp_neg(a: f64) -> f64 {
    if a < -708.0 {
        0.0
    } else {
        a.exp()
    }
}

/// Distances are taken after centring both inputs on the column means of `y`,
/// which keeps the norm expansion accurate for inputs far from the origin.
fn map_sqdist(x: &Matrix, y: &Matrix, f: impl Fn(f64) -> f64 + Sync + Send) -> Result<Matrix> {
    let d = y.cols();
    if y.rows() == 0 || d == 0 {
        return sqdist_map(x, y, f);
    }
    let mut mu = vec![0.0; d];
    for row in y.row_iter() {
        mu.iter_mut().zip(row).for_each(|(m, v)| *m += v);
    }
    let inv = 1.0 / y.rows() as f64;
    mu.iter_mut().for_each(|m| *m *= inv);
    let centre = |m: &Matrix| {
        let mut c = m.clone();
        for row in c.as_mut_slice().chunks_mut(d) {
            row.iter_mut().zip(&mu).for_each(|(v, m)| *v -= m);
        }
        c
    };
    let yc = centre(y);
    if std::ptr::eq(x, y) {
        sqdist_map(&yc, &yc, f)
    } else {
        sqdist_map(&centre(x), &yc, f)
    }
}

fn periodic_gram(x: &Matrix, y: &Matrix, lengthscale: f64, period: f64) -> Matrix {
    let mut g = Matrix::zeros(x.rows(), y.rows());
    let w = PI / period;
    let c = -2.0 / (lengthscale * lengthscale);
    let cols = g.cols();
    parallel::for_each_row_mut(g.as_mut_slice(), cols, |i, row| {
        let xi = x.row(i);
        for (j, out) in row.iter_mut().enumerate() {
            let s: f64 = xi
                .iter()
                .zip(y.row(j))
                .map(|(a, b)| {
                    let t = (w * (a - b)).sin();
                    t * t
                })
                .sum();
            *out = exp_neg(c * s);
        }
    });
    g
}

/// Gram matrix `K(X, Y)`.
pub fn kernel_eval(k: &KernelExpr, x: &Matrix, y: &Matrix) -> Result<Matrix> {
    k.eval(x, y)
}

/// Diagonal of `K(X, X)`.
pub fn kernel_diag(k: &KernelExpr, x: &Matrix) -> Result<Vector> {
    k.diag(x)
}

impl Add for KernelExpr {
    type Output = KernelExpr;
    fn add(self, rhs: KernelExpr) -> KernelExpr {
        KernelExpr::sum(self, rhs)
    }
}

impl Mul for KernelExpr {
    type Output = KernelExpr;
    fn mul(self, rhs: KernelExpr) -> KernelExpr {
        KernelExpr::product(self, rhs)
    }
}
