//! Gaussian-process regression on the CPU.
//!
//! Exact inference runs through one of three solvers: dense Cholesky,
//! matrix-free conjugate gradients with stochastic Lanczos log-determinants,
//! or structured kernel interpolation on a 1-D grid. A variational sparse GP
//! with farthest-point inducing inputs covers the large-`N` case, and a
//! finite-difference Adam loop tunes hyperparameters of any composed kernel.
//!
//! ```
//! use gp_core::kernels::parse_kernel;
//! use gp_core::linalg::Matrix;
//! use gp_core::models::{gp_fit, gp_predict, Strategy};
//!
//! let x = Matrix::column(&[0.0, 0.5, 1.0, 1.5]).unwrap();
//! let y = [0.0, 0.48, 0.84, 1.0];
//! let k = parse_kernel("(scale 1.0 (rbf 0.7))").unwrap();
//! let state = gp_fit(&x, &y, &k, 1e-3, Strategy::Cholesky).unwrap();
//! let (mean, var) = gp_predict(&state, &Matrix::column(&[0.75]).unwrap()).unwrap();
//! assert!((mean[0] - 0.68).abs() < 0.05);
//! assert!(var[0] < 0.01);
//! ```
//!
//! Row-block parallelism uses rayon behind the default `parallel` feature.
//! Disable it for a fully sequential build with identical results.

pub mod error;
pub mod kernels;
pub mod linalg;
pub mod models;
pub mod parallel;
pub mod solvers;

pub use error::{GpError, Result};
pub use kernels::{parse_kernel, KernelExpr, ParamVector};
pub use linalg::{Matrix, Vector};
pub use models::{gp_fit, gp_predict, sparse_fit, sparse_predict, ExactState, SparseState, Strategy};
