use std::f64::consts::PI;

use super::inducing::{farthest_point_sampling, fps_call_count};
use super::optimize::{check_noise, optimize_hyperparams, pack_params, unpack_params, OptimizeResult, OptimizerConfig};
use crate::error::{check_dim, GpError, Result};
use crate::kernels::KernelExpr;
use crate::linalg::{cholesky, dot, matmul, solve_in_place, trisolve_vec, CholeskyFactor, Matrix, TriMode, Vector};
use crate::parallel;

/// The variational free energy and its trace term.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct VfeTerms {
    /// `log N(y | 0, Q + noise I) - tr(K - Q) / (2 noise)`.
    pub objective: f64,
    /// `tr(K - Q) / (2 noise)`, the amount subtracted from the collapsed likelihood.
    pub trace_penalty: f64,
}

struct VfeParts {
    terms: VfeTerms,
    luu: CholeskyFactor,
    lb: CholeskyFactor,
    c: Vector,
}

/// Evaluates the bound in `O(N M^2)` without forming `Q = K_fu K_uu^{-1} K_uf`.
///
/// With `L_uu L_uu^T = K_uu`, `A = L_uu^{-1} K_uf` and
/// `B = I + A A^T / noise = L_B L_B^T`, the determinant lemma gives
/// `log|Q + noise I| = N log(noise) + log|B|` and, with `c = L_B^{-1} A y`,
/// `y^T (Q + noise I)^{-1} y = (y^T y - c^T c / noise) / noise`.
fn vfe_parts(x: &Matrix, y: &[f64], k: &KernelExpr, noise: f64, z: &Matrix) -> Result<VfeParts> {
    let n = x.rows();
    let m = z.rows();
    check_dim("vfe_objective", n, y.len())?;
    check_dim("vfe_objective", x.cols(), z.cols())?;
    check_noise(noise)?;
    if m == 0 || m > n {
        return Err(GpError::InvalidParameter(format!(
            "need 1 <= M <= N inducing points, got M = {m}, N = {n}"
        )));
    }

    let luu = cholesky(&k.eval(z, z)?)?;
    // Rows of `at` become columns of A: a_n = L_uu^{-1} k_u(x_n).
    let mut at = k.eval(x, z)?;
    parallel::for_each_row_mut(at.as_mut_slice(), m, |_, row| {
        solve_in_place(luu.l(), row, TriMode::Lower)
    });
    let a = at.transpose();
    drop(at);

    let mut b = matmul(&a, &a, false, true)?;
    let q_trace: f64 = b.diag().iter().sum();
    b.scale(1.0 / noise);
    b.add_diag(1.0);
    let lb = cholesky(&b)?;
    drop(b);

    let ay = a.matvec(y)?;
    let c = trisolve_vec(&lb, &ay, TriMode::Lower)?;

    let k_trace: f64 = k.diag(x)?.iter().sum();
    let trace_penalty = (k_trace - q_trace) / (2.0 * noise);
    let quad = (dot(y, y) - dot(&c, &c) / noise) / noise;
    let logdet = n as f64 * noise.ln() + lb.logdet();
    let objective = -0.5 * (quad + logdet + n as f64 * (2.0 * PI).ln()) - trace_penalty;
    Ok(VfeParts {
        terms: VfeTerms {
            objective,
            trace_penalty,
        },
        luu,
        lb,
        c,
    })
}

/// The collapsed variational lower bound on the log marginal likelihood for
/// inducing inputs `z`.
pub fn vfe_objective(x: &Matrix, y: &[f64], k: &KernelExpr, noise: f64, z: &Matrix) -> Result<VfeTerms> {
    vfe_parts(x, y, k, noise, z).map(|p| p.terms)
}

/// Diagnostics from [`sparse_fit`].
#[derive(Clone, Debug)]
pub struct SparseFitInfo {
    /// Farthest-point sampling runs during this fit: 1 on the cold path, 0 when warm.
    pub fps_calls: usize,
    pub optimization: Option<OptimizeResult>,
}

/// A fitted sparse GP with fixed inducing inputs.
#[derive(Clone, Debug)]
pub struct SparseState {
    z: Matrix,
    kernel: KernelExpr,
    noise: f64,
    luu: CholeskyFactor,
    lb: CholeskyFactor,
    weights: Vector,
    elbo_value: f64,
    trace_penalty: f64,
    info: SparseFitInfo,
}

impl SparseState {
    pub fn inducing(&self) -> &Matrix {
        &self.z
    }

    pub fn kernel(&self) -> &KernelExpr {
        &self.kernel
    }

    pub fn noise(&self) -> f64 {
        self.noise
    }

    /// Factor of `K_uu` (plus any jitter the factorization needed).
    pub fn kuu_factor(&self) -> &CholeskyFactor {
        &self.luu
    }

    /// Factor of `B = L_uu^{-1} Sigma_M L_uu^{-T}`, where `Sigma_M = K_uu + K_uf K_fu / noise`.
    pub fn sigma_factor(&self) -> &CholeskyFactor {
        &self.lb
    }

    /// `Sigma_M^{-1} K_uf y / noise`; the mean is `k_u(x*)^T` times this.
    pub fn weights(&self) -> &Vector {
        &self.weights
    }

    pub fn elbo_value(&self) -> f64 {
        self.elbo_value
    }

    pub fn trace_penalty(&self) -> f64 {
        self.trace_penalty
    }

    pub fn info(&self) -> &SparseFitInfo {
        &self.info
    }

    fn from_parts(z: Matrix, kernel: KernelExpr, noise: f64, parts: VfeParts, info: SparseFitInfo) -> Result<Self> {
        let VfeParts { terms, luu, lb, c } = parts;
        let mut w = trisolve_vec(&lb, &c, TriMode::UpperTransposed)?;
        solve_in_place(luu.l(), &mut w, TriMode::UpperTransposed);
        w.iter_mut().for_each(|v| *v /= noise);
        Ok(SparseState {
            z,
            kernel,
            noise,
            luu,
            lb,
            weights: w,
            elbo_value: terms.objective,
            trace_penalty: terms.trace_penalty,
            info,
        })
    }
}

/// Fits a sparse GP with `m` inducing points.
///
/// Cold fits place the inducing inputs by farthest-point sampling; with
/// `warm` they are copied from the previous state and `m` is ignored. The
/// kernel hyperparameters and noise (not the inducing inputs) are then tuned
/// for `opt.steps` Adam steps on the bound.
pub fn sparse_fit(
    x: &Matrix,
    y: &[f64],
    k: &KernelExpr,
    noise: f64,
    m: usize,
    opt: &OptimizerConfig,
    warm: Option<&SparseState>,
) -> Result<SparseState> {
    let n = x.rows();
    check_dim("sparse_fit", n, y.len())?;
    let fps_before = fps_call_count();
    let z = match warm {
        Some(prev) => {
            check_dim("sparse_fit", x.cols(), prev.z.cols())?;
            prev.z.clone()
        }
        None => {
            if m == 0 || m > n {
                return Err(GpError::InvalidParameter(format!(
                    "need 1 <= M <= N inducing points, got M = {m}, N = {n}"
                )));
            }
            x.select_rows(&farthest_point_sampling(x, m)?)
        }
    };
    let fps_calls = fps_call_count() - fps_before;

    let (kernel, noise, optimization) = if opt.steps > 0 {
        let p0 = pack_params(k, noise)?;
        let objective = |p: &[f64]| {
            unpack_params(k, p)
                .and_then(|(kp, np)| vfe_objective(x, y, &kp, np, &z))
                .map(|t| t.objective)
                .unwrap_or(f64::NAN)
        };
        let result = optimize_hyperparams(objective, &p0, opt)?;
        let (kernel, noise) = unpack_params(k, result.params.as_slice())?;
        (kernel, noise, Some(result))
    } else {
        (k.clone(), noise, None)
    };

    let parts = vfe_parts(x, y, &kernel, noise, &z)?;
    SparseState::from_parts(
        z,
        kernel,
        noise,
        parts,
        SparseFitInfo {
            fps_calls,
            optimization,
        },
    )
}

/// Builds a sparse state at fixed hyperparameters and inducing inputs.
pub fn sparse_fit_fixed(x: &Matrix, y: &[f64], k: &KernelExpr, noise: f64, z: &Matrix) -> Result<SparseState> {
    let parts = vfe_parts(x, y, k, noise, z)?;
    SparseState::from_parts(
        z.clone(),
        k.clone(),
        noise,
        parts,
        SparseFitInfo {
            fps_calls: 0,
            optimization: None,
        },
    )
}

const PREDICT_CHUNK: usize = 256;

/// Posterior mean and latent variance
/// `k** - |L_uu^{-1} k_u*|^2 + |L_B^{-1} L_uu^{-1} k_u*|^2`.
pub fn sparse_predict(s: &SparseState, x_star: &Matrix) -> Result<(Vector, Vector)> {
    check_dim("sparse_predict", s.z.cols(), x_star.cols())?;
    let t = x_star.rows();
    let m = s.z.rows();
    let prior = s.kernel.diag(x_star)?;
    let mut mean = Vec::with_capacity(t);
    let mut var = Vec::with_capacity(t);
    let mut start = 0;
    while start < t {
        let end = (start + PREDICT_CHUNK).min(t);
        let mut cross = s.kernel.eval(&x_star.row_block(start, end), &s.z)?;
        mean.extend(cross.row_iter().map(|row| dot(row, &s.weights)));
        let mut terms = vec![0.0; end - start];
        parallel::for_each_row_mut(cross.as_mut_slice(), m, |_, row| {
            solve_in_place(s.luu.l(), row, TriMode::Lower)
        });
        let first: Vec<f64> = cross.row_iter().map(|v| dot(v, v)).collect();
        parallel::for_each_row_mut(cross.as_mut_slice(), m, |_, row| {
            solve_in_place(s.lb.l(), row, TriMode::Lower)
        });
        for (i, v) in cross.row_iter().enumerate() {
            terms[i] = prior[start + i] - first[i] + dot(v, v);
        }
        var.extend(terms.into_iter().map(|v| v.max(0.0)));
        start = end;
    }
    Ok((Vector::from(mean), Vector::from(var)))
}
