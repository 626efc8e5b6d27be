use std::f64::consts::PI;

use super::optimize::{check_noise, optimize_hyperparams, pack_params, unpack_params, OptimizeResult, OptimizerConfig};
use crate::error::{check_dim, GpError, Result};
use crate::kernels::KernelExpr;
use crate::linalg::{cholesky, dot, solve_in_place, CholeskyFactor, Matrix, TriMode, Vector};
use crate::parallel;
use crate::solvers::{
    build_ski, cg_solve, cg_solve_batch, slq_logdet, CgConfig, CgSolution, LinearOperator, MatrixFreeOperator,
    SkiOperator, SkiState, DEFAULT_BLOCK,
};

/// How the exact GP solves against `K + noise I`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Strategy {
    /// Dense Cholesky factorization, `O(N^3)` time and `O(N^2)` memory.
    Cholesky,
    /// Matrix-free conjugate gradients; log-determinants by stochastic Lanczos quadrature.
    Cg,
    /// CG on the structured-interpolation operator. One input dimension only.
    Ski,
    /// Pick one of the above from the problem size.
    Auto,
}

impl std::fmt::Display for Strategy {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Strategy::Cholesky => "cholesky",
            Strategy::Cg => "cg",
            Strategy::Ski => "ski",
            Strategy::Auto => "auto",
        })
    }
}

impl std::str::FromStr for Strategy {
    type Err = GpError;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "cholesky" => Ok(Strategy::Cholesky),
            "cg" => Ok(Strategy::Cg),
            "ski" => Ok(Strategy::Ski),
            "auto" => Ok(Strategy::Auto),
            other => Err(GpError::InvalidParameter(format!("unknown strategy `{other}`"))),
        }
    }
}

/// Solver settings shared by fit, predict and the log marginal likelihood.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FitConfig {
    pub cg: CgConfig,
    /// Row-slab height of the matrix-free operator.
    pub block: usize,
    /// SKI grid size; `None` uses [`default_ski_grid`].
    pub ski_grid: Option<usize>,
    /// Largest `N` for which `Auto` chooses Cholesky.
    pub cholesky_max_n: usize,
    /// Seed for SLQ probes.
    pub seed: u64,
}

impl Default for FitConfig {
    fn default() -> Self {
        FitConfig {
            cg: CgConfig::default(),
            block: DEFAULT_BLOCK,
            ski_grid: None,
            cholesky_max_n: 4000,
            seed: 0,
        }
    }
}

impl FitConfig {
    /// Resolves `Auto` for `n` points in `d` dimensions; other strategies pass through.
    pub fn resolve(&self, strategy: Strategy, n: usize, d: usize) -> Strategy {
        match strategy {
            Strategy::Auto if n <= self.cholesky_max_n => Strategy::Cholesky,
            Strategy::Auto if d == 1 => Strategy::Ski,
            Strategy::Auto => Strategy::Cg,
            s => s,
        }
    }
}

/// `max(128, next_pow2(ceil(4 sqrt(N))))`, capped at `2^15`.
pub fn default_ski_grid(n: usize) -> usize {
    let target = (4.0 * (n as f64).sqrt()).ceil() as usize;
    target.next_power_of_two().clamp(128, 1 << 15)
}

#[derive(Clone, Debug)]
enum Cache {
    Cholesky(CholeskyFactor),
    Cg,
    Ski(SkiState),
}

/// A fitted exact GP. Immutable; predictions can run concurrently.
#[derive(Clone, Debug)]
pub struct ExactState {
    x: Matrix,
    y: Vector,
    kernel: KernelExpr,
    noise: f64,
    strategy: Strategy,
    config: FitConfig,
    cache: Cache,
    alpha: Vector,
    cg_iterations: Option<usize>,
}

impl ExactState {
    pub fn x_train(&self) -> &Matrix {
        &self.x
    }

    pub fn y_train(&self) -> &Vector {
        &self.y
    }

    pub fn kernel(&self) -> &KernelExpr {
        &self.kernel
    }

    pub fn noise(&self) -> f64 {
        self.noise
    }

    /// The resolved strategy, never `Auto`.
    pub fn strategy(&self) -> Strategy {
        self.strategy
    }

    pub fn config(&self) -> &FitConfig {
        &self.config
    }

    /// `(K + noise I)^{-1} y` under the active operator.
    pub fn alpha(&self) -> &Vector {
        &self.alpha
    }

    pub fn cholesky_factor(&self) -> Option<&CholeskyFactor> {
        match &self.cache {
            Cache::Cholesky(f) => Some(f),
            _ => None,
        }
    }

    pub fn ski_state(&self) -> Option<&SkiState> {
        match &self.cache {
            Cache::Ski(s) => Some(s),
            _ => None,
        }
    }

    /// CG iterations used for `alpha` (CG and SKI strategies).
    pub fn cg_iterations(&self) -> Option<usize> {
        self.cg_iterations
    }

    /// Runs `f` with the iterative operator of the active strategy.
    fn with_operator<T>(&self, f: impl FnOnce(&dyn LinearOperator) -> Result<T>) -> Result<T> {
        match &self.cache {
            Cache::Cholesky(_) => Err(GpError::Unsupported("Cholesky state has no iterative operator".into())),
            Cache::Cg => {
                let op = MatrixFreeOperator::new(&self.kernel, &self.x, self.noise, self.config.block)?;
                f(&op)
            }
            Cache::Ski(ski) => f(&SkiOperator::new(ski, self.noise)),
        }
    }
}

/// Fits with default solver settings.
pub fn gp_fit(x: &Matrix, y: &[f64], k: &KernelExpr, noise: f64, strategy: Strategy) -> Result<ExactState> {
    gp_fit_with(x, y, k, noise, strategy, &FitConfig::default())
}

/// Fits an exact GP, caching everything prediction needs.
pub fn gp_fit_with(
    x: &Matrix,
    y: &[f64],
    k: &KernelExpr,
    noise: f64,
    strategy: Strategy,
    config: &FitConfig,
) -> Result<ExactState> {
    let n = x.rows();
    if n == 0 {
        return Err(GpError::InvalidParameter("need at least one training point".into()));
    }
    check_dim("gp_fit", n, y.len())?;
    check_noise(noise)?;
    if y.iter().any(|v| !v.is_finite()) {
        return Err(GpError::NonFinite("training targets"));
    }
    config.cg.validate()?;
    let strategy = config.resolve(strategy, n, x.cols());

    let (cache, alpha, cg_iterations) = match strategy {
        Strategy::Cholesky => {
            let mut gram = k.eval(x, x)?;
            gram.add_diag(noise);
            let factor = cholesky(&gram)?;
            drop(gram);
            let alpha = factor.solve(y)?;
            (Cache::Cholesky(factor), alpha, None)
        }
        Strategy::Cg => {
            let op = MatrixFreeOperator::new(k, x, noise, config.block)?;
            let sol = converged(cg_solve(&op, y, &config.cg)?, &config.cg)?;
            (Cache::Cg, sol.x, Some(sol.iterations))
        }
        Strategy::Ski => {
            let m = config.ski_grid.unwrap_or_else(|| default_ski_grid(n));
            let ski = build_ski(x, k, m)?;
            let sol = converged(cg_solve(&SkiOperator::new(&ski, noise), y, &config.cg)?, &config.cg)?;
            (Cache::Ski(ski), sol.x, Some(sol.iterations))
        }
        Strategy::Auto => unreachable!("resolved above"),
    };

    Ok(ExactState {
        x: x.clone(),
        y: Vector::from_slice(y),
        kernel: k.clone(),
        noise,
        strategy,
        config: *config,
        cache,
        alpha,
        cg_iterations,
    })
}

fn converged(sol: CgSolution, cfg: &CgConfig) -> Result<CgSolution> {
    if sol.converged(cfg) {
        Ok(sol)
    } else {
        Err(GpError::CgNotConverged {
            iterations: sol.iterations,
            residual: sol.residual,
        })
    }
}

/// Test rows per chunk in prediction.
const PREDICT_CHUNK: usize = 64;

/// Posterior mean and latent (noise-free) variance at the rows of `x_star`.
pub fn gp_predict(s: &ExactState, x_star: &Matrix) -> Result<(Vector, Vector)> {
    check_dim("gp_predict", s.x.cols(), x_star.cols())?;
    let t = x_star.rows();
    let prior = s.kernel.diag(x_star)?;
    let mut mean = Vec::with_capacity(t);
    let mut var = Vec::with_capacity(t);

    let mut start = 0;
    while start < t {
        let end = (start + PREDICT_CHUNK).min(t);
        let mut cross = s.kernel.eval(&x_star.row_block(start, end), &s.x)?;
        mean.extend(cross.row_iter().map(|row| dot(row, &s.alpha)));

        let explained: Vec<f64> = match &s.cache {
            Cache::Cholesky(f) => {
                let n = f.order();
                parallel::for_each_row_mut(cross.as_mut_slice(), n, |_, row| {
                    solve_in_place(f.l(), row, TriMode::Lower)
                });
                cross.row_iter().map(|v| dot(v, v)).collect()
            }
            _ => {
                let rows: Vec<&[f64]> = cross.row_iter().collect();
                let sols = s.with_operator(|op| cg_solve_batch(op, &rows, &s.config.cg))?;
                let mut out = Vec::with_capacity(rows.len());
                for (row, sol) in rows.iter().zip(sols) {
                    let sol = converged(sol, &s.config.cg)?;
                    out.push(dot(row, &sol.x));
                }
                out
            }
        };
        var.extend(
            explained
                .iter()
                .zip(&prior[start..end])
                .map(|(q, p)| (p - q).max(0.0)),
        );
        start = end;
    }
    Ok((Vector::from(mean), Vector::from(var)))
}

/// `-1/2 (y^T alpha + log det K_y + N log 2 pi)`.
///
/// Cholesky uses the exact log-determinant; CG and SKI use a seeded SLQ estimate.
pub fn log_marginal_likelihood(s: &ExactState) -> Result<f64> {
    let n = s.x.rows();
    let fit = dot(&s.y, &s.alpha);
    let logdet = match &s.cache {
        Cache::Cholesky(f) => f.logdet(),
        _ => s.with_operator(|op| slq_logdet(op, n, &s.config.cg, s.config.seed))?,
    };
    Ok(-0.5 * (fit + logdet + n as f64 * (2.0 * PI).ln()))
}

/// Maximizes the log marginal likelihood over kernel hyperparameters and
/// noise with finite-difference Adam. Failed fits count as non-finite
/// objective values.
pub fn optimize_exact(
    x: &Matrix,
    y: &[f64],
    k: &KernelExpr,
    noise: f64,
    strategy: Strategy,
    config: &FitConfig,
    opt: &OptimizerConfig,
) -> Result<(KernelExpr, f64, OptimizeResult)> {
    let p0 = pack_params(k, noise)?;
    let objective = |p: &[f64]| {
        unpack_params(k, p)
            .and_then(|(kp, np)| gp_fit_with(x, y, &kp, np, strategy, config))
            .and_then(|s| log_marginal_likelihood(&s))
            .unwrap_or(f64::NAN)
    };
    let result = optimize_hyperparams(objective, &p0, opt)?;
    let (kernel, noise) = unpack_params(k, result.params.as_slice())?;
    Ok((kernel, noise, result))
}
