//! Timed benchmark suites.
//!
//! Each cell is executed `warmup + runs` times. Before every execution the
//! ledger's high-water mark is reset; the warmup executions are then
//! discarded and the median of the rest is reported. Setup work (data
//! generation, Gram assembly for the Cholesky suite, SKI grids) happens
//! outside the timed region.

use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use gp_core::linalg::{cholesky, ledger, Matrix};
use gp_core::models::{
    default_ski_grid, gp_fit_with, gp_predict, metrics, optimize_exact, sparse_fit, sparse_predict, FitConfig, Metrics,
    OptimizerConfig, Strategy,
};
use gp_core::solvers::{build_ski, ski_matvec, LinearOperator, MatrixFreeOperator, DEFAULT_BLOCK};
use gp_core::KernelExpr;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::dataset::{generate_dataset, uniform_inputs, Dataset, DatasetSpec};
use crate::BenchError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum SuiteKind {
    /// Exact fit plus prediction on held-out points.
    Exact,
    /// Sparse fit plus prediction on held-out points.
    Sparse,
    /// One SKI operator product.
    Ski,
    /// One matrix-free operator product.
    Matvec,
    /// Dense Cholesky of a prebuilt Gram matrix.
    Cholesky,
    /// Dense Gram assembly.
    Gram,
    /// Exact fits, reported for their peak tracked bytes.
    Memory,
    /// Optimized exact and sparse RBF models scored on a held-out split.
    Accuracy,
}

impl SuiteKind {
    pub const ALL: [SuiteKind; 8] = [
        SuiteKind::Exact,
        SuiteKind::Sparse,
        SuiteKind::Ski,
        SuiteKind::Matvec,
        SuiteKind::Cholesky,
        SuiteKind::Gram,
        SuiteKind::Memory,
        SuiteKind::Accuracy,
    ];
}

impl fmt::Display for SuiteKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SuiteKind::Exact => "exact",
            SuiteKind::Sparse => "sparse",
            SuiteKind::Ski => "ski",
            SuiteKind::Matvec => "matvec",
            SuiteKind::Cholesky => "cholesky",
            SuiteKind::Gram => "gram",
            SuiteKind::Memory => "memory",
            SuiteKind::Accuracy => "accuracy",
        })
    }
}

impl FromStr for SuiteKind {
    type Err = BenchError;

    fn from_str(s: &str) -> Result<Self, BenchError> {
        SuiteKind::ALL
            .into_iter()
            .find(|k| k.to_string() == s)
            .ok_or_else(|| BenchError::InvalidSpec(format!("unknown suite `{s}`")))
    }
}

/// The parameter grid for one suite invocation.
#[derive(Clone, Debug)]
pub struct SuiteParams {
    /// Training-set sizes. Ignored by `accuracy`.
    pub ns: Vec<usize>,
    pub ds: Vec<usize>,
    /// Inducing points for `sparse` and `accuracy`.
    pub m: usize,
    /// SKI grid size; `None` picks one from `N`.
    pub grid: Option<usize>,
    /// `None` uses the suite's default kernel.
    pub kernel: Option<KernelExpr>,
    /// For `exact` and `memory`. `Auto` in the memory suite means both Cholesky and CG.
    pub strategy: Strategy,
    pub runs: usize,
    pub warmup: usize,
    pub seed: u64,
    /// Noise variance, for both data and model.
    pub noise: f64,
    /// Adam steps; `None` means 0 for `sparse` and 100 for `accuracy`.
    pub steps: Option<usize>,
    /// Row-slab height of the matrix-free operator; `None` is 32 for `memory`, 256 otherwise.
    pub block: Option<usize>,
    /// Dataset for `accuracy`; defaults to the trend-seasonal series.
    pub data: Option<DatasetSpec>,
}

impl Default for SuiteParams {
    fn default() -> Self {
        SuiteParams {
            ns: vec![1000],
            ds: vec![1],
            m: 64,
            grid: None,
            kernel: None,
            strategy: Strategy::Auto,
            runs: 5,
            warmup: 1,
            seed: 0,
            noise: 0.01,
            steps: None,
            block: None,
            data: None,
        }
    }
}

/// One benchmark cell.
#[derive(Clone, Debug, PartialEq)]
pub struct BenchRecord {
    pub suite: SuiteKind,
    pub dataset: String,
    pub n: usize,
    pub d: usize,
    pub m: Option<usize>,
    pub grid: Option<usize>,
    pub strategy: Option<String>,
    pub kernel: String,
    pub seed: u64,
    pub runs: usize,
    pub warmup: usize,
    pub rmse: Option<f64>,
    pub nll: Option<f64>,
    pub coverage95: Option<f64>,
    /// Retained wall times in milliseconds, warmup excluded.
    pub times_ms: Vec<f64>,
    pub median_ms: Option<f64>,
    /// Largest tracked-byte excess over the pre-run baseline among retained runs.
    pub peak_bytes: Option<usize>,
    /// `ok`, or `error: <message>`.
    pub status: String,
}

impl BenchRecord {
    pub fn is_ok(&self) -> bool {
        self.status == "ok"
    }
}

/// Wall times and ledger peak of one cell.
#[derive(Clone, Debug, PartialEq)]
pub struct Timing {
    pub times_ms: Vec<f64>,
    pub median_ms: f64,
    pub peak_bytes: usize,
}

/// Runs `f` `warmup + runs` times, keeping the output of the last run.
pub fn time_cell<T>(
    runs: usize,
    warmup: usize,
    mut f: impl FnMut() -> Result<T, BenchError>,
) -> Result<(Timing, T), BenchError> {
    if runs == 0 {
        return Err(BenchError::InvalidSpec("need at least one timed run".into()));
    }
    let mut times_ms = Vec::with_capacity(runs);
    let mut peak_bytes = 0;
    let mut last = None;
    for i in 0..warmup + runs {
        let start = Instant::now();
        let (out, peak) = ledger::measure_peak(&mut f);
        let elapsed = start.elapsed();
        let out = out?;
        if i >= warmup {
            times_ms.push((elapsed.as_nanos() as f64 / 1e6).max(1e-6));
            peak_bytes = peak_bytes.max(peak);
            last = Some(out);
        }
    }
    let median_ms = median(&times_ms);
    Ok((
        Timing {
            times_ms,
            median_ms,
            peak_bytes,
        },
        last.expect("runs >= 1"),
    ))
}

pub fn median(xs: &[f64]) -> f64 {
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    let mid = v.len() / 2;
    if v.len() % 2 == 1 {
        v[mid]
    } else {
        0.5 * (v[mid - 1] + v[mid])
    }
}

/// Uniform inputs with a smooth target, for the timing suites.
pub fn timing_problem(n: usize, d: usize, noise: f64, seed: u64) -> (Matrix, Vec<f64>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let x = uniform_inputs(n, d, &mut rng);
    let y = smooth_target(&x, noise, &mut rng);
    (x, y)
}

fn smooth_target(x: &Matrix, noise: f64, rng: &mut impl Rng) -> Vec<f64> {
    let sd = noise.sqrt();
    let scale = 1.0 / (x.cols() as f64).sqrt();
    x.row_iter()
        .map(|row| {
            let f: f64 = row
                .iter()
                .enumerate()
                .map(|(j, &v)| (std::f64::consts::TAU * v + j as f64).sin())
                .sum();
            let z: f64 = rng.sample(StandardNormal);
            scale * f + sd * z
        })
        .collect()
}

/// Timing data plus a held-out quarter, each from its own seed stream.
fn timing_split(n: usize, d: usize, noise: f64, seed: u64) -> Dataset {
    let (x_train, y_train) = timing_problem(n, d, noise, seed);
    let (x_test, y_test) = timing_problem((n / 4).max(1), d, noise, seed ^ 0x9e37_79b9_7f4a_7c15);
    Dataset {
        x_train,
        y_train,
        x_test,
        y_test,
    }
}

fn default_kernel(suite: SuiteKind) -> KernelExpr {
    let rbf = |l| KernelExpr::rbf(l).expect("valid lengthscale");
    match suite {
        SuiteKind::Accuracy => KernelExpr::scale(1.0, rbf(0.3)).expect("valid scale"),
        _ => rbf(0.3),
    }
}

struct Cell {
    dataset: String,
    n: usize,
    d: usize,
    m: Option<usize>,
    grid: Option<usize>,
    strategy: Option<String>,
    kernel: String,
}

fn record(
    suite: SuiteKind,
    p: &SuiteParams,
    cell: Cell,
    result: Result<(Timing, Option<Metrics>), BenchError>,
) -> BenchRecord {
    let mut r = BenchRecord {
        suite,
        dataset: cell.dataset,
        n: cell.n,
        d: cell.d,
        m: cell.m,
        grid: cell.grid,
        strategy: cell.strategy,
        kernel: cell.kernel,
        seed: p.seed,
        runs: p.runs,
        warmup: p.warmup,
        rmse: None,
        nll: None,
        coverage95: None,
        times_ms: Vec::new(),
        median_ms: None,
        peak_bytes: None,
        status: "ok".into(),
    };
    match result {
        Ok((t, m)) => {
            r.times_ms = t.times_ms;
            r.median_ms = Some(t.median_ms);
            r.peak_bytes = Some(t.peak_bytes);
            if let Some(m) = m {
                r.rmse = Some(m.rmse);
                r.nll = Some(m.nll);
                r.coverage95 = Some(m.coverage95);
            }
        }
        Err(e) => r.status = format!("error: {e}"),
    }
    r
}

fn no_metrics<T>(r: Result<(Timing, T), BenchError>) -> Result<(Timing, Option<Metrics>), BenchError> {
    r.map(|(t, _)| (t, None))
}

/// Runs every cell of `suite` over the parameter grid, in `n`-major then `d` order.
///
/// A failing cell is reported through its `status` and does not stop the suite.
pub fn run_suite(suite: SuiteKind, p: &SuiteParams) -> Result<Vec<BenchRecord>, BenchError> {
    if p.runs == 0 {
        return Err(BenchError::InvalidSpec("--runs must be at least 1".into()));
    }
    if !(p.noise.is_finite() && p.noise > 0.0) {
        return Err(BenchError::InvalidSpec(format!("noise must be positive, got {}", p.noise)));
    }
    if suite == SuiteKind::Accuracy {
        return accuracy_suite(p);
    }
    if p.ns.is_empty() || p.ds.is_empty() {
        return Err(BenchError::InvalidSpec("need at least one N and one D".into()));
    }
    let kernel = p.kernel.clone().unwrap_or_else(|| default_kernel(suite));
    let kname = kernel.to_string();
    let block = p.block.unwrap_or(if suite == SuiteKind::Memory { 32 } else { DEFAULT_BLOCK });
    let mut out = Vec::new();
    for &n in &p.ns {
        for &d in &p.ds {
            let cell = |m, grid, strategy: Option<String>| Cell {
                dataset: "uniform".into(),
                n,
                d,
                m,
                grid,
                strategy,
                kernel: kname.clone(),
            };
            if n < 2 || d == 0 {
                let err = Err(BenchError::InvalidSpec(format!("need N >= 2 and D >= 1, got N = {n}, D = {d}")));
                out.push(record(suite, p, cell(None, None, None), err));
                continue;
            }
            match suite {
                SuiteKind::Gram => {
                    let (x, _) = timing_problem(n, d, p.noise, p.seed);
                    let r = time_cell(p.runs, p.warmup, || Ok(kernel.eval(&x, &x)?));
                    out.push(record(suite, p, cell(None, None, None), no_metrics(r)));
                }
                SuiteKind::Cholesky => {
                    let (x, _) = timing_problem(n, d, p.noise, p.seed);
                    let r = kernel.eval(&x, &x).map_err(BenchError::from).and_then(|mut k| {
                        k.add_diag(p.noise);
                        time_cell(p.runs, p.warmup, || Ok(cholesky(&k)?))
                    });
                    out.push(record(suite, p, cell(None, None, None), no_metrics(r)));
                }
                SuiteKind::Matvec => {
                    let (x, y) = timing_problem(n, d, p.noise, p.seed);
                    let r = MatrixFreeOperator::new(&kernel, &x, p.noise, block)
                        .map_err(BenchError::from)
                        .and_then(|op| time_cell(p.runs, p.warmup, || Ok(op.apply(&y)?)));
                    out.push(record(suite, p, cell(None, None, None), no_metrics(r)));
                }
                SuiteKind::Ski => {
                    let grid = p.grid.unwrap_or_else(|| default_ski_grid(n));
                    let (x, y) = timing_problem(n, d, p.noise, p.seed);
                    let r = build_ski(&x, &kernel, grid)
                        .map_err(BenchError::from)
                        .and_then(|s| time_cell(p.runs, p.warmup, || Ok(ski_matvec(&s, p.noise, &y)?)));
                    out.push(record(suite, p, cell(None, Some(grid), None), no_metrics(r)));
                }
                SuiteKind::Exact => {
                    let mut cfg = FitConfig {
                        block,
                        ski_grid: p.grid,
                        seed: p.seed,
                        ..FitConfig::default()
                    };
                    let strategy = cfg.resolve(p.strategy, n, d);
                    if strategy == Strategy::Ski {
                        cfg.ski_grid = Some(p.grid.unwrap_or_else(|| default_ski_grid(n)));
                    }
                    let ds = timing_split(n, d, p.noise, p.seed);
                    let r = time_cell(p.runs, p.warmup, || {
                        let s = gp_fit_with(&ds.x_train, &ds.y_train, &kernel, p.noise, strategy, &cfg)?;
                        let (mean, var) = gp_predict(&s, &ds.x_test)?;
                        Ok(metrics(&mean, &var, p.noise, &ds.y_test)?)
                    })
                    .map(|(t, m)| (t, Some(m)));
                    let grid = if strategy == Strategy::Ski { cfg.ski_grid } else { None };
                    out.push(record(suite, p, cell(None, grid, Some(strategy.to_string())), r));
                }
                SuiteKind::Sparse => {
                    let m = p.m.min(n);
                    let opt = OptimizerConfig::with_steps(p.steps.unwrap_or(0));
                    let ds = timing_split(n, d, p.noise, p.seed);
                    let r = time_cell(p.runs, p.warmup, || {
                        let s = sparse_fit(&ds.x_train, &ds.y_train, &kernel, p.noise, m, &opt, None)?;
                        let (mean, var) = sparse_predict(&s, &ds.x_test)?;
                        Ok(metrics(&mean, &var, s.noise(), &ds.y_test)?)
                    })
                    .map(|(t, m)| (t, Some(m)));
                    out.push(record(suite, p, cell(Some(m), None, Some("vfe".into())), r));
                }
                SuiteKind::Memory => {
                    let strategies = match p.strategy {
                        Strategy::Auto => vec![Strategy::Cholesky, Strategy::Cg],
                        s => vec![s],
                    };
                    let (x, y) = timing_problem(n, d, p.noise, p.seed);
                    for s in strategies {
                        let cfg = FitConfig {
                            block,
                            ski_grid: Some(p.grid.unwrap_or_else(|| default_ski_grid(n))),
                            seed: p.seed,
                            ..FitConfig::default()
                        };
                        let r = time_cell(p.runs, p.warmup, || Ok(gp_fit_with(&x, &y, &kernel, p.noise, s, &cfg)?));
                        let grid = if s == Strategy::Ski { cfg.ski_grid } else { None };
                        out.push(record(suite, p, cell(None, grid, Some(s.to_string())), no_metrics(r)));
                    }
                }
                SuiteKind::Accuracy => unreachable!("handled above"),
            }
        }
    }
    Ok(out)
}

/// Scores an LML-optimized exact GP and a VFE-optimized sparse GP on the
/// held-out split. Targets are standardized with training statistics for
/// fitting; metrics are reported in the original units.
fn accuracy_suite(p: &SuiteParams) -> Result<Vec<BenchRecord>, BenchError> {
    let spec = p.data.clone().unwrap_or_else(|| DatasetSpec::trend_seasonal_default(p.seed));
    let ds = generate_dataset(&spec)?;
    let kernel = p.kernel.clone().unwrap_or_else(|| default_kernel(SuiteKind::Accuracy));
    let opt = OptimizerConfig::with_steps(p.steps.unwrap_or(100));
    let n = ds.x_train.rows();
    let d = ds.dim();
    let m = p.m.min(n);

    let mu = ds.y_train.iter().sum::<f64>() / n as f64;
    let sd = (ds.y_train.iter().map(|y| (y - mu).powi(2)).sum::<f64>() / n as f64).sqrt().max(f64::MIN_POSITIVE);
    let y_std: Vec<f64> = ds.y_train.iter().map(|y| (y - mu) / sd).collect();
    let score = |mean: &[f64], var: &[f64], noise: f64| {
        let mean: Vec<f64> = mean.iter().map(|v| mu + sd * v).collect();
        let var: Vec<f64> = var.iter().map(|v| sd * sd * v).collect();
        metrics(&mean, &var, sd * sd * noise, &ds.y_test)
    };
    let noise0 = 1e-3;
    let cell = |m, strategy: &str| Cell {
        dataset: spec.kind.to_string(),
        n,
        d,
        m,
        grid: None,
        strategy: Some(strategy.into()),
        kernel: kernel.to_string(),
    };

    let exact = time_cell(p.runs, p.warmup, || {
        let cfg = FitConfig::default();
        let (k, noise, _) = optimize_exact(&ds.x_train, &y_std, &kernel, noise0, Strategy::Cholesky, &cfg, &opt)?;
        let s = gp_fit_with(&ds.x_train, &y_std, &k, noise, Strategy::Cholesky, &cfg)?;
        let (mean, var) = gp_predict(&s, &ds.x_test)?;
        Ok(score(&mean, &var, noise)?)
    })
    .map(|(t, m)| (t, Some(m)));
    let sparse = time_cell(p.runs, p.warmup, || {
        let s = sparse_fit(&ds.x_train, &y_std, &kernel, noise0, m, &opt, None)?;
        let (mean, var) = sparse_predict(&s, &ds.x_test)?;
        Ok(score(&mean, &var, s.noise())?)
    })
    .map(|(t, m)| (t, Some(m)));
    Ok(vec![
        record(SuiteKind::Accuracy, p, cell(None, "cholesky"), exact),
        record(SuiteKind::Accuracy, p, cell(Some(m), "vfe"), sparse),
    ])
}
