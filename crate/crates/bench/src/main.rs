//! `bench`: timed suites over the gp-core inference paths.
//!
//! ```text
//! bench --suite exact --n 256,1024 --d 1 --kernel "(scale 1.0 (rbf 0.3))" --format markdown
//! ```
//!
//! Kernels are written as s-expressions:
//!
//! ```text
//! kernel := (rbf l) | (matern12 l) | (matern32 l) | (matern52 l)
//!         | (periodic l p) | (linear v) | (scale s kernel)
//!         | (+ kernel kernel) | (* kernel kernel)
//! ```
//!
//! Exit status is 0 when every cell succeeds, 1 when any cell fails and 2
//! for bad arguments. `BENCH_THREADS` caps the worker pool.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use gp_bench::{emit_table, run_suite, BenchError, DatasetSpec, GeneratorKind, SuiteKind, SuiteParams, TableFormat};
use gp_core::models::Strategy;
use gp_core::parse_kernel;

#[derive(Parser, Debug)]
#[command(name = "bench", version, about = "Timed GP regression suites")]
struct Args {
    /// exact, sparse, ski, matvec, cholesky, gram, memory or accuracy.
    #[arg(long)]
    suite: String,

    /// Comma-separated training sizes.
    #[arg(long, value_delimiter = ',', default_value = "1000")]
    n: Vec<usize>,

    /// Comma-separated input dimensions.
    #[arg(long, value_delimiter = ',', default_value = "1")]
    d: Vec<usize>,

    /// Inducing points (sparse, accuracy).
    #[arg(long)]
    m: Option<usize>,

    /// SKI grid size.
    #[arg(long)]
    grid: Option<usize>,

    /// Kernel s-expression; each suite has its own default.
    #[arg(long)]
    kernel: Option<String>,

    /// cholesky, cg, ski or auto.
    #[arg(long, default_value = "auto")]
    strategy: String,

    #[arg(long, default_value_t = 5)]
    runs: usize,

    #[arg(long, default_value_t = 1)]
    warmup: usize,

    #[arg(long, default_value_t = 0)]
    seed: u64,

    /// csv or markdown.
    #[arg(long, default_value = "markdown")]
    format: String,

    /// Write the table here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,

    /// Noise variance.
    #[arg(long, default_value_t = 0.01)]
    noise: f64,

    /// Adam steps for sparse and accuracy.
    #[arg(long)]
    steps: Option<usize>,

    /// Matrix-free row-slab height.
    #[arg(long)]
    block: Option<usize>,

    /// Dataset for the accuracy suite: trend-seasonal, bump-noise, or a CSV path.
    #[arg(long)]
    data: Option<String>,
}

fn params(args: &Args) -> Result<(SuiteKind, SuiteParams, TableFormat), BenchError> {
    let suite: SuiteKind = args.suite.parse()?;
    let format: TableFormat = args.format.parse()?;
    let strategy: Strategy = args.strategy.parse()?;
    let kernel = args.kernel.as_deref().map(parse_kernel).transpose()?;
    let data = match args.data.as_deref() {
        None => None,
        Some("trend-seasonal") => Some(DatasetSpec::trend_seasonal_default(args.seed)),
        Some("bump-noise") => Some(DatasetSpec::new(GeneratorKind::BumpNoise, 100, args.seed)),
        Some(path) => {
            let mut spec = DatasetSpec::new(GeneratorKind::CsvFile, 0, args.seed);
            spec.path = Some(PathBuf::from(path));
            Some(spec)
        }
    };
    let default_m = if suite == SuiteKind::Accuracy { 200 } else { 64 };
    let p = SuiteParams {
        ns: args.n.clone(),
        ds: args.d.clone(),
        m: args.m.unwrap_or(default_m),
        grid: args.grid,
        kernel,
        strategy,
        runs: args.runs,
        warmup: args.warmup,
        seed: args.seed,
        noise: args.noise,
        steps: args.steps,
        block: args.block,
        data,
    };
    Ok((suite, p, format))
}

fn main() -> ExitCode {
    let args = Args::parse();
    if let Some(t) = std::env::var("BENCH_THREADS").ok().and_then(|v| v.parse::<usize>().ok()) {
        gp_core::parallel::init_global_threads(t);
    }
    let (suite, p, format) = match params(&args) {
        Ok(v) => v,
        Err(e) => {
            eprintln!("bench: {e}");
            return ExitCode::from(2);
        }
    };
    let records = match run_suite(suite, &p) {
        Ok(r) => r,
        Err(BenchError::InvalidSpec(msg)) => {
            eprintln!("bench: {msg}");
            return ExitCode::from(2);
        }
        Err(e) => {
            eprintln!("bench: {e}");
            return ExitCode::from(1);
        }
    };
    let text = match emit_table(&records, format) {
        Ok(t) => t,
        Err(e) => {
            eprintln!("bench: {e}");
            return ExitCode::from(1);
        }
    };
    match &args.out {
        Some(path) => {
            if let Err(e) = std::fs::write(path, &text) {
                eprintln!("bench: {}: {e}", path.display());
                return ExitCode::from(1);
            }
        }
        None => print!("{text}"),
    }
    for r in records.iter().filter(|r| !r.is_ok()) {
        eprintln!("bench: {} n={} d={}: {}", r.suite, r.n, r.d, r.status);
    }
    if records.iter().all(|r| r.is_ok()) {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    }
}
