//! Seeded dataset generators and CSV ingestion.
//!
//! Every generator is a pure function of its [`DatasetSpec`]. Splits are
//! strided: every fifth point (index `i % 5 == 4`) goes to the test set.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use gp_core::linalg::{cholesky, CholeskyFactor, Matrix};
use gp_core::KernelExpr;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::BenchError;

/// Largest `N` the Cholesky-based GP sampler accepts.
pub const MAX_SAMPLED_N: usize = 6000;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum GeneratorKind {
    /// `X ~ U[0,1]^D`, `y` drawn from a GP prior plus noise.
    UniformSynthetic,
    /// Monthly series: linear trend, annual cycle and white noise.
    TrendSeasonal,
    /// Sharp dip-and-rebound curve with input-dependent noise.
    BumpNoise,
    /// Rows loaded from a CSV file.
    CsvFile,
}

impl fmt::Display for GeneratorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            GeneratorKind::UniformSynthetic => "uniform-synthetic",
            GeneratorKind::TrendSeasonal => "trend-seasonal",
            GeneratorKind::BumpNoise => "bump-noise",
            GeneratorKind::CsvFile => "csv-file",
        })
    }
}

impl FromStr for GeneratorKind {
    type Err = BenchError;

    fn from_str(s: &str) -> Result<Self, BenchError> {
        match s {
            "uniform-synthetic" | "uniform" => Ok(GeneratorKind::UniformSynthetic),
            "trend-seasonal" => Ok(GeneratorKind::TrendSeasonal),
            "bump-noise" => Ok(GeneratorKind::BumpNoise),
            "csv-file" | "csv" => Ok(GeneratorKind::CsvFile),
            other => Err(BenchError::InvalidSpec(format!("unknown dataset kind `{other}`"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct DatasetSpec {
    pub kind: GeneratorKind,
    /// Total points before the train/test split.
    pub n: usize,
    /// Input dimension (uniform-synthetic only; the others are 1-D or read it from the file).
    pub d: usize,
    /// Noise variance added to the targets.
    pub noise: f64,
    pub seed: u64,
    pub path: Option<PathBuf>,
    /// Generating covariance for uniform-synthetic.
    pub kernel: KernelExpr,
}

impl DatasetSpec {
    pub fn new(kind: GeneratorKind, n: usize, seed: u64) -> Self {
        let (d, noise) = match kind {
            GeneratorKind::UniformSynthetic => (1, 0.01),
            GeneratorKind::TrendSeasonal => (1, 0.25),
            GeneratorKind::BumpNoise => (1, 4.0),
            GeneratorKind::CsvFile => (0, 0.0),
        };
        DatasetSpec {
            kind,
            n,
            d,
            noise,
            seed,
            path: None,
            kernel: KernelExpr::rbf(0.3).expect("valid lengthscale"),
        }
    }

    /// The trend-seasonal series with 780 months, which splits into 624 training and 156 test points.
    pub fn trend_seasonal_default(seed: u64) -> Self {
        DatasetSpec::new(GeneratorKind::TrendSeasonal, 780, seed)
    }

    fn validate(&self) -> Result<(), BenchError> {
        if self.kind != GeneratorKind::CsvFile {
            if self.n < 2 {
                return Err(BenchError::InvalidSpec(format!("need N >= 2, got {}", self.n)));
            }
            if !(self.noise.is_finite() && self.noise >= 0.0) {
                return Err(BenchError::InvalidSpec(format!("bad noise level {}", self.noise)));
            }
        }
        if self.kind == GeneratorKind::UniformSynthetic {
            if self.d == 0 {
                return Err(BenchError::InvalidSpec("need D >= 1".into()));
            }
            if self.n > MAX_SAMPLED_N {
                return Err(BenchError::InvalidSpec(format!(
                    "uniform-synthetic samples by Cholesky and is capped at N = {MAX_SAMPLED_N}"
                )));
            }
        }
        Ok(())
    }
}

/// Train and test arrays.
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    pub x_train: Matrix,
    pub y_train: Vec<f64>,
    pub x_test: Matrix,
    pub y_test: Vec<f64>,
}

impl Dataset {
    pub fn dim(&self) -> usize {
        self.x_train.cols()
    }
}

pub fn generate_dataset(spec: &DatasetSpec) -> Result<Dataset, BenchError> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let (x, y) = match spec.kind {
        GeneratorKind::UniformSynthetic => {
            let x = uniform_inputs(spec.n, spec.d, &mut rng);
            let sampler = GpSampler::new(&x, &spec.kernel, spec.noise)?;
            let y = sampler.draw(&mut rng);
            (x, y)
        }
        GeneratorKind::TrendSeasonal => trend_seasonal(spec.n, spec.noise, &mut rng),
        GeneratorKind::BumpNoise => bump_noise(spec.n, spec.noise, &mut rng),
        GeneratorKind::CsvFile => {
            let path = spec
                .path
                .as_deref()
                .ok_or_else(|| BenchError::InvalidSpec("csv-file needs a path".into()))?;
            let (x, y) = read_csv(path)?;
            if spec.d != 0 && spec.d != x.cols() {
                return Err(BenchError::InvalidSpec(format!(
                    "expected {} feature columns, file has {}",
                    spec.d,
                    x.cols()
                )));
            }
            (x, y)
        }
    };
    Ok(strided_split(&x, &y))
}

/// Every fifth row to the test set, the rest to training, order preserved.
pub fn strided_split(x: &Matrix, y: &[f64]) -> Dataset {
    let (test, train): (Vec<usize>, Vec<usize>) = (0..x.rows()).partition(|i| i % 5 == 4);
    Dataset {
        x_train: x.select_rows(&train),
        y_train: train.iter().map(|&i| y[i]).collect(),
        x_test: x.select_rows(&test),
        y_test: test.iter().map(|&i| y[i]).collect(),
    }
}

/// `n x d` inputs drawn uniformly from the unit cube.
pub fn uniform_inputs(n: usize, d: usize, rng: &mut impl Rng) -> Matrix {
    Matrix::new(n, d, (0..n * d).map(|_| rng.random::<f64>()).collect()).expect("finite uniform draws")
}

/// Draws `y = L z` with `L L^T = K(X, X) + noise I` and `z` standard normal.
pub struct GpSampler {
    factor: CholeskyFactor,
}

impl GpSampler {
    pub fn new(x: &Matrix, kernel: &KernelExpr, noise: f64) -> Result<Self, BenchError> {
        let mut k = kernel.eval(x, x)?;
        k.add_diag(noise);
        Ok(GpSampler { factor: cholesky(&k)? })
    }

    pub fn draw(&self, rng: &mut impl Rng) -> Vec<f64> {
        let n = self.factor.order();
        let z: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
        let l = self.factor.l();
        (0..n).map(|i| gp_core::linalg::dot(&l.row(i)[..=i], &z[..=i])).collect()
    }
}

/// Time in years at monthly resolution; trend of 1.5 per year around the
/// midpoint plus a 3-unit annual cycle with a smaller second harmonic.
fn trend_seasonal(n: usize, noise: f64, rng: &mut impl Rng) -> (Matrix, Vec<f64>) {
    let t: Vec<f64> = (0..n).map(|i| i as f64 / 12.0).collect();
    let mid = t[n - 1] / 2.0;
    let sd = noise.sqrt();
    let tau = std::f64::consts::TAU;
    let y = t
        .iter()
        .map(|&ti| {
            let z: f64 = rng.sample(StandardNormal);
            1.5 * (ti - mid) + 3.0 * (tau * ti).sin() + 0.8 * (2.0 * tau * ti).cos() + sd * z
        })
        .collect();
    (Matrix::column(&t).expect("finite"), y)
}

/// Inputs on `[0, 60]`, sorted; flat, a deep dip near 21, a rebound near 32,
/// then decay. Noise standard deviation grows through the impact region.
fn bump_noise(n: usize, noise: f64, rng: &mut impl Rng) -> (Matrix, Vec<f64>) {
    let mut t: Vec<f64> = (0..n).map(|_| 60.0 * rng.random::<f64>()).collect();
    t.sort_by(f64::total_cmp);
    let y = t
        .iter()
        .map(|&ti| {
            let g = |c: f64, w: f64| (-((ti - c) / w).powi(2)).exp();
            let mean = -110.0 * g(21.0, 4.0) + 45.0 * g(31.0, 5.0) - 8.0 * g(42.0, 6.0);
            let sd = (noise * (1.0 + 60.0 * g(27.0, 10.0))).sqrt();
            let z: f64 = rng.sample(StandardNormal);
            mean + sd * z
        })
        .collect();
    (Matrix::column(&t).expect("finite"), y)
}

/// Reads `D` feature columns followed by one target column. A first row
/// that does not parse as numbers is treated as a header.
pub fn read_csv(path: &Path) -> Result<(Matrix, Vec<f64>), BenchError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .from_path(path)?;
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (line, record) in reader.records().enumerate() {
        let record = record?;
        let parsed: Result<Vec<f64>, _> = record.iter().map(str::parse::<f64>).collect();
        match parsed {
            Ok(values) => rows.push(values),
            Err(_) if line == 0 => continue,
            Err(e) => {
                return Err(BenchError::InvalidSpec(format!(
                    "{}: line {}: {e}",
                    path.display(),
                    line + 1
                )))
            }
        }
    }
    let width = rows.first().map_or(0, Vec::len);
    if width < 2 {
        return Err(BenchError::InvalidSpec(format!(
            "{}: need at least one feature column and a target column",
            path.display()
        )));
    }
    if let Some(bad) = rows.iter().position(|r| r.len() != width) {
        return Err(BenchError::InvalidSpec(format!("{}: ragged row {}", path.display(), bad + 1)));
    }
    let d = width - 1;
    let mut xs = Vec::with_capacity(rows.len() * d);
    let mut y = Vec::with_capacity(rows.len());
    for r in &rows {
        xs.extend_from_slice(&r[..d]);
        y.push(r[d]);
    }
    Ok((Matrix::new(rows.len(), d, xs)?, y))
}

/// Writes a header `x0,...,x{D-1},y` and one row per point.
pub fn write_csv(path: &Path, x: &Matrix, y: &[f64]) -> Result<(), BenchError> {
    let mut w = csv::Writer::from_path(path)?;
    let mut header: Vec<String> = (0..x.cols()).map(|j| format!("x{j}")).collect();
    header.push("y".into());
    w.write_record(&header)?;
    for (row, yi) in x.row_iter().zip(y) {
        let mut rec: Vec<String> = row.iter().map(|v| format!("{v:?}")).collect();
        rec.push(format!("{yi:?}"));
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}
