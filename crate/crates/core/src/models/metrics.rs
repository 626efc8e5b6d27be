use std::f64::consts::PI;

use crate::error::{check_dim, GpError, Result};

/// Held-out accuracy of a Gaussian predictive distribution.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Metrics {
    pub rmse: f64,
    /// Mean negative log predictive density.
    pub nll: f64,
    /// Fraction of targets inside the central 95% interval.
    pub coverage95: f64,
}

/// Scores predictions against targets. `var_latent` excludes noise; the
/// observation variance `var_latent + noise` is used for NLL and coverage.
pub fn metrics(mean: &[f64], var_latent: &[f64], noise: f64, y_true: &[f64]) -> Result<Metrics> {
    check_dim("metrics", mean.len(), var_latent.len())?;
    check_dim("metrics", mean.len(), y_true.len())?;
    if mean.is_empty() {
        return Err(GpError::InvalidParameter("metrics need at least one point".into()));
    }
    if var_latent.iter().any(|&v| v < 0.0) {
        return Err(GpError::InvalidParameter("latent variance must be non-negative".into()));
    }
    let n = mean.len() as f64;
    let mut se = 0.0;
    let mut nll = 0.0;
    let mut inside = 0usize;
    for ((&mu, &var), &y) in mean.iter().zip(var_latent).zip(y_true) {
        let s2 = var + noise;
        let r = y - mu;
        se += r * r;
        nll += 0.5 * (2.0 * PI * s2).ln() + r * r / (2.0 * s2);
        if r.abs() <= 1.96 * s2.sqrt() {
            inside += 1;
        }
    }
    Ok(Metrics {
        rmse: (se / n).sqrt(),
        nll: nll / n,
        coverage95: inside as f64 / n,
    })
}
