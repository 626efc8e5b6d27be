use crate::error::{GpError, Result};
use crate::kernels::{KernelExpr, ParamVector};
use crate::parallel;

/// Adam on central finite-difference gradients.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct OptimizerConfig {
    pub steps: usize,
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    /// Central-difference step, in log-parameter space.
    pub fd_epsilon: f64,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        OptimizerConfig {
            steps: 100,
            learning_rate: 0.05,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            fd_epsilon: 1e-4,
        }
    }
}

impl OptimizerConfig {
    pub fn with_steps(steps: usize) -> Self {
        OptimizerConfig {
            steps,
            ..OptimizerConfig::default()
        }
    }

    /// Objective evaluations per step for `p` parameters: the centre plus two per coordinate.
    pub fn evals_per_step(p: usize) -> usize {
        2 * p + 1
    }

    fn validate(&self) -> Result<()> {
        let ok = self.learning_rate > 0.0
            && (0.0..1.0).contains(&self.beta1)
            && (0.0..1.0).contains(&self.beta2)
            && self.epsilon > 0.0
            && self.fd_epsilon > 0.0;
        if ok {
            Ok(())
        } else {
            Err(GpError::InvalidParameter(format!("bad optimizer settings: {self:?}")))
        }
    }
}

#[derive(Clone, Debug)]
pub struct OptimizeResult {
    /// Best parameters among the evaluated step centres.
    pub params: ParamVector,
    pub best_value: Option<f64>,
    /// Objective at each step's centre, in order.
    pub trace: Vec<f64>,
    /// Running maximum of `trace`.
    pub best_trace: Vec<f64>,
    pub evaluations: usize,
    /// The objective returned a non-finite value and the run stopped early.
    pub aborted: bool,
}

/// Maximizes `objective` over log-space parameters.
///
/// Every step evaluates the objective at the current point and at `p +- h e_i`
/// for each coordinate (`2P + 1` calls, run in parallel), forms the central
/// difference gradient and takes one Adam ascent step.
pub fn optimize_hyperparams<F>(objective: F, p0: &ParamVector, cfg: &OptimizerConfig) -> Result<OptimizeResult>
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    cfg.validate()?;
    let p_len = p0.len();
    let mut p = p0.as_slice().to_vec();
    let mut m = vec![0.0; p_len];
    let mut v = vec![0.0; p_len];
    let mut result = OptimizeResult {
        params: p0.clone(),
        best_value: None,
        trace: Vec::with_capacity(cfg.steps),
        best_trace: Vec::with_capacity(cfg.steps),
        evaluations: 0,
        aborted: false,
    };
    let h = cfg.fd_epsilon;

    for step in 1..=cfg.steps {
        let evals = parallel::map_range(2 * p_len + 1, |e| {
            let mut q = p.clone();
            if e > 0 {
                let i = (e - 1) / 2;
                q[i] += if e % 2 == 1 { h } else { -h };
            }
            objective(&q)
        });
        result.evaluations += evals.len();

        let centre = evals[0];
        if !centre.is_finite() || evals.iter().any(|f| !f.is_finite()) {
            if step == 1 && !centre.is_finite() {
                return Err(GpError::NonFinite("objective at initial parameters"));
            }
            if centre.is_finite() {
                record(&mut result, &p, centre);
            }
            result.aborted = true;
            break;
        }
        record(&mut result, &p, centre);

        let t = step as i32;
        let bc1 = 1.0 - cfg.beta1.powi(t);
        let bc2 = 1.0 - cfg.beta2.powi(t);
        for i in 0..p_len {
            let g = (evals[2 * i + 1] - evals[2 * i + 2]) / (2.0 * h);
            m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * g;
            v[i] = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * g * g;
            let m_hat = m[i] / bc1;
            let v_hat = v[i] / bc2;
            p[i] += cfg.learning_rate * m_hat / (v_hat.sqrt() + cfg.epsilon);
        }
    }
    Ok(result)
}

/// Kernel log-parameters followed by `ln(noise)`.
pub fn pack_params(k: &KernelExpr, noise: f64) -> Result<ParamVector> {
    check_noise(noise)?;
    let mut v = k.flatten_params().into_vec();
    v.push(noise.ln());
    Ok(ParamVector::new(v))
}

/// Inverse of [`pack_params`], using `k` as the structural template.
pub fn unpack_params(k: &KernelExpr, p: &[f64]) -> Result<(KernelExpr, f64)> {
    let np = k.num_params();
    if p.len() != np + 1 {
        return Err(GpError::DimensionMismatch {
            op: "unpack_params",
            expected: np + 1,
            actual: p.len(),
        });
    }
    let kernel = k.unflatten_params(&p[..np])?;
    let noise = p[np].exp();
    check_noise(noise)?;
    Ok((kernel, noise))
}

pub(crate) fn check_noise(noise: f64) -> Result<()> {
    if noise.is_finite() && noise > 0.0 {
        Ok(())
    } else {
        Err(GpError::InvalidParameter(format!("noise variance must be > 0, got {noise}")))
    }
}

fn record(result: &mut OptimizeResult, p: &[f64], value: f64) {
    result.trace.push(value);
    if result.best_value.is_none_or(|b| value > b) {
        result.best_value = Some(value);
        result.params = ParamVector::new(p.to_vec());
    }
    let best = result.best_value.expect("just set");
    result.best_trace.push(best);
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::sync::atomic::{AtomicUsize, Ordering};

    #[test]
    fn constant_objective_leaves_params_alone() {
        let p0 = ParamVector::new(vec![0.3, -1.0]);
        let r = optimize_hyperparams(|_| 2.0, &p0, &OptimizerConfig::with_steps(10)).unwrap();
        assert_eq!(r.params, p0);
        assert!(r.trace.iter().all(|&f| f == 2.0));
        assert_eq!(r.evaluations, 50);
    }

    #[test]
    fn converges_on_quadratic() {
        let p0 = ParamVector::new(vec![0.0; 4]);
        let f = |p: &[f64]| -p.iter().map(|x| (x - 1.0).powi(2)).sum::<f64>();
        let r = optimize_hyperparams(f, &p0, &OptimizerConfig::with_steps(200)).unwrap();
        for x in r.params.as_slice() {
            assert!((x - 1.0).abs() <= 0.05, "{x}");
        }
        assert!(r.best_trace.windows(2).all(|w| w[1] >= w[0]));
    }

    #[test]
    fn counts_two_p_plus_one_per_step() {
        let calls = AtomicUsize::new(0);
        let p0 = ParamVector::new(vec![0.0; 10]);
        let r = optimize_hyperparams(
            |p| {
                calls.fetch_add(1, Ordering::Relaxed);
                -p[0] * p[0]
            },
            &p0,
            &OptimizerConfig::with_steps(1),
        )
        .unwrap();
        assert_eq!(calls.load(Ordering::Relaxed), 21);
        assert_eq!(r.evaluations, 21);
    }

    #[test]
    fn non_finite_objective_aborts_with_best_so_far() {
        let p0 = ParamVector::new(vec![0.0]);
        let f = |p: &[f64]| if p[0] > 0.12 { f64::NAN } else { p[0] };
        let r = optimize_hyperparams(f, &p0, &OptimizerConfig::with_steps(50)).unwrap();
        assert!(r.aborted);
        assert!(r.params.as_slice()[0] <= 0.12);
        assert!(r.best_value.unwrap().is_finite());

        let bad = optimize_hyperparams(|_| f64::INFINITY, &p0, &OptimizerConfig::with_steps(3));
        assert!(bad.is_err());
    }

    #[test]
    fn pack_round_trip() {
        let k = KernelExpr::scale(2.0, KernelExpr::rbf(0.5).unwrap()).unwrap();
        let p = pack_params(&k, 0.1).unwrap();
        assert_eq!(p.len(), 3);
        let (k2, noise) = unpack_params(&k, p.as_slice()).unwrap();
        assert_eq!(k2, k);
        assert!((noise - 0.1).abs() < 1e-15);
        assert!(pack_params(&k, 0.0).is_err());
        assert!(unpack_params(&k, &[0.0, 0.0]).is_err());
    }
}
