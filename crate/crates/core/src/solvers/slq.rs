use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{CgConfig, LinearOperator};
use crate::error::{check_dim, GpError, Result};
use crate::linalg::{axpy, dot, norm2, symmetric_tridiagonal_eigen, Vector};

/// Upper bound on Lanczos basis storage across a batch of concurrent probes.
const BASIS_BUDGET_BYTES: usize = 256 << 20;

/// Rademacher probe `i` for a given seed; each probe has its own ChaCha stream.
pub(crate) fn rademacher_probe(seed: u64, index: u64, n: usize) -> Vector {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    Vector::from((0..n).map(|_| if rng.random::<bool>() { 1.0 } else { -1.0 }).collect::<Vec<_>>())
}

struct Probe {
    z_sq_norm: f64,
    basis: Vec<Vector>,
    alphas: Vec<f64>,
    betas: Vec<f64>,
    alpha_scale: f64,
    done: bool,
}

/// Stochastic Lanczos quadrature estimate of `log det A`.
///
/// For each Rademacher probe `z`, runs `lanczos_steps` Lanczos iterations
/// from `z / |z|` with full reorthogonalization and returns the mean of
/// `|z|^2 sum_i tau_i^2 log(theta_i)` over probes, where `theta_i` and
/// `tau_i` are the Ritz values and first eigenvector components of the
/// tridiagonal matrix. Steps are clamped to `N`.
pub fn slq_logdet(op: &dyn LinearOperator, n: usize, cfg: &CgConfig, seed: u64) -> Result<f64> {
    cfg.validate()?;
    check_dim("slq_logdet", op.dim(), n)?;
    if n == 0 {
        return Ok(0.0);
    }
    let steps = cfg.lanczos_steps.min(n);
    let per_probe = steps.saturating_mul(n).saturating_mul(8).max(1);
    let batch = (BASIS_BUDGET_BYTES / per_probe).clamp(1, cfg.probes);

    let mut total = 0.0;
    let mut first = 0;
    while first < cfg.probes {
        let last = (first + batch).min(cfg.probes);
        for est in lanczos_batch(op, n, steps, seed, first..last)? {
            total += est;
        }
        first = last;
    }
    Ok(total / cfg.probes as f64)
}

fn lanczos_batch(
    op: &dyn LinearOperator,
    n: usize,
    steps: usize,
    seed: u64,
    probes: std::ops::Range<usize>,
) -> Result<Vec<f64>> {
    let mut states: Vec<Probe> = probes
        .map(|i| {
            let mut z = rademacher_probe(seed, i as u64, n);
            let z_sq_norm = dot(&z, &z);
            let inv = 1.0 / z_sq_norm.sqrt();
            z.iter_mut().for_each(|v| *v *= inv);
            Probe {
                z_sq_norm,
                basis: vec![z],
                alphas: Vec::with_capacity(steps),
                betas: Vec::with_capacity(steps),
                alpha_scale: 0.0,
                done: false,
            }
        })
        .collect();

    for _ in 0..steps {
        let active: Vec<usize> = (0..states.len()).filter(|&i| !states[i].done).collect();
        if active.is_empty() {
            break;
        }
        let qs: Vec<&[f64]> = active
            .iter()
            .map(|&i| states[i].basis.last().expect("non-empty basis").as_slice())
            .collect();
        let ws = op.apply_many(&qs)?;
        for (&i, mut w) in active.iter().zip(ws) {
            let st = &mut states[i];
            let j = st.basis.len() - 1;
            let alpha = dot(&st.basis[j], &w);
            axpy(-alpha, &st.basis[j], &mut w);
            if j > 0 {
                axpy(-st.betas[j - 1], &st.basis[j - 1], &mut w);
            }
            // Full reorthogonalization, two passes of classical Gram-Schmidt.
            for _ in 0..2 {
                for q in &st.basis {
                    let c = dot(q, &w);
                    axpy(-c, q, &mut w);
                }
            }
            st.alphas.push(alpha);
            st.alpha_scale = st.alpha_scale.max(alpha.abs());
            if st.alphas.len() == steps {
                st.done = true;
                continue;
            }
            let beta = norm2(&w);
            if beta.is_nan() || beta <= 1e-12 * st.alpha_scale {
                st.done = true;
                continue;
            }
            st.betas.push(beta);
            w.iter_mut().for_each(|v| *v /= beta);
            st.basis.push(w);
        }
    }

    states
        .into_iter()
        .map(|st| {
            let k = st.alphas.len();
            let (theta, tau) = symmetric_tridiagonal_eigen(&st.alphas, &st.betas[..k - 1])?;
            let mut acc = 0.0;
            for (t, w) in theta.iter().zip(&tau) {
                if t.is_nan() || *t <= 0.0 {
                    return Err(GpError::OperatorNotSpd("non-positive Ritz value in SLQ"));
                }
                acc += w * w * t.ln();
            }
            Ok(st.z_sq_norm * acc)
        })
        .collect()
}
