use super::{CgConfig, LinearOperator};
use crate::error::{check_dim, GpError, Result};
use crate::linalg::{axpy, dot, norm2, Vector};

/// Output of a CG solve. `residual` is the true relative residual
/// `|A x - b| / |b|` at the returned iterate.
#[derive(Clone, Debug)]
pub struct CgSolution {
    pub x: Vector,
    pub iterations: usize,
    pub residual: f64,
}

impl CgSolution {
    pub fn converged(&self, cfg: &CgConfig) -> bool {
        self.residual <= cfg.rel_tolerance
    }
}

/// Unpreconditioned conjugate gradients for `A x = b`, starting from zero.
///
/// Hitting `max_iterations` is not an error; check [`CgSolution::residual`].
pub fn cg_solve(op: &dyn LinearOperator, b: &[f64], cfg: &CgConfig) -> Result<CgSolution> {
    let mut out = cg_solve_batch(op, &[b], cfg)?;
    Ok(out.pop().expect("one right-hand side"))
}

struct Column {
    x: Vector,
    r: Vector,
    p: Vector,
    rs: f64,
    b_norm: f64,
    iterations: usize,
    residual: f64,
    done: bool,
}

/// Runs one independent CG recurrence per right-hand side, in lockstep, so
/// operators can share work across the batch in [`LinearOperator::apply_many`].
/// Each column's iterates are identical to a standalone [`cg_solve`].
pub fn cg_solve_batch(op: &dyn LinearOperator, bs: &[&[f64]], cfg: &CgConfig) -> Result<Vec<CgSolution>> {
    cfg.validate()?;
    let n = op.dim();
    for b in bs {
        check_dim("cg_solve", n, b.len())?;
        if b.iter().any(|v| !v.is_finite()) {
            return Err(GpError::NonFinite("cg right-hand side"));
        }
    }
    let max_it = cfg.max_iterations_for(n);
    let tol = cfg.rel_tolerance;

    let mut cols: Vec<Column> = bs
        .iter()
        .map(|b| {
            let r = Vector::from_slice(b);
            let rs = dot(&r, &r);
            let b_norm = rs.sqrt();
            Column {
                x: Vector::zeros(n),
                p: r.clone(),
                r,
                rs,
                b_norm,
                iterations: 0,
                residual: 0.0,
                done: b_norm == 0.0,
            }
        })
        .collect();

    // Iterate until every column meets the tolerance on its true residual.
    loop {
        let active: Vec<usize> = (0..cols.len())
            .filter(|&c| !cols[c].done && cols[c].iterations < max_it)
            .collect();
        if active.is_empty() {
            break;
        }
        let ps: Vec<&[f64]> = active.iter().map(|&c| cols[c].p.as_slice()).collect();
        let aps = op.apply_many(&ps)?;

        let mut needs_check = Vec::new();
        for (&c, ap) in active.iter().zip(&aps) {
            let col = &mut cols[c];
            let pap = dot(&col.p, ap);
            if !(pap.is_finite() && pap > 0.0) {
                return Err(GpError::OperatorNotSpd("CG breakdown: p'Ap <= 0"));
            }
            let alpha = col.rs / pap;
            axpy(alpha, &col.p, &mut col.x);
            axpy(-alpha, ap, &mut col.r);
            let rs_new = dot(&col.r, &col.r);
            col.iterations += 1;
            if rs_new.sqrt() <= tol * col.b_norm || col.iterations >= max_it {
                needs_check.push(c);
                col.rs = rs_new;
            } else {
                let beta = rs_new / col.rs;
                col.rs = rs_new;
                for (pi, ri) in col.p.iter_mut().zip(col.r.iter()) {
                    *pi = ri + beta * *pi;
                }
            }
        }

        if needs_check.is_empty() {
            continue;
        }
        // The recursive residual drifts; confirm against b - A x and restart if needed.
        let xs: Vec<&[f64]> = needs_check.iter().map(|&c| cols[c].x.as_slice()).collect();
        let axs = op.apply_many(&xs)?;
        for (&c, ax) in needs_check.iter().zip(&axs) {
            let b = bs[c];
            let col = &mut cols[c];
            for ((ri, bi), axi) in col.r.iter_mut().zip(b.iter()).zip(ax.iter()) {
                *ri = bi - axi;
            }
            col.rs = dot(&col.r, &col.r);
            col.residual = col.rs.sqrt() / col.b_norm;
            if col.residual <= tol || col.iterations >= max_it {
                col.done = true;
            } else {
                col.p.copy_from_slice(&col.r);
            }
        }
    }

    Ok(cols
        .into_iter()
        .map(|c| CgSolution {
            x: c.x,
            iterations: c.iterations,
            residual: if c.b_norm == 0.0 { 0.0 } else { c.residual },
        })
        .collect())
}

/// `|A x - b|_2`, mostly for tests and diagnostics.
pub fn residual_norm(op: &dyn LinearOperator, x: &[f64], b: &[f64]) -> Result<f64> {
    let ax = op.apply(x)?;
    let r: Vec<f64> = ax.iter().zip(b).map(|(a, b)| a - b).collect();
    Ok(norm2(&r))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{cholesky, matmul, Matrix};
    use crate::solvers::{DenseOperator, FnOperator};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn identity_solves_in_one_iteration() {
        let op = FnOperator::new(3, |v: &[f64]| Vector::from_slice(v));
        let sol = cg_solve(&op, &[1.0, -2.0, 3.0], &CgConfig::default()).unwrap();
        assert_eq!(sol.iterations, 1);
        assert_eq!(sol.x.as_slice(), &[1.0, -2.0, 3.0]);
    }

    #[test]
    fn diagonal_system() {
        let a = Matrix::from_diag(&[1.0, 2.0, 4.0]);
        let op = DenseOperator::new(&a, 0.0).unwrap();
        let sol = cg_solve(&op, &[1.0, 2.0, 4.0], &CgConfig::default()).unwrap();
        for v in sol.x.iter() {
            assert!((v - 1.0).abs() < 1e-12);
        }
        assert!(sol.converged(&CgConfig::default()));
    }

    #[test]
    fn random_spd_matches_cholesky() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let b = Matrix::new(8, 8, (0..64).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap();
        let mut a = matmul(&b, &b, false, true).unwrap();
        a.add_diag(0.5);
        let rhs: Vec<f64> = (0..8).map(|_| rng.random_range(-1.0..1.0)).collect();
        let cfg = CgConfig {
            rel_tolerance: 1e-12,
            ..CgConfig::default()
        };
        let sol = cg_solve(&DenseOperator::new(&a, 0.0).unwrap(), &rhs, &cfg).unwrap();
        let direct = cholesky(&a).unwrap().solve(&rhs).unwrap();
        for (x, y) in sol.x.iter().zip(direct.iter()) {
            assert!((x - y).abs() <= 1e-8);
        }
    }

    #[test]
    fn zero_rhs_and_breakdown() {
        let a = Matrix::from_diag(&[1.0, 2.0]);
        let op = DenseOperator::new(&a, 0.0).unwrap();
        let sol = cg_solve(&op, &[0.0, 0.0], &CgConfig::default()).unwrap();
        assert_eq!(sol.iterations, 0);
        let neg = Matrix::from_diag(&[-1.0, -2.0]);
        let op = DenseOperator::new(&neg, 0.0).unwrap();
        assert!(matches!(
            cg_solve(&op, &[1.0, 1.0], &CgConfig::default()),
            Err(GpError::OperatorNotSpd(_))
        ));
    }

    #[test]
    fn iteration_cap_is_reported_not_raised() {
        let a = Matrix::from_diag(&(1..=50).map(|i| i as f64).collect::<Vec<_>>());
        let op = DenseOperator::new(&a, 0.0).unwrap();
        let cfg = CgConfig {
            max_iterations: Some(3),
            ..CgConfig::default()
        };
        let sol = cg_solve(&op, &vec![1.0; 50], &cfg).unwrap();
        assert_eq!(sol.iterations, 3);
        assert!(!sol.converged(&cfg));
        let r = residual_norm(&op, &sol.x, &vec![1.0; 50]).unwrap();
        assert!((r / 50f64.sqrt() - sol.residual).abs() < 1e-12);
    }

    #[test]
    fn batch_matches_individual_solves() {
        let a = Matrix::from_diag(&(1..=20).map(|i| (i as f64).sqrt()).collect::<Vec<_>>());
        let op = DenseOperator::new(&a, 0.1).unwrap();
        let b1: Vec<f64> = (0..20).map(|i| (i as f64).cos()).collect();
        let b2: Vec<f64> = (0..20).map(|i| 1.0 + i as f64).collect();
        let cfg = CgConfig::default();
        let batch = cg_solve_batch(&op, &[&b1, &b2], &cfg).unwrap();
        let s1 = cg_solve(&op, &b1, &cfg).unwrap();
        let s2 = cg_solve(&op, &b2, &cfg).unwrap();
        assert_eq!(batch[0].x, s1.x);
        assert_eq!(batch[1].x, s2.x);
        assert_eq!(batch[1].iterations, s2.iterations);
    }
}
