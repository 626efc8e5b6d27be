use gp_core::linalg::{cholesky, matmul, pairwise_sqdist, Matrix};
use gp_core::models::{gp_fit, gp_predict, optimize_hyperparams, OptimizerConfig, Strategy as Solve};
use gp_core::solvers::{
    build_ski, cg_solve, matrix_free_matvec, slq_logdet, CgConfig, DenseOperator, MatrixFreeOperator,
};
use gp_core::{KernelExpr, ParamVector};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random(rows: usize, cols: usize, seed: u64) -> Matrix {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Matrix::new(rows, cols, (0..rows * cols).map(|_| rng.random::<f64>()).collect()).unwrap()
}

fn leaf() -> impl Strategy<Value = KernelExpr> {
    let l = 0.05f64..3.0;
    prop_oneof![
        l.clone().prop_map(|l| KernelExpr::rbf(l).unwrap()),
        l.clone().prop_map(|l| KernelExpr::matern12(l).unwrap()),
        l.clone().prop_map(|l| KernelExpr::matern32(l).unwrap()),
        l.clone().prop_map(|l| KernelExpr::matern52(l).unwrap()),
        (l.clone(), 0.2f64..3.0).prop_map(|(l, p)| KernelExpr::periodic(l, p).unwrap()),
        (0.1f64..3.0).prop_map(|v| KernelExpr::linear(v).unwrap()),
    ]
}

fn kernel() -> impl Strategy<Value = KernelExpr> {
    leaf().prop_recursive(3, 8, 2, |inner| {
        prop_oneof![
            (0.1f64..5.0, inner.clone()).prop_map(|(s, k)| KernelExpr::scale(s, k).unwrap()),
            (inner.clone(), inner.clone()).prop_map(|(a, b)| KernelExpr::sum(a, b)),
            (inner.clone(), inner).prop_map(|(a, b)| KernelExpr::product(a, b)),
        ]
    })
}

fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

fn gram_noise(g: &Matrix) -> f64 {
    let max_diag = g.diag().iter().cloned().fold(0.0, f64::max);
    (1e-8 * max_diag).max(1e-12)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn gram_symmetric_and_factorizable(k in kernel(), n in 2usize..120, d in 1usize..4, seed in any::<u64>()) {
        let x = random(n, d, seed);
        let mut g = k.eval(&x, &x).unwrap();
        for i in 0..n {
            prop_assert!(g.row(i)[i] >= 0.0);
            for j in 0..i {
                prop_assert!((g.row(i)[j] - g.row(j)[i]).abs() <= 1e-12);
            }
        }
        let noise = gram_noise(&g);
        g.add_diag(noise);
        let f = cholesky(&g).unwrap();
        prop_assert_eq!(f.jitter_used(), 0.0);
    }

    #[test]
    fn cholesky_reconstructs(n in 1usize..60, seed in any::<u64>()) {
        let b = random(n, n, seed);
        let mut a = matmul(&b, &b, false, true).unwrap();
        a.add_diag(0.1);
        let f = cholesky(&a).unwrap();
        let llt = matmul(f.l(), f.l(), false, true).unwrap();
        let diff: Vec<f64> = llt.as_slice().iter().zip(a.as_slice()).map(|(p, q)| p - q).collect();
        let rel = diff.iter().map(|v| v * v).sum::<f64>().sqrt() / a.frobenius_norm();
        prop_assert!(rel <= 1e-10);
    }

    #[test]
    fn stationary_kernels_ignore_translation(k in leaf(), shift in -50.0f64..50.0, seed in any::<u64>()) {
        prop_assume!(k.is_stationary());
        let x = random(12, 2, seed);
        let y = random(9, 2, seed ^ 1);
        let moved = |m: &Matrix| Matrix::new(m.rows(), 2, m.as_slice().iter().map(|v| v + shift).collect()).unwrap();
        let a = k.eval(&x, &y).unwrap();
        let b = k.eval(&moved(&x), &moved(&y)).unwrap();
        prop_assert!(max_abs_diff(a.as_slice(), b.as_slice()) <= 1e-12);
    }

    #[test]
    fn sum_and_product_are_elementwise(a in kernel(), b in kernel(), seed in any::<u64>()) {
        let x = random(10, 2, seed);
        let y = random(7, 2, seed ^ 2);
        let ga = a.eval(&x, &y).unwrap();
        let gb = b.eval(&x, &y).unwrap();
        let gs = KernelExpr::sum(a.clone(), b.clone()).eval(&x, &y).unwrap();
        let gp = KernelExpr::product(a, b).eval(&x, &y).unwrap();
        for i in 0..ga.as_slice().len() {
            prop_assert_eq!(gs.as_slice()[i], ga.as_slice()[i] + gb.as_slice()[i]);
            prop_assert_eq!(gp.as_slice()[i], ga.as_slice()[i] * gb.as_slice()[i]);
        }
    }

    #[test]
    fn sqdist_self_has_zero_diagonal(n in 1usize..40, d in 1usize..5, seed in any::<u64>()) {
        let x = random(n, d, seed);
        let s = pairwise_sqdist(&x, &x).unwrap();
        for i in 0..n {
            prop_assert_eq!(s.row(i)[i], 0.0);
            for j in 0..n {
                prop_assert_eq!(s.row(i)[j], s.row(j)[i]);
                prop_assert!(s.row(i)[j] >= 0.0);
            }
        }
    }

    #[test]
    fn matvec_independent_of_block(k in kernel(), n in 2usize..300, seed in any::<u64>()) {
        let x = random(n, 2, seed);
        let v: Vec<f64> = (0..n).map(|i| (i as f64).cos()).collect();
        let reference = matrix_free_matvec(&k, &x, 0.3, &v, n).unwrap();
        for block in [1, 7, 256] {
            let out = matrix_free_matvec(&k, &x, 0.3, &v, block).unwrap();
            prop_assert!(max_abs_diff(&out, &reference) <= 1e-12);
        }
    }

    #[test]
    fn ski_weights_partition_unity(m in 8usize..200, n in 1usize..200, seed in any::<u64>()) {
        let x = random(n, 1, seed);
        let s = build_ski(&x, &KernelExpr::rbf(0.2).unwrap(), m).unwrap();
        for i in 0..n {
            let (_, w) = s.weights().row(i);
            prop_assert!((w.iter().sum::<f64>() - 1.0).abs() <= 1e-12);
        }
    }

    #[test]
    fn cg_matches_cholesky_direct(n in 2usize..200, l in 0.05f64..1.0, seed in any::<u64>()) {
        let x = random(n, 2, seed);
        let k = KernelExpr::rbf(l).unwrap();
        let y: Vec<f64> = (0..n).map(|i| (i as f64 * 0.7).sin()).collect();
        let mut g = k.eval(&x, &x).unwrap();
        g.add_diag(0.1);
        let direct = cholesky(&g).unwrap().solve(&y).unwrap();
        let op = MatrixFreeOperator::new(&k, &x, 0.1, 64).unwrap();
        let cfg = CgConfig { rel_tolerance: 1e-12, max_iterations: Some(5 * n), ..CgConfig::default() };
        let sol = cg_solve(&op, &y, &cfg).unwrap();
        prop_assert!(max_abs_diff(&sol.x, &direct) <= 1e-8);
    }

    #[test]
    fn permutation_equivariance(n in 3usize..80, seed in any::<u64>()) {
        let x = random(n, 2, seed);
        let y: Vec<f64> = x.row_iter().map(|r| (5.0 * r[0]).sin() + r[1]).collect();
        let mut perm: Vec<usize> = (0..n).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 3);
        for i in (1..n).rev() {
            perm.swap(i, rng.random_range(0..=i));
        }
        let xp = x.select_rows(&perm);
        let yp: Vec<f64> = perm.iter().map(|&i| y[i]).collect();
        let k = KernelExpr::scale(1.3, KernelExpr::matern52(0.4).unwrap()).unwrap();
        let xs = random(20, 2, seed ^ 4);
        let (m1, v1) = gp_predict(&gp_fit(&x, &y, &k, 0.05, Solve::Cholesky).unwrap(), &xs).unwrap();
        let (m2, v2) = gp_predict(&gp_fit(&xp, &yp, &k, 0.05, Solve::Cholesky).unwrap(), &xs).unwrap();
        prop_assert!(max_abs_diff(&m1, &m2) <= 1e-10);
        prop_assert!(max_abs_diff(&v1, &v2) <= 1e-10);
    }

    #[test]
    fn scaling_targets_scales_the_mean(c in 0.1f64..10.0, seed in any::<u64>()) {
        let x = random(40, 1, seed);
        let y: Vec<f64> = x.row_iter().map(|r| (6.0 * r[0]).sin()).collect();
        let yc: Vec<f64> = y.iter().map(|v| c * v).collect();
        let k = KernelExpr::scale(1.0, KernelExpr::rbf(0.3).unwrap()).unwrap();
        let kc = KernelExpr::scale(c * c, KernelExpr::rbf(0.3).unwrap()).unwrap();
        let xs = random(15, 1, seed ^ 5);
        let (m1, v1) = gp_predict(&gp_fit(&x, &y, &k, 0.01, Solve::Cholesky).unwrap(), &xs).unwrap();
        let (m2, v2) = gp_predict(&gp_fit(&x, &yc, &kc, 0.01 * c * c, Solve::Cholesky).unwrap(), &xs).unwrap();
        for i in 0..xs.rows() {
            prop_assert!((m2[i] - c * m1[i]).abs() <= 1e-8 * c.max(1.0));
            prop_assert!((v2[i] - c * c * v1[i]).abs() <= 1e-8 * (c * c).max(1.0));
        }
    }
}

#[test]
fn matern52_approaches_rbf_near_zero() {
    let l = 1e3;
    let m = KernelExpr::matern52(l).unwrap();
    let r = KernelExpr::rbf(l).unwrap();
    let origin = Matrix::column(&[0.0]).unwrap();
    for t in [0.0, 1.0, 5.0, 10.0] {
        let p = Matrix::column(&[t]).unwrap();
        let a = m.eval(&origin, &p).unwrap().as_slice()[0];
        let b = r.eval(&origin, &p).unwrap().as_slice()[0];
        assert!((a - b).abs() <= 1e-3, "r = {t}: {a} vs {b}");
    }
}

#[test]
fn cg_matches_cholesky_at_one_thousand() {
    let n = 1000;
    let x = random(n, 3, 11);
    let k = KernelExpr::scale(2.0, KernelExpr::rbf(0.5).unwrap()).unwrap();
    let y: Vec<f64> = x.row_iter().map(|r| r[0] * r[1] - r[2]).collect();
    let mut g = k.eval(&x, &x).unwrap();
    g.add_diag(0.1);
    let direct = cholesky(&g).unwrap().solve(&y).unwrap();
    let cfg = CgConfig {
        rel_tolerance: 1e-12,
        max_iterations: Some(2000),
        ..CgConfig::default()
    };
    let sol = cg_solve(&DenseOperator::new(&g, 0.0).unwrap(), &y, &cfg).unwrap();
    assert!(max_abs_diff(&sol.x, &direct) <= 1e-8);
}

#[test]
fn slq_spread_shrinks_with_probes() {
    let x = random(200, 2, 5);
    let k = KernelExpr::rbf(0.5).unwrap();
    let op = MatrixFreeOperator::new(&k, &x, 0.1, 256).unwrap();
    let spread = |probes| {
        let cfg = CgConfig {
            probes,
            lanczos_steps: 30,
            ..CgConfig::default()
        };
        let vals: Vec<f64> = (0..20).map(|s| slq_logdet(&op, 200, &cfg, s).unwrap()).collect();
        let mean = vals.iter().sum::<f64>() / 20.0;
        (vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / 19.0).sqrt()
    };
    let (wide, narrow) = (spread(4), spread(64));
    assert!(narrow < wide, "probes=64 sd {narrow} vs probes=4 sd {wide}");
}

#[test]
fn ski_on_grid_nodes_is_the_toeplitz_product() {
    let k = KernelExpr::rbf(0.15).unwrap();
    let x = random(300, 1, 8);
    let s = build_ski(&x, &k, 128).unwrap();
    let nodes = Matrix::column(&s.grid_points()).unwrap();
    let w = s.interpolate(&nodes).unwrap().to_dense();
    let eye = Matrix::identity(128);
    assert!(max_abs_diff(w.as_slice(), eye.as_slice()) <= 1e-12);

    let v: Vec<f64> = (0..128).map(|i| (i as f64 * 0.3).sin()).collect();
    let dense = k.eval(&nodes, &nodes).unwrap().matvec(&v).unwrap();
    let fast = s.grid_matvec(&v).unwrap();
    assert!(max_abs_diff(&fast, &dense) <= 1e-10);
}

#[test]
fn best_trace_never_decreases() {
    let objective = |p: &[f64]| -((p[0] - 1.0).powi(2) + (p[1] + 0.5).powi(4)) + (7.0 * p[0]).sin() * 0.1;
    let r = optimize_hyperparams(objective, &ParamVector::new(vec![0.0, 0.0]), &OptimizerConfig::with_steps(60)).unwrap();
    assert!(r.best_trace.windows(2).all(|w| w[1] >= w[0]));
    assert_eq!(r.best_value, r.best_trace.last().copied());
}
