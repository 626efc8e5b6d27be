//! Acceptance run: one PASS/FAIL line per criterion, nonzero exit on any failure.
//!
//! `cargo test -p gp-bench --test acceptance`

use std::sync::atomic::{AtomicUsize, Ordering};
use std::time::{Duration, Instant};

use gp_bench::dataset::{uniform_inputs, GpSampler};
use gp_bench::suite::timing_problem;
use gp_bench::{generate_dataset, run_suite, DatasetSpec, GeneratorKind, SuiteKind, SuiteParams};
use gp_core::linalg::{cholesky, Matrix};
use gp_core::models::{
    farthest_point_sampling, fps_call_count, gp_fit, gp_fit_with, gp_predict, log_marginal_likelihood,
    optimize_exact, optimize_hyperparams, pack_params, sparse_fit, unpack_params, vfe_objective, FitConfig,
    OptimizerConfig, Strategy,
};
use gp_core::parallel::with_threads;
use gp_core::solvers::{build_ski, cg_solve, ski_matvec, slq_logdet, CgConfig, MatrixFreeOperator};
use gp_core::KernelExpr;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

struct Outcome {
    pass: bool,
    detail: String,
}

fn check(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

type Criterion = (&'static str, Duration, fn() -> Outcome);

fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

fn rbf(l: f64) -> KernelExpr {
    KernelExpr::rbf(l).unwrap()
}

fn scaled(s: f64, k: KernelExpr) -> KernelExpr {
    KernelExpr::scale(s, k).unwrap()
}

fn cross_path() -> Outcome {
    with_threads(1, || {
        let mut spec = DatasetSpec::new(GeneratorKind::UniformSynthetic, 2500, 17);
        spec.d = 4;
        spec.noise = 0.1;
        spec.kernel = scaled(1.0, rbf(0.5));
        let ds = generate_dataset(&spec).unwrap();
        let xs = ds.x_test.row_block(0, 64);
        let k = spec.kernel.clone();
        let chol = gp_fit(&ds.x_train, &ds.y_train, &k, 0.1, Strategy::Cholesky).unwrap();
        let cg = gp_fit(&ds.x_train, &ds.y_train, &k, 0.1, Strategy::Cg).unwrap();
        let (m1, v1) = gp_predict(&chol, &xs).unwrap();
        let (m2, v2) = gp_predict(&cg, &xs).unwrap();
        let (dm, dv) = (max_abs_diff(&m1, &m2), max_abs_diff(&v1, &v2));
        check(
            dm <= 1e-5 && dv <= 3e-3,
            format!("N=2000 D=4, {} CG iterations, mean diff {dm:.2e}, var diff {dv:.2e}", cg.cg_iterations().unwrap()),
        )
    })
}

fn ski() -> Outcome {
    let n = 5000;
    let m = 512;
    let noise = 0.1;
    let k = scaled(1.0, rbf(0.1));
    let (x, y) = timing_problem(n, 1, noise, 5);
    let s = build_ski(&x, &k, m).unwrap();
    let v: Vec<f64> = (0..n).map(|i| (0.01 * i as f64).cos()).collect();
    let fast = ski_matvec(&s, noise, &v).unwrap();
    let w = s.weights().to_dense();
    let nodes = Matrix::column(&s.grid_points()).unwrap();
    let kg = k.eval(&nodes, &nodes).unwrap();
    let u = w.transpose().matvec(&v).unwrap();
    let g = kg.matvec(&u).unwrap();
    let mut dense = w.matvec(&g).unwrap();
    dense.iter_mut().zip(&v).for_each(|(d, vi)| *d += noise * vi);
    let dmv = max_abs_diff(&fast, &dense);

    let cfg = FitConfig {
        ski_grid: Some(m),
        ..FitConfig::default()
    };
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let xs = uniform_inputs(200, 1, &mut rng);
    let ski_state = gp_fit_with(&x, &y, &k, noise, Strategy::Ski, &cfg).unwrap();
    let chol = gp_fit(&x, &y, &k, noise, Strategy::Cholesky).unwrap();
    let (ms, _) = gp_predict(&ski_state, &xs).unwrap();
    let (mc, _) = gp_predict(&chol, &xs).unwrap();
    let dmean = max_abs_diff(&ms, &mc);
    check(
        dmv <= 1e-9 && dmean <= 1e-3,
        format!("N=5000 m=512, matvec diff {dmv:.2e}, mean diff vs Cholesky {dmean:.2e}"),
    )
}

fn exact_lml(x: &Matrix, y: &[f64], k: &KernelExpr, noise: f64) -> f64 {
    log_marginal_likelihood(&gp_fit(x, y, k, noise, Strategy::Cholesky).unwrap()).unwrap()
}

fn vfe() -> Outcome {
    let (x, y) = timing_problem(300, 2, 0.05, 21);
    let k = scaled(1.2, rbf(0.4));
    let lml = exact_lml(&x, &y, &k, 0.05);
    let f = vfe_objective(&x, &y, &k, 0.05, &x).unwrap().objective;
    let rel = ((f - lml) / lml).abs();

    let mut rng = ChaCha8Rng::seed_from_u64(22);
    let mut worst_gap = f64::INFINITY;
    let mut violations = 0;
    for c in 0..20 {
        let n = rng.random_range(20..=500);
        let m = rng.random_range(1..=50usize).min(n);
        let d = rng.random_range(1..=3);
        let noise = 10f64.powf(rng.random_range(-2.0..0.0));
        let l = rng.random_range(0.1..1.0);
        let kern = match c % 3 {
            0 => scaled(rng.random_range(0.5..2.0), rbf(l)),
            1 => scaled(rng.random_range(0.5..2.0), KernelExpr::matern32(l).unwrap()),
            _ => KernelExpr::sum(rbf(l), KernelExpr::linear(0.5).unwrap()),
        };
        let (xc, yc) = timing_problem(n, d, noise, 100 + c);
        let z = xc.select_rows(&farthest_point_sampling(&xc, m).unwrap());
        let bound = vfe_objective(&xc, &yc, &kern, noise, &z).unwrap().objective;
        let gap = exact_lml(&xc, &yc, &kern, noise) - bound;
        worst_gap = worst_gap.min(gap);
        if gap < 0.0 {
            violations += 1;
        }
    }
    check(
        rel <= 1e-6 && violations == 0,
        format!("collapse rel err {rel:.2e}; 20 configs, {violations} violations, min gap {worst_gap:.3e}"),
    )
}

fn slq() -> Outcome {
    let cfg = CgConfig {
        probes: 32,
        lanczos_steps: 50,
        ..CgConfig::default()
    };
    let k = rbf(0.5);
    let mut worst: f64 = 0.0;
    for seed in 0..5 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x = uniform_inputs(512, 2, &mut rng);
        let mut g = k.eval(&x, &x).unwrap();
        g.add_diag(0.1);
        let exact = cholesky(&g).unwrap().logdet();
        let op = MatrixFreeOperator::new(&k, &x, 0.1, 256).unwrap();
        let est = slq_logdet(&op, 512, &cfg, seed).unwrap();
        worst = worst.max(((est - exact) / exact).abs());
    }
    check(worst <= 0.01, format!("N=512, 5 seeds, worst relative error {worst:.2e}"))
}

fn memory() -> Outcome {
    let peaks = |strategy, ns: Vec<usize>| -> Vec<usize> {
        let p = SuiteParams {
            ns,
            ds: vec![1],
            strategy,
            runs: 1,
            warmup: 0,
            noise: 0.1,
            kernel: Some(rbf(1.0)),
            block: Some(32),
            ..SuiteParams::default()
        };
        run_suite(SuiteKind::Memory, &p)
            .unwrap()
            .iter()
            .map(|r| {
                assert!(r.is_ok(), "{}", r.status);
                r.peak_bytes.unwrap()
            })
            .collect()
    };
    let chol = peaks(Strategy::Cholesky, vec![1000, 2000]);
    let cg = peaks(Strategy::Cg, vec![10_000, 20_000]);
    let rc = chol[1] as f64 / chol[0] as f64;
    let rm = cg[1] as f64 / cg[0] as f64;
    let per_n = cg[1] as f64 / (20_000.0 * 8.0);
    check(
        (3.5..=4.5).contains(&rc) && (1.8..=2.6).contains(&rm) && per_n < 64.0,
        format!("Cholesky ratio {rc:.3}, matrix-free ratio {rm:.3}, peak at N=20000 = {per_n:.1} N*8 bytes"),
    )
}

fn optimizer() -> Outcome {
    let composed = KernelExpr::sum(
        KernelExpr::sum(scaled(1.0, rbf(0.5)), scaled(1.0, KernelExpr::periodic(0.8, 1.0).unwrap())),
        KernelExpr::sum(
            scaled(1.0, KernelExpr::matern52(0.5).unwrap()),
            scaled(0.5, KernelExpr::linear(1.0).unwrap()),
        ),
    );
    let (x, y) = timing_problem(60, 1, 0.05, 31);
    let p0 = pack_params(&composed, 0.1).unwrap();
    let calls = AtomicUsize::new(0);
    let objective = |p: &[f64]| {
        calls.fetch_add(1, Ordering::Relaxed);
        let (k, noise) = unpack_params(&composed, p).unwrap();
        exact_lml(&x, &y, &k, noise)
    };
    let one = optimize_hyperparams(objective, &p0, &OptimizerConfig::with_steps(1)).unwrap();
    let budget_ok = p0.len() == 10 && calls.load(Ordering::Relaxed) == 21 && one.evaluations == 21;

    let mut recovered = 0;
    let mut found = Vec::new();
    for seed in 0..5 {
        let mut rng = ChaCha8Rng::seed_from_u64(40 + seed);
        let xs = uniform_inputs(500, 1, &mut rng);
        let y = GpSampler::new(&xs, &rbf(0.3), 0.01).unwrap().draw(&mut rng);
        let (k, _, _) = optimize_exact(
            &xs,
            &y,
            &scaled(1.0, rbf(1.0)),
            0.1,
            Strategy::Cholesky,
            &FitConfig::default(),
            &OptimizerConfig::with_steps(100),
        )
        .unwrap();
        let l = k.flatten_params().as_slice()[1].exp();
        found.push(format!("{l:.3}"));
        if ((l - 0.3) / 0.3).abs() <= 0.2 {
            recovered += 1;
        }
    }
    check(
        budget_ok && recovered >= 4,
        format!(
            "P={}, {} evaluations for one step; lengthscales {} ({recovered}/5 within 20%)",
            p0.len(),
            calls.load(Ordering::Relaxed),
            found.join(", ")
        ),
    )
}

fn accuracy() -> Outcome {
    let p = SuiteParams {
        m: 200,
        runs: 1,
        warmup: 0,
        ..SuiteParams::default()
    };
    let recs = run_suite(SuiteKind::Accuracy, &p).unwrap();
    let (e, s) = (&recs[0], &recs[1]);
    if !e.is_ok() || !s.is_ok() {
        return check(false, format!("exact: {}; sparse: {}", e.status, s.status));
    }
    let (re, rs) = (e.rmse.unwrap(), s.rmse.unwrap());
    let (ce, cs) = (e.coverage95.unwrap(), s.coverage95.unwrap());
    check(
        re <= rs && ce >= 0.9 && cs >= 0.9,
        format!("N={} train, RMSE exact {re:.3} vs sparse {rs:.3}; coverage {ce:.3} / {cs:.3}", e.n),
    )
}

fn warm_refit() -> Outcome {
    let (x, y) = timing_problem(400, 2, 0.05, 51);
    let k = scaled(1.0, rbf(0.4));
    let opt = OptimizerConfig::with_steps(2);
    let before = fps_call_count();
    let cold = sparse_fit(&x, &y, &k, 0.05, 30, &opt, None).unwrap();
    let mid = fps_call_count();
    let warm = sparse_fit(&x, &y, cold.kernel(), cold.noise(), 30, &opt, Some(&cold)).unwrap();
    let after = fps_call_count();
    let same_z = warm.inducing() == cold.inducing();
    check(
        mid - before == 1 && after == mid && warm.info().fps_calls == 0 && same_z,
        format!("cold fit {} FPS calls, warm refit {} (inducing inputs reused: {same_z})", mid - before, after - mid),
    )
}

fn invariants() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(61);
    let mut failures = Vec::new();
    let kernels = [
        scaled(1.5, rbf(0.3)),
        KernelExpr::matern12(0.2).unwrap(),
        KernelExpr::matern52(0.7).unwrap(),
        KernelExpr::periodic(0.5, 0.3).unwrap(),
        KernelExpr::product(rbf(0.5), KernelExpr::linear(2.0).unwrap()),
        KernelExpr::sum(scaled(0.5, KernelExpr::matern32(0.1).unwrap()), rbf(1.0)),
    ];
    let mut cases = 0;
    for (ki, k) in kernels.iter().enumerate() {
        for _ in 0..4 {
            cases += 1;
            let n = rng.random_range(10..=1000);
            let d = rng.random_range(1..=3);
            let x = uniform_inputs(n, d, &mut rng);
            let mut g = k.eval(&x, &x).unwrap();
            let mut asym: f64 = 0.0;
            let mut max_diag: f64 = 0.0;
            for i in 0..n {
                max_diag = max_diag.max(g.row(i)[i]);
                for j in 0..i {
                    asym = asym.max((g.row(i)[j] - g.row(j)[i]).abs());
                }
            }
            if asym > 1e-12 {
                failures.push(format!("symmetry k{ki} n{n}: {asym:e}"));
            }
            g.add_diag((1e-8 * max_diag).max(1e-12));
            match cholesky(&g) {
                Ok(f) if f.jitter_used() == 0.0 => {}
                Ok(f) => failures.push(format!("jitter escalated k{ki} n{n}: {:e}", f.jitter_used())),
                Err(e) => failures.push(format!("psd k{ki} n{n}: {e}")),
            }

            let noise = 0.1;
            let y: Vec<f64> = x.row_iter().map(|r| (4.0 * r[0]).sin()).collect();
            let mut h = k.eval(&x, &x).unwrap();
            h.add_diag(noise);
            let direct = cholesky(&h).unwrap().solve(&y).unwrap();
            let op = MatrixFreeOperator::new(k, &x, noise, 128).unwrap();
            let cfg = CgConfig {
                rel_tolerance: 1e-12,
                max_iterations: Some(5 * n),
                ..CgConfig::default()
            };
            let sol = cg_solve(&op, &y, &cfg).unwrap();
            let diff = max_abs_diff(&sol.x, &direct);
            if diff > 1e-8 {
                failures.push(format!("cg/cholesky k{ki} n{n}: {diff:e}"));
            }
        }
    }

    for t in 0..10 {
        cases += 1;
        let n = rng.random_range(5..=200);
        let x = uniform_inputs(n, 2, &mut rng);
        let y: Vec<f64> = x.row_iter().map(|r| r[0] - r[1] * r[1]).collect();
        let mut perm: Vec<usize> = (0..n).collect();
        for i in (1..n).rev() {
            perm.swap(i, rng.random_range(0..=i));
        }
        let xp = x.select_rows(&perm);
        let yp: Vec<f64> = perm.iter().map(|&i| y[i]).collect();
        let k = &kernels[t % kernels.len()];
        let xs = uniform_inputs(30, 2, &mut rng);
        let (m1, v1) = gp_predict(&gp_fit(&x, &y, k, 0.05, Strategy::Cholesky).unwrap(), &xs).unwrap();
        let (m2, v2) = gp_predict(&gp_fit(&xp, &yp, k, 0.05, Strategy::Cholesky).unwrap(), &xs).unwrap();
        let diff = max_abs_diff(&m1, &m2).max(max_abs_diff(&v1, &v2));
        if diff > 1e-10 {
            failures.push(format!("permutation n{n}: {diff:e}"));
        }
    }

    for _ in 0..10 {
        cases += 1;
        let n = rng.random_range(1..=2000);
        let m = rng.random_range(8..=1024);
        let x = uniform_inputs(n, 1, &mut rng);
        let s = build_ski(&x, &rbf(0.2), m).unwrap();
        let xs = Matrix::column(&(0..50).map(|_| rng.random_range(-0.5..1.5)).collect::<Vec<_>>()).unwrap();
        let w = s.interpolate(&xs).unwrap();
        let worst = (0..s.weights().rows())
            .map(|i| s.weights().row(i).1)
            .chain((0..w.rows()).map(|i| w.row(i).1))
            .map(|r| (r.iter().sum::<f64>() - 1.0).abs())
            .fold(0.0, f64::max);
        if worst > 1e-12 {
            failures.push(format!("partition of unity n{n} m{m}: {worst:e}"));
        }
    }

    let shown: Vec<&String> = failures.iter().take(3).collect();
    check(
        failures.is_empty(),
        format!("{cases} cases, {} failures {shown:?}", failures.len()),
    )
}

fn main() {
    let criteria: [Criterion; 9] = [
        ("cross-path CG vs Cholesky agreement", Duration::from_secs(60), cross_path),
        ("SKI operator and predictive mean", Duration::from_secs(30), ski),
        ("VFE collapse and bound", Duration::from_secs(60), vfe),
        ("SLQ log-determinant accuracy", Duration::from_secs(30), slq),
        ("memory scaling", Duration::from_secs(120), memory),
        ("optimizer budget and lengthscale recovery", Duration::from_secs(600), optimizer),
        ("accuracy-suite ordering and coverage", Duration::from_secs(600), accuracy),
        ("warm sparse refit skips inducing selection", Duration::from_secs(60), warm_refit),
        ("invariant suite", Duration::from_secs(600), invariants),
    ];
    let mut failed = 0;
    for (i, (name, limit, run)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let outcome = run();
        let elapsed = start.elapsed();
        let in_time = elapsed <= *limit;
        let pass = outcome.pass && in_time;
        if !pass {
            failed += 1;
        }
        println!(
            "{} {}. {name}: {} [{:.1} s, limit {} s{}]",
            if pass { "PASS" } else { "FAIL" },
            i + 1,
            outcome.detail,
            elapsed.as_secs_f64(),
            limit.as_secs(),
            if in_time { "" } else { ", over time" }
        );
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
