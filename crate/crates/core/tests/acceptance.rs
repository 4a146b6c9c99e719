//! End-to-end acceptance checks. Each criterion prints one PASS/FAIL line.

mod common;

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::process::ExitCode;
use std::time::Instant;

use common::*;
use delay_frost::analysis::{cocoercivity_check, lemma3_contraction_check};
use delay_frost::async_frost::step_size_theorem2;
use delay_frost::delay::{DelayDistribution, DelayModel};
use delay_frost::experiment::config::ObjectiveConfig;
use delay_frost::experiment::{flood, run_scenario, ExperimentConfig};
use delay_frost::graph::{build_graph, Topology};
use delay_frost::objectives::Objective;
use delay_frost::sync::{FrostState, GradientTrackingState, StepSchedule, SyncOptimizer};
use delay_frost::Error;
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;

fn ensure(ok: bool, msg: String) -> Outcome {
    if ok {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn load(name: &str) -> ExperimentConfig {
    ExperimentConfig::load(&scenario(name)).unwrap()
}

fn s1_reproduction() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let start = Instant::now();
    let s = run_scenario(&load("s1"), dir.path()).map_err(|e| e.to_string())?;
    let secs = start.elapsed().as_secs_f64();
    let worst = s.final_estimates.iter().map(|x| (x[0] + 11.5).abs()).fold(0.0, f64::max);
    ensure(
        worst <= 1e-2 && secs < 60.0,
        format!("max |x_i + 11.5| = {worst:.2e} (limit 1e-2), {secs:.2} s (limit 60 s)"),
    )
}

fn s2_reproduction() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let s = run_scenario(&load("s2"), dir.path()).map_err(|e| e.to_string())?;
    let shifts: Vec<f64> = std::iter::once(100.0).chain((2..=22).map(f64::from)).collect();
    let analytic = -shifts.iter().sum::<f64>() / shifts.len() as f64;
    let worst = s.final_estimates.iter().map(|x| (x[0] - analytic).abs()).fold(0.0, f64::max);
    let gap = (s.consensus_value[0] + 16.045).abs();
    ensure(
        worst <= 1e-1 && (analytic + 16.0).abs() < 1e-12,
        format!("analytic optimum {analytic}, max agent error {worst:.2e} (limit 1e-1); gap to plotted -16.045 is {gap:.3e} (reported)"),
    )
}

fn tracker_vs_naive() -> Outcome {
    let cfg = load("tracker_vs_naive");
    let dir = tempfile::tempdir().unwrap();
    let s = run_scenario(&cfg, dir.path()).map_err(|e| e.to_string())?;
    let t = s.tracker.as_ref().ok_or("no tracker comparison")?;

    let prepared = cfg.prepare().unwrap();
    let u = power_iteration_fle(prepared.weights.matrix());
    let truth: f64 = (0..22).map(|i| u[i] * 2.0 * (i as f64 + 1.0)).sum();
    let truth_err = (t.true_average[0] - truth).abs();

    let ring = build_graph(22, &Topology::Cycle, 0).unwrap();
    let ring_worst = flood(&ring, &DelayModel::constant(157)).worst_completion();

    ensure(
        truth_err < 1e-9 && t.first_within.is_some_and(|k| k < 3000) && t.naive_worst_case == 157 * 21 && ring_worst == 3297,
        format!(
            "tracker within 5% of {truth:.4} from tick {:?} (limit 3000); naive worst case {} and ring flood {} (expected 3297)",
            t.first_within, t.naive_worst_case, ring_worst
        ),
    )
}

fn synchronous_degeneration() -> Outcome {
    let cfg = load("degeneration");
    let prepared = cfg.prepare().unwrap();
    let (n, dim) = (prepared.problem.agent_count(), prepared.problem.dim());
    if n != 4 || dim != 2 || prepared.delays.tau_max() != 0 {
        return Err("scenario is not a 4-node, 2-dimensional zero-delay problem".into());
    }
    let dir = tempfile::tempdir().unwrap();
    run_scenario(&cfg, dir.path()).map_err(|e| e.to_string())?;

    let mut reader = csv::Reader::from_path(dir.path().join("trace.csv")).unwrap();
    let mut rows: Vec<(usize, usize, Vec<f64>)> = Vec::new();
    for rec in reader.records() {
        let rec = rec.unwrap();
        rows.push((rec[0].parse().unwrap(), rec[2].parse().unwrap(), vec![rec[3].parse().unwrap(), rec[4].parse().unwrap()]));
    }
    let mut alphas = vec![0.0];
    let mut er = csv::Reader::from_path(dir.path().join("epochs.csv")).unwrap();
    for rec in er.records().skip(1) {
        alphas.push(rec.unwrap()[2].parse().unwrap());
    }

    // Delay-free recursion with dense matrices.
    let a = prepared.weights.matrix().clone();
    let u = power_iteration_fle(&a);
    let mut x: Vec<DVector<f64>> = prepared.x0.clone();
    let mut e = DMatrix::<f64>::identity(n, n);
    let mut worst = 0.0f64;
    for (k, alpha) in alphas.iter().enumerate() {
        if k > 0 {
            let mut avg = DVector::zeros(dim);
            for j in 0..n {
                avg += prepared.problem.objective(j).gradient(&x[j]) * (u[j] / e[(j, j)]);
            }
            let mixed: Vec<DVector<f64>> = (0..n)
                .map(|i| (0..n).fold(DVector::zeros(dim), |acc, j| acc + &x[j] * a[(i, j)]))
                .collect();
            x = mixed.into_iter().map(|xi| xi - &avg * *alpha).collect();
            e = &a * &e;
        }
        for (_, i, xi) in rows.iter().filter(|r| r.0 == k) {
            worst = worst.max((DVector::from_vec(xi.clone()) - &x[*i]).amax());
        }
    }
    ensure(
        worst <= 1e-8 && alphas.len() > 1,
        format!("max boundary deviation {worst:.2e} over {} epochs (limit 1e-8)", alphas.len() - 1),
    )
}

fn frost_identity() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(14);
    let mut worst = 0.0f64;
    for _ in 0..20 {
        let n = rng.gen_range(2..=5);
        let dim = rng.gen_range(1..=2);
        let problem = random_problem(&mut rng, n, dim);
        let weights = random_row_weights(&mut rng, n);
        let u = power_iteration_fle(weights.matrix());
        let alphas = (0..n).map(|_| rng.gen_range(0.001..0.004)).collect();
        let mut state = FrostState::new(&problem, &weights, random_points(&mut rng, n, dim), StepSchedule::PerAgent { alphas }).unwrap();
        for _ in 0..=200 {
            let mut lhs = DVector::zeros(dim);
            let mut rhs = DVector::zeros(dim);
            for i in 0..n {
                lhs += &state.z[i] * u[i];
                rhs += problem.objective(i).gradient(&state.x[i]) * (u[i] / state.y[i][i]);
            }
            worst = worst.max((lhs - rhs).amax());
            state = state.step(&weights, &problem).unwrap();
        }
    }
    ensure(worst <= 1e-10, format!("max identity residual {worst:.2e} over 20 problems x 201 ticks (limit 1e-10)"))
}

fn tracking_conservation() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut worst = 0.0f64;
    for _ in 0..20 {
        let n = rng.gen_range(2..=5);
        let dim = rng.gen_range(1..=2);
        let problem = random_problem(&mut rng, n, dim);
        let weights = random_doubly_weights(&mut rng, n);
        let mut state = GradientTrackingState::new(&problem, &weights, random_points(&mut rng, n, dim), 0.02).unwrap();
        for _ in 0..=200 {
            let y: DVector<f64> = state.y.iter().sum::<DVector<f64>>() / n as f64;
            let g: DVector<f64> = (0..n).map(|i| problem.objective(i).gradient(&state.x[i])).sum::<DVector<f64>>() / n as f64;
            worst = worst.max((y - g).amax());
            state = state.step(&weights, &problem).unwrap();
        }
    }
    ensure(worst <= 1e-12, format!("max conservation residual {worst:.2e} (limit 1e-12)"))
}

fn contraction_equality() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let (mut worst_lib, mut worst_oracle, mut worst_rate) = (0.0f64, 0.0f64, 0.0f64);
    for _ in 0..10 {
        let n = rng.gen_range(2..=5);
        let dim = rng.gen_range(1..=2);
        let weights = random_row_weights(&mut rng, n);
        let a = weights.matrix().clone();
        let u = power_iteration_fle(&a);
        let x0 = random_points(&mut rng, n, dim);
        let report = lemma3_contraction_check(&weights, &x0, 20).map_err(|e| e.to_string())?;

        let projector = DMatrix::from_element(n, 1, 1.0) * u.transpose();
        let deviation = &a - &projector;
        let x0m = DMatrix::from_fn(n, dim, |i, k| x0[i][k]);
        let mut x = x0m.clone();
        let mut power = DMatrix::<f64>::identity(n, n);
        for k in 0..=20 {
            let simulated = (&x - &projector * &x).norm();
            let dense = (&power * (&x0m - &projector * &x0m)).norm();
            worst_oracle = worst_oracle.max((simulated - dense).abs());
            worst_lib = worst_lib.max((report.simulated[k] - simulated).abs()).max((report.matrix_power[k] - dense).abs());
            x = &a * &x;
            power = &deviation * &power;
        }
        let rho = eigen_contraction(&a, &u);
        worst_rate = worst_rate.max((report.contraction_factor - rho).abs()).max((report.measured_rate - rho).abs());
    }
    ensure(
        worst_oracle <= 1e-10 && worst_lib <= 1e-10 && worst_rate <= 1e-6,
        format!("simulated vs matrix power {worst_oracle:.2e}, library vs oracle {worst_lib:.2e} (limit 1e-10); rate error {worst_rate:.2e} (limit 1e-6)"),
    )
}

fn cocoercivity_suite() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut worst = f64::INFINITY;
    let mut library_failures = 0;
    for q in 0..50 {
        let dim = rng.gen_range(1..=3);
        let f = random_quadratic(&mut rng, dim);
        let (l, s) = (f.smoothness(), f.strong_convexity());
        let (mu1, mu2) = (1.0 / (l + s), l * s / (l + s));
        for _ in 0..1000 {
            let x = DVector::from_fn(dim, |_, _| rng.gen_range(-10.0..10.0));
            let y = DVector::from_fn(dim, |_, _| rng.gen_range(-10.0..10.0));
            let dg = f.gradient(&x) - f.gradient(&y);
            let dx = &x - &y;
            let margin = dx.dot(&dg) - mu1 * dg.norm_squared() - mu2 * dx.norm_squared();
            worst = worst.min(margin / (1.0 + dx.norm_squared()));
        }
        if !cocoercivity_check(&f, 1000, q).passed {
            library_failures += 1;
        }
    }
    ensure(
        worst >= -1e-9 && library_failures == 0,
        format!("worst relative margin {worst:.2e} over 50 x 1000 pairs (slack -1e-9); library check failures {library_failures}"),
    )
}

fn step_size_rule() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mut worst = 0.0f64;
    for _ in 0..20 {
        let n = rng.gen_range(2..=30);
        let l = vec![rng.gen_range(0.1..10.0); n];
        let u: Vec<f64> = {
            let raw: Vec<f64> = (0..n).map(|_| rng.gen_range(0.1..1.0)).collect();
            let s: f64 = raw.iter().sum();
            raw.iter().map(|v| v / s).collect()
        };
        let step = step_size_theorem2(&l, &u, &u).map_err(|e| e.to_string())?;
        let expected = l.iter().sum::<f64>() / (n as f64 * l.iter().map(|v| v * v).sum::<f64>());
        worst = worst.max((step.alpha - expected).abs()).max(step.a1.abs());
    }
    let mut rejected = 0;
    let violating = [vec![1.0, 1.0, 1.0, 3.0], vec![1.0, 10.0], vec![0.5, 0.5, 0.5, 0.5, 8.0]];
    for curv in &violating {
        let mut cfg = load("degeneration");
        cfg.objective = ObjectiveConfig::Quadratic {
            shifts: curv.iter().map(|_| vec![0.0, 0.0]).collect(),
            curvatures: curv.iter().map(|c| vec![*c, *c]).collect(),
        };
        cfg.graph.nodes = curv.len();
        if let Err(Error::Config(msgs)) = cfg.prepare() {
            if msgs.iter().any(|m| m.contains("3/4")) {
                rejected += 1;
            }
        }
    }
    ensure(
        worst <= 1e-12 && rejected == violating.len(),
        format!("max alpha/a1 error {worst:.2e} (limit 1e-12); {rejected}/{} violating configs rejected", violating.len()),
    )
}

fn delay_invariance() -> Outcome {
    let mut values = Vec::new();
    for tau in [0u32, 20, 157] {
        for seed in 1..=5u64 {
            let mut cfg = load("s1");
            cfg.delay.distribution = DelayDistribution::UniformInteger { lo: 0, hi: tau };
            cfg.delay.seed = seed;
            cfg.checks = Default::default();
            let dir = tempfile::tempdir().unwrap();
            let s = run_scenario(&cfg, dir.path()).map_err(|e| e.to_string())?;
            values.push(s.consensus_value[0]);
        }
    }
    let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    ensure(hi - lo < 1e-2, format!("final consensus values span [{lo:.6}, {hi:.6}], spread {:.2e} over 15 runs (limit 1e-2)", hi - lo))
}

fn determinism() -> Outcome {
    let mut compared = 0;
    for path in shipped_scenarios() {
        let cfg = ExperimentConfig::load(&path).unwrap();
        let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
        run_scenario(&cfg, a.path()).map_err(|e| e.to_string())?;
        run_scenario(&cfg, b.path()).map_err(|e| e.to_string())?;
        for file in ["trace.csv", "epochs.csv", "tracker.csv"] {
            let (fa, fb) = (a.path().join(file), b.path().join(file));
            if fa.exists() || fb.exists() {
                if std::fs::read(&fa).ok() != std::fs::read(&fb).ok() {
                    return Err(format!("{} differs between runs of {}", file, path.display()));
                }
                compared += 1;
            }
        }
    }
    ensure(compared > 0, format!("{compared} CSV files byte-identical across repeated runs of every shipped scenario"))
}

fn main() -> ExitCode {
    let criteria: [(&str, fn() -> Outcome); 11] = [
        ("S1 reproduction", s1_reproduction),
        ("S2 reproduction", s2_reproduction),
        ("tracker vs naive", tracker_vs_naive),
        ("synchronous degeneration", synchronous_degeneration),
        ("FROST tracking identity", frost_identity),
        ("gradient-tracking conservation", tracking_conservation),
        ("contraction equality", contraction_equality),
        ("co-coercivity", cocoercivity_suite),
        ("step-size rule", step_size_rule),
        ("delay-limit invariance", delay_invariance),
        ("determinism", determinism),
    ];
    let mut failed = 0;
    for (k, (name, check)) in criteria.iter().enumerate() {
        let outcome = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|p| {
            Err(p.downcast_ref::<String>().cloned().or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string())).unwrap_or_default())
        });
        match outcome {
            Ok(msg) => println!("criterion {:>2} PASS  {name}: {msg}", k + 1),
            Err(msg) => {
                failed += 1;
                println!("criterion {:>2} FAIL  {name}: {msg}", k + 1);
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
