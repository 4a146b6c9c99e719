//! Scenario execution, trace files and summaries.

use std::fs::{self, File};
use std::io::BufWriter;
use std::path::Path;
use std::time::Instant;

use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::baseline::naive_averaging_baseline;
use super::config::{AlgorithmConfig, ExperimentConfig, Prepared};
use crate::analysis::{cocoercivity_check, lemma3_contraction_check, theorem1_coefficient_trace, TheoryReport};
use crate::async_frost::{a1_coefficient, AsyncFrost, AsyncFrostConfig, AsyncRun, EpochSchedule, DEFAULT_EARLY_STOP};
use crate::dac::{DelayedTracker, SquareWaveClock, DEFAULT_SETTLE_TOL, DEFAULT_SETTLE_WINDOW};
use crate::error::{Error, Result};
use crate::sync::{weighted_gradient_reference, AddOptState, DgdState, FrostState, GradientTrackingState, SyncOptimizer};

pub const TRACE_FILE: &str = "trace.csv";
pub const EPOCHS_FILE: &str = "epochs.csv";
pub const TRACKER_FILE: &str = "tracker.csv";
pub const SUMMARY_FILE: &str = "summary.json";
pub const CONFIG_FILE: &str = "config.toml";
pub const THEORY_JSON: &str = "theory.json";
pub const THEORY_TEXT: &str = "theory.txt";

const DEFAULT_TRACKER_STRIDE: u64 = 10;
const COCOERCIVITY_PAIRS: usize = 1000;
const CONTRACTION_STEPS: usize = 20;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckOutcome {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrackerComparison {
    pub true_average: Vec<f64>,
    /// First tick from which every agent's tracker estimate stays within `fraction` of the true average.
    pub first_within: Option<u64>,
    pub fraction: f64,
    pub final_relative_error: f64,
    pub naive_sampled_completion: u64,
    pub naive_graph_worst_case: u64,
    pub naive_worst_case: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub name: String,
    pub algorithm: String,
    pub agents: usize,
    pub dim: usize,
    pub optimum: Vec<f64>,
    pub target: Vec<f64>,
    pub final_estimates: Vec<Vec<f64>>,
    /// Plain mean of the final estimates.
    pub consensus_value: Vec<f64>,
    /// Largest max-norm distance of any agent from `target` at termination.
    pub max_error: f64,
    /// Epochs (or iterations) run after initialisation.
    pub steps: usize,
    pub ticks: u64,
    pub steps_to_tolerance: Option<usize>,
    pub stopped_early: bool,
    pub unsettled_epochs: usize,
    pub reference: Option<Vec<f64>>,
    pub reference_gap: Option<f64>,
    pub runtime_secs: f64,
    pub warnings: Vec<String>,
    pub tracker: Option<TrackerComparison>,
    pub theory: Option<TheoryReport>,
    pub checks: Vec<CheckOutcome>,
    pub passed: bool,
}

fn fmt(v: f64) -> String {
    format!("{v}")
}

fn vec_header(prefix: &str, dim: usize) -> impl Iterator<Item = String> + '_ {
    (0..dim).map(move |k| format!("{prefix}_{k}"))
}

fn max_norm_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
}

fn weighted_mean(u: &DVector<f64>, x: &[Vec<f64>]) -> Vec<f64> {
    let mut acc = vec![0.0; x[0].len()];
    for (ui, xi) in u.iter().zip(x) {
        for (a, v) in acc.iter_mut().zip(xi) {
            *a += ui * v;
        }
    }
    acc
}

fn consensus_error(u: &DVector<f64>, x: &[Vec<f64>]) -> f64 {
    let avg = weighted_mean(u, x);
    x.iter()
        .flat_map(|xi| xi.iter().zip(&avg).map(|(a, b)| (a - b).powi(2)))
        .sum::<f64>()
        .sqrt()
}

fn plain_mean(x: &[Vec<f64>]) -> Vec<f64> {
    let n = x.len() as f64;
    (0..x[0].len()).map(|k| x.iter().map(|xi| xi[k]).sum::<f64>() / n).collect()
}

fn csv_writer(path: &Path) -> Result<csv::Writer<BufWriter<File>>> {
    Ok(csv::Writer::from_writer(BufWriter::new(File::create(path)?)))
}

/// First index from which every later value is within `tol`.
fn settled_from(errors: &[f64], tol: f64) -> Option<usize> {
    let last_bad = errors.iter().rposition(|e| !(*e <= tol));
    match last_bad {
        None if errors.is_empty() => None,
        None => Some(0),
        Some(i) if i + 1 < errors.len() => Some(i + 1),
        Some(_) => None,
    }
}

struct Outcome {
    final_estimates: Vec<Vec<f64>>,
    max_errors: Vec<f64>,
    ticks: u64,
    stopped_early: bool,
    unsettled: usize,
    tracker: Option<TrackerComparison>,
    extra_checks: Vec<CheckOutcome>,
    theory: Option<TheoryReport>,
}

/// Runs a scenario, writing traces, the resolved config and a summary into `out_dir`.
pub fn run_scenario(config: &ExperimentConfig, out_dir: &Path) -> Result<RunSummary> {
    let prepared = config.prepare()?;
    let resolved = config.resolved(&prepared);
    fs::create_dir_all(out_dir)?;
    fs::write(out_dir.join(CONFIG_FILE), resolved.to_toml_string()?)?;
    for w in &prepared.warnings {
        log::warn!("{w}");
    }

    let target: Vec<f64> = resolved
        .checks
        .target
        .clone()
        .unwrap_or_else(|| prepared.problem.optimum().iter().copied().collect());
    let start = Instant::now();
    let outcome = match &resolved.algorithm {
        AlgorithmConfig::AsyncFrost { .. } => run_async(&resolved, &prepared, &target, out_dir)?,
        AlgorithmConfig::NaiveAveraging { kappa, ticks } => run_naive(&resolved, &prepared, *kappa, *ticks, out_dir)?,
        AlgorithmConfig::Frost { iterations, step } => {
            let s = FrostState::new(&prepared.problem, &prepared.weights, prepared.x0.clone(), step.clone())?;
            run_sync(s, *iterations, &prepared, &target, out_dir)?
        }
        AlgorithmConfig::Addopt { iterations, alpha } => {
            let s = AddOptState::new(&prepared.problem, &prepared.weights, prepared.x0.clone(), *alpha)?;
            run_sync(s, *iterations, &prepared, &target, out_dir)?
        }
        AlgorithmConfig::GradientTracking { iterations, alpha } => {
            let s = GradientTrackingState::new(&prepared.problem, &prepared.weights, prepared.x0.clone(), *alpha)?;
            run_sync(s, *iterations, &prepared, &target, out_dir)?
        }
        AlgorithmConfig::Dgd { iterations, step } => {
            let s = DgdState::new(&prepared.problem, &prepared.weights, prepared.x0.clone(), step.clone())?;
            run_sync(s, *iterations, &prepared, &target, out_dir)?
        }
    };
    let runtime_secs = start.elapsed().as_secs_f64();

    let checks_cfg = &resolved.checks;
    let is_naive = matches!(resolved.algorithm, AlgorithmConfig::NaiveAveraging { .. });
    let max_error = if is_naive {
        outcome.tracker.as_ref().map_or(f64::NAN, |t| t.final_relative_error)
    } else {
        outcome.max_errors.last().copied().unwrap_or(f64::NAN)
    };
    let consensus_value = if outcome.final_estimates.is_empty() {
        Vec::new()
    } else {
        plain_mean(&outcome.final_estimates)
    };
    let reference_gap = checks_cfg
        .reference
        .as_ref()
        .filter(|_| !consensus_value.is_empty())
        .map(|r| max_norm_diff(&consensus_value, r));

    let mut checks = Vec::new();
    if let Some(tol) = checks_cfg.tolerance {
        checks.push(CheckOutcome {
            name: "final accuracy".into(),
            passed: max_error <= tol,
            detail: format!("max agent error {max_error:.3e} vs tolerance {tol:.1e}"),
        });
    }
    if let Some(limit) = checks_cfg.max_runtime_secs {
        checks.push(CheckOutcome {
            name: "runtime".into(),
            passed: runtime_secs <= limit,
            detail: format!("{runtime_secs:.2} s vs limit {limit} s"),
        });
    }
    checks.extend(outcome.extra_checks);
    if let Some(theory) = &outcome.theory {
        for c in &theory.checks {
            checks.push(CheckOutcome {
                name: format!("theory: {}", c.name),
                passed: c.passed,
                detail: format!("measured {:.3e}, bound {:.3e} {}", c.measured, c.bound, c.detail),
            });
        }
    }
    let passed = checks.iter().all(|c| c.passed);

    let summary = RunSummary {
        name: resolved.name.clone(),
        algorithm: resolved.algorithm.name().into(),
        agents: prepared.problem.agent_count(),
        dim: prepared.problem.dim(),
        optimum: prepared.problem.optimum().iter().copied().collect(),
        steps_to_tolerance: checks_cfg.tolerance.and_then(|t| settled_from(&outcome.max_errors, t)),
        target,
        final_estimates: outcome.final_estimates,
        consensus_value,
        max_error,
        steps: outcome.max_errors.len().saturating_sub(1),
        ticks: outcome.ticks,
        stopped_early: outcome.stopped_early,
        unsettled_epochs: outcome.unsettled,
        reference: checks_cfg.reference.clone(),
        reference_gap,
        runtime_secs,
        warnings: prepared.warnings.clone(),
        tracker: outcome.tracker,
        theory: outcome.theory,
        checks,
        passed,
    };
    fs::write(out_dir.join(SUMMARY_FILE), serde_json::to_string_pretty(&summary)?)?;
    Ok(summary)
}

fn async_config(cfg: &ExperimentConfig, p: &Prepared) -> Result<AsyncFrostConfig> {
    let AlgorithmConfig::AsyncFrost {
        kappa,
        half_period,
        epochs,
        step,
        early_stop,
        settle_window,
        settle_tol,
        tracker_trace,
    } = &cfg.algorithm
    else {
        unreachable!("caller matched async_frost");
    };
    let half = half_period.unwrap_or_else(|| EpochSchedule::default_half_period(&p.weights, *kappa, p.delays.tau_max()));
    Ok(AsyncFrostConfig {
        kappa: *kappa,
        schedule: EpochSchedule::new(half, *epochs, p.delays.tau_max())?,
        step: step.clone(),
        early_stop: early_stop.or(Some(DEFAULT_EARLY_STOP)).filter(|t| *t > 0.0),
        settle_window: settle_window.unwrap_or(DEFAULT_SETTLE_WINDOW),
        settle_tol: settle_tol.unwrap_or(DEFAULT_SETTLE_TOL),
        tracker_trace: *tracker_trace,
    })
}

fn run_async(cfg: &ExperimentConfig, p: &Prepared, target: &[f64], out_dir: &Path) -> Result<Outcome> {
    let acfg = async_config(cfg, p)?;
    let run = AsyncFrost::new(&p.weights, &p.problem, &p.delays, acfg, p.x0.clone())?.run()?;
    let dim = p.problem.dim();
    let u = p.weights.fle();
    let u_vec: Vec<f64> = u.iter().copied().collect();
    let l = p.problem.smoothness();
    let optimum: Vec<f64> = p.problem.optimum().iter().copied().collect();

    let mut trace = csv_writer(&out_dir.join(TRACE_FILE))?;
    let mut header: Vec<String> = vec!["epoch".into(), "tick".into(), "agent".into()];
    header.extend(vec_header("x", dim));
    header.extend(vec_header("p", dim));
    header.extend(["error".into(), "fle_error".into(), "settled".into()]);
    trace.write_record(&header)?;
    let mut epochs = csv_writer(&out_dir.join(EPOCHS_FILE))?;
    epochs.write_record([
        "epoch",
        "tick",
        "alpha",
        "a1",
        "consensus_error",
        "tracking_error",
        "optimality_gap",
        "max_error",
        "fle_error",
        "settled",
    ])?;

    let mut max_errors = Vec::with_capacity(run.records.len());
    for (idx, rec) in run.records.iter().enumerate() {
        let fle_errors: Vec<f64> = rec.e.iter().map(|e| max_norm_diff(e, &u_vec)).collect();
        let errors: Vec<f64> = rec.x.iter().map(|x| max_norm_diff(x, target)).collect();
        for (i, x) in rec.x.iter().enumerate() {
            let mut row = vec![rec.epoch.to_string(), rec.tick.to_string(), i.to_string()];
            row.extend(x.iter().map(|v| fmt(*v)));
            row.extend(rec.p[i].iter().map(|v| fmt(*v)));
            row.extend([fmt(errors[i]), fmt(fle_errors[i]), rec.settled.to_string()]);
            trace.write_record(&row)?;
        }
        let tracking = if idx == 0 {
            0.0
        } else {
            let expected = weighted_mean(u, &run.records[idx - 1].injected);
            rec.p.iter().map(|pi| max_norm_diff(pi, &expected)).fold(0.0, f64::max)
        };
        let max_error = errors.iter().copied().fold(0.0, f64::max);
        max_errors.push(max_error);
        epochs.write_record([
            rec.epoch.to_string(),
            rec.tick.to_string(),
            fmt(rec.alpha),
            fmt(a1_coefficient(&l, &rec.e_diag(), &u_vec, rec.alpha)),
            fmt(consensus_error(u, &rec.x)),
            fmt(tracking),
            fmt(max_norm_diff(&weighted_mean(u, &rec.x), &optimum)),
            fmt(max_error),
            fmt(fle_errors.iter().copied().fold(0.0, f64::max)),
            rec.settled.to_string(),
        ])?;
    }
    trace.flush()?;
    epochs.flush()?;

    if !run.tracker_trace.is_empty() {
        let mut w = csv_writer(&out_dir.join(TRACKER_FILE))?;
        let mut header: Vec<String> = vec!["tick".into(), "agent".into()];
        header.extend(vec_header("r", dim));
        header.push("s".into());
        w.write_record(&header)?;
        for s in &run.tracker_trace {
            let mut row = vec![s.tick.to_string(), s.agent.to_string()];
            row.extend(s.r.iter().map(|v| fmt(*v)));
            row.push(fmt(s.s));
            w.write_record(&row)?;
        }
        w.flush()?;
    }

    let mut extra_checks = Vec::new();
    if let Some(tol) = cfg.checks.synchronous_reference {
        let gap = synchronous_gap(&run, p)?;
        extra_checks.push(CheckOutcome {
            name: "synchronous reference".into(),
            passed: gap <= tol,
            detail: format!("max boundary deviation {gap:.3e} vs tolerance {tol:.1e}"),
        });
    }
    let theory = if cfg.checks.theory {
        let report = theory_report(&run, p, &l, &u_vec)?;
        fs::write(out_dir.join(THEORY_JSON), report.to_json()?)?;
        fs::write(out_dir.join(THEORY_TEXT), report.to_string())?;
        Some(report)
    } else {
        None
    };

    Ok(Outcome {
        final_estimates: run.final_estimates(),
        max_errors,
        ticks: run.ticks,
        stopped_early: run.stopped_early,
        unsettled: run.records.iter().filter(|r| !r.settled).count(),
        tracker: None,
        extra_checks,
        theory,
    })
}

/// Largest deviation of the boundary iterates from the delay-free weighted-gradient recursion.
pub fn synchronous_gap(run: &AsyncRun, p: &Prepared) -> Result<f64> {
    let alphas: Vec<f64> = run.records.iter().skip(1).map(|r| r.alpha).collect();
    let reference = weighted_gradient_reference(&p.weights, &p.problem, p.x0.clone(), &alphas)?;
    Ok(run
        .records
        .iter()
        .zip(&reference)
        .flat_map(|(rec, xr)| rec.x.iter().zip(xr).map(|(a, b)| max_norm_diff(a, b.as_slice())))
        .fold(0.0, f64::max))
}

fn theory_report(run: &AsyncRun, p: &Prepared, l: &[f64], u: &[f64]) -> Result<TheoryReport> {
    let mut report = TheoryReport::default();
    let worst = (0..p.problem.agent_count())
        .map(|i| cocoercivity_check(p.problem.objective(i), COCOERCIVITY_PAIRS, i as u64))
        .min_by(|a, b| a.measured.total_cmp(&b.measured))
        .expect("at least one agent");
    report.push(worst);
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let x0: Vec<DVector<f64>> = (0..p.problem.agent_count())
        .map(|_| DVector::from_fn(p.problem.dim(), |_, _| rng.gen_range(-1.0..1.0)))
        .collect();
    report.extend(lemma3_contraction_check(&p.weights, &x0, CONTRACTION_STEPS)?.report);
    let grads: Vec<DVector<f64>> = (0..p.problem.agent_count())
        .map(|i| p.problem.objective(i).gradient(p.problem.optimum()))
        .collect();
    match theorem1_coefficient_trace(run, l, u, &grads) {
        Ok(trace) => report.extend(trace.report),
        Err(Error::MissingTrace(m)) => log::warn!("skipping coefficient trace: {m}"),
        Err(e) => return Err(e),
    }
    Ok(report)
}

fn run_sync<S: SyncOptimizer>(mut state: S, iterations: u64, p: &Prepared, target: &[f64], out_dir: &Path) -> Result<Outcome> {
    let dim = p.problem.dim();
    let u = p.weights.fle();
    let mut trace = csv_writer(&out_dir.join(TRACE_FILE))?;
    let mut header: Vec<String> = vec!["iteration".into(), "agent".into()];
    header.extend(vec_header("x", dim));
    header.push("error".into());
    trace.write_record(&header)?;
    let mut epochs = csv_writer(&out_dir.join(EPOCHS_FILE))?;
    epochs.write_record(["iteration", "consensus_error", "max_error"])?;

    let mut max_errors = Vec::with_capacity(iterations as usize + 1);
    let mut estimates: Vec<Vec<f64>> = Vec::new();
    for it in 0..=iterations {
        if it > 0 {
            state = state.step(&p.weights, &p.problem)?;
        }
        estimates = state.estimates().iter().map(|x| x.as_slice().to_vec()).collect();
        let errors: Vec<f64> = estimates.iter().map(|x| max_norm_diff(x, target)).collect();
        for (i, x) in estimates.iter().enumerate() {
            let mut row = vec![it.to_string(), i.to_string()];
            row.extend(x.iter().map(|v| fmt(*v)));
            row.push(fmt(errors[i]));
            trace.write_record(&row)?;
        }
        let max_error = errors.iter().copied().fold(0.0, f64::max);
        if !max_error.is_finite() {
            return Err(Error::Numeric(format!("estimates diverged at iteration {it}")));
        }
        max_errors.push(max_error);
        epochs.write_record([it.to_string(), fmt(consensus_error(u, &estimates)), fmt(max_error)])?;
    }
    trace.flush()?;
    epochs.flush()?;
    Ok(Outcome {
        final_estimates: estimates,
        max_errors,
        ticks: iterations,
        stopped_early: false,
        unsettled: 0,
        tracker: None,
        extra_checks: Vec::new(),
        theory: None,
    })
}

fn run_naive(cfg: &ExperimentConfig, p: &Prepared, kappa: f64, ticks: u64, out_dir: &Path) -> Result<Outcome> {
    let n = p.problem.agent_count();
    let dim = p.problem.dim();
    let u = p.weights.fle();
    let u_vec: Vec<f64> = u.iter().copied().collect();
    let inputs: Vec<Vec<f64>> = (0..n)
        .map(|i| p.problem.objective(i).gradient(&p.x0[i]).as_slice().to_vec())
        .collect();
    let truth = weighted_mean(u, &inputs);
    let scale = truth.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(f64::MIN_POSITIVE);

    let clock = SquareWaveClock::with_half_period(ticks.max(p.delays.tau_max() as u64 + 1))?;
    let mut tracker = DelayedTracker::new(&p.weights, kappa, &p.delays, clock, dim)?;
    for (i, b) in inputs.iter().enumerate() {
        tracker.set_input(i, b);
    }
    let baseline = naive_averaging_baseline(&p.graph, &p.delays);
    let fraction = cfg.checks.tracker_fraction.unwrap_or(0.05);
    let stride = cfg.output.tracker_stride.unwrap_or(DEFAULT_TRACKER_STRIDE).max(1);

    let mut w = csv_writer(&out_dir.join(TRACKER_FILE))?;
    let mut header: Vec<String> = vec!["tick".into(), "agent".into()];
    header.extend(vec_header("estimate", dim));
    header.extend(vec_header("naive", dim));
    header.push("relative_error".into());
    w.write_record(&header)?;

    let mut rel_errors = Vec::with_capacity(ticks as usize + 1);
    let mut estimates = vec![vec![0.0; dim]; n];
    for t in 0..=ticks {
        if t > 0 {
            tracker.step();
        }
        let mut worst = 0.0f64;
        for (i, est) in estimates.iter_mut().enumerate() {
            let s = tracker.s(i);
            if s.abs() > 1e-9 {
                for (e, r) in est.iter_mut().zip(tracker.r(i)) {
                    *e = r / s;
                }
                worst = worst.max(max_norm_diff(est, &truth) / scale);
            } else {
                worst = f64::INFINITY;
            }
        }
        rel_errors.push(worst);
        if t % stride == 0 {
            for (i, est) in estimates.iter().enumerate() {
                let naive = baseline
                    .sampled
                    .partial_average(i, t, &u_vec, &inputs)
                    .unwrap_or_else(|| vec![0.0; dim]);
                let mut row = vec![t.to_string(), i.to_string()];
                row.extend(est.iter().map(|v| fmt(*v)));
                row.extend(naive.iter().map(|v| fmt(*v)));
                row.push(fmt(max_norm_diff(est, &truth) / scale));
                w.write_record(&row)?;
            }
        }
    }
    w.flush()?;

    let first_within = settled_from(&rel_errors, fraction).map(|t| t as u64);
    let comparison = TrackerComparison {
        true_average: truth,
        first_within,
        fraction,
        final_relative_error: *rel_errors.last().expect("at least tick 0"),
        naive_sampled_completion: baseline.sampled.worst_completion(),
        naive_graph_worst_case: baseline.graph_worst_case,
        naive_worst_case: baseline.worst_case,
    };
    let mut extra_checks = Vec::new();
    if let Some(before) = cfg.checks.tracker_before_tick {
        extra_checks.push(CheckOutcome {
            name: "tracker settles early".into(),
            passed: first_within.is_some_and(|t| t < before),
            detail: format!(
                "within {:.0}% from tick {} (limit {before})",
                fraction * 100.0,
                first_within.map_or("never".into(), |t| t.to_string())
            ),
        });
    }
    if let Some(expected) = cfg.checks.naive_worst_case {
        extra_checks.push(CheckOutcome {
            name: "naive worst case".into(),
            passed: baseline.worst_case == expected,
            detail: format!("flood worst case {} ticks, expected {expected}", baseline.worst_case),
        });
    }
    Ok(Outcome {
        final_estimates: estimates,
        max_errors: rel_errors.iter().step_by(stride as usize).copied().collect(),
        ticks,
        stopped_early: false,
        unsettled: 0,
        tracker: Some(comparison),
        extra_checks,
        theory: None,
    })
}

pub fn load_summary(dir: &Path) -> Result<RunSummary> {
    let path = dir.join(SUMMARY_FILE);
    if !path.exists() {
        return Err(Error::MissingTrace(format!("{} not found", path.display())));
    }
    Ok(serde_json::from_str(&fs::read_to_string(path)?)?)
}

/// Human-readable report of a finished run.
pub fn report(dir: &Path) -> Result<String> {
    let s = load_summary(dir)?;
    let mut out = String::new();
    let vec = |v: &[f64]| v.iter().map(|x| format!("{x:.6}")).collect::<Vec<_>>().join(", ");
    out += &format!("scenario {} ({}, {} agents, dimension {})\n", s.name, s.algorithm, s.agents, s.dim);
    out += &format!("optimum [{}], target [{}]\n", vec(&s.optimum), vec(&s.target));
    if !s.consensus_value.is_empty() {
        out += &format!("final consensus value [{}], max agent error {:.3e}\n", vec(&s.consensus_value), s.max_error);
    }
    if let (Some(r), Some(g)) = (&s.reference, s.reference_gap) {
        out += &format!("reference [{}], gap {:.3e} (reported only)\n", vec(r), g);
    }
    out += &format!("{} steps, {} ticks, {:.2} s", s.steps, s.ticks, s.runtime_secs);
    if s.stopped_early {
        out += ", stopped early";
    }
    if s.unsettled_epochs > 0 {
        out += &format!(", {} epochs flagged unsettled", s.unsettled_epochs);
    }
    out += "\n";
    if let Some(t) = &s.tracker {
        out += &format!(
            "tracker within {:.0}% from tick {}; naive flood completes at {} (sampled), {} (worst case on this graph), {} (worst case over graphs)\n",
            t.fraction * 100.0,
            t.first_within.map_or("never".into(), |v| v.to_string()),
            t.naive_sampled_completion,
            t.naive_graph_worst_case,
            t.naive_worst_case
        );
    }
    for w in &s.warnings {
        out += &format!("warning: {w}\n");
    }
    for c in &s.checks {
        out += &format!("[{}] {}: {}\n", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail);
    }
    out += if s.passed { "all checks passed\n" } else { "some checks failed\n" };
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub a: String,
    pub b: String,
    /// Max-norm distance between the two final consensus values.
    pub consensus_gap: f64,
    /// Largest per-agent difference of final estimates.
    pub agent_gap: f64,
}

pub fn compare(a: &RunSummary, b: &RunSummary) -> Result<Comparison> {
    if a.final_estimates.len() != b.final_estimates.len() || a.dim != b.dim {
        return Err(Error::Config(vec![format!(
            "cannot compare {} ({} agents) with {} ({} agents)",
            a.name,
            a.final_estimates.len(),
            b.name,
            b.final_estimates.len()
        )]));
    }
    Ok(Comparison {
        a: a.name.clone(),
        b: b.name.clone(),
        consensus_gap: max_norm_diff(&a.consensus_value, &b.consensus_value),
        agent_gap: a
            .final_estimates
            .iter()
            .zip(&b.final_estimates)
            .map(|(x, y)| max_norm_diff(x, y))
            .fold(0.0, f64::max),
    })
}
