//! Delay-robust asynchronous FROST.
//!
//! Time is split into epochs of `E = T_g / 2` ticks. At each epoch boundary
//! every agent updates its eigenvector estimate and its optimum estimate from
//! delayed neighbour snapshots, then injects its new normalised gradient into
//! a [`DelayedTracker`] and lets it settle for the rest of the epoch.

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::dac::{normalized_average, DelayedTracker, SquareWaveClock, DEFAULT_SETTLE_TOL, DEFAULT_SETTLE_WINDOW};
use crate::delay::DelayModel;
use crate::error::{Error, Result};
use crate::graph::WeightMatrix;
use crate::objectives::{smoothness_ratio, GlobalProblem};
use crate::sync::DIVISOR_FLOOR;

pub const DEFAULT_EARLY_STOP: f64 = 1e-10;
/// Settle window is `SETTLE_TIME_CONSTANTS / κ'` ticks on top of `τ_max`.
pub const SETTLE_TIME_CONSTANTS: f64 = 40.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum StepRule {
    /// Closed-form minimiser of the contraction coefficient, evaluated on
    /// the agents' own eigenvector estimates.
    Theorem2,
    Fixed { alpha: f64 },
    /// `α_k = initial / k`.
    Diminishing { initial: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct EpochSchedule {
    pub half_period: u64,
    pub epochs: usize,
}

impl EpochSchedule {
    pub fn new(half_period: u64, epochs: usize, tau_max: u32) -> Result<Self> {
        if half_period <= tau_max as u64 {
            return Err(Error::Config(vec![format!(
                "epoch length {half_period} must exceed tau_max = {tau_max} so boundary reads land in the previous epoch"
            )]));
        }
        Ok(Self { half_period, epochs })
    }

    /// `τ_max` plus `40 / κ'` ticks, using the smallest effective gain.
    pub fn default_half_period(weights: &WeightMatrix, kappa: f64, tau_max: u32) -> u64 {
        let min_gain = (0..weights.node_count())
            .map(|i| kappa / weights.row_sum(i))
            .fold(f64::INFINITY, f64::min);
        tau_max as u64 + (SETTLE_TIME_CONSTANTS / min_gain - 1e-9).ceil() as u64
    }

    pub fn boundary_tick(&self, epoch: usize) -> u64 {
        epoch as u64 * self.half_period
    }

    pub fn total_ticks(&self) -> u64 {
        self.boundary_tick(self.epochs)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AsyncFrostConfig {
    pub kappa: f64,
    pub schedule: EpochSchedule,
    pub step: StepRule,
    pub early_stop: Option<f64>,
    pub settle_window: usize,
    pub settle_tol: f64,
    /// Record tracker states every `stride` ticks up to `until` (exclusive).
    pub tracker_trace: Option<TrackerTraceSpec>,
}

impl AsyncFrostConfig {
    pub fn new(kappa: f64, schedule: EpochSchedule, step: StepRule) -> Self {
        Self {
            kappa,
            schedule,
            step,
            early_stop: Some(DEFAULT_EARLY_STOP),
            settle_window: DEFAULT_SETTLE_WINDOW,
            settle_tol: DEFAULT_SETTLE_TOL,
            tracker_trace: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrackerTraceSpec {
    pub stride: u64,
    pub until: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrackerSample {
    pub tick: u64,
    pub agent: usize,
    pub r: Vec<f64>,
    pub s: f64,
}

/// Agent state at an epoch boundary.
#[derive(Debug, Clone, PartialEq)]
pub struct AsyncAgentState {
    pub x: DVector<f64>,
    pub e: DVector<f64>,
    pub p: DVector<f64>,
    /// Normalised gradient injected at the last boundary.
    pub injected: DVector<f64>,
    c_r: DVector<f64>,
    c_s: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub tick: u64,
    pub alpha: f64,
    pub x: Vec<Vec<f64>>,
    pub p: Vec<Vec<f64>>,
    pub e: Vec<Vec<f64>>,
    pub injected: Vec<Vec<f64>>,
    /// Whether every tracker met the settle criterion at this boundary.
    pub settled: bool,
}

impl EpochRecord {
    pub fn e_diag(&self) -> Vec<f64> {
        self.e.iter().enumerate().map(|(i, e)| e[i]).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AsyncRun {
    pub records: Vec<EpochRecord>,
    pub tracker_trace: Vec<TrackerSample>,
    pub ticks: u64,
    pub stopped_early: bool,
}

impl AsyncRun {
    pub fn final_estimates(&self) -> Vec<Vec<f64>> {
        self.records.last().map(|r| r.x.clone()).unwrap_or_default()
    }
}

/// Coefficients of the contraction bound `a₁ = 4 + A α² + B α`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Theorem2Step {
    pub alpha: f64,
    pub a1: f64,
    pub a_coef: f64,
    pub b_coef: f64,
}

fn bound_coefficients(l: &[f64], e_diag: &[f64], u: &[f64]) -> (f64, f64) {
    let n = l.len() as f64;
    let mut a = 0.0;
    let mut b = 0.0;
    for i in 0..l.len() {
        let w = u[i] / e_diag[i];
        a += l[i] * l[i] * w * w;
        b += u[i] * l[i] / e_diag[i];
    }
    (4.0 * n * a, -8.0 * b)
}

/// `a₁ = 4 + A α² + B α` for an arbitrary step.
pub fn a1_coefficient(l: &[f64], e_diag: &[f64], u: &[f64], alpha: f64) -> f64 {
    let (a, b) = bound_coefficients(l, e_diag, u);
    4.0 + a * alpha * alpha + b * alpha
}

/// Step size minimising `a₁`; fails when the minimum is not in `[0, 1)`.
pub fn step_size_theorem2(l: &[f64], e_diag: &[f64], u: &[f64]) -> Result<Theorem2Step> {
    if l.is_empty() || l.len() != e_diag.len() || l.len() != u.len() {
        return Err(Error::Config(vec!["step size needs one smoothness constant, estimate and weight per agent".into()]));
    }
    let ratio = smoothness_ratio(l);
    if !(ratio > 0.75) {
        return Err(Error::StepSizeCondition { ratio });
    }
    let (a_coef, b_coef) = bound_coefficients(l, e_diag, u);
    let alpha = -b_coef / (2.0 * a_coef);
    let a1 = 4.0 + a_coef * alpha * alpha + b_coef * alpha;
    if !(a1 > -1e-12 && a1 < 1.0) {
        let weighted: Vec<f64> = (0..l.len()).map(|i| l[i] * u[i] / e_diag[i]).collect();
        return Err(Error::StepSizeCondition {
            ratio: smoothness_ratio(&weighted),
        });
    }
    Ok(Theorem2Step { alpha, a1, a_coef, b_coef })
}

pub struct AsyncFrost<'a> {
    problem: &'a GlobalProblem,
    config: AsyncFrostConfig,
    tracker: DelayedTracker,
    agents: Vec<AsyncAgentState>,
    /// Boundary snapshots of `(x, e)` per epoch, read through delays.
    snapshots: Vec<Vec<(DVector<f64>, DVector<f64>)>>,
    epoch: usize,
    smoothness: Vec<f64>,
    trace: Vec<TrackerSample>,
}

impl<'a> AsyncFrost<'a> {
    pub fn new(
        weights: &WeightMatrix,
        problem: &'a GlobalProblem,
        delays: &DelayModel,
        config: AsyncFrostConfig,
        x0: Vec<DVector<f64>>,
    ) -> Result<Self> {
        let n = problem.agent_count();
        let dim = problem.dim();
        if weights.node_count() != n || x0.len() != n || x0.iter().any(|x| x.len() != dim) {
            return Err(Error::Config(vec![format!(
                "size mismatch: {n} agents of dimension {dim}, {} weight rows, {} initial states",
                weights.node_count(),
                x0.len()
            )]));
        }
        EpochSchedule::new(config.schedule.half_period, config.schedule.epochs, delays.tau_max())?;
        if let StepRule::Theorem2 = config.step {
            let ratio = smoothness_ratio(&problem.smoothness());
            if !(ratio > 0.75) {
                return Err(Error::StepSizeCondition { ratio });
            }
        }
        let clock = SquareWaveClock::with_half_period(config.schedule.half_period)?;
        let tracker = DelayedTracker::new(weights, config.kappa, delays, clock, dim)?
            .with_settle_criterion(config.settle_window, config.settle_tol);
        let agents = x0
            .into_iter()
            .enumerate()
            .map(|(i, x)| {
                let e = DVector::from_fn(n, |k, _| if k == i { 1.0 } else { 0.0 });
                AsyncAgentState {
                    x,
                    e,
                    p: DVector::zeros(dim),
                    injected: DVector::zeros(dim),
                    c_r: DVector::zeros(dim),
                    c_s: 0.0,
                }
            })
            .collect();
        Ok(Self {
            problem,
            smoothness: problem.smoothness(),
            config,
            tracker,
            agents,
            snapshots: Vec::new(),
            epoch: 0,
            trace: Vec::new(),
        })
    }

    pub fn agents(&self) -> &[AsyncAgentState] {
        &self.agents
    }

    pub fn epoch(&self) -> usize {
        self.epoch
    }

    pub fn tracker(&self) -> &DelayedTracker {
        &self.tracker
    }

    fn boundary_tick(&self) -> u64 {
        self.config.schedule.boundary_tick(self.epoch)
    }

    /// Snapshot index an agent sees when sampling at tick `sample`: the last
    /// epoch whose boundary update happened strictly before `sample`.
    fn snapshot_index(&self, sample: i64) -> usize {
        let e = self.config.schedule.half_period as i64;
        let k = (sample + e - 1).div_euclid(e) - 1;
        k.clamp(0, self.snapshots.len() as i64 - 1) as usize
    }

    fn delayed_mix(&mut self, pick: impl Fn(&(DVector<f64>, DVector<f64>)) -> &DVector<f64>) -> Vec<DVector<f64>> {
        let t = self.boundary_tick();
        let n = self.agents.len();
        let delays = self.tracker.delays_at(t).to_vec();
        (0..n)
            .map(|i| {
                let mut acc: Option<DVector<f64>> = None;
                for link in self.tracker.links(i) {
                    let k = self.snapshot_index(t as i64 - delays[link.edge] as i64);
                    let v = pick(&self.snapshots[k][link.source]);
                    match acc.as_mut() {
                        Some(a) => a.axpy(link.weight, v, 1.0),
                        None => acc = Some(v * link.weight),
                    }
                }
                acc.expect("every agent has an in-link")
            })
            .collect()
    }

    /// `e_i(k) = Σ_j a_ij e_j(k − 1)` from delayed snapshots.
    pub fn eigen_update(&mut self) -> Result<()> {
        let e = self.delayed_mix(|s| &s.1);
        for (i, (agent, ei)) in self.agents.iter_mut().zip(e).enumerate() {
            if !(ei[i] > DIVISOR_FLOOR) {
                return Err(Error::Numeric(format!(
                    "eigenvector estimate [e_{i}]_{i} = {:e} is not positive",
                    ei[i]
                )));
            }
            agent.e = ei;
        }
        Ok(())
    }

    /// Adds each agent's normalised tracker jump since the previous boundary to `p_i`.
    pub fn accumulate_average(&mut self) -> Result<()> {
        for (i, agent) in self.agents.iter_mut().enumerate() {
            let c_r = DVector::from_column_slice(self.tracker.r(i));
            let c_s = self.tracker.s(i);
            let shift = normalized_average(&(&c_r - &agent.c_r), c_s - agent.c_s)?;
            agent.p += shift;
            agent.c_r = c_r;
            agent.c_s = c_s;
        }
        Ok(())
    }

    pub fn step_size(&self) -> Result<f64> {
        let k = self.epoch.max(1) as f64;
        match &self.config.step {
            StepRule::Fixed { alpha } => Ok(*alpha),
            StepRule::Diminishing { initial } => Ok(initial / k),
            StepRule::Theorem2 => {
                let e_diag: Vec<f64> = self.agents.iter().enumerate().map(|(i, a)| a.e[i]).collect();
                Ok(step_size_theorem2(&self.smoothness, &e_diag, &e_diag)?.alpha)
            }
        }
    }

    /// `x_i(k) = Σ_j a_ij x_j(k − 1) − α_k p_i(k)` from delayed snapshots.
    pub fn descent_step(&mut self, alpha: f64) {
        let mixed = self.delayed_mix(|s| &s.0);
        for (agent, m) in self.agents.iter_mut().zip(mixed) {
            agent.x = m - &agent.p * alpha;
        }
    }

    /// Injects `∇f_i(x_i) / [e_i]_i` and advances the tracker through one epoch.
    pub fn inject_and_track(&mut self) {
        self.inject();
        self.track();
    }

    fn inject(&mut self) {
        for (i, agent) in self.agents.iter_mut().enumerate() {
            agent.injected = self.problem.objective(i).gradient(&agent.x) / agent.e[i];
            self.tracker.set_input(i, agent.injected.as_slice());
        }
    }

    fn track(&mut self) {
        for _ in 0..self.config.schedule.half_period {
            if let Some(trace) = self.config.tracker_trace {
                let t = self.tracker.tick();
                if t < trace.until && t % trace.stride.max(1) == 0 {
                    for i in 0..self.agents.len() {
                        self.trace.push(TrackerSample {
                            tick: t,
                            agent: i,
                            r: self.tracker.r(i).to_vec(),
                            s: self.tracker.s(i),
                        });
                    }
                }
            }
            self.tracker.step();
        }
    }

    fn record(&self, alpha: f64, settled: bool) -> EpochRecord {
        let col = |v: &DVector<f64>| v.as_slice().to_vec();
        EpochRecord {
            epoch: self.epoch,
            tick: self.boundary_tick(),
            alpha,
            x: self.agents.iter().map(|a| col(&a.x)).collect(),
            p: self.agents.iter().map(|a| col(&a.p)).collect(),
            e: self.agents.iter().map(|a| col(&a.e)).collect(),
            injected: self.agents.iter().map(|a| col(&a.injected)).collect(),
            settled,
        }
    }

    fn snapshot(&mut self) {
        self.snapshots
            .push(self.agents.iter().map(|a| (a.x.clone(), a.e.clone())).collect());
    }

    /// Runs the boundary pipeline for the next epoch and the tracker ticks after it.
    pub fn advance(&mut self) -> Result<EpochRecord> {
        let (alpha, settled) = if self.snapshots.is_empty() {
            (0.0, true)
        } else {
            self.epoch += 1;
            let settled = self.tracker.is_settled();
            self.eigen_update()?;
            self.accumulate_average()?;
            let alpha = self.step_size()?;
            self.descent_step(alpha);
            if !settled {
                log::debug!("epoch {} started before the trackers settled", self.epoch);
            }
            (alpha, settled)
        };
        self.snapshot();
        self.inject();
        let record = self.record(alpha, settled);
        if self.epoch < self.config.schedule.epochs {
            self.track();
        }
        Ok(record)
    }

    /// Runs all epochs, stopping early once the estimates stop moving.
    pub fn run(mut self) -> Result<AsyncRun> {
        let epochs = self.config.schedule.epochs;
        let mut records: Vec<EpochRecord> = Vec::with_capacity(epochs + 1);
        let mut stopped_early = false;
        if epochs > 0 {
            records.push(self.advance()?);
            while self.epoch < epochs {
                let record = self.advance()?;
                let prev = &records[records.len() - 1];
                let moved = record
                    .x
                    .iter()
                    .zip(&prev.x)
                    .flat_map(|(a, b)| a.iter().zip(b).map(|(a, b)| (a - b).abs()))
                    .fold(0.0, f64::max);
                records.push(record);
                if self.config.early_stop.is_some_and(|tol| moved < tol) {
                    stopped_early = true;
                    break;
                }
            }
        }
        Ok(AsyncRun {
            records,
            tracker_trace: self.trace,
            ticks: self.tracker.tick(),
            stopped_early,
        })
    }
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use approx::assert_abs_diff_eq;
    use nalgebra::DMatrix;

    use super::*;
    use crate::dac::equilibrium_shift_prediction;
    use crate::graph::{build_graph, build_weights, StochasticClass, Topology, WeightRule};
    use crate::objectives::{indexed_quadratics, quadratic, LocalObjective};

    fn cycle3() -> WeightMatrix {
        build_weights(
            &build_graph(3, &Topology::Cycle, 0).unwrap(),
            StochasticClass::RowStochastic,
            WeightRule::UniformInDegree,
        )
        .unwrap()
    }

    fn problem(shifts: &[f64]) -> GlobalProblem {
        GlobalProblem::new(
            shifts
                .iter()
                .map(|c| Arc::new(quadratic(vec![*c], 1.0).unwrap()) as LocalObjective)
                .collect(),
        )
        .unwrap()
    }

    fn config(half: u64, epochs: usize, tau_max: u32, step: StepRule) -> AsyncFrostConfig {
        let mut c = AsyncFrostConfig::new(0.01, EpochSchedule::new(half, epochs, tau_max).unwrap(), step);
        c.early_stop = None;
        c
    }

    #[test]
    fn step_rule_equal_smoothness() {
        let l = vec![2.0; 22];
        let u = vec![1.0 / 22.0; 22];
        let s = step_size_theorem2(&l, &u, &u).unwrap();
        assert_abs_diff_eq!(s.alpha, 1.0 / 44.0, epsilon = 1e-15);
        assert_abs_diff_eq!(s.a1, 0.0, epsilon = 1e-12);

        let s = step_size_theorem2(&[2.0, 2.0], &[0.5, 0.5], &[0.5, 0.5]).unwrap();
        assert_abs_diff_eq!(s.alpha, 0.25, epsilon = 1e-15);
        assert_abs_diff_eq!(s.a1, 0.0, epsilon = 1e-12);
    }

    #[test]
    fn step_rule_rejects_boundary_ratio() {
        let l = [1.0, 1.0, 1.0, 3.0];
        let u = [0.25; 4];
        assert!(matches!(step_size_theorem2(&l, &u, &u), Err(Error::StepSizeCondition { .. })));
        let s = step_size_theorem2(&[1.0, 1.0, 1.0, 2.0], &u, &u).unwrap();
        assert!(s.a1 > 0.0 && s.a1 < 1.0);
    }

    #[test]
    fn a1_is_minimised_by_step_rule() {
        let l = [1.0, 1.5, 2.0];
        let u = [0.2, 0.3, 0.5];
        let e = [0.25, 0.3, 0.45];
        let s = step_size_theorem2(&l, &e, &u).unwrap();
        assert_abs_diff_eq!(a1_coefficient(&l, &e, &u, s.alpha), s.a1, epsilon = 1e-14);
        for d in [-1e-3, 1e-3] {
            assert!(a1_coefficient(&l, &e, &u, s.alpha + d) > s.a1);
        }
    }

    #[test]
    fn schedule_requires_epoch_longer_than_delay() {
        assert!(EpochSchedule::new(10, 5, 10).is_err());
        assert!(EpochSchedule::new(11, 5, 10).is_ok());
        let w = cycle3();
        assert_eq!(EpochSchedule::default_half_period(&w, 0.01, 157), 4157);
    }

    #[test]
    fn single_agent_is_gradient_descent() {
        let w = WeightMatrix::from_matrix(DMatrix::from_element(1, 1, 1.0), StochasticClass::RowStochastic).unwrap();
        let p = problem(&[2.0]);
        let cfg = config(50, 3, 0, StepRule::Fixed { alpha: 0.1 });
        let mut run = AsyncFrost::new(&w, &p, &DelayModel::constant(0), cfg, vec![DVector::from_element(1, 1.0)]).unwrap();
        let mut x = 1.0;
        run.advance().unwrap();
        for _ in 0..3 {
            let rec = run.advance().unwrap();
            x -= 0.1 * 2.0 * (x + 2.0);
            assert_eq!(rec.e, vec![vec![1.0]]);
            assert_abs_diff_eq!(rec.x[0][0], x, epsilon = 1e-12);
        }
    }

    #[test]
    fn eigenvector_estimates_converge_under_delays() {
        let w = cycle3();
        let p = problem(&[1.0, 2.0, 3.0]);
        let model = DelayModel::uniform(0, 10, 3).unwrap();
        let cfg = config(60, 60, 10, StepRule::Fixed { alpha: 0.0 });
        let run = AsyncFrost::new(&w, &p, &model, cfg, vec![DVector::zeros(1); 3]).unwrap().run().unwrap();
        let last = run.records.last().unwrap();
        for e in &last.e {
            let err = e.iter().zip(w.fle().iter()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            assert!(err < 1e-8);
        }
    }

    #[test]
    fn zero_step_contracts_consensus_error() {
        let w = cycle3();
        let p = problem(&[1.0, 2.0, 3.0]);
        let x0 = vec![DVector::from_element(1, 3.0), DVector::from_element(1, -1.0), DVector::from_element(1, 0.0)];
        let cfg = config(30, 12, 5, StepRule::Fixed { alpha: 0.0 });
        let run = AsyncFrost::new(&w, &p, &DelayModel::uniform(0, 5, 1).unwrap(), cfg, x0).unwrap().run().unwrap();
        let u = w.fle();
        let err = |x: &Vec<Vec<f64>>| {
            let avg: f64 = x.iter().zip(u.iter()).map(|(x, u)| x[0] * u).sum();
            x.iter().map(|x| (x[0] - avg).abs()).fold(0.0, f64::max)
        };
        let mut prev = err(&run.records[0].x);
        for rec in &run.records[1..] {
            let e = err(&rec.x);
            assert!(e <= 0.5 * prev + 1e-15);
            prev = e;
        }
    }

    #[test]
    fn boundary_tracker_matches_shift_prediction() {
        let w = cycle3();
        let p = problem(&[1.0, 2.0, 3.0]);
        let cfg = config(4000, 1, 10, StepRule::Fixed { alpha: 0.0 });
        let mut run = AsyncFrost::new(&w, &p, &DelayModel::constant(10), cfg, vec![DVector::zeros(1); 3]).unwrap();
        run.advance().unwrap();
        let jumps: Vec<DVector<f64>> = (0..3).map(|i| DVector::from_element(1, 2.0 * (i as f64 + 1.0))).collect();
        let predicted = equilibrium_shift_prediction(w.fle(), &jumps, 0.01, 10.0)[0];
        for i in 0..3 {
            assert_abs_diff_eq!(run.tracker().r(i)[0], predicted, epsilon = 1e-3);
        }
    }

    #[test]
    fn accumulated_average_tracks_weighted_gradients() {
        let g = build_graph(5, &Topology::RandomStronglyConnected { edge_probability: Some(0.4) }, 4).unwrap();
        let w = build_weights(&g, StochasticClass::RowStochastic, WeightRule::UniformInDegree).unwrap();
        let p = problem(&[1.0, -2.0, 0.5, 3.0, 4.0]);
        let cfg = config(20_000, 8, 0, StepRule::Fixed { alpha: 0.05 });
        let run = AsyncFrost::new(&w, &p, &DelayModel::constant(0), cfg, vec![DVector::zeros(1); 5]).unwrap().run().unwrap();
        let u = w.fle();
        for pair in run.records.windows(2) {
            let expected: f64 = pair[0].injected.iter().zip(u.iter()).map(|(b, u)| b[0] * u).sum();
            for pi in &pair[1].p {
                assert_abs_diff_eq!(pi[0], expected, epsilon = 1e-9);
            }
        }
    }

    #[test]
    fn s1_converges_under_shared_delays() {
        let g = build_graph(22, &Topology::RandomStronglyConnected { edge_probability: Some(0.2) }, 1).unwrap();
        let w = build_weights(&g, StochasticClass::RowStochastic, WeightRule::UniformInDegree).unwrap();
        let p = GlobalProblem::new(indexed_quadratics(22, 1.0, &[]).unwrap()).unwrap();
        let mut model = DelayModel::uniform(0, 157, 7).unwrap();
        model.per_edge = false;
        let half = EpochSchedule::default_half_period(&w, 0.01, 157);
        let cfg = AsyncFrostConfig::new(0.01, EpochSchedule::new(half, 80, 157).unwrap(), StepRule::Theorem2);
        let run = AsyncFrost::new(&w, &p, &model, cfg, vec![DVector::zeros(1); 22]).unwrap().run().unwrap();
        for x in run.final_estimates() {
            assert_abs_diff_eq!(x[0], -11.5, epsilon = 1e-2);
        }
    }

    #[test]
    fn zero_epochs_yield_empty_run() {
        let w = cycle3();
        let p = problem(&[1.0, 2.0, 3.0]);
        let cfg = config(20, 0, 0, StepRule::Theorem2);
        let run = AsyncFrost::new(&w, &p, &DelayModel::constant(0), cfg, vec![DVector::zeros(1); 3]).unwrap().run().unwrap();
        assert!(run.records.is_empty());
        assert_eq!(run.ticks, 0);
    }

    #[test]
    fn step_rule_rejects_heterogeneous_smoothness() {
        let w = build_weights(
            &build_graph(4, &Topology::Cycle, 0).unwrap(),
            StochasticClass::RowStochastic,
            WeightRule::UniformInDegree,
        )
        .unwrap();
        let objs: Vec<LocalObjective> = [1.0, 1.0, 1.0, 3.0]
            .iter()
            .map(|a| Arc::new(crate::objectives::DiagonalQuadratic::new(vec![0.0], vec![*a / 2.0]).unwrap()) as LocalObjective)
            .collect();
        let p = GlobalProblem::new(objs).unwrap();
        let cfg = config(20, 3, 0, StepRule::Theorem2);
        assert!(matches!(
            AsyncFrost::new(&w, &p, &DelayModel::constant(0), cfg, vec![DVector::zeros(1); 4]),
            Err(Error::StepSizeCondition { .. })
        ));
    }
}
