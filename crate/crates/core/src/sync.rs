//! Synchronous (delay-free) baselines: DGD, gradient tracking, ADD-OPT and FROST.
//!
//! Every algorithm is a pure step `(state, weights, problem) → state` behind
//! the [`SyncOptimizer`] trait.

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{StochasticClass, WeightMatrix};
use crate::objectives::GlobalProblem;

/// Lower bound on eigenvector-estimate divisors before the step is declared failed.
pub const DIVISOR_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum StepSchedule {
    Constant { alpha: f64 },
    /// `α_t = initial / (t + 1)`.
    Diminishing { initial: f64 },
    /// Uncoordinated constant step per agent.
    PerAgent { alphas: Vec<f64> },
}

impl StepSchedule {
    pub fn alpha(&self, agent: usize, tick: u64) -> f64 {
        match self {
            StepSchedule::Constant { alpha } => *alpha,
            StepSchedule::Diminishing { initial } => initial / (tick as f64 + 1.0),
            StepSchedule::PerAgent { alphas } => alphas[agent],
        }
    }
}

pub trait SyncOptimizer: Sized {
    fn step(&self, weights: &WeightMatrix, problem: &GlobalProblem) -> Result<Self>;
    /// Each agent's current estimate of the optimum.
    fn estimates(&self) -> Vec<DVector<f64>>;
    fn tick(&self) -> u64;
}

/// `Σ_j a_ij v_j`, summed in ascending `j`.
pub(crate) fn mix(weights: &WeightMatrix, values: &[DVector<f64>], i: usize) -> DVector<f64> {
    let mut acc = DVector::zeros(values[0].len());
    for (j, v) in values.iter().enumerate() {
        let a = weights.get(i, j);
        if a != 0.0 {
            acc.axpy(a, v, 1.0);
        }
    }
    acc
}

fn mix_scalar(weights: &WeightMatrix, values: &[f64], i: usize) -> f64 {
    values.iter().enumerate().map(|(j, v)| weights.get(i, j) * v).sum()
}

fn gradients(problem: &GlobalProblem, x: &[DVector<f64>]) -> Vec<DVector<f64>> {
    x.iter()
        .enumerate()
        .map(|(i, xi)| problem.objective(i).gradient(xi))
        .collect()
}

fn check_shapes(problem: &GlobalProblem, weights: &WeightMatrix, x0: &[DVector<f64>]) -> Result<()> {
    let n = problem.agent_count();
    if weights.node_count() != n || x0.len() != n {
        return Err(Error::Config(vec![format!(
            "size mismatch: {n} objectives, {} weight rows, {} initial states",
            weights.node_count(),
            x0.len()
        )]));
    }
    if let Some(bad) = x0.iter().find(|x| x.len() != problem.dim()) {
        return Err(Error::Config(vec![format!(
            "initial state has dimension {}, expected {}",
            bad.len(),
            problem.dim()
        )]));
    }
    Ok(())
}

/// Warnings for running `algorithm` on weights of the wrong class; the run
/// proceeds but its convergence guarantee does not apply.
pub fn class_warnings(algorithm: &str, weights: &WeightMatrix) -> Vec<String> {
    let needed = match algorithm {
        "dgd" | "gradient_tracking" => StochasticClass::DoublyStochastic,
        "addopt" => StochasticClass::ColumnStochastic,
        _ => StochasticClass::RowStochastic,
    };
    let ok = match (needed, weights.class()) {
        (a, b) if a == b => true,
        (StochasticClass::RowStochastic | StochasticClass::ColumnStochastic, StochasticClass::DoublyStochastic) => {
            true
        }
        _ => false,
    };
    if ok {
        Vec::new()
    } else {
        vec![format!(
            "{algorithm} expects {needed:?} weights but got {:?}; convergence is not guaranteed",
            weights.class()
        )]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DgdState {
    pub x: Vec<DVector<f64>>,
    pub schedule: StepSchedule,
    pub tick: u64,
}

impl DgdState {
    pub fn new(problem: &GlobalProblem, weights: &WeightMatrix, x0: Vec<DVector<f64>>, schedule: StepSchedule) -> Result<Self> {
        check_shapes(problem, weights, &x0)?;
        Ok(Self { x: x0, schedule, tick: 0 })
    }
}

/// `x_i(t+1) = Σ_j a_ij x_j(t) − α_t ∇f_i(x_i(t))`.
pub fn dgd_step(state: &DgdState, weights: &WeightMatrix, problem: &GlobalProblem) -> DgdState {
    let grads = gradients(problem, &state.x);
    let x = (0..state.x.len())
        .map(|i| mix(weights, &state.x, i) - &grads[i] * state.schedule.alpha(i, state.tick))
        .collect();
    DgdState {
        x,
        schedule: state.schedule.clone(),
        tick: state.tick + 1,
    }
}

impl SyncOptimizer for DgdState {
    fn step(&self, weights: &WeightMatrix, problem: &GlobalProblem) -> Result<Self> {
        Ok(dgd_step(self, weights, problem))
    }

    fn estimates(&self) -> Vec<DVector<f64>> {
        self.x.clone()
    }

    fn tick(&self) -> u64 {
        self.tick
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GradientTrackingState {
    pub x: Vec<DVector<f64>>,
    /// Tracker of the network-average gradient, initialised to the local gradients.
    pub y: Vec<DVector<f64>>,
    pub alpha: f64,
    pub tick: u64,
}

impl GradientTrackingState {
    pub fn new(problem: &GlobalProblem, weights: &WeightMatrix, x0: Vec<DVector<f64>>, alpha: f64) -> Result<Self> {
        check_shapes(problem, weights, &x0)?;
        let y = gradients(problem, &x0);
        Ok(Self { x: x0, y, alpha, tick: 0 })
    }
}

pub fn gradient_tracking_step(
    state: &GradientTrackingState,
    weights: &WeightMatrix,
    problem: &GlobalProblem,
) -> GradientTrackingState {
    let n = state.x.len();
    let x: Vec<DVector<f64>> = (0..n)
        .map(|i| mix(weights, &state.x, i) - &state.y[i] * state.alpha)
        .collect();
    let y = (0..n)
        .map(|i| {
            let f = problem.objective(i);
            mix(weights, &state.y, i) + f.gradient(&x[i]) - f.gradient(&state.x[i])
        })
        .collect();
    GradientTrackingState {
        x,
        y,
        alpha: state.alpha,
        tick: state.tick + 1,
    }
}

impl SyncOptimizer for GradientTrackingState {
    fn step(&self, weights: &WeightMatrix, problem: &GlobalProblem) -> Result<Self> {
        Ok(gradient_tracking_step(self, weights, problem))
    }

    fn estimates(&self) -> Vec<DVector<f64>> {
        self.x.clone()
    }

    fn tick(&self) -> u64 {
        self.tick
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AddOptState {
    pub x: Vec<DVector<f64>>,
    /// Scalar right-eigenvector estimate, starts at 1.
    pub y: Vec<f64>,
    /// De-biased estimate `x_i / y_i`.
    pub z: Vec<DVector<f64>>,
    pub w: Vec<DVector<f64>>,
    pub alpha: f64,
    pub tick: u64,
}

impl AddOptState {
    pub fn new(problem: &GlobalProblem, weights: &WeightMatrix, x0: Vec<DVector<f64>>, alpha: f64) -> Result<Self> {
        check_shapes(problem, weights, &x0)?;
        let n = x0.len();
        let z = x0.clone();
        let w = gradients(problem, &z);
        Ok(Self {
            x: x0,
            y: vec![1.0; n],
            z,
            w,
            alpha,
            tick: 0,
        })
    }
}

pub fn addopt_step(state: &AddOptState, weights: &WeightMatrix, problem: &GlobalProblem) -> Result<AddOptState> {
    let n = state.x.len();
    let x: Vec<DVector<f64>> = (0..n)
        .map(|i| mix(weights, &state.x, i) - &state.w[i] * state.alpha)
        .collect();
    let y: Vec<f64> = (0..n).map(|i| mix_scalar(weights, &state.y, i)).collect();
    if let Some((i, v)) = y.iter().enumerate().find(|(_, v)| **v < DIVISOR_FLOOR) {
        return Err(Error::Numeric(format!(
            "ADD-OPT scaling y_{i} = {v:e} collapsed at tick {}; weights are not primitive",
            state.tick + 1
        )));
    }
    let z: Vec<DVector<f64>> = x.iter().zip(&y).map(|(x, y)| x / *y).collect();
    let w = (0..n)
        .map(|i| {
            let f = problem.objective(i);
            mix(weights, &state.w, i) + f.gradient(&z[i]) - f.gradient(&state.z[i])
        })
        .collect();
    Ok(AddOptState {
        x,
        y,
        z,
        w,
        alpha: state.alpha,
        tick: state.tick + 1,
    })
}

impl SyncOptimizer for AddOptState {
    fn step(&self, weights: &WeightMatrix, problem: &GlobalProblem) -> Result<Self> {
        addopt_step(self, weights, problem)
    }

    fn estimates(&self) -> Vec<DVector<f64>> {
        self.z.clone()
    }

    fn tick(&self) -> u64 {
        self.tick
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FrostState {
    pub x: Vec<DVector<f64>>,
    /// Per-agent estimate of the first left eigenvector, `y_i(0) = e_i`.
    pub y: Vec<DVector<f64>>,
    /// Tracker of the eigenvector-normalised gradients, `z_i(0) = ∇f_i(x_i(0))`.
    pub z: Vec<DVector<f64>>,
    pub schedule: StepSchedule,
    pub tick: u64,
}

impl FrostState {
    pub fn new(problem: &GlobalProblem, weights: &WeightMatrix, x0: Vec<DVector<f64>>, schedule: StepSchedule) -> Result<Self> {
        check_shapes(problem, weights, &x0)?;
        let n = x0.len();
        let y = (0..n).map(|i| DVector::from_fn(n, |k, _| if k == i { 1.0 } else { 0.0 })).collect();
        let z = gradients(problem, &x0);
        Ok(Self {
            x: x0,
            y,
            z,
            schedule,
            tick: 0,
        })
    }

    /// `∇f_i(x_i) / [y_i]_i` for every agent.
    pub fn normalized_gradients(&self, problem: &GlobalProblem) -> Vec<DVector<f64>> {
        self.x
            .iter()
            .enumerate()
            .map(|(i, x)| problem.objective(i).gradient(x) / self.y[i][i])
            .collect()
    }
}

pub fn frost_step(state: &FrostState, weights: &WeightMatrix, problem: &GlobalProblem) -> Result<FrostState> {
    let n = state.x.len();
    let y: Vec<DVector<f64>> = (0..n).map(|i| mix(weights, &state.y, i)).collect();
    if let Some(i) = (0..n).find(|&i| !(y[i][i] > DIVISOR_FLOOR)) {
        return Err(Error::Numeric(format!(
            "FROST eigenvector estimate [y_{i}]_{i} = {:e} is not positive at tick {}",
            y[i][i],
            state.tick + 1
        )));
    }
    let x: Vec<DVector<f64>> = (0..n)
        .map(|i| mix(weights, &state.x, i) - &state.z[i] * state.schedule.alpha(i, state.tick))
        .collect();
    let z = (0..n)
        .map(|i| {
            let f = problem.objective(i);
            mix(weights, &state.z, i) + f.gradient(&x[i]) / y[i][i] - f.gradient(&state.x[i]) / state.y[i][i]
        })
        .collect();
    Ok(FrostState {
        x,
        y,
        z,
        schedule: state.schedule.clone(),
        tick: state.tick + 1,
    })
}

impl SyncOptimizer for FrostState {
    fn step(&self, weights: &WeightMatrix, problem: &GlobalProblem) -> Result<Self> {
        frost_step(self, weights, problem)
    }

    fn estimates(&self) -> Vec<DVector<f64>> {
        self.x.clone()
    }

    fn tick(&self) -> u64 {
        self.tick
    }
}

/// Delay-free recursion the asynchronous method reduces to with exact averaging:
/// `x(k) = A x(k−1) − α_k Σ_j u_j ∇f_j(x_j(k−1)) / [e_j(k−1)]_j` with `e(k) = A e(k−1)`, `e(0) = I`.
///
/// `alphas[k − 1]` is the step producing epoch `k`; returns `x(0..=alphas.len())`.
pub fn weighted_gradient_reference(
    weights: &WeightMatrix,
    problem: &GlobalProblem,
    x0: Vec<DVector<f64>>,
    alphas: &[f64],
) -> Result<Vec<Vec<DVector<f64>>>> {
    check_shapes(problem, weights, &x0)?;
    let n = x0.len();
    let u = weights.fle();
    let mut e: Vec<DVector<f64>> = (0..n).map(|i| DVector::from_fn(n, |k, _| if k == i { 1.0 } else { 0.0 })).collect();
    let mut out = vec![x0];
    for alpha in alphas {
        let x = out.last().expect("nonempty");
        let mut avg = DVector::zeros(problem.dim());
        for j in 0..n {
            avg.axpy(u[j] / e[j][j], &problem.objective(j).gradient(&x[j]), 1.0);
        }
        let next = (0..n).map(|i| mix(weights, x, i) - &avg * *alpha).collect();
        e = (0..n).map(|i| mix(weights, &e, i)).collect();
        out.push(next);
    }
    Ok(out)
}
