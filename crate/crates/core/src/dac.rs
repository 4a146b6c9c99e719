//! Dynamic average consensus over delayed links.
//!
//! Each agent runs two coupled trackers from the same messages: `r` follows
//! the injected signal and `s` follows a square-wave reference. Delays shift
//! both equilibria by the same factor, so the ratio of their jumps recovers
//! the eigenvector-weighted average of the injected increments.

use std::collections::VecDeque;

use nalgebra::DVector;

use crate::delay::{DelayModel, DelaySampler, HistoryBuffer};
use crate::error::{Error, Result};
use crate::graph::WeightMatrix;

/// Smallest reference jump accepted by [`normalized_average`].
pub const MIN_REFERENCE_JUMP: f64 = 1e-9;
pub const DEFAULT_SETTLE_TOL: f64 = 1e-9;
pub const DEFAULT_SETTLE_WINDOW: usize = 10;

/// Square wave `g(t)`: 1 on the first half of each period, 0 on the second.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SquareWaveClock {
    period: u64,
}

impl SquareWaveClock {
    pub fn new(period: u64) -> Result<Self> {
        if period < 2 || period % 2 != 0 {
            return Err(Error::Config(vec![format!("square-wave period must be even and at least 2, got {period}")]));
        }
        Ok(Self { period })
    }

    pub fn with_half_period(half: u64) -> Result<Self> {
        Self::new(2 * half)
    }

    pub fn period(&self) -> u64 {
        self.period
    }

    pub fn half_period(&self) -> u64 {
        self.period / 2
    }

    pub fn value(&self, tick: i64) -> f64 {
        if tick.rem_euclid(self.period as i64) < self.half_period() as i64 {
            1.0
        } else {
            0.0
        }
    }

    /// `g(t) − g(t − 1)`, nonzero only at multiples of the half period.
    pub fn edge(&self, tick: u64) -> f64 {
        self.value(tick as i64) - self.value(tick as i64 - 1)
    }
}

fn gains(weights: &WeightMatrix, kappa: f64) -> Result<Vec<f64>> {
    if !(kappa > 0.0 && kappa.is_finite()) {
        return Err(Error::Config(vec![format!("consensus gain kappa must be positive, got {kappa}")]));
    }
    (0..weights.node_count())
        .map(|i| {
            let g = kappa / weights.row_sum(i);
            if g > 1.0 {
                Err(Error::Config(vec![format!(
                    "effective gain kappa / d_{i}{i} = {g} exceeds 1 for agent {i}"
                )]))
            } else {
                Ok(g)
            }
        })
        .collect()
}

/// One delay-free consensus step `x_i − κ'_i Σ_j a_ij (x_i − x_j)` with `κ'_i = κ / d_ii`.
pub fn consensus_step(weights: &WeightMatrix, kappa: f64, states: &[DVector<f64>]) -> Result<Vec<DVector<f64>>> {
    let gains = gains(weights, kappa)?;
    Ok(states
        .iter()
        .enumerate()
        .map(|(i, xi)| {
            let mut acc = DVector::<f64>::zeros(xi.len());
            for (j, a) in weights.row_support(i) {
                for k in 0..xi.len() {
                    acc[k] += a * (xi[k] - states[j][k]);
                }
            }
            DVector::from_fn(xi.len(), |k, _| xi[k] - gains[i] * acc[k])
        })
        .collect())
}

/// Predicted equilibrium shift `Σ_i u_i Δb_i / (1 + κ τ̄)` after a step change `Δb` in the inputs.
pub fn equilibrium_shift_prediction(u: &DVector<f64>, jumps: &[DVector<f64>], kappa: f64, mean_tau: f64) -> DVector<f64> {
    let mut acc = DVector::zeros(jumps[0].len());
    for (ui, d) in u.iter().zip(jumps) {
        acc.axpy(*ui, d, 1.0);
    }
    acc / (1.0 + kappa * mean_tau)
}

/// Ratio `Δc_r / |Δc_s|` of tracker jumps across one half period.
pub fn normalized_average(r_jump: &DVector<f64>, s_jump: f64) -> Result<DVector<f64>> {
    if !(s_jump.abs() >= MIN_REFERENCE_JUMP) {
        return Err(Error::Numeric(format!(
            "reference tracker jump {s_jump:e} is below {MIN_REFERENCE_JUMP:e}; the settle window is too short"
        )));
    }
    Ok(r_jump / s_jump.abs())
}

/// In-link of an agent: read `source`'s state through sampler edge `edge`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Link {
    pub source: usize,
    pub weight: f64,
    pub edge: usize,
}

/// Network of `(r, s)` trackers exchanging states over delayed links.
///
/// The self-loop is treated as a link too, so an agent sees its own state
/// with the same sampled lag as its neighbours'.
#[derive(Debug, Clone)]
pub struct DelayedTracker {
    dim: usize,
    width: usize,
    gains: Vec<f64>,
    links: Vec<Vec<Link>>,
    sampler: DelaySampler,
    history: Vec<HistoryBuffer>,
    state: Vec<f64>,
    next: Vec<f64>,
    input: Vec<f64>,
    prev_input: Vec<f64>,
    clock: SquareWaveClock,
    tick: u64,
    changes: VecDeque<f64>,
    settle_window: usize,
    settle_tol: f64,
}

impl DelayedTracker {
    pub fn new(weights: &WeightMatrix, kappa: f64, delays: &DelayModel, clock: SquareWaveClock, dim: usize) -> Result<Self> {
        let n = weights.node_count();
        let gains = gains(weights, kappa)?;
        let width = dim + 1;
        let mut edges = Vec::new();
        let links = (0..n)
            .map(|i| {
                weights
                    .row_support(i)
                    .into_iter()
                    .map(|(j, a)| {
                        edges.push((j, i));
                        Link {
                            source: j,
                            weight: a,
                            edge: edges.len() - 1,
                        }
                    })
                    .collect()
            })
            .collect();
        let tau_max = delays.tau_max();
        let mut history: Vec<HistoryBuffer> = (0..n).map(|_| HistoryBuffer::new(tau_max, vec![0.0; width])).collect();
        let state = vec![0.0; n * width];
        for h in &mut history {
            h.publish(0, &vec![0.0; width])?;
        }
        Ok(Self {
            dim,
            width,
            gains,
            links,
            sampler: DelaySampler::new(delays, edges),
            history,
            next: state.clone(),
            state,
            input: vec![0.0; n * dim],
            prev_input: vec![0.0; n * dim],
            clock,
            tick: 0,
            changes: VecDeque::with_capacity(DEFAULT_SETTLE_WINDOW),
            settle_window: DEFAULT_SETTLE_WINDOW,
            settle_tol: DEFAULT_SETTLE_TOL,
        })
    }

    pub fn with_settle_criterion(mut self, window: usize, tol: f64) -> Self {
        self.settle_window = window.max(1);
        self.settle_tol = tol;
        self
    }

    pub fn agent_count(&self) -> usize {
        self.gains.len()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn tick(&self) -> u64 {
        self.tick
    }

    pub fn clock(&self) -> SquareWaveClock {
        self.clock
    }

    pub fn links(&self, agent: usize) -> &[Link] {
        &self.links[agent]
    }

    /// Delays on every link at `tick`, indexed by [`Link::edge`].
    pub fn delays_at(&mut self, tick: u64) -> &[u32] {
        self.sampler.delays_at(tick)
    }

    pub fn r(&self, agent: usize) -> &[f64] {
        let start = agent * self.width;
        &self.state[start..start + self.dim]
    }

    pub fn s(&self, agent: usize) -> f64 {
        self.state[agent * self.width + self.dim]
    }

    /// Sets the input `b_i` held from the current tick onward.
    pub fn set_input(&mut self, agent: usize, value: &[f64]) {
        let start = agent * self.dim;
        self.input[start..start + self.dim].copy_from_slice(value);
    }

    /// Whether the summed max-norm change over the settle window is below tolerance.
    pub fn is_settled(&self) -> bool {
        self.changes.len() >= self.settle_window && self.changes.iter().sum::<f64>() < self.settle_tol
    }

    pub fn step(&mut self) {
        let t = self.tick;
        let w = self.width;
        let dim = self.dim;
        let dg = self.clock.edge(t);
        let delays = self.sampler.delays_at(t);
        let mut max_change = 0.0f64;
        let mut acc = vec![0.0; w];
        for (i, links) in self.links.iter().enumerate() {
            let cur = &self.state[i * w..(i + 1) * w];
            acc.fill(0.0);
            for link in links {
                let seen = self.history[link.source].read(t, delays[link.edge]);
                for k in 0..w {
                    acc[k] += link.weight * (cur[k] - seen[k]);
                }
            }
            let out = &mut self.next[i * w..(i + 1) * w];
            for k in 0..w {
                let impulse = if k < dim {
                    self.input[i * dim + k] - self.prev_input[i * dim + k]
                } else {
                    dg
                };
                out[k] = (cur[k] - self.gains[i] * acc[k]) + impulse;
                max_change = max_change.max((out[k] - cur[k]).abs());
            }
        }
        std::mem::swap(&mut self.state, &mut self.next);
        self.tick = t + 1;
        for (i, h) in self.history.iter_mut().enumerate() {
            h.write(t + 1, &self.state[i * w..(i + 1) * w]);
        }
        self.prev_input.copy_from_slice(&self.input);
        if self.changes.len() == self.settle_window {
            self.changes.pop_front();
        }
        self.changes.push_back(max_change);
    }

    pub fn run(&mut self, ticks: u64) {
        for _ in 0..ticks {
            self.step();
        }
    }
}
