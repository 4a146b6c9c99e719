//! Naive averaging: raw gradients relayed hop by hop over delayed links.

use std::cmp::Reverse;
use std::collections::BinaryHeap;

use serde::{Deserialize, Serialize};

use crate::delay::{sample_delay, DelayModel};
use crate::graph::{build_graph, DirectedGraph, Topology};

/// Flood completion times: `arrival[i][k]` is the first tick agent `i` holds agent `k`'s gradient.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FloodResult {
    pub arrival: Vec<Vec<u64>>,
}

impl FloodResult {
    /// Tick at which agent `i` holds every gradient.
    pub fn completion(&self, agent: usize) -> u64 {
        self.arrival[agent].iter().copied().max().unwrap_or(0)
    }

    pub fn worst_completion(&self) -> u64 {
        (0..self.arrival.len()).map(|i| self.completion(i)).max().unwrap_or(0)
    }

    /// `Σ_{k known} u_k b_k / Σ_{k known} u_k` at `tick`, or `None` before any gradient is held.
    pub fn partial_average(&self, agent: usize, tick: u64, u: &[f64], values: &[Vec<f64>]) -> Option<Vec<f64>> {
        let mut acc = vec![0.0; values[0].len()];
        let mut mass = 0.0;
        for (k, &t) in self.arrival[agent].iter().enumerate() {
            if t <= tick {
                mass += u[k];
                for (a, v) in acc.iter_mut().zip(&values[k]) {
                    *a += u[k] * v;
                }
            }
        }
        (mass > 0.0).then(|| acc.into_iter().map(|a| a / mass).collect())
    }
}

/// Earliest-arrival flood: a value relayed over `j → i` at tick `t` arrives at
/// `t + τ_ji(t)` and is forwarded on arrival.
pub fn flood(graph: &DirectedGraph, delays: &DelayModel) -> FloodResult {
    let n = graph.node_count();
    let tau_max = delays.tau_max() as u64;
    let out: Vec<Vec<usize>> = (0..n).map(|j| graph.out_neighbors(j)).collect();
    let arrival = (0..n)
        .map(|source| {
            let mut best = vec![u64::MAX; n];
            best[source] = 0;
            let mut heap = BinaryHeap::from([Reverse((0u64, source))]);
            while let Some(Reverse((t, j))) = heap.pop() {
                if t > best[j] {
                    continue;
                }
                for &i in &out[j] {
                    if i == j {
                        continue;
                    }
                    let arrive = (t..=t + tau_max)
                        .map(|send| send + sample_delay(delays, j, i, send) as u64)
                        .min()
                        .expect("nonempty range");
                    if arrive < best[i] {
                        best[i] = arrive;
                        heap.push(Reverse((arrive, i)));
                    }
                }
            }
            best
        })
        .collect::<Vec<_>>();
    // Transpose to receiver-major.
    FloodResult {
        arrival: (0..n).map(|i| (0..n).map(|k| arrival[k][i]).collect()).collect(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NaiveBaseline {
    /// Flood over the scenario graph with the sampled delays.
    pub sampled: FloodResult,
    /// Flood over the scenario graph with every delay at `τ_max`.
    pub graph_worst_case: u64,
    /// Flood over the `N`-node directed ring with every delay at `τ_max`:
    /// `N − 1` hops, the longest any strongly connected graph can need.
    pub worst_case: u64,
}

pub fn naive_averaging_baseline(graph: &DirectedGraph, delays: &DelayModel) -> NaiveBaseline {
    let slowest = DelayModel::constant(delays.tau_max());
    let ring = build_graph(graph.node_count(), &Topology::Cycle, 0).expect("ring is strongly connected");
    NaiveBaseline {
        sampled: flood(graph, delays),
        graph_worst_case: flood(graph, &slowest).worst_completion(),
        worst_case: flood(&ring, &slowest).worst_completion(),
    }
}
