#![allow(dead_code)]

use std::path::PathBuf;
use std::sync::Arc;

use delay_frost::graph::{build_graph, build_weights, StochasticClass, Topology, WeightMatrix, WeightRule};
use delay_frost::objectives::{DiagonalQuadratic, GlobalProblem, LocalObjective};
use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

pub fn scenario(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../scenarios").join(format!("{name}.toml"))
}

pub fn shipped_scenarios() -> Vec<PathBuf> {
    let dir = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../scenarios");
    let mut out: Vec<PathBuf> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|e| e == "toml"))
        .collect();
    out.sort();
    out
}

/// Left Perron vector by plain power iteration on `Aᵀ`.
pub fn power_iteration_fle(a: &DMatrix<f64>) -> DVector<f64> {
    let n = a.nrows();
    let at = a.transpose();
    let mut v = DVector::from_element(n, 1.0 / n as f64);
    for _ in 0..200_000 {
        let next = &at * &v;
        let next = &next / next.sum();
        let done = (&next - &v).amax() < 1e-16;
        v = next;
        if done {
            break;
        }
    }
    v
}

/// Spectral radius of `A − 1uᵀ` from the complex eigenvalues.
pub fn eigen_contraction(a: &DMatrix<f64>, u: &DVector<f64>) -> f64 {
    let n = a.nrows();
    let m = a - DMatrix::from_element(n, 1, 1.0) * u.transpose();
    m.complex_eigenvalues().iter().map(|z| z.norm()).fold(0.0, f64::max)
}

pub fn random_quadratic(rng: &mut ChaCha8Rng, dim: usize) -> DiagonalQuadratic {
    let shift = (0..dim).map(|_| rng.gen_range(-5.0..5.0)).collect();
    let curvature = (0..dim).map(|_| rng.gen_range(0.5..2.0)).collect();
    DiagonalQuadratic::new(shift, curvature).unwrap()
}

pub fn random_problem(rng: &mut ChaCha8Rng, agents: usize, dim: usize) -> GlobalProblem {
    let objectives: Vec<LocalObjective> = (0..agents).map(|_| Arc::new(random_quadratic(rng, dim)) as LocalObjective).collect();
    GlobalProblem::new(objectives).unwrap()
}

pub fn random_row_weights(rng: &mut ChaCha8Rng, agents: usize) -> WeightMatrix {
    let g = build_graph(agents, &Topology::RandomStronglyConnected { edge_probability: Some(0.5) }, rng.gen()).unwrap();
    build_weights(&g, StochasticClass::RowStochastic, WeightRule::UniformInDegree).unwrap()
}

/// `c I + (1 − c) P` for a cyclic shift `P`: doubly stochastic and primitive.
pub fn random_doubly_weights(rng: &mut ChaCha8Rng, agents: usize) -> WeightMatrix {
    let c = rng.gen_range(0.2..0.8);
    let m = DMatrix::from_fn(agents, agents, |i, j| {
        let mut v = 0.0;
        if i == j {
            v += c;
        }
        if (i + 1) % agents == j {
            v += 1.0 - c;
        }
        v
    });
    WeightMatrix::from_matrix(m, StochasticClass::DoublyStochastic).unwrap()
}

pub fn random_points(rng: &mut ChaCha8Rng, agents: usize, dim: usize) -> Vec<DVector<f64>> {
    (0..agents).map(|_| DVector::from_fn(dim, |_, _| rng.gen_range(-3.0..3.0))).collect()
}
