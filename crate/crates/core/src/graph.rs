//! Directed communication graphs and their stochastic weight matrices.
//!
//! Edges are stored as ordered pairs `(from, to)`: `from` sends to `to`, so
//! `from` is an in-neighbour of `to` and the weight lives at `a[to][from]`.
//! Self-loops are a construction flag rather than stored edges; every weight
//! matrix built here carries a positive diagonal, which makes the matrix
//! primitive whenever the graph is strongly connected.

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::fmt::Write as _;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tolerance on row/column sums for the stochasticity classes.
pub const STOCHASTIC_TOL: f64 = 1e-12;
/// Successive-iterate tolerance (max-norm) of the left-eigenvector power iteration.
pub const FLE_TOL: f64 = 1e-12;
pub const FLE_MAX_ITERATIONS: usize = 1_000_000;

const MAX_RANDOM_ATTEMPTS: usize = 10_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Edge {
    pub from: usize,
    pub to: usize,
}

impl Edge {
    pub fn new(from: usize, to: usize) -> Self {
        Self { from, to }
    }
}

/// One line of an edge list: `from to [weight]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EdgeSpec {
    pub from: usize,
    pub to: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub weight: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Topology {
    /// Directed ring `0 → 1 → … → N−1 → 0`.
    Cycle,
    /// Directed Erdős–Rényi graph, resampled until strongly connected.
    /// Defaults to edge probability `min(1, 2 ln N / N)`.
    RandomStronglyConnected { edge_probability: Option<f64> },
    FromEdgeList(Vec<EdgeSpec>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "GraphDocument", into = "GraphDocument")]
pub struct DirectedGraph {
    node_count: usize,
    edges: BTreeSet<Edge>,
    self_loops: bool,
    /// Explicit positive weights from an edge list; may contain `(i, i)` entries.
    explicit_weights: BTreeMap<Edge, f64>,
}

impl DirectedGraph {
    /// Creates a graph after validating indices and rejecting stored self-loops.
    pub fn new(node_count: usize, edges: impl IntoIterator<Item = Edge>) -> Result<Self> {
        if node_count == 0 {
            return Err(Error::InvalidGraph("node_count must be at least 1".into()));
        }
        let mut set = BTreeSet::new();
        for e in edges {
            if e.from >= node_count || e.to >= node_count {
                return Err(Error::InvalidGraph(format!(
                    "edge {} -> {} out of range for {node_count} nodes",
                    e.from, e.to
                )));
            }
            if e.from == e.to {
                return Err(Error::InvalidGraph(format!(
                    "self-loop {0} -> {0} must not be stored as an edge",
                    e.from
                )));
            }
            set.insert(e);
        }
        Ok(Self {
            node_count,
            edges: set,
            self_loops: true,
            explicit_weights: BTreeMap::new(),
        })
    }

    pub fn node_count(&self) -> usize {
        self.node_count
    }

    pub fn edges(&self) -> impl Iterator<Item = Edge> + '_ {
        self.edges.iter().copied()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn has_edge(&self, from: usize, to: usize) -> bool {
        self.edges.contains(&Edge::new(from, to))
    }

    pub fn self_loops(&self) -> bool {
        self.self_loops
    }

    pub fn explicit_weights(&self) -> &BTreeMap<Edge, f64> {
        &self.explicit_weights
    }

    /// In-neighbours `N_i⁻`: nodes that send to `node`.
    pub fn in_neighbors(&self, node: usize) -> Vec<usize> {
        self.edges
            .iter()
            .filter(|e| e.to == node)
            .map(|e| e.from)
            .collect()
    }

    /// Out-neighbours `N_i⁺`: nodes that `node` sends to.
    pub fn out_neighbors(&self, node: usize) -> Vec<usize> {
        self.edges
            .range(Edge::new(node, 0)..Edge::new(node + 1, 0))
            .map(|e| e.to)
            .collect()
    }

    pub fn in_degree(&self, node: usize) -> usize {
        self.edges.iter().filter(|e| e.to == node).count()
    }

    pub fn out_degree(&self, node: usize) -> usize {
        self.out_neighbors(node).len()
    }

    /// Longest shortest-path hop count over all ordered pairs, or `None` if
    /// some node cannot reach another.
    pub fn diameter(&self) -> Option<usize> {
        let adjacency = self.out_adjacency();
        let mut diameter = 0;
        for source in 0..self.node_count {
            let dist = bfs_distances(&adjacency, source);
            for d in dist {
                diameter = diameter.max(d?);
            }
        }
        Some(diameter)
    }

    fn out_adjacency(&self) -> Vec<Vec<usize>> {
        let mut adj = vec![Vec::new(); self.node_count];
        for e in &self.edges {
            adj[e.from].push(e.to);
        }
        adj
    }

    fn in_adjacency(&self) -> Vec<Vec<usize>> {
        let mut adj = vec![Vec::new(); self.node_count];
        for e in &self.edges {
            adj[e.to].push(e.from);
        }
        adj
    }

    /// Text edge list, one `from to [weight]` line per edge, 0-indexed.
    pub fn to_edge_list(&self) -> String {
        let mut out = String::new();
        for e in &self.edges {
            match self.explicit_weights.get(e) {
                Some(w) => writeln!(out, "{} {} {}", e.from, e.to, w),
                None => writeln!(out, "{} {}", e.from, e.to),
            }
            .expect("writing to a String cannot fail");
        }
        for (e, w) in &self.explicit_weights {
            if e.from == e.to {
                writeln!(out, "{} {} {}", e.from, e.to, w).expect("writing to a String cannot fail");
            }
        }
        out
    }
}

fn bfs_distances(adjacency: &[Vec<usize>], source: usize) -> Vec<Option<usize>> {
    let mut dist = vec![None; adjacency.len()];
    dist[source] = Some(0);
    let mut queue = VecDeque::from([source]);
    while let Some(v) = queue.pop_front() {
        let next = dist[v].unwrap() + 1;
        for &w in &adjacency[v] {
            if dist[w].is_none() {
                dist[w] = Some(next);
                queue.push_back(w);
            }
        }
    }
    dist
}

/// True iff every node reaches every other node along directed edges.
///
/// Checks forward and reverse reachability from node 0.
pub fn is_strongly_connected(g: &DirectedGraph) -> bool {
    let forward = bfs_distances(&g.out_adjacency(), 0);
    let backward = bfs_distances(&g.in_adjacency(), 0);
    forward.iter().chain(backward.iter()).all(Option::is_some)
}

fn unreachable_report(g: &DirectedGraph) -> String {
    let forward = bfs_distances(&g.out_adjacency(), 0);
    let backward = bfs_distances(&g.in_adjacency(), 0);
    let not_reached: Vec<usize> = (0..g.node_count).filter(|&i| forward[i].is_none()).collect();
    let not_reaching: Vec<usize> = (0..g.node_count).filter(|&i| backward[i].is_none()).collect();
    format!(
        "{} nodes; unreachable from node 0: {:?}; cannot reach node 0: {:?}",
        g.node_count, not_reached, not_reaching
    )
}

/// Parses the `from to [weight]` edge-list format. Blank lines and `#` comments are skipped.
pub fn parse_edge_list(text: &str) -> Result<Vec<EdgeSpec>> {
    let mut specs = Vec::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        let bad = |what: &str| Error::InvalidGraph(format!("edge list line {}: {what}: {raw:?}", lineno + 1));
        if !(2..=3).contains(&fields.len()) {
            return Err(bad("expected `from to [weight]`"));
        }
        let from = fields[0].parse().map_err(|_| bad("bad source index"))?;
        let to = fields[1].parse().map_err(|_| bad("bad target index"))?;
        let weight = match fields.get(2) {
            Some(w) => {
                let w: f64 = w.parse().map_err(|_| bad("bad weight"))?;
                if !(w > 0.0 && w.is_finite()) {
                    return Err(bad("weight must be positive and finite"));
                }
                Some(w)
            }
            None => None,
        };
        specs.push(EdgeSpec { from, to, weight });
    }
    Ok(specs)
}

/// Builds a strongly connected communication graph.
///
/// Random graphs are deterministic for a fixed `seed`. An explicit edge list
/// that is not strongly connected is rejected.
pub fn build_graph(node_count: usize, topology: &Topology, seed: u64) -> Result<DirectedGraph> {
    if node_count == 0 {
        return Err(Error::InvalidGraph("node_count must be at least 1".into()));
    }
    let graph = match topology {
        Topology::Cycle => {
            let edges = (0..node_count)
                .filter(|_| node_count > 1)
                .map(|i| Edge::new(i, (i + 1) % node_count));
            DirectedGraph::new(node_count, edges)?
        }
        Topology::RandomStronglyConnected { edge_probability } => {
            let p = edge_probability.unwrap_or_else(|| default_edge_probability(node_count));
            if !(p > 0.0 && p <= 1.0) {
                return Err(Error::InvalidGraph(format!("edge probability {p} not in (0, 1]")));
            }
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut attempt = 0;
            loop {
                let mut edges = Vec::new();
                for from in 0..node_count {
                    for to in 0..node_count {
                        if from != to && rng.gen::<f64>() < p {
                            edges.push(Edge::new(from, to));
                        }
                    }
                }
                let g = DirectedGraph::new(node_count, edges)?;
                if is_strongly_connected(&g) {
                    break g;
                }
                attempt += 1;
                if attempt >= MAX_RANDOM_ATTEMPTS {
                    return Err(Error::NotStronglyConnected(format!(
                        "no strongly connected sample in {MAX_RANDOM_ATTEMPTS} attempts at p = {p}"
                    )));
                }
            }
        }
        Topology::FromEdgeList(specs) => {
            let mut edges = Vec::new();
            let mut weights = BTreeMap::new();
            for s in specs {
                if s.from >= node_count || s.to >= node_count {
                    return Err(Error::InvalidGraph(format!(
                        "edge {} -> {} out of range for {node_count} nodes",
                        s.from, s.to
                    )));
                }
                if s.from != s.to {
                    edges.push(Edge::new(s.from, s.to));
                }
                if let Some(w) = s.weight {
                    weights.insert(Edge::new(s.from, s.to), w);
                }
            }
            let mut g = DirectedGraph::new(node_count, edges)?;
            g.explicit_weights = weights;
            g
        }
    };
    if !is_strongly_connected(&graph) {
        return Err(Error::NotStronglyConnected(unreachable_report(&graph)));
    }
    Ok(graph)
}

pub fn default_edge_probability(node_count: usize) -> f64 {
    if node_count < 2 {
        return 1.0;
    }
    let n = node_count as f64;
    (2.0 * n.ln() / n).min(1.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StochasticClass {
    RowStochastic,
    ColumnStochastic,
    DoublyStochastic,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WeightRule {
    /// `a_ij = 1 / (d_i⁻ + 1)` over in-neighbours and self.
    UniformInDegree,
    /// `a_ij = 1 / (d_j⁺ + 1)` over out-edges and self.
    UniformOutDegree,
    /// Edge-list weights (self weight defaults to 1), normalised to the class.
    Explicit,
}

/// Nonnegative weight matrix `a_ij` (row `i` receives from column `j`) with
/// its stochasticity class and cached first left eigenvector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "WeightDocument", into = "WeightDocument")]
pub struct WeightMatrix {
    matrix: DMatrix<f64>,
    class: StochasticClass,
    fle: DVector<f64>,
}

impl WeightMatrix {
    /// Wraps an explicit matrix after validating its class and computing the
    /// first left eigenvector.
    pub fn from_matrix(matrix: DMatrix<f64>, class: StochasticClass) -> Result<Self> {
        if !matrix.is_square() || matrix.nrows() == 0 {
            return Err(Error::Weights(format!(
                "matrix must be square and non-empty, got {}x{}",
                matrix.nrows(),
                matrix.ncols()
            )));
        }
        if let Some(v) = matrix.iter().find(|v| !(v.is_finite() && **v >= 0.0)) {
            return Err(Error::Weights(format!("entries must be finite and nonnegative, found {v}")));
        }
        check_class(&matrix, class)?;
        let fle = power_iteration_fle(&matrix)?;
        Ok(Self { matrix, class, fle })
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn class(&self) -> StochasticClass {
        self.class
    }

    pub fn node_count(&self) -> usize {
        self.matrix.nrows()
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.matrix[(i, j)]
    }

    /// Cached first left eigenvector `u` (entries sum to 1).
    pub fn fle(&self) -> &DVector<f64> {
        &self.fle
    }

    /// Positive entries of row `i` as `(j, a_ij)` pairs, self included.
    pub fn row_support(&self, i: usize) -> Vec<(usize, f64)> {
        (0..self.node_count())
            .filter_map(|j| {
                let a = self.matrix[(i, j)];
                (a > 0.0).then_some((j, a))
            })
            .collect()
    }

    pub fn row_sum(&self, i: usize) -> f64 {
        self.matrix.row(i).sum()
    }
}

fn check_class(matrix: &DMatrix<f64>, class: StochasticClass) -> Result<()> {
    let rows = matches!(class, StochasticClass::RowStochastic | StochasticClass::DoublyStochastic);
    let cols = matches!(class, StochasticClass::ColumnStochastic | StochasticClass::DoublyStochastic);
    if rows {
        for (i, row) in matrix.row_iter().enumerate() {
            let s = row.sum();
            if (s - 1.0).abs() > STOCHASTIC_TOL {
                return Err(Error::Weights(format!("row {i} sums to {s}, expected 1")));
            }
        }
    }
    if cols {
        for (j, col) in matrix.column_iter().enumerate() {
            let s = col.sum();
            if (s - 1.0).abs() > STOCHASTIC_TOL {
                return Err(Error::Weights(format!("column {j} sums to {s}, expected 1")));
            }
        }
    }
    Ok(())
}

/// Builds the weight matrix of `g` for the requested class.
///
/// Self-loops are always present. Doubly stochastic weights start from the
/// rule's matrix and are balanced with Sinkhorn iterations on the fixed
/// sparsity pattern.
pub fn build_weights(g: &DirectedGraph, class: StochasticClass, rule: WeightRule) -> Result<WeightMatrix> {
    if !is_strongly_connected(g) {
        return Err(Error::NotStronglyConnected(unreachable_report(g)));
    }
    let n = g.node_count();
    let mut a = DMatrix::<f64>::zeros(n, n);
    match rule {
        WeightRule::UniformInDegree => {
            for i in 0..n {
                let w = 1.0 / (g.in_degree(i) + 1) as f64;
                a[(i, i)] = w;
                for j in g.in_neighbors(i) {
                    a[(i, j)] = w;
                }
            }
        }
        WeightRule::UniformOutDegree => {
            for j in 0..n {
                let w = 1.0 / (g.out_degree(j) + 1) as f64;
                a[(j, j)] = w;
                for i in g.out_neighbors(j) {
                    a[(i, j)] = w;
                }
            }
        }
        WeightRule::Explicit => {
            for i in 0..n {
                a[(i, i)] = g.explicit_weights.get(&Edge::new(i, i)).copied().unwrap_or(1.0);
            }
            for e in g.edges() {
                a[(e.to, e.from)] = g.explicit_weights.get(&e).copied().unwrap_or(1.0);
            }
        }
    }

    match class {
        StochasticClass::RowStochastic => {
            if rule == WeightRule::UniformOutDegree {
                return Err(Error::Weights(
                    "uniform_out_degree weights are column-stochastic; use uniform_in_degree for row_stochastic".into(),
                ));
            }
            normalize_rows(&mut a);
        }
        StochasticClass::ColumnStochastic => {
            if rule == WeightRule::UniformInDegree {
                return Err(Error::Weights(
                    "uniform_in_degree weights are row-stochastic; use uniform_out_degree for column_stochastic".into(),
                ));
            }
            normalize_columns(&mut a);
        }
        StochasticClass::DoublyStochastic => {
            normalize_rows(&mut a);
            sinkhorn_balance(&mut a)?;
        }
    }
    WeightMatrix::from_matrix(a, class)
}

fn normalize_rows(a: &mut DMatrix<f64>) {
    for mut row in a.row_iter_mut() {
        let s = row.sum();
        row /= s;
    }
}

fn normalize_columns(a: &mut DMatrix<f64>) {
    for mut col in a.column_iter_mut() {
        let s = col.sum();
        col /= s;
    }
}

const SINKHORN_MAX_SWEEPS: usize = 100_000;

fn sinkhorn_balance(a: &mut DMatrix<f64>) -> Result<()> {
    let max_dev = |a: &DMatrix<f64>| {
        let r = a.row_iter().map(|r| (r.sum() - 1.0).abs()).fold(0.0, f64::max);
        let c = a.column_iter().map(|c| (c.sum() - 1.0).abs()).fold(0.0, f64::max);
        r.max(c)
    };
    for _ in 0..SINKHORN_MAX_SWEEPS {
        if max_dev(a) <= STOCHASTIC_TOL / 4.0 {
            return Ok(());
        }
        normalize_columns(a);
        normalize_rows(a);
    }
    Err(Error::Weights(format!(
        "no doubly stochastic weights on this sparsity pattern (Sinkhorn residual {:e} after {SINKHORN_MAX_SWEEPS} sweeps)",
        max_dev(a)
    )))
}

fn power_iteration_fle(a: &DMatrix<f64>) -> Result<DVector<f64>> {
    let n = a.nrows();
    let at = a.transpose();
    let mut u = DVector::from_element(n, 1.0 / n as f64);
    let mut residual = f64::INFINITY;
    for _ in 0..FLE_MAX_ITERATIONS {
        let mut next = &at * &u;
        let s = next.sum();
        if !(s.is_finite() && s > 0.0) {
            return Err(Error::Numeric(format!("power iteration lost mass (sum {s})")));
        }
        next /= s;
        residual = (&next - &u).amax();
        u = next;
        if residual < FLE_TOL {
            return Ok(u);
        }
    }
    Err(Error::EigenvectorNotConverged {
        iterations: FLE_MAX_ITERATIONS,
        residual,
    })
}

/// First left eigenvector `u` of `w` (`uᵀA = uᵀ`, `Σu = 1`).
pub fn first_left_eigenvector(w: &WeightMatrix) -> DVector<f64> {
    w.fle.clone()
}

/// Consensus contraction factor `ρ(A − 1uᵀ)`.
pub fn contraction_factor(w: &WeightMatrix) -> Result<f64> {
    let n = w.node_count();
    let ones = DVector::from_element(n, 1.0);
    spectral_radius(w.matrix() - ones * w.fle().transpose())
}

pub(crate) fn spectral_radius(m: DMatrix<f64>) -> Result<f64> {
    let schur = nalgebra::Schur::try_new(m, f64::EPSILON, 100_000)
        .ok_or_else(|| Error::Numeric("Schur decomposition did not converge".into()))?;
    Ok(schur
        .complex_eigenvalues()
        .iter()
        .map(|z| z.norm())
        .fold(0.0, f64::max))
}

#[derive(Serialize, Deserialize)]
struct GraphDocument {
    node_count: usize,
    self_loops: bool,
    edges: Vec<EdgeSpec>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    self_weights: Vec<(usize, f64)>,
}

impl From<DirectedGraph> for GraphDocument {
    fn from(g: DirectedGraph) -> Self {
        let edges = g
            .edges
            .iter()
            .map(|e| EdgeSpec {
                from: e.from,
                to: e.to,
                weight: g.explicit_weights.get(e).copied(),
            })
            .collect();
        let self_weights = g
            .explicit_weights
            .iter()
            .filter(|(e, _)| e.from == e.to)
            .map(|(e, w)| (e.from, *w))
            .collect();
        Self {
            node_count: g.node_count,
            self_loops: g.self_loops,
            edges,
            self_weights,
        }
    }
}

impl TryFrom<GraphDocument> for DirectedGraph {
    type Error = Error;

    fn try_from(doc: GraphDocument) -> Result<Self> {
        if !doc.self_loops {
            return Err(Error::InvalidGraph("self_loops must be true".into()));
        }
        let mut g = DirectedGraph::new(doc.node_count, doc.edges.iter().map(|s| Edge::new(s.from, s.to)))?;
        for s in &doc.edges {
            if let Some(w) = s.weight {
                g.explicit_weights.insert(Edge::new(s.from, s.to), w);
            }
        }
        for (i, w) in doc.self_weights {
            g.explicit_weights.insert(Edge::new(i, i), w);
        }
        Ok(g)
    }
}

#[derive(Serialize, Deserialize)]
struct WeightDocument {
    class: StochasticClass,
    rows: Vec<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    fle: Option<Vec<f64>>,
}

impl From<WeightMatrix> for WeightDocument {
    fn from(w: WeightMatrix) -> Self {
        Self {
            class: w.class,
            rows: w.matrix.row_iter().map(|r| r.iter().copied().collect()).collect(),
            fle: Some(w.fle.iter().copied().collect()),
        }
    }
}

impl TryFrom<WeightDocument> for WeightMatrix {
    type Error = Error;

    fn try_from(doc: WeightDocument) -> Result<Self> {
        let n = doc.rows.len();
        if doc.rows.iter().any(|r| r.len() != n) {
            return Err(Error::Weights("weight rows must form a square matrix".into()));
        }
        let m = DMatrix::from_fn(n, n, |i, j| doc.rows[i][j]);
        // The cached eigenvector is recomputed rather than trusted.
        WeightMatrix::from_matrix(m, doc.class)
    }
}
