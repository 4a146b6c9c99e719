//! TOML scenario configuration.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::async_frost::{EpochSchedule, StepRule, TrackerTraceSpec};
use crate::delay::{load_schedule, DelayDistribution, DelayModel};
use crate::error::{Error, Result};
use crate::graph::{build_graph, build_weights, parse_edge_list, DirectedGraph, EdgeSpec, StochasticClass, Topology, WeightMatrix, WeightRule};
use crate::objectives::{indexed_quadratics, quadratic, smoothness_ratio, DiagonalQuadratic, GlobalProblem, LocalObjective, RegularizedLogistic};
use crate::sync::{class_warnings, StepSchedule};

/// Environment variable overriding the output root directory.
pub const OUTPUT_ROOT_ENV: &str = "DFROST_OUTPUT_ROOT";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub name: String,
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub description: String,
    pub graph: GraphConfig,
    pub objective: ObjectiveConfig,
    pub algorithm: AlgorithmConfig,
    #[serde(default)]
    pub delay: DelayConfig,
    /// Initial estimate shared by every agent; zeros when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub initial: Option<Vec<f64>>,
    #[serde(default)]
    pub output: OutputConfig,
    #[serde(default)]
    pub checks: ChecksConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GraphConfig {
    pub nodes: usize,
    #[serde(default)]
    pub seed: u64,
    pub topology: TopologyConfig,
    #[serde(default = "default_class")]
    pub weights: StochasticClass,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rule: Option<WeightRule>,
}

fn default_class() -> StochasticClass {
    StochasticClass::RowStochastic
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum TopologyConfig {
    Cycle,
    Random {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        edge_probability: Option<f64>,
    },
    EdgeList {
        #[serde(default, skip_serializing_if = "Vec::is_empty")]
        edges: Vec<EdgeSpec>,
        /// Whitespace-separated `from to [weight]` lines, relative to the config file.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        file: Option<PathBuf>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ShiftOverride {
    /// 1-based agent index.
    pub agent: usize,
    pub shift: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ObjectiveConfig {
    /// `f_i = curvature (x + i)²`, `i = 1..=N`, with optional shift overrides.
    IndexedQuadratic {
        #[serde(default = "one")]
        curvature: f64,
        #[serde(default, skip_serializing_if = "Vec::is_empty")]
        overrides: Vec<ShiftOverride>,
    },
    /// `f_i = Σ_k a_ik (x_k + c_ik)²` with explicit shifts and curvatures.
    Quadratic {
        shifts: Vec<Vec<f64>>,
        curvatures: Vec<Vec<f64>>,
    },
    /// Seeded random regularised logistic losses.
    Logistic { dim: usize, ridge: f64, seed: u64 },
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum AlgorithmConfig {
    AsyncFrost {
        kappa: f64,
        /// Epoch length `T_g / 2`; derived from `κ` and `τ_max` when absent.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        half_period: Option<u64>,
        epochs: usize,
        step: StepRule,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        early_stop: Option<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        settle_window: Option<usize>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        settle_tol: Option<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        tracker_trace: Option<TrackerTraceSpec>,
    },
    Frost {
        iterations: u64,
        step: StepSchedule,
    },
    Addopt {
        iterations: u64,
        alpha: f64,
    },
    GradientTracking {
        iterations: u64,
        alpha: f64,
    },
    Dgd {
        iterations: u64,
        step: StepSchedule,
    },
    /// Delay-robust tracker against hop-by-hop gradient flooding.
    NaiveAveraging {
        kappa: f64,
        ticks: u64,
    },
}

impl AlgorithmConfig {
    pub fn name(&self) -> &'static str {
        match self {
            AlgorithmConfig::AsyncFrost { .. } => "async_frost",
            AlgorithmConfig::Frost { .. } => "frost",
            AlgorithmConfig::Addopt { .. } => "addopt",
            AlgorithmConfig::GradientTracking { .. } => "gradient_tracking",
            AlgorithmConfig::Dgd { .. } => "dgd",
            AlgorithmConfig::NaiveAveraging { .. } => "naive_averaging",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DelayConfig {
    pub distribution: DelayDistribution,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "yes")]
    pub per_edge: bool,
    #[serde(default = "yes")]
    pub per_tick: bool,
    /// `tick,from,to,tau` CSV replacing `distribution`, relative to the config file.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub schedule_file: Option<PathBuf>,
}

fn yes() -> bool {
    true
}

impl Default for DelayConfig {
    fn default() -> Self {
        Self {
            distribution: DelayDistribution::Constant { tau: 0 },
            seed: 0,
            per_edge: true,
            per_tick: true,
            schedule_file: None,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub root: Option<PathBuf>,
    /// Keep every `stride`-th tick in `tracker.csv`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tracker_stride: Option<u64>,
}

/// Pass/fail checks that decide the run's exit status.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChecksConfig {
    /// Every agent within this distance (max norm) of `target` at termination.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tolerance: Option<f64>,
    /// Defaults to the analytic optimum.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target: Option<Vec<f64>>,
    /// A published value to report the gap to; never asserted.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reference: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_runtime_secs: Option<f64>,
    /// Run the theory checks and require them to pass.
    #[serde(default)]
    pub theory: bool,
    /// Async runs only: compare against the delay-free weighted-gradient recursion.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub synchronous_reference: Option<f64>,
    /// Naive runs only: the tracker must stay within this relative error...
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tracker_fraction: Option<f64>,
    /// ...from some tick before this one onward.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tracker_before_tick: Option<u64>,
    /// Naive runs only: expected worst-case flood completion.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub naive_worst_case: Option<u64>,
}

/// Everything a run needs, built and validated from a config.
#[derive(Debug)]
pub struct Prepared {
    pub graph: DirectedGraph,
    pub weights: WeightMatrix,
    pub problem: GlobalProblem,
    pub delays: DelayModel,
    pub x0: Vec<DVector<f64>>,
    pub warnings: Vec<String>,
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Parse {
            path: PathBuf::from("<config>"),
            message: e.to_string(),
        })
    }

    /// Loads a config; relative file references are resolved against its directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let mut cfg: Self = toml::from_str(&text).map_err(|e| Error::Parse {
            path: path.to_path_buf(),
            message: e.to_string(),
        })?;
        let base = path.parent().unwrap_or(Path::new("."));
        let rebase = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        if let TopologyConfig::EdgeList { file: Some(f), .. } = &mut cfg.graph.topology {
            rebase(f);
        }
        if let Some(f) = &mut cfg.delay.schedule_file {
            rebase(f);
        }
        Ok(cfg)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Parse {
            path: PathBuf::from("<config>"),
            message: e.to_string(),
        })
    }

    /// Output root: the environment override, then `output.root`, then `./runs`.
    pub fn output_root(&self) -> PathBuf {
        std::env::var_os(OUTPUT_ROOT_ENV)
            .map(PathBuf::from)
            .or_else(|| self.output.root.clone())
            .unwrap_or_else(|| PathBuf::from("runs"))
    }

    pub fn output_dir(&self) -> PathBuf {
        self.output_root().join(&self.name)
    }

    fn delay_model(&self) -> Result<DelayModel> {
        let mut model = match &self.delay.schedule_file {
            Some(path) => {
                let default_tau = match self.delay.distribution {
                    DelayDistribution::DeterministicSchedule { default_tau, .. } => default_tau,
                    DelayDistribution::Constant { tau } => tau,
                    DelayDistribution::UniformInteger { .. } => 0,
                };
                load_schedule(std::fs::File::open(path)?, default_tau)?
            }
            None => {
                if let DelayDistribution::UniformInteger { lo, hi } = self.delay.distribution {
                    DelayModel::uniform(lo, hi, self.delay.seed)?;
                }
                DelayModel::new(self.delay.distribution.clone(), self.delay.seed)
            }
        };
        model.seed = self.delay.seed;
        model.per_edge = self.delay.per_edge;
        model.per_tick = self.delay.per_tick;
        Ok(model)
    }

    fn topology(&self) -> Result<Topology> {
        Ok(match &self.graph.topology {
            TopologyConfig::Cycle => Topology::Cycle,
            TopologyConfig::Random { edge_probability } => Topology::RandomStronglyConnected {
                edge_probability: *edge_probability,
            },
            TopologyConfig::EdgeList { edges, file } => {
                let mut all = edges.clone();
                if let Some(path) = file {
                    let text = std::fs::read_to_string(path)?;
                    all.extend(parse_edge_list(&text).map_err(|e| Error::Parse {
                        path: path.clone(),
                        message: e.to_string(),
                    })?);
                }
                Topology::FromEdgeList(all)
            }
        })
    }

    fn objectives(&self) -> Result<Vec<LocalObjective>> {
        let n = self.graph.nodes;
        match &self.objective {
            ObjectiveConfig::IndexedQuadratic { curvature, overrides } => {
                let o: Vec<(usize, f64)> = overrides.iter().map(|o| (o.agent, o.shift)).collect();
                indexed_quadratics(n, *curvature, &o)
            }
            ObjectiveConfig::Quadratic { shifts, curvatures } => {
                if shifts.len() != n || curvatures.len() != n {
                    return Err(Error::InvalidObjective(format!(
                        "{} shifts and {} curvatures for {n} agents",
                        shifts.len(),
                        curvatures.len()
                    )));
                }
                shifts
                    .iter()
                    .zip(curvatures)
                    .map(|(c, a)| {
                        let f = if a.len() == 1 && c.len() > 1 {
                            quadratic(c.clone(), a[0])?
                        } else {
                            DiagonalQuadratic::new(c.clone(), a.clone())?
                        };
                        Ok(Arc::new(f) as LocalObjective)
                    })
                    .collect()
            }
            ObjectiveConfig::Logistic { dim, ridge, seed } => {
                let mut rng = ChaCha8Rng::seed_from_u64(*seed);
                (0..n)
                    .map(|_| {
                        let direction = (0..*dim).map(|_| rng.gen_range(-1.0..1.0)).collect();
                        let offset = rng.gen_range(-1.0..1.0);
                        let center = (0..*dim).map(|_| rng.gen_range(-1.0..1.0)).collect();
                        Ok(Arc::new(RegularizedLogistic::new(direction, offset, *ridge, center)?) as LocalObjective)
                    })
                    .collect()
            }
        }
    }

    fn static_errors(&self) -> Vec<String> {
        let mut errors = Vec::new();
        if self.name.trim().is_empty() || self.name.contains(['/', '\\']) {
            errors.push(format!("name {:?} must be a non-empty plain file name", self.name));
        }
        if self.graph.nodes == 0 {
            errors.push("graph.nodes must be at least 1".into());
        }
        if let TopologyConfig::Random { edge_probability: Some(p) } = self.graph.topology {
            if !(p > 0.0 && p <= 1.0) {
                errors.push(format!("graph.topology.edge_probability {p} must lie in (0, 1]"));
            }
        }
        let kappa = match &self.algorithm {
            AlgorithmConfig::AsyncFrost { kappa, .. } | AlgorithmConfig::NaiveAveraging { kappa, .. } => Some(*kappa),
            _ => None,
        };
        if let Some(k) = kappa {
            if !(k > 0.0 && k <= 1.0) {
                errors.push(format!("algorithm.kappa {k} must lie in (0, 1]"));
            }
        }
        match &self.algorithm {
            AlgorithmConfig::AsyncFrost { step, early_stop, .. } => {
                if let StepRule::Fixed { alpha } | StepRule::Diminishing { initial: alpha } = step {
                    if !(*alpha >= 0.0 && alpha.is_finite()) {
                        errors.push(format!("algorithm.step alpha {alpha} must be finite and nonnegative"));
                    }
                }
                if let Some(t) = early_stop {
                    if !(*t >= 0.0) {
                        errors.push(format!("algorithm.early_stop {t} must be nonnegative"));
                    }
                }
            }
            AlgorithmConfig::Addopt { alpha, .. } | AlgorithmConfig::GradientTracking { alpha, .. } => {
                if !(*alpha > 0.0 && alpha.is_finite()) {
                    errors.push(format!("algorithm.alpha {alpha} must be positive"));
                }
            }
            AlgorithmConfig::Frost { step, .. } | AlgorithmConfig::Dgd { step, .. } => {
                if let StepSchedule::PerAgent { alphas } = step {
                    if alphas.len() != self.graph.nodes {
                        errors.push(format!("{} per-agent step sizes for {} agents", alphas.len(), self.graph.nodes));
                    }
                }
            }
            AlgorithmConfig::NaiveAveraging { ticks, .. } => {
                if *ticks == 0 {
                    errors.push("algorithm.ticks must be positive".into());
                }
            }
        }
        if let Some(t) = self.checks.tolerance {
            if !(t > 0.0) {
                errors.push(format!("checks.tolerance {t} must be positive"));
            }
        }
        if let DelayDistribution::UniformInteger { lo, hi } = self.delay.distribution {
            if lo > hi {
                errors.push(format!("delay range lo = {lo} exceeds hi = {hi}"));
            }
        }
        errors
    }

    /// Builds graph, weights, objectives and delays, collecting every violated assumption.
    pub fn prepare(&self) -> Result<Prepared> {
        let mut errors = self.static_errors();
        let mut warnings = Vec::new();

        let graph = match self.topology().and_then(|t| build_graph(self.graph.nodes, &t, self.graph.seed)) {
            Ok(g) => Some(g),
            Err(e) => {
                errors.push(e.to_string());
                None
            }
        };
        let rule = self.graph.rule.unwrap_or(match self.graph.weights {
            StochasticClass::ColumnStochastic => WeightRule::UniformOutDegree,
            _ => WeightRule::UniformInDegree,
        });
        let weights = graph.as_ref().and_then(|g| match build_weights(g, self.graph.weights, rule) {
            Ok(w) => Some(w),
            Err(e) => {
                errors.push(e.to_string());
                None
            }
        });
        let problem = match self.objectives().and_then(GlobalProblem::new) {
            Ok(p) => Some(p),
            Err(e) => {
                errors.push(e.to_string());
                None
            }
        };
        let delays = match self.delay_model() {
            Ok(d) => Some(d),
            Err(e) => {
                errors.push(e.to_string());
                None
            }
        };

        if let Some(p) = &problem {
            if let AlgorithmConfig::AsyncFrost { step: StepRule::Theorem2, .. } = self.algorithm {
                let ratio = smoothness_ratio(&p.smoothness());
                if !(ratio > 0.75) {
                    errors.push(Error::StepSizeCondition { ratio }.to_string());
                }
            }
            if let Some(x) = &self.initial {
                if x.len() != p.dim() {
                    errors.push(format!("initial has dimension {}, objectives have {}", x.len(), p.dim()));
                }
            }
            for (label, v) in [("target", &self.checks.target), ("reference", &self.checks.reference)] {
                if let Some(v) = v {
                    if v.len() != p.dim() {
                        errors.push(format!("checks.{label} has dimension {}, objectives have {}", v.len(), p.dim()));
                    }
                }
            }
        }
        if let (AlgorithmConfig::AsyncFrost { half_period: Some(h), .. }, Some(d)) = (&self.algorithm, &delays) {
            if let Err(e) = EpochSchedule::new(*h, 0, d.tau_max()) {
                errors.push(e.to_string());
            }
        }
        if let Some(w) = &weights {
            warnings.extend(class_warnings(self.algorithm.name(), w));
        }

        if !errors.is_empty() {
            return Err(Error::Config(errors));
        }
        let problem = problem.expect("no errors");
        let dim = problem.dim();
        let x = DVector::from_vec(self.initial.clone().unwrap_or_else(|| vec![0.0; dim]));
        Ok(Prepared {
            x0: vec![x; self.graph.nodes],
            graph: graph.expect("no errors"),
            weights: weights.expect("no errors"),
            problem,
            delays: delays.expect("no errors"),
            warnings,
        })
    }

    /// Copy with derived defaults filled in, as embedded in run outputs.
    pub fn resolved(&self, prepared: &Prepared) -> Self {
        let mut cfg = self.clone();
        if let AlgorithmConfig::AsyncFrost { kappa, half_period, .. } = &mut cfg.algorithm {
            if half_period.is_none() {
                *half_period = Some(EpochSchedule::default_half_period(&prepared.weights, *kappa, prepared.delays.tau_max()));
            }
        }
        if cfg.initial.is_none() {
            cfg.initial = Some(vec![0.0; prepared.problem.dim()]);
        }
        cfg
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const S1: &str = r#"
name = "s1"

[graph]
nodes = 22
seed = 3
topology = { kind = "random", edge_probability = 0.2 }

[objective]
kind = "indexed_quadratic"

[algorithm]
kind = "async_frost"
kappa = 0.01
epochs = 60
step = { kind = "theorem2" }

[delay]
distribution = { kind = "uniform_integer", lo = 0, hi = 157 }
seed = 7
per_edge = false

[checks]
tolerance = 1e-2
target = [-11.5]
"#;

    #[test]
    fn parses_and_round_trips() {
        let cfg = ExperimentConfig::from_toml_str(S1).unwrap();
        assert_eq!(cfg.graph.nodes, 22);
        assert!(!cfg.delay.per_edge);
        let text = cfg.to_toml_string().unwrap();
        assert_eq!(ExperimentConfig::from_toml_str(&text).unwrap(), cfg);
    }

    #[test]
    fn resolved_config_round_trips() {
        let cfg = ExperimentConfig::from_toml_str(S1).unwrap();
        let prepared = cfg.prepare().unwrap();
        let resolved = cfg.resolved(&prepared);
        match resolved.algorithm {
            AlgorithmConfig::AsyncFrost { half_period, .. } => assert_eq!(half_period, Some(4157)),
            _ => unreachable!(),
        }
        let text = resolved.to_toml_string().unwrap();
        assert_eq!(ExperimentConfig::from_toml_str(&text).unwrap(), resolved);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let text = S1.replace("kappa = 0.01", "kappa = 0.01\nkapa = 0.02");
        assert!(matches!(ExperimentConfig::from_toml_str(&text), Err(Error::Parse { .. })));
    }

    #[test]
    fn every_violation_is_listed() {
        let text = S1
            .replace("nodes = 22", "nodes = 4")
            .replace("kappa = 0.01", "kappa = 2.0")
            .replace("kind = \"indexed_quadratic\"", "kind = \"quadratic\"\nshifts = [[0.0], [0.0], [0.0], [0.0]]\ncurvatures = [[0.5], [0.5], [0.5], [1.5]]")
            .replace("target = [-11.5]", "target = [-11.5, 0.0]");
        let cfg = ExperimentConfig::from_toml_str(&text).unwrap();
        match cfg.prepare() {
            Err(Error::Config(errors)) => {
                assert_eq!(errors.len(), 3, "{errors:?}");
                assert!(errors.iter().any(|e| e.contains("kappa")));
                assert!(errors.iter().any(|e| e.contains("3/4")));
                assert!(errors.iter().any(|e| e.contains("target")));
            }
            other => panic!("expected config error, got {other:?}"),
        }
    }

    #[test]
    fn disconnected_edge_list_is_rejected() {
        let text = S1
            .replace("nodes = 22", "nodes = 3")
            .replace(
                "topology = { kind = \"random\", edge_probability = 0.2 }",
                "topology = { kind = \"edge_list\", edges = [{ from = 0, to = 1 }, { from = 1, to = 2 }] }",
            );
        let cfg = ExperimentConfig::from_toml_str(&text).unwrap();
        assert!(matches!(cfg.prepare(), Err(Error::Config(e)) if e.iter().any(|m| m.contains("strongly connected"))));
    }

    #[test]
    fn epoch_must_exceed_delay_bound() {
        let text = S1.replace("kappa = 0.01", "kappa = 0.01\nhalf_period = 100");
        let cfg = ExperimentConfig::from_toml_str(&text).unwrap();
        assert!(matches!(cfg.prepare(), Err(Error::Config(e)) if e.iter().any(|m| m.contains("tau_max"))));
    }
}
