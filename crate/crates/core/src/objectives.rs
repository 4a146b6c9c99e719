//! Local objectives `f_i` and the global problem `min (1/N) Σ f_i(x)`.

use std::fmt::Debug;
use std::sync::Arc;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Gradient-norm target for the iterative global-optimum solver.
pub const OPTIMUM_GRAD_TOL: f64 = 1e-10;

/// A smooth, strongly convex local function.
pub trait Objective: Debug + Send + Sync {
    fn dim(&self) -> usize;
    fn value(&self, x: &DVector<f64>) -> f64;
    fn gradient(&self, x: &DVector<f64>) -> DVector<f64>;
    /// Lipschitz constant `l_i` of the gradient.
    fn smoothness(&self) -> f64;
    /// Strong-convexity constant `σ_i`, with `0 < σ_i ≤ l_i`.
    fn strong_convexity(&self) -> f64;

    /// Closed-form representation when the objective is a separable quadratic.
    fn as_quadratic(&self) -> Option<DiagonalQuadratic> {
        None
    }
}

pub type LocalObjective = Arc<dyn Objective>;

/// `f(x) = Σ_k a_k (x_k + c_k)²`; `l = 2 max a`, `σ = 2 min a`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiagonalQuadratic {
    pub shift: Vec<f64>,
    pub curvature: Vec<f64>,
}

impl DiagonalQuadratic {
    pub fn new(shift: Vec<f64>, curvature: Vec<f64>) -> Result<Self> {
        if shift.is_empty() || shift.len() != curvature.len() {
            return Err(Error::InvalidObjective(format!(
                "shift has {} entries, curvature has {}",
                shift.len(),
                curvature.len()
            )));
        }
        if let Some(a) = curvature.iter().find(|a| !(**a > 0.0 && a.is_finite())) {
            return Err(Error::InvalidObjective(format!("curvature must be positive, got {a}")));
        }
        if shift.iter().any(|c| !c.is_finite()) {
            return Err(Error::InvalidObjective("shift must be finite".into()));
        }
        Ok(Self { shift, curvature })
    }

    pub fn minimizer(&self) -> DVector<f64> {
        DVector::from_iterator(self.shift.len(), self.shift.iter().map(|c| -c))
    }
}

impl Objective for DiagonalQuadratic {
    fn dim(&self) -> usize {
        self.shift.len()
    }

    fn value(&self, x: &DVector<f64>) -> f64 {
        x.iter()
            .zip(&self.shift)
            .zip(&self.curvature)
            .map(|((x, c), a)| a * (x + c).powi(2))
            .sum()
    }

    fn gradient(&self, x: &DVector<f64>) -> DVector<f64> {
        DVector::from_iterator(
            x.len(),
            x.iter()
                .zip(&self.shift)
                .zip(&self.curvature)
                .map(|((x, c), a)| 2.0 * a * (x + c)),
        )
    }

    fn smoothness(&self) -> f64 {
        2.0 * self.curvature.iter().copied().fold(f64::MIN, f64::max)
    }

    fn strong_convexity(&self) -> f64 {
        2.0 * self.curvature.iter().copied().fold(f64::MAX, f64::min)
    }

    fn as_quadratic(&self) -> Option<DiagonalQuadratic> {
        Some(self.clone())
    }
}

/// Isotropic quadratic `f(x) = a‖x + c‖²` with `l = σ = 2a`.
pub fn quadratic(shift: Vec<f64>, curvature: f64) -> Result<DiagonalQuadratic> {
    if !(curvature > 0.0) {
        return Err(Error::InvalidObjective(format!("curvature must be positive, got {curvature}")));
    }
    let n = shift.len();
    DiagonalQuadratic::new(shift, vec![curvature; n])
}

/// `f(x) = log(1 + exp(wᵀx − b)) + (λ/2)‖x − x₀‖²`.
///
/// Smoothness `‖w‖²/4 + λ`, strong convexity `λ`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegularizedLogistic {
    pub direction: Vec<f64>,
    pub offset: f64,
    pub ridge: f64,
    pub center: Vec<f64>,
}

impl RegularizedLogistic {
    pub fn new(direction: Vec<f64>, offset: f64, ridge: f64, center: Vec<f64>) -> Result<Self> {
        if direction.is_empty() || direction.len() != center.len() {
            return Err(Error::InvalidObjective("direction and center must have equal, nonzero length".into()));
        }
        if !(ridge > 0.0) {
            return Err(Error::InvalidObjective(format!("ridge must be positive, got {ridge}")));
        }
        Ok(Self { direction, offset, ridge, center })
    }

    fn margin(&self, x: &DVector<f64>) -> f64 {
        x.iter().zip(&self.direction).map(|(x, w)| x * w).sum::<f64>() - self.offset
    }
}

fn softplus(z: f64) -> f64 {
    if z > 0.0 {
        z + (-z).exp().ln_1p()
    } else {
        z.exp().ln_1p()
    }
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

impl Objective for RegularizedLogistic {
    fn dim(&self) -> usize {
        self.direction.len()
    }

    fn value(&self, x: &DVector<f64>) -> f64 {
        let ridge: f64 = x.iter().zip(&self.center).map(|(x, c)| (x - c).powi(2)).sum();
        softplus(self.margin(x)) + 0.5 * self.ridge * ridge
    }

    fn gradient(&self, x: &DVector<f64>) -> DVector<f64> {
        let s = sigmoid(self.margin(x));
        DVector::from_iterator(
            x.len(),
            x.iter()
                .zip(&self.direction)
                .zip(&self.center)
                .map(|((x, w), c)| s * w + self.ridge * (x - c)),
        )
    }

    fn smoothness(&self) -> f64 {
        self.direction.iter().map(|w| w * w).sum::<f64>() / 4.0 + self.ridge
    }

    fn strong_convexity(&self) -> f64 {
        self.ridge
    }
}

/// The problem `min F(x) = (1/N) Σ f_i(x)` with a cached optimum.
#[derive(Debug, Clone)]
pub struct GlobalProblem {
    objectives: Vec<LocalObjective>,
    optimum: DVector<f64>,
}

impl GlobalProblem {
    pub fn new(objectives: Vec<LocalObjective>) -> Result<Self> {
        let Some(first) = objectives.first() else {
            return Err(Error::InvalidObjective("problem needs at least one objective".into()));
        };
        let dim = first.dim();
        for (i, f) in objectives.iter().enumerate() {
            if f.dim() != dim {
                return Err(Error::InvalidObjective(format!(
                    "objective {i} has dimension {}, expected {dim}",
                    f.dim()
                )));
            }
            let (l, s) = (f.smoothness(), f.strong_convexity());
            if !(s > 0.0 && s <= l) {
                return Err(Error::InvalidObjective(format!(
                    "objective {i}: need 0 < sigma <= l, got sigma = {s}, l = {l}"
                )));
            }
        }
        let optimum = solve_optimum(&objectives)?;
        Ok(Self { objectives, optimum })
    }

    pub fn agent_count(&self) -> usize {
        self.objectives.len()
    }

    pub fn dim(&self) -> usize {
        self.objectives[0].dim()
    }

    pub fn objectives(&self) -> &[LocalObjective] {
        &self.objectives
    }

    pub fn objective(&self, i: usize) -> &dyn Objective {
        self.objectives[i].as_ref()
    }

    pub fn optimum(&self) -> &DVector<f64> {
        &self.optimum
    }

    pub fn smoothness(&self) -> Vec<f64> {
        self.objectives.iter().map(|f| f.smoothness()).collect()
    }

    /// `Σ_i ∇f_i(x)`.
    pub fn total_gradient(&self, x: &DVector<f64>) -> DVector<f64> {
        self.objectives
            .iter()
            .fold(DVector::zeros(x.len()), |acc, f| acc + f.gradient(x))
    }

    pub fn value(&self, x: &DVector<f64>) -> f64 {
        self.objectives.iter().map(|f| f.value(x)).sum::<f64>() / self.agent_count() as f64
    }
}

/// Minimiser of the uniform-average objective.
pub fn global_optimum(p: &GlobalProblem) -> DVector<f64> {
    p.optimum.clone()
}

fn solve_optimum(objectives: &[LocalObjective]) -> Result<DVector<f64>> {
    let dim = objectives[0].dim();
    let quadratics: Option<Vec<DiagonalQuadratic>> = objectives.iter().map(|f| f.as_quadratic()).collect();
    if let Some(qs) = quadratics {
        // Per coordinate: Σ a_i (x + c_i) = 0.
        return Ok(DVector::from_fn(dim, |k, _| {
            let num: f64 = qs.iter().map(|q| q.curvature[k] * q.shift[k]).sum();
            let den: f64 = qs.iter().map(|q| q.curvature[k]).sum();
            -num / den
        }));
    }

    // Gradient descent on Σ f_i with step 1/Σl_i.
    let total_l: f64 = objectives.iter().map(|f| f.smoothness()).sum();
    let total_s: f64 = objectives.iter().map(|f| f.strong_convexity()).sum();
    let step = 1.0 / total_l;
    let grad = |x: &DVector<f64>| {
        objectives
            .iter()
            .fold(DVector::zeros(dim), |acc: DVector<f64>, f| acc + f.gradient(x))
    };
    let mut x = DVector::zeros(dim);
    let max_iter = ((total_l / total_s) * 200.0).ceil() as usize + 10_000;
    for _ in 0..max_iter {
        let g = grad(&x);
        if g.norm() / (objectives.len() as f64) < OPTIMUM_GRAD_TOL {
            return Ok(x);
        }
        x -= g * step;
    }
    Err(Error::Numeric("gradient descent for the global optimum did not converge".into()))
}

/// Homogeneity ratio `(Σl_i)² / (N Σl_i²)` and whether it exceeds 3/4.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SmoothnessCheck {
    pub ratio: f64,
    pub passes: bool,
}

pub fn smoothness_ratio(l: &[f64]) -> f64 {
    let n = l.len() as f64;
    let sum: f64 = l.iter().sum();
    let sum_sq: f64 = l.iter().map(|v| v * v).sum();
    sum * sum / (n * sum_sq)
}

/// Checks the smoothness-homogeneity condition that makes the closed-form
/// step size admissible.
pub fn check_assumption5(p: &GlobalProblem) -> SmoothnessCheck {
    let ratio = smoothness_ratio(&p.smoothness());
    SmoothnessCheck { ratio, passes: ratio > 0.75 }
}

/// `f_i = curvature (x + i)²` for `i = 1..=count` in one dimension, with
/// optional per-agent shift overrides (1-based agent index).
pub fn indexed_quadratics(count: usize, curvature: f64, overrides: &[(usize, f64)]) -> Result<Vec<LocalObjective>> {
    (1..=count)
        .map(|i| {
            let shift = overrides
                .iter()
                .find(|(agent, _)| *agent == i)
                .map(|(_, c)| *c)
                .unwrap_or(i as f64);
            Ok(Arc::new(quadratic(vec![shift], curvature)?) as LocalObjective)
        })
        .collect()
}
