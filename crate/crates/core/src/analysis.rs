//! Numerical checks of the convergence theory against simulated runs.

use std::fmt;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::async_frost::{a1_coefficient, AsyncRun};
use crate::error::{Error, Result};
use crate::graph::{contraction_factor, spectral_radius, WeightMatrix};
use crate::objectives::Objective;
use crate::sync::mix;

pub const COCOERCIVITY_SLACK: f64 = 1e-9;
pub const MATRIX_POWER_TOL: f64 = 1e-10;
pub const RATE_TOL: f64 = 1e-6;
/// An epoch is transient while some `|u_i / [e_i]_i − 1|` exceeds this.
pub const TRANSIENT_MISMATCH: f64 = 0.05;
/// Values below this are treated as roundoff when fitting geometric decay.
pub const FIT_FLOOR: f64 = 1e-28;
pub const MIN_R_SQUARED: f64 = 0.95;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TheoryCheck {
    pub name: String,
    pub description: String,
    pub measured: f64,
    pub bound: f64,
    pub passed: bool,
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub detail: String,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TheoryReport {
    pub checks: Vec<TheoryCheck>,
}

impl TheoryReport {
    pub fn push(&mut self, check: TheoryCheck) {
        self.checks.push(check);
    }

    pub fn extend(&mut self, other: TheoryReport) {
        self.checks.extend(other.checks);
    }

    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

impl fmt::Display for TheoryReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for c in &self.checks {
            write!(
                f,
                "[{}] {}: measured {:.6e}, bound {:.6e} ({})",
                if c.passed { "PASS" } else { "FAIL" },
                c.name,
                c.measured,
                c.bound,
                c.description
            )?;
            if !c.detail.is_empty() {
                write!(f, "; {}", c.detail)?;
            }
            writeln!(f)?;
        }
        Ok(())
    }
}

/// Smallest slack of `⟨x−y, ∇f(x)−∇f(y)⟩ ≥ μ₁‖∇f(x)−∇f(y)‖² + μ₂‖x−y‖²`
/// with `μ₁ = 1/(σ+L)`, `μ₂ = σL/(σ+L)` over random pairs in `[−10, 10]ⁿ`.
pub fn cocoercivity_check(f: &dyn Objective, pairs: usize, seed: u64) -> TheoryCheck {
    let sigma = f.strong_convexity();
    let l = f.smoothness();
    let mu1 = 1.0 / (sigma + l);
    let mu2 = sigma * l / (sigma + l);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = f.dim();
    let mut worst = f64::INFINITY;
    for _ in 0..pairs {
        let x = DVector::from_fn(n, |_, _| rng.gen_range(-10.0..10.0));
        let y = DVector::from_fn(n, |_, _| rng.gen_range(-10.0..10.0));
        let dx = &x - &y;
        let dg = f.gradient(&x) - f.gradient(&y);
        let slack = dx.dot(&dg) - mu1 * dg.norm_squared() - mu2 * dx.norm_squared();
        worst = worst.min(slack);
    }
    TheoryCheck {
        name: "co-coercivity".into(),
        description: format!("strong monotonicity with mu1 = {mu1:.4}, mu2 = {mu2:.4} over {pairs} pairs"),
        measured: worst,
        bound: -COCOERCIVITY_SLACK,
        passed: worst >= -COCOERCIVITY_SLACK,
        detail: String::new(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContractionReport {
    /// `‖x(k) − 1 ⊗ uᵀx(k)‖` from stepping `x ← (A ⊗ I) x`.
    pub simulated: Vec<f64>,
    /// `‖((A − 1uᵀ) ⊗ I)ᵏ x(0)‖` from dense matrix powers.
    pub matrix_power: Vec<f64>,
    pub measured_rate: f64,
    pub contraction_factor: f64,
    pub report: TheoryReport,
}

fn stack(x: &[DVector<f64>]) -> DVector<f64> {
    DVector::from_iterator(x.iter().map(|v| v.len()).sum(), x.iter().flat_map(|v| v.iter().copied()))
}

fn consensus_error(x: &[DVector<f64>], u: &DVector<f64>) -> f64 {
    let mut avg = DVector::zeros(x[0].len());
    for (ui, xi) in u.iter().zip(x) {
        avg.axpy(*ui, xi, 1.0);
    }
    x.iter().map(|xi| (xi - &avg).norm_squared()).sum::<f64>().sqrt()
}

/// Dominant eigenvalue modulus of the consensus map restricted to `uᵀx = 0`,
/// estimated by orthogonal subspace iteration on the simulation step.
pub fn measured_contraction_rate(weights: &WeightMatrix, seed: u64) -> f64 {
    let n = weights.node_count();
    if n < 2 {
        return 0.0;
    }
    let d = (n - 1).min(4);
    let u = weights.fle();
    let ones = DVector::from_element(n, 1.0);
    let apply = |q: &DMatrix<f64>| {
        let mut z = weights.matrix() * q;
        for mut col in z.column_iter_mut() {
            let c = u.dot(&col);
            col.axpy(-c, &ones, 1.0);
        }
        z
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut q = apply(&DMatrix::from_fn(n, d, |_, _| rng.gen_range(-1.0..1.0)));
    let mut estimate = f64::NAN;
    for iter in 1..=20_000 {
        if q.norm() < 1e-150 {
            return 0.0;
        }
        q = q.qr().q();
        let z = apply(&q);
        if iter % 25 == 0 {
            let h = q.transpose() * &z;
            let next = spectral_radius(h).unwrap_or(f64::NAN);
            if (next - estimate).abs() < 1e-15 {
                return next;
            }
            estimate = next;
        }
        q = z;
    }
    estimate
}

/// Compares simulated consensus error with dense matrix powers for `k ≤ steps`
/// and the measured decay rate with the analytic contraction factor.
pub fn lemma3_contraction_check(weights: &WeightMatrix, x0: &[DVector<f64>], steps: usize) -> Result<ContractionReport> {
    let n = weights.node_count();
    if x0.len() != n || x0.is_empty() {
        return Err(Error::Config(vec![format!("{} initial states for {n} agents", x0.len())]));
    }
    let dim = x0[0].len();
    let u = weights.fle();
    let ones = DVector::from_element(n, 1.0);
    let m = (weights.matrix() - &ones * u.transpose()).kronecker(&DMatrix::<f64>::identity(dim, dim));

    let mut x = x0.to_vec();
    let mut power = stack(x0);
    let mut simulated = vec![consensus_error(&x, u)];
    let mut matrix_power = vec![{
        let avg_removed: Vec<DVector<f64>> = {
            let mut avg = DVector::zeros(dim);
            for (ui, xi) in u.iter().zip(x0) {
                avg.axpy(*ui, xi, 1.0);
            }
            x0.iter().map(|xi| xi - &avg).collect()
        };
        stack(&avg_removed).norm()
    }];
    for _ in 0..steps {
        x = (0..n).map(|i| mix(weights, &x, i)).collect();
        power = &m * power;
        simulated.push(consensus_error(&x, u));
        matrix_power.push(power.norm());
    }
    let gap = simulated
        .iter()
        .zip(&matrix_power)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    let rho = contraction_factor(weights)?;
    let rate = measured_contraction_rate(weights, 0);

    let mut report = TheoryReport::default();
    report.push(TheoryCheck {
        name: "consensus matrix power".into(),
        description: format!("simulated consensus error equals dense matrix-power norm for k <= {steps}"),
        measured: gap,
        bound: MATRIX_POWER_TOL,
        passed: gap <= MATRIX_POWER_TOL,
        detail: String::new(),
    });
    report.push(TheoryCheck {
        name: "consensus decay rate".into(),
        description: "subspace-iteration rate of the simulated step vs spectral radius of A - 1u^T".into(),
        measured: (rate - rho).abs(),
        bound: RATE_TOL,
        passed: (rate - rho).abs() <= RATE_TOL,
        detail: format!("measured {rate:.9}, analytic {rho:.9}"),
    });
    Ok(ContractionReport {
        simulated,
        matrix_power,
        measured_rate: rate,
        contraction_factor: rho,
        report,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeometricFit {
    pub rate: f64,
    pub log_scale: f64,
    pub r_squared: f64,
}

/// Least-squares fit of `log v = log C + k log λ` over `(k, v)` points.
pub fn fit_geometric(points: &[(f64, f64)]) -> Option<GeometricFit> {
    let pts: Vec<(f64, f64)> = points.iter().filter(|(_, v)| *v > 0.0).map(|(k, v)| (*k, v.ln())).collect();
    if pts.len() < 3 {
        return None;
    }
    let m = pts.len() as f64;
    let mk = pts.iter().map(|p| p.0).sum::<f64>() / m;
    let mv = pts.iter().map(|p| p.1).sum::<f64>() / m;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mk).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mk) * (p.1 - mv)).sum();
    let syy: f64 = pts.iter().map(|p| (p.1 - mv).powi(2)).sum();
    if sxx == 0.0 {
        return None;
    }
    let slope = sxy / sxx;
    let r_squared = if syy == 0.0 { 1.0 } else { sxy * sxy / (sxx * syy) };
    Some(GeometricFit {
        rate: slope.exp(),
        log_scale: mv - slope * mk,
        r_squared,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoefficientTrace {
    /// `a₁(k)` per epoch, starting at epoch 1.
    pub a1: Vec<f64>,
    /// First epoch after which every `|u_i / [e_i]_i − 1|` stays within tolerance.
    pub transient_end: Option<usize>,
    /// `‖Σ_i α_k ∇f_i(x*) (1 − u_i / [e_i(k)]_i)‖²` per epoch, starting at epoch 1.
    pub perturbation: Vec<f64>,
    pub fit: Option<GeometricFit>,
    pub report: TheoryReport,
}

/// Evaluates the contraction coefficient and the eigenvector-mismatch
/// perturbation along a recorded run, using the true eigenvector `u`.
pub fn theorem1_coefficient_trace(run: &AsyncRun, l: &[f64], u: &[f64], grad_at_opt: &[DVector<f64>]) -> Result<CoefficientTrace> {
    if run.records.len() < 2 {
        return Err(Error::MissingTrace("coefficient trace needs at least one completed epoch".into()));
    }
    let epochs = &run.records[1..];
    let mismatch = |e: &[f64]| e.iter().zip(u).map(|(e, u)| (u / e - 1.0).abs()).fold(0.0, f64::max);
    let mut a1 = Vec::with_capacity(epochs.len());
    let mut perturbation = Vec::with_capacity(epochs.len());
    let mut transient_end = None;
    for rec in epochs {
        let e = rec.e_diag();
        a1.push(a1_coefficient(l, &e, u, rec.alpha));
        let mut acc = DVector::zeros(grad_at_opt[0].len());
        for i in 0..u.len() {
            acc.axpy(rec.alpha * (1.0 - u[i] / e[i]), &grad_at_opt[i], 1.0);
        }
        perturbation.push(acc.norm_squared());
        if mismatch(&e) > TRANSIENT_MISMATCH {
            transient_end = None;
        } else if transient_end.is_none() {
            transient_end = Some(rec.epoch);
        }
    }

    let mut report = TheoryReport::default();
    let worst_a1 = match transient_end {
        Some(k) => epochs
            .iter()
            .zip(&a1)
            .filter(|(r, _)| r.epoch >= k)
            .map(|(_, a)| *a)
            .fold(f64::NEG_INFINITY, f64::max),
        None => f64::INFINITY,
    };
    report.push(TheoryCheck {
        name: "contraction coefficient".into(),
        description: "a1(k) < 1 once eigenvector estimates are within 5% of u".into(),
        measured: worst_a1,
        bound: 1.0,
        passed: worst_a1 < 1.0,
        detail: match transient_end {
            Some(k) => format!("transient ends at epoch {k}"),
            None => "eigenvector estimates never left the transient".into(),
        },
    });

    let points: Vec<(f64, f64)> = epochs
        .iter()
        .zip(&perturbation)
        .filter(|(_, g)| **g > FIT_FLOOR)
        .map(|(r, g)| (r.epoch as f64, *g))
        .collect();
    let fit = fit_geometric(&points);
    report.push(match fit {
        Some(f) => TheoryCheck {
            name: "geometric perturbation decay".into(),
            description: "log-linear fit of the eigenvector-mismatch perturbation".into(),
            measured: f.rate,
            bound: 1.0,
            passed: f.rate < 1.0 && f.r_squared > MIN_R_SQUARED,
            detail: format!("R^2 = {:.4} over {} epochs", f.r_squared, points.len()),
        },
        None => TheoryCheck {
            name: "geometric perturbation decay".into(),
            description: "log-linear fit of the eigenvector-mismatch perturbation".into(),
            measured: f64::NAN,
            bound: 1.0,
            passed: false,
            detail: format!("only {} epochs above the roundoff floor", points.len()),
        },
    });
    Ok(CoefficientTrace {
        a1,
        transient_end,
        perturbation,
        fit,
        report,
    })
}

/// `‖uᵀx(k) − x*‖` per recorded epoch.
pub fn optimality_gap(run: &AsyncRun, u: &[f64], optimum: &DVector<f64>) -> Vec<f64> {
    run.records
        .iter()
        .map(|r| {
            let mut avg = DVector::zeros(optimum.len());
            for (ui, x) in u.iter().zip(&r.x) {
                avg.axpy(*ui, &DVector::from_column_slice(x), 1.0);
            }
            (avg - optimum).norm()
        })
        .collect()
}
