//! Projected subgradient descent for the weighted hinge loss and the CVaR lower level.

use serde::{Deserialize, Serialize};

use crate::error::{CcpError, Result};
use crate::geometry::PreparedSet;
use crate::model::CcpInstance;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StepRule {
    /// γ_k = 1/(k+1) on the raw subgradient.
    Harmonic,
    Constant(f64),
    /// Normalized steps of length γ; γ halves (restarting from the best point)
    /// after `patience` iterations without improvement. `initial = None` picks γ from the set size.
    Halving { initial: Option<f64>, patience: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SgdConfig {
    pub max_iter: usize,
    pub step_rule: StepRule,
    /// Return the best iterate instead of the last one.
    pub averaging: bool,
    pub stop_tol: f64,
    pub stall_window: usize,
}

impl Default for SgdConfig {
    fn default() -> Self {
        SgdConfig {
            max_iter: 5_000,
            step_rule: StepRule::Halving { initial: None, patience: 50 },
            averaging: true,
            stop_tol: 1e-10,
            stall_window: 500,
        }
    }
}

impl SgdConfig {
    pub fn with_max_iter(mut self, max_iter: usize) -> Self {
        self.max_iter = max_iter;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.max_iter == 0 {
            return Err(CcpError::validation("max_iter", "must be >= 1"));
        }
        match self.step_rule {
            StepRule::Constant(g) if !(g > 0.0) => Err(CcpError::validation("step_rule", "constant step must be > 0")),
            StepRule::Halving { initial: Some(g), .. } if !(g > 0.0) => {
                Err(CcpError::validation("step_rule", "initial step must be > 0"))
            }
            _ => Ok(()),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SgdOutcome {
    pub x: Vec<f64>,
    pub value: f64,
    pub iterations: usize,
    /// Best value after each iteration (nonincreasing).
    pub trace_len: usize,
}

/// Generic projected subgradient loop with best-iterate tracking.
pub fn minimize<F, P>(x0: &[f64], f: F, project: P, scale: f64, cfg: &SgdConfig) -> Result<SgdOutcome>
where
    F: Fn(&[f64]) -> (f64, Vec<f64>),
    P: Fn(&[f64]) -> Result<Vec<f64>>,
{
    cfg.validate()?;
    let mut x = project(x0).map_err(|_| CcpError::BadStart)?;
    let (mut val, mut grad) = f(&x);
    if !val.is_finite() {
        return Err(CcpError::NonFinite);
    }
    let mut best_x = x.clone();
    let mut best = val;
    let mut gamma = match cfg.step_rule {
        StepRule::Halving { initial, .. } => initial.unwrap_or(scale),
        StepRule::Constant(g) => g,
        StepRule::Harmonic => 1.0,
    };
    let mut since_improve = 0usize;
    let mut window_start = best;
    let mut window_len = 0usize;
    let mut iterations = 0;
    for k in 0..cfg.max_iter {
        iterations = k + 1;
        let gn = grad.iter().map(|v| v * v).sum::<f64>().sqrt();
        if gn == 0.0 {
            break;
        }
        let step: Vec<f64> = match cfg.step_rule {
            StepRule::Harmonic => grad.iter().map(|g| g / (k + 1) as f64).collect(),
            StepRule::Constant(g) => grad.iter().map(|v| v * g).collect(),
            StepRule::Halving { .. } => grad.iter().map(|v| v * gamma / gn).collect(),
        };
        let y: Vec<f64> = x.iter().zip(&step).map(|(a, b)| a - b).collect();
        x = match project(&y) {
            Ok(p) => p,
            Err(CcpError::NoConvergence { best, .. }) => best,
            Err(e) => return Err(e),
        };
        let (v, g) = f(&x);
        if !v.is_finite() {
            return Err(CcpError::NonFinite);
        }
        val = v;
        grad = g;
        if val < best {
            best = val;
            best_x.clone_from(&x);
            since_improve = 0;
        } else {
            since_improve += 1;
        }
        if let StepRule::Halving { patience, .. } = cfg.step_rule {
            if since_improve >= patience.max(1) {
                gamma *= 0.5;
                since_improve = 0;
                x.clone_from(&best_x);
                let (v, g) = f(&x);
                val = v;
                grad = g;
            }
        }
        window_len += 1;
        if window_len >= cfg.stall_window {
            if window_start - best < cfg.stop_tol {
                break;
            }
            window_start = best;
            window_len = 0;
        }
        if best <= 0.0 && val <= 0.0 && gamma == 0.0 {
            break;
        }
    }
    let (x, value) = if cfg.averaging { (best_x, best) } else { (x, val) };
    Ok(SgdOutcome { x, value, iterations, trace_len: iterations })
}

fn step_scale(set: &PreparedSet, x0: &[f64]) -> f64 {
    match set.box_diameter() {
        Some(d) if d > 0.0 => 0.25 * d,
        _ => 0.5 * (1.0 + x0.iter().fold(0.0f64, |m, v| m.max(v.abs()))),
    }
}

/// Weighted hinge value Σ p_k z_k (g_k)₊ with a subgradient (0 at kinks).
pub fn hinge_value_grad(inst: &CcpInstance, z: &[f64], x: &[f64]) -> (f64, Vec<f64>) {
    let mut val = 0.0;
    let mut grad = vec![0.0; x.len()];
    for k in 0..inst.n_scenarios() {
        let w = inst.probabilities[k] * z[k];
        if w <= 1e-12 {
            continue;
        }
        let (g, sg) = inst.constraints.value_grad(k, x);
        if g > 0.0 {
            val += w * g;
            for (a, b) in grad.iter_mut().zip(&sg) {
                *a += w * b;
            }
        }
    }
    (val, grad)
}

/// Minimize Σ p_k z_k (g(x, ξᵏ))₊ over X ∩ {cᵀx ≤ t} (t = ∞ drops the budget).
pub fn solve_hinge_sgd(inst: &CcpInstance, t: f64, z: &[f64], x0: &[f64], cfg: &SgdConfig) -> Result<(Vec<f64>, f64)> {
    let set = prepared_budget_set(inst, t)?;
    let scale = step_scale(&set, x0);
    let out = minimize(x0, |x| hinge_value_grad(inst, z, x), |y| set.project(y), scale, cfg)?;
    Ok((out.x, out.value))
}

pub(crate) fn prepared_budget_set(inst: &CcpInstance, t: f64) -> Result<PreparedSet> {
    let budget = t.is_finite().then_some((inst.cost.as_slice(), t));
    PreparedSet::new(&inst.x_set, inst.n, budget).map_err(|e| match e {
        CcpError::Infeasible(_) => CcpError::InfeasibleBudget { t },
        other => other,
    })
}

/// CVaR lower-level objective Σ p_k max{g_k, β} − (1−ε)β and its subgradient in (x, β).
pub fn cvar_lower_value_grad(inst: &CcpInstance, xb: &[f64]) -> (f64, Vec<f64>) {
    let n = inst.n;
    let (x, beta) = (&xb[..n], xb[n]);
    let mut val = -(1.0 - inst.epsilon) * beta;
    let mut grad = vec![0.0; n + 1];
    grad[n] = -(1.0 - inst.epsilon);
    for k in 0..inst.n_scenarios() {
        let p = inst.probabilities[k];
        let (g, sg) = inst.constraints.value_grad(k, x);
        if g > beta {
            val += p * g;
            for (a, b) in grad[..n].iter_mut().zip(&sg) {
                *a += p * b;
            }
        } else {
            val += p * beta;
            grad[n] += p;
        }
    }
    (val, grad)
}

/// Minimize the CVaR lower-level objective over x ∈ X ∩ {cᵀx ≤ t}, β ≤ 0.
pub fn solve_cvar_lower_sgd(
    inst: &CcpInstance,
    t: f64,
    x0: &[f64],
    beta0: f64,
    cfg: &SgdConfig,
) -> Result<(Vec<f64>, f64, f64)> {
    let set = prepared_budget_set(inst, t)?;
    let n = inst.n;
    let mut start = x0.to_vec();
    start.push(beta0.min(0.0));
    let scale = step_scale(&set, x0);
    let out = minimize(
        &start,
        |xb| cvar_lower_value_grad(inst, xb),
        |y| {
            let mut p = set.project(&y[..n])?;
            p.push(y[n].min(0.0));
            Ok(p)
        },
        scale,
        cfg,
    )?;
    let beta = out.x[n];
    Ok((out.x[..n].to_vec(), beta, out.value))
}
