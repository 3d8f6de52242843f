//! Alternating minimization, the ALSO-X+ driver and the difference-of-convex baseline.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::alsox::{bisect, finish_report, resolve_bounds, BisectionConfig};
use crate::error::{CcpError, Result};
use crate::lowerlevel::{hinge_verdict, select_backend, solve_lower_level_with, LowerLevelOptions};
use crate::model::{CcpInstance, SolveReport};
use crate::subgrad::prepared_budget_set;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AmState {
    pub x: Vec<f64>,
    pub s: Vec<f64>,
    pub z: Vec<f64>,
    /// Σ p_k z_k s_k.
    pub objective: f64,
    pub iteration: usize,
    /// Objective after the start and after every round.
    pub history: Vec<f64>,
    /// Chance feasibility of `x`.
    pub feasible: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AmConfig {
    pub delta2: f64,
    pub max_rounds: usize,
}

impl Default for AmConfig {
    fn default() -> Self {
        AmConfig { delta2: 1e-2, max_rounds: 100 }
    }
}

impl AmConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.delta2 > 0.0) {
            return Err(CcpError::validation("delta2", "must be > 0"));
        }
        if self.max_rounds == 0 {
            return Err(CcpError::validation("max_rounds", "must be >= 1"));
        }
        Ok(())
    }
}

/// Where alternating minimization starts.
#[derive(Debug, Clone, PartialEq)]
pub enum AmStart {
    /// Solve the weighted problem with these weights first.
    Weights(Vec<f64>),
    /// Start from a known point and its violations (weights all ones).
    Violations { x: Vec<f64>, s: Vec<f64> },
}

/// Minimize Σ p_k z_k s_k over z ∈ [0,1]ᴺ with Σ p_k z_k ≥ 1 − ε by sorting s.
pub fn z_update(s: &[f64], p: &[f64], epsilon: f64) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..s.len()).collect();
    idx.sort_by(|a, b| s[*a].total_cmp(&s[*b]).then(a.cmp(b)));
    let mut need = 1.0 - epsilon;
    let mut z = vec![0.0; s.len()];
    for k in idx {
        if need <= 1e-12 {
            break;
        }
        if p[k] <= need + 1e-12 {
            z[k] = 1.0;
            need -= p[k];
        } else {
            z[k] = need / p[k];
            need = 0.0;
        }
    }
    z
}

fn weighted_objective(inst: &CcpInstance, z: &[f64], s: &[f64]) -> f64 {
    inst.probabilities.iter().zip(z).zip(s).map(|((p, z), s)| p * z * s).sum()
}

/// Alternating minimization from weights `z0`.
pub fn am(inst: &CcpInstance, t: f64, z0: &[f64], delta2: f64, max_rounds: usize) -> Result<AmState> {
    am_from(inst, t, AmStart::Weights(z0.to_vec()), &AmConfig { delta2, max_rounds }, &LowerLevelOptions::default())
}

pub fn am_from(inst: &CcpInstance, t: f64, start: AmStart, cfg: &AmConfig, opts: &LowerLevelOptions) -> Result<AmState> {
    cfg.validate()?;
    let nscen = inst.n_scenarios();
    let (mut x, mut s, mut z) = match start {
        AmStart::Weights(z0) => {
            let sol = solve_lower_level_with(inst, t, Some(&z0), opts)?;
            (sol.x, sol.s, sol.z)
        }
        AmStart::Violations { x, s } => {
            if x.len() != inst.n || s.len() != nscen {
                return Err(CcpError::Dimension("start point or violations have the wrong length".into()));
            }
            (x, s, vec![1.0; nscen])
        }
    };
    let mut obj = weighted_objective(inst, &z, &s);
    let mut history = vec![obj];
    let mut rounds = 0;
    while rounds < cfg.max_rounds {
        rounds += 1;
        let z_new = z_update(&s, &inst.probabilities, inst.epsilon);
        let sol = solve_lower_level_with(inst, t, Some(&z_new), opts)?;
        let candidate = weighted_objective(inst, &z_new, &sol.s);
        let kept = weighted_objective(inst, &z_new, &s);
        z = z_new;
        let new_obj = if candidate <= kept {
            x = sol.x;
            s = sol.s;
            candidate
        } else {
            kept
        };
        history.push(new_obj);
        let delta = (new_obj - obj).abs();
        obj = new_obj;
        if delta < cfg.delta2 {
            break;
        }
    }
    let feasible = inst.is_feasible(&x);
    Ok(AmState { x, s, z, objective: obj, iteration: rounds, history, feasible })
}

/// ALSO-X+ with default lower-level options.
pub fn also_x_plus(inst: &CcpInstance, cfg: &BisectionConfig, delta2: f64) -> Result<SolveReport> {
    also_x_plus_with(inst, cfg, &AmConfig { delta2, ..Default::default() }, &LowerLevelOptions::default())
}

/// Bisection where an infeasible hinge-loss point triggers an AM rescue at the same t,
/// started from the greedy weights of the hinge solution.
pub fn also_x_plus_with(
    inst: &CcpInstance,
    cfg: &BisectionConfig,
    am_cfg: &AmConfig,
    opts: &LowerLevelOptions,
) -> Result<SolveReport> {
    let start = Instant::now();
    am_cfg.validate()?;
    let backend = select_backend(inst, opts.backend)?;
    let (t_l, t_u) = resolve_bounds(inst, cfg, opts)?;
    let mut am_runs = 0usize;
    let mut rescues = 0usize;
    let mut monotone = true;
    let run = bisect(cfg, t_l, t_u, |t| {
        let v = hinge_verdict(inst, t, opts)?;
        if v.feasible {
            return Ok(Some(v.solution.x));
        }
        let z0 = z_update(&v.solution.s, &inst.probabilities, inst.epsilon);
        let state = am_from(inst, t, AmStart::Weights(z0), am_cfg, opts)?;
        am_runs += 1;
        monotone &= is_nonincreasing(&state.history);
        if state.feasible {
            rescues += 1;
            Ok(Some(state.x))
        } else {
            Ok(None)
        }
    })?;
    Ok(finish_report(inst, "alsoxplus", run, backend.tag(), cfg, start)
        .with_config("delta2", am_cfg.delta2)
        .with_config("am_runs", am_runs)
        .with_config("am_rescues", rescues)
        .with_config("am_monotone", monotone))
}

pub fn is_nonincreasing(history: &[f64]) -> bool {
    history.windows(2).all(|w| w[1] <= w[0] + 1e-9 * (1.0 + w[0].abs()))
}

/// Project onto {z ∈ [0,1]ᴺ : Σ p_k z_k ≥ mass}.
fn project_weights(y: &[f64], p: &[f64], mass: f64) -> Vec<f64> {
    let at = |lam: f64| -> Vec<f64> { y.iter().zip(p).map(|(v, pk)| (v + lam * pk).clamp(0.0, 1.0)).collect() };
    let total = |z: &[f64]| -> f64 { z.iter().zip(p).map(|(a, b)| a * b).sum() };
    let z0 = at(0.0);
    if total(&z0) >= mass {
        return z0;
    }
    let (mut lo, mut hi) = (0.0, 1.0);
    while total(&at(hi)) < mass && hi < 1e12 {
        hi *= 2.0;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if total(&at(mid)) >= mass {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    at(hi)
}

/// Bisection where each infeasible hinge point is refined by the DC baseline instead of AM.
pub fn dc_bisection(inst: &CcpInstance, cfg: &BisectionConfig, am_cfg: &AmConfig) -> Result<SolveReport> {
    let start = Instant::now();
    am_cfg.validate()?;
    let opts = LowerLevelOptions::default();
    let backend = select_backend(inst, opts.backend)?;
    let (t_l, t_u) = resolve_bounds(inst, cfg, &opts)?;
    let run = bisect(cfg, t_l, t_u, |t| {
        let v = hinge_verdict(inst, t, &opts)?;
        if v.feasible {
            return Ok(Some(v.solution.x));
        }
        let z0 = z_update(&v.solution.s, &inst.probabilities, inst.epsilon);
        let state = dc_solve(inst, t, Some(&v.solution.x), &v.solution.s, &z0, am_cfg.delta2, am_cfg.max_rounds)?;
        Ok(state.feasible.then_some(state.x))
    })?;
    Ok(finish_report(inst, "dc", run, backend.tag(), cfg, start).with_config("delta2", am_cfg.delta2))
}

/// Inner iterations of the projected-gradient DC subproblem solver.
const DC_INNER_ITERS: usize = 4_000;

/// Difference-of-convex baseline. With z^k, s^k fixed the convex subproblem is
/// ¼Σp(z+s)² − ½Σp(z^k−s^k)(z−s) over the lower-level constraints; s is eliminated in
/// closed form as s = max(g(x)₊, s^k − z^k − z).
pub fn dc_solve(
    inst: &CcpInstance,
    t: f64,
    x0: Option<&[f64]>,
    s0: &[f64],
    z0: &[f64],
    delta2: f64,
    max_rounds: usize,
) -> Result<AmState> {
    AmConfig { delta2, max_rounds }.validate()?;
    let nscen = inst.n_scenarios();
    if s0.len() != nscen || z0.len() != nscen {
        return Err(CcpError::Dimension("s0 and z0 need one entry per scenario".into()));
    }
    let set = prepared_budget_set(inst, t)?;
    let p = &inst.probabilities;
    let mass = 1.0 - inst.epsilon;
    let mut x = match x0 {
        Some(x) => set.project_lenient(x),
        None => hinge_verdict(inst, t, &LowerLevelOptions::default())?.solution.x,
    };
    let mut z = project_weights(z0, p, mass);
    let mut s: Vec<f64> = s0.iter().zip(inst.violations(&x)).map(|(a, b)| a.max(b)).collect();
    let mut obj = weighted_objective(inst, &z, &s);
    let mut history = vec![obj];
    let mut rounds = 0;
    let scale = set.box_diameter().unwrap_or(1.0).max(1.0);
    while rounds < max_rounds {
        rounds += 1;
        let (zk, sk) = (z.clone(), s.clone());
        let eval = |x: &[f64], z: &[f64]| -> (f64, Vec<f64>, Vec<f64>, Vec<f64>) {
            let mut f = 0.0;
            let mut gx = vec![0.0; x.len()];
            let mut gz = vec![0.0; nscen];
            let mut s = vec![0.0; nscen];
            for k in 0..nscen {
                let (g, sg) = inst.constraints.value_grad(k, x);
                let floor = sk[k] - zk[k] - z[k];
                let active = g > 0.0 && g >= floor;
                s[k] = g.max(0.0).max(floor);
                let d = zk[k] - sk[k];
                f += p[k] * (0.25 * (z[k] + s[k]).powi(2) - 0.5 * d * (z[k] - s[k]));
                let qs = 0.5 * (z[k] + s[k]) + 0.5 * d;
                gz[k] = p[k] * (0.5 * (z[k] + s[k]) - 0.5 * d);
                if active {
                    for (a, b) in gx.iter_mut().zip(&sg) {
                        *a += p[k] * qs * b;
                    }
                }
            }
            (f, gx, gz, s)
        };
        let (mut best_f, _, _, _) = eval(&x, &z);
        let (mut bx, mut bz) = (x.clone(), z.clone());
        let (mut cx, mut cz) = (x.clone(), z.clone());
        for j in 0..DC_INNER_ITERS {
            let (_, gx, gz, _) = eval(&cx, &cz);
            let step = scale / (j as f64 + 2.0);
            let yx: Vec<f64> = cx.iter().zip(&gx).map(|(a, g)| a - step * g / p_max(p)).collect();
            let yz: Vec<f64> = cz.iter().zip(&gz).map(|(a, g)| a - step * g / p_max(p)).collect();
            cx = set.project_lenient(&yx);
            cz = project_weights(&yz, p, mass);
            let (f, _, _, _) = eval(&cx, &cz);
            if f < best_f {
                best_f = f;
                bx.clone_from(&cx);
                bz.clone_from(&cz);
            }
        }
        x = bx;
        z = bz;
        s = eval(&x, &z).3;
        let new_obj = weighted_objective(inst, &z, &s);
        history.push(new_obj);
        let delta = (new_obj - obj).abs();
        obj = new_obj;
        if delta < delta2 {
            break;
        }
    }
    let feasible = inst.is_feasible(&x);
    Ok(AmState { x, s, z, objective: obj, iteration: rounds, history, feasible })
}

fn p_max(p: &[f64]) -> f64 {
    p.iter().fold(0.0f64, |m, v| m.max(*v))
}
