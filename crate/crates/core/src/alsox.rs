//! ALSO-X: bisection on the objective budget t with hinge-loss lower-level solves.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::covering::{covering_relaxation, min_cost_over_x, quantile_lower_bound};
use crate::cvar::solve_cvar_with;
use crate::error::{CcpError, Result};
use crate::lowerlevel::{hinge_verdict, select_backend, LowerLevelOptions};
use crate::model::{CcpInstance, SolveReport};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BisectionConfig {
    pub delta1: f64,
    pub t_lower: Option<f64>,
    pub t_upper: Option<f64>,
    pub max_bisections: usize,
    /// Largest t tried before giving up; default t_U0 + 10⁶·max(1, |t_U0|).
    pub infeasibility_cap: Option<f64>,
}

impl Default for BisectionConfig {
    fn default() -> Self {
        BisectionConfig { delta1: 1e-2, t_lower: None, t_upper: None, max_bisections: 200, infeasibility_cap: None }
    }
}

impl BisectionConfig {
    pub fn with_delta1(delta1: f64) -> Self {
        BisectionConfig { delta1, ..Default::default() }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.delta1 > 0.0) || !self.delta1.is_finite() {
            return Err(CcpError::validation("delta1", "must be finite and > 0"));
        }
        if let (Some(l), Some(u)) = (self.t_lower, self.t_upper) {
            if l > u {
                return Err(CcpError::validation("t_lower", "must not exceed t_upper"));
            }
        }
        if self.max_bisections == 0 {
            return Err(CcpError::validation("max_bisections", "must be >= 1"));
        }
        Ok(())
    }
}

/// Outcome of a bisection run.
#[derive(Debug, Clone, PartialEq)]
pub(crate) struct Bisection {
    pub t: f64,
    pub x: Vec<f64>,
    pub checks: usize,
    pub t_lower: f64,
    pub t_upper: f64,
}

/// Generic bisection: `check(t)` returns a feasible point at budget t or `None`.
/// Empty budget sets count as infeasible.
pub(crate) fn bisect<F>(cfg: &BisectionConfig, t_lower: f64, t_upper0: f64, mut check: F) -> Result<Bisection>
where
    F: FnMut(f64) -> Result<Option<Vec<f64>>>,
{
    cfg.validate()?;
    let mut checks = 0usize;
    let mut probe = |t: f64| -> Result<Option<Vec<f64>>> {
        checks += 1;
        match check(t) {
            Err(CcpError::InfeasibleBudget { .. }) => Ok(None),
            other => other,
        }
    };
    let scale = t_upper0.abs().max(1.0);
    let cap = cfg.infeasibility_cap.unwrap_or(t_upper0 + 1e6 * scale);
    let mut lo = t_lower;
    if lo.is_finite() {
        if let Some(x) = probe(lo)? {
            return Ok(Bisection { t: lo, x, checks, t_lower, t_upper: t_upper0 });
        }
    }
    let mut hi = t_upper0.max(if lo.is_finite() { lo } else { f64::NEG_INFINITY });
    let mut x_hi = probe(hi)?;
    let mut j = 0;
    while x_hi.is_none() {
        lo = hi;
        hi = t_upper0 + scale * 2f64.powi(j);
        j += 1;
        if hi > cap {
            return Err(CcpError::NoFeasibleT { cap });
        }
        x_hi = probe(hi)?;
    }
    let mut x_hi = x_hi.expect("feasible upper point");
    if !lo.is_finite() {
        let mut found = false;
        for j in 0..64 {
            let t = hi - scale * 2f64.powi(j);
            match probe(t)? {
                Some(x) => {
                    hi = t;
                    x_hi = x;
                }
                None => {
                    lo = t;
                    found = true;
                    break;
                }
            }
        }
        if !found {
            return Err(CcpError::Unbounded("every tried budget is feasible".into()));
        }
    }
    let mut steps = 0;
    while hi - lo > cfg.delta1 && steps < cfg.max_bisections {
        let mid = 0.5 * (lo + hi);
        match probe(mid)? {
            Some(x) => {
                hi = mid;
                x_hi = x;
            }
            None => lo = mid,
        }
        steps += 1;
    }
    Ok(Bisection { t: hi, x: x_hi, checks, t_lower, t_upper: t_upper0 })
}

/// (t_L, t_U) from the quantile bound (and the covering relaxation) and the CVaR value
/// (or the scaled covering relaxation).
pub fn default_bounds(inst: &CcpInstance) -> Result<(f64, f64)> {
    default_bounds_with(inst, &LowerLevelOptions::default())
}

pub fn default_bounds_with(inst: &CcpInstance, opts: &LowerLevelOptions) -> Result<(f64, f64)> {
    let mut lower = quantile_lower_bound(inst)?;
    let upper = if inst.constraints.is_covering() && inst.is_equiprobable() {
        let rel = covering_relaxation(inst)?;
        lower = lower.max(rel.value);
        (inst.max_drops() + 1) as f64 * rel.value
    } else {
        match solve_cvar_with(inst, &BisectionConfig::default(), opts) {
            Ok(r) => r.objective,
            Err(e) if e.is_infeasibility() => fallback_upper(inst)?,
            Err(e) => return Err(e),
        }
    };
    if lower == f64::INFINITY {
        return Err(CcpError::Infeasible("too many scenarios are individually infeasible".into()));
    }
    let upper = if lower.is_finite() { upper.max(lower) } else { upper };
    Ok((lower, upper))
}

pub(crate) fn fallback_upper(inst: &CcpInstance) -> Result<f64> {
    let m = min_cost_over_x(inst)?;
    Ok(if m.is_finite() { m } else { 0.0 })
}

pub(crate) fn resolve_bounds(inst: &CcpInstance, cfg: &BisectionConfig, opts: &LowerLevelOptions) -> Result<(f64, f64)> {
    cfg.validate()?;
    match (cfg.t_lower, cfg.t_upper) {
        (Some(l), Some(u)) => Ok((l, u)),
        (l, u) => {
            let (dl, du) = default_bounds_with(inst, opts)?;
            let l = l.unwrap_or(dl);
            Ok((l, u.unwrap_or(du).max(if l.is_finite() { l } else { du })))
        }
    }
}

/// ALSO-X with default lower-level options.
pub fn also_x(inst: &CcpInstance, cfg: &BisectionConfig) -> Result<SolveReport> {
    also_x_with(inst, cfg, &LowerLevelOptions::default())
}

pub fn also_x_with(inst: &CcpInstance, cfg: &BisectionConfig, opts: &LowerLevelOptions) -> Result<SolveReport> {
    let start = Instant::now();
    let backend = select_backend(inst, opts.backend)?;
    let (t_l, t_u) = resolve_bounds(inst, cfg, opts)?;
    let run = bisect(cfg, t_l, t_u, |t| {
        let v = hinge_verdict(inst, t, opts)?;
        Ok(v.feasible.then_some(v.solution.x))
    })?;
    Ok(finish_report(inst, "alsox", run, backend.tag(), cfg, start))
}

pub(crate) fn finish_report(
    inst: &CcpInstance,
    method: &str,
    run: Bisection,
    backend: &str,
    cfg: &BisectionConfig,
    start: Instant,
) -> SolveReport {
    let mut r = SolveReport::for_point(inst, method, run.x);
    r.t_star = run.t;
    r.iterations = run.checks;
    r.lower_bound_used = run.t_lower;
    r.upper_bound_used = run.t_upper;
    r.backend = backend.to_string();
    r.wall_time = start.elapsed().as_secs_f64();
    r.with_config("delta1", cfg.delta1).with_config("max_bisections", cfg.max_bisections)
}
