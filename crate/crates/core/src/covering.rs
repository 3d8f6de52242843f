//! Covering relaxation, relax-and-scale rounding and the quantile lower bound.

use crate::error::{CcpError, Result};
use crate::linform::LinearForm;
use crate::lowerlevel::{binary_points, sgd_start};
use crate::lp::{solve_lp, LpOutcome};
use crate::model::{CcpInstance, ConstraintModel, TOL_ZERO};
use crate::subgrad::{solve_hinge_sgd, SgdConfig};

#[derive(Debug, Clone, PartialEq)]
pub struct CoveringRelaxation {
    pub value: f64,
    pub x: Vec<f64>,
    pub s: Vec<f64>,
}

fn covering_rows(inst: &CcpInstance) -> Result<&Vec<Vec<Vec<f64>>>> {
    match &inst.constraints {
        ConstraintModel::Covering { a } => {
            if !inst.is_equiprobable() {
                return Err(CcpError::validation("probabilities", "covering bounds need equiprobable scenarios"));
            }
            Ok(a)
        }
        _ => Err(CcpError::validation("constraints", "a covering model is required")),
    }
}

/// min cᵀx s.t. Aᵏx ≥ (1 − s_k)e, Σ s_k ≤ ⌊Nε⌋, x ∈ X, s ≥ 0.
pub fn covering_relaxation(inst: &CcpInstance) -> Result<CoveringRelaxation> {
    let a = covering_rows(inst)?;
    let form = LinearForm::of(inst).expect("covering rows are polyhedral");
    let mut b = form.builder(inst);
    for j in 0..inst.n {
        b.lp.c[j] = inst.cost[j];
        b.lp.lo[j] = b.lp.lo[j].max(0.0);
    }
    let s: Vec<usize> = (0..a.len()).map(|_| b.add_var(0.0, 0.0, f64::INFINITY)).collect();
    b.finish_structure();
    for (k, &sk) in s.iter().enumerate() {
        b.add_scenario_le(k, &[(sk, 1.0)]);
    }
    let mut row = b.zero_row();
    for &sk in &s {
        row[sk] = 1.0;
    }
    b.lp.add_le(row, inst.max_drops() as f64);
    match solve_lp(&b.lp)? {
        LpOutcome::Optimal { x, value, .. } => Ok(CoveringRelaxation {
            value,
            s: s.iter().map(|&j| x[j]).collect(),
            x: x[..inst.n].to_vec(),
        }),
        LpOutcome::Infeasible => Err(CcpError::Infeasible("covering relaxation".into())),
        LpOutcome::Unbounded => Err(CcpError::Unbounded("covering relaxation".into())),
    }
}

/// Scale the relaxation point by ⌊Nε⌋+1 (clipped to X's bounds); returns (x, cᵀx).
pub fn relax_and_scale(inst: &CcpInstance) -> Result<(Vec<f64>, f64)> {
    let rel = covering_relaxation(inst)?;
    let factor = (inst.max_drops() + 1) as f64;
    let desc = inst.x_set.linear_description(inst.n);
    let x: Vec<f64> = rel.x.iter().enumerate().map(|(j, v)| (v * factor).min(desc.hi[j]).max(desc.lo[j])).collect();
    if !inst.is_feasible(&x) || !inst.x_set.contains(&x, 1e-7) {
        return Err(CcpError::Infeasible("scaled relaxation point leaves the feasible region".into()));
    }
    let value = inst.cost_of(&x);
    Ok((x, value))
}

/// min cᵀx over X (−∞ when unbounded).
pub fn min_cost_over_x(inst: &CcpInstance) -> Result<f64> {
    if inst.x_set.is_binary() {
        return binary_points(&inst.x_set, inst.n)?
            .iter()
            .map(|x| inst.cost_of(x))
            .min_by(f64::total_cmp)
            .ok_or_else(|| CcpError::Infeasible("X has no lattice points".into()));
    }
    let mut b = LinearForm::empty().builder(inst);
    b.lp.c[..inst.n].copy_from_slice(&inst.cost);
    b.finish_structure();
    match solve_lp(&b.lp)? {
        LpOutcome::Optimal { value, .. } => Ok(value),
        LpOutcome::Unbounded => Ok(f64::NEG_INFINITY),
        LpOutcome::Infeasible => Err(CcpError::Infeasible("X is empty".into())),
    }
}

/// h_k = min{cᵀx : x ∈ X, g(x, ξᵏ) ≤ 0}; +∞ when infeasible, −∞ when unbounded.
pub fn scenario_minima(inst: &CcpInstance) -> Result<Vec<f64>> {
    let nscen = inst.n_scenarios();
    if inst.x_set.is_binary() {
        let pts = binary_points(&inst.x_set, inst.n)?;
        return Ok((0..nscen)
            .map(|k| {
                pts.iter()
                    .filter(|x| inst.g(k, x) <= inst.tol_zero(k, TOL_ZERO))
                    .map(|x| inst.cost_of(x))
                    .fold(f64::INFINITY, f64::min)
            })
            .collect());
    }
    if let Some(form) = LinearForm::of(inst) {
        let mut out = Vec::with_capacity(nscen);
        let mut b = form.builder(inst);
        b.lp.c[..inst.n].copy_from_slice(&inst.cost);
        b.finish_structure();
        for k in 0..nscen {
            let mut bk = b.clone();
            bk.add_scenario_le(k, &[]);
            out.push(match solve_lp(&bk.lp)? {
                LpOutcome::Optimal { value, .. } => value,
                LpOutcome::Infeasible => f64::INFINITY,
                LpOutcome::Unbounded => f64::NEG_INFINITY,
            });
        }
        return Ok(out);
    }
    (0..nscen)
        .map(|k| Ok(nonlinear_subset_minimum(inst, &[k])?.map_or(f64::INFINITY, |(lo, _, _)| lo)))
        .collect()
}

/// Bracket [lo, hi] on min{cᵀx : x ∈ X, g_k(x) ≤ 0 for k ∈ kept} from bisection with a
/// subgradient feasibility test, with a feasible point at hi. `None` when the hinge value
/// stays above 1e-6 for every budget; lo = −∞ when every tried budget is feasible.
pub(crate) fn nonlinear_subset_minimum(inst: &CcpInstance, kept: &[usize]) -> Result<Option<(f64, f64, Vec<f64>)>> {
    let cfg = SgdConfig::default().with_max_iter(20_000);
    let mut z = vec![0.0; inst.n_scenarios()];
    let mass: f64 = kept.iter().map(|&k| inst.probabilities[k]).sum();
    for &k in kept {
        z[k] = 1.0 / mass;
    }
    let tol = kept.iter().map(|&k| inst.tol_zero(k, 1e-6)).fold(0.0, f64::max);
    let feasible_at = |t: f64| -> Result<Option<Vec<f64>>> {
        let x0 = match sgd_start(inst, t) {
            Ok(x) => x,
            Err(CcpError::InfeasibleBudget { .. }) => return Ok(None),
            Err(e) => return Err(e),
        };
        let (x, v) = solve_hinge_sgd(inst, t, &z, &x0, &cfg)?;
        Ok((v <= tol).then_some(x))
    };
    let Some(mut x_hi) = feasible_at(f64::INFINITY)? else { return Ok(None) };
    let mut hi = inst.cost_of(&x_hi);
    let mut lo = min_cost_over_x(inst)?;
    if lo == f64::NEG_INFINITY {
        let d = hi.abs().max(1.0);
        let mut found = false;
        for j in 0..60 {
            let t = hi - d * 2f64.powi(j);
            match feasible_at(t)? {
                None => {
                    lo = t;
                    found = true;
                    break;
                }
                Some(x) => {
                    hi = inst.cost_of(&x).min(t);
                    x_hi = x;
                }
            }
        }
        if !found {
            return Ok(Some((f64::NEG_INFINITY, hi, x_hi)));
        }
    } else if let Some(x) = feasible_at(lo)? {
        return Ok(Some((lo, lo, x)));
    }
    while hi - lo > 1e-6 * (1.0 + hi.abs()) {
        let mid = 0.5 * (lo + hi);
        match feasible_at(mid)? {
            Some(x) => {
                hi = mid;
                x_hi = x;
            }
            None => lo = mid,
        }
    }
    Ok(Some((lo, hi, x_hi)))
}

/// Smallest h with ascending cumulative mass ≥ 1 − ε (the (⌊Nε⌋+1)-th largest for equal weights).
pub fn quantile_from_minima(inst: &CcpInstance, h: &[f64]) -> f64 {
    let mut idx: Vec<usize> = (0..h.len()).collect();
    idx.sort_by(|a, b| h[*a].total_cmp(&h[*b]).then(a.cmp(b)));
    let mut mass = 0.0;
    for &k in &idx {
        mass += inst.probabilities[k];
        if mass >= 1.0 - inst.epsilon - 1e-9 {
            return h[k];
        }
    }
    f64::INFINITY
}

/// Order-statistic lower bound on the optimal value from the single-scenario minima.
pub fn quantile_lower_bound(inst: &CcpInstance) -> Result<f64> {
    Ok(quantile_from_minima(inst, &scenario_minima(inst)?))
}
