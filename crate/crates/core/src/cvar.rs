//! CVaR inner approximation: direct LP, lattice enumeration and a bisection fallback.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::alsox::{bisect, finish_report, BisectionConfig, Bisection};
use crate::covering::quantile_lower_bound;
use crate::error::{CcpError, Result};
use crate::linform::LinearForm;
use crate::lowerlevel::{binary_points, select_backend, sgd_start, Backend, LowerLevelOptions};
use crate::lp::{solve_lp, LpOutcome};
use crate::model::{CcpInstance, SolveReport};
use crate::subgrad::solve_cvar_lower_sgd;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvarSolution {
    pub x: Vec<f64>,
    pub beta: f64,
    pub value: f64,
    /// β + (1/ε) Σ p_k (g_k − β)₊ at the minimizing β ≤ 0.
    pub cvar_slack: f64,
}

/// min over β ≤ 0 of β + (1/ε) Σ p_k (g_k − β)₊ and the minimizing β.
pub fn cvar_slack(inst: &CcpInstance, x: &[f64]) -> (f64, f64) {
    let g: Vec<f64> = (0..inst.n_scenarios()).map(|k| inst.g(k, x)).collect();
    let eval = |beta: f64| {
        beta + g.iter().zip(&inst.probabilities).map(|(g, p)| p * (g - beta).max(0.0)).sum::<f64>() / inst.epsilon
    };
    g.iter()
        .map(|v| v.min(0.0))
        .chain(std::iter::once(0.0))
        .map(|b| (eval(b), b))
        .min_by(|a, b| a.0.total_cmp(&b.0))
        .expect("nonempty candidates")
}

fn solution_at(inst: &CcpInstance, x: Vec<f64>) -> CvarSolution {
    let (slack, beta) = cvar_slack(inst, &x);
    CvarSolution { value: inst.cost_of(&x), x, beta, cvar_slack: slack }
}

fn cvar_lp(inst: &CcpInstance, form: &LinearForm) -> Result<CvarSolution> {
    let mut b = form.builder(inst);
    b.lp.c[..inst.n].copy_from_slice(&inst.cost);
    let w: Vec<usize> = (0..inst.n_scenarios()).map(|_| b.add_var(0.0, 0.0, f64::INFINITY)).collect();
    let beta = b.add_var(0.0, f64::NEG_INFINITY, 0.0);
    b.finish_structure();
    for (k, &wk) in w.iter().enumerate() {
        b.add_scenario_le(k, &[(wk, 1.0), (beta, 1.0)]);
    }
    let mut row = b.zero_row();
    row[beta] = 1.0;
    for (k, &wk) in w.iter().enumerate() {
        row[wk] = inst.probabilities[k] / inst.epsilon;
    }
    b.lp.add_le(row, 0.0);
    match solve_lp(&b.lp)? {
        LpOutcome::Optimal { x, .. } => {
            let mut sol = solution_at(inst, x[..inst.n].to_vec());
            sol.beta = x[beta];
            Ok(sol)
        }
        LpOutcome::Infeasible => Err(CcpError::Infeasible("CVaR constraint system".into())),
        LpOutcome::Unbounded => Err(CcpError::Unbounded("CVaR approximation".into())),
    }
}

fn cvar_enumerate(inst: &CcpInstance) -> Result<CvarSolution> {
    binary_points(&inst.x_set, inst.n)?
        .into_iter()
        .filter(|x| cvar_slack(inst, x).0 <= 1e-9)
        .min_by(|a, b| inst.cost_of(a).total_cmp(&inst.cost_of(b)))
        .map(|x| solution_at(inst, x))
        .ok_or_else(|| CcpError::Infeasible("no lattice point satisfies the CVaR constraint".into()))
}

/// Raw lower-level CVaR value min Σ p_k max{g_k, β} − (1−ε)β over x ∈ S, β ≤ 0, and its x.
pub fn cvar_lower_solve(inst: &CcpInstance, t: f64, opts: &LowerLevelOptions) -> Result<(Vec<f64>, f64, f64)> {
    if !t.is_finite() {
        return Err(CcpError::validation("t", "must be finite"));
    }
    match select_backend(inst, opts.backend)? {
        Backend::Lp => {
            let form = LinearForm::of(inst).expect("LP backend implies polyhedral rows");
            let mut b = form.builder(inst);
            let s: Vec<usize> =
                inst.probabilities.iter().map(|p| b.add_var(*p, f64::NEG_INFINITY, f64::INFINITY)).collect();
            let beta = b.add_var(-(1.0 - inst.epsilon), f64::NEG_INFINITY, 0.0);
            b.finish_structure();
            b.add_budget(&inst.cost, t);
            for (k, &sk) in s.iter().enumerate() {
                b.add_scenario_le(k, &[(sk, 1.0)]);
                let mut row = b.zero_row();
                row[beta] = 1.0;
                row[sk] = -1.0;
                b.lp.add_le(row, 0.0);
            }
            match solve_lp(&b.lp)? {
                LpOutcome::Optimal { x, value, .. } => Ok((x[..inst.n].to_vec(), x[beta], value)),
                LpOutcome::Infeasible => Err(CcpError::InfeasibleBudget { t }),
                LpOutcome::Unbounded => Err(CcpError::Unbounded("CVaR lower level".into())),
            }
        }
        Backend::Enumeration => binary_points(&inst.x_set, inst.n)?
            .into_iter()
            .filter(|x| inst.cost_of(x) <= t + 1e-9 * (1.0 + t.abs()))
            .map(|x| {
                let (slack, beta) = cvar_slack(inst, &x);
                (x, beta, inst.epsilon * slack)
            })
            .min_by(|a, b| a.2.total_cmp(&b.2))
            .ok_or(CcpError::InfeasibleBudget { t }),
        _ => {
            let x0 = sgd_start(inst, t)?;
            let (x, _, _) = solve_cvar_lower_sgd(inst, t, &x0, 0.0, &opts.sgd)?;
            let (slack, beta) = cvar_slack(inst, &x);
            Ok((x, beta, inst.epsilon * slack))
        }
    }
}

/// v^CVaR(t)₊: zero exactly when the budget t admits a CVaR-feasible point.
pub fn cvar_lower_value(inst: &CcpInstance, t: f64) -> Result<f64> {
    Ok(cvar_lower_solve(inst, t, &LowerLevelOptions::default())?.2.max(0.0))
}

pub fn solve_cvar(inst: &CcpInstance) -> Result<SolveReport> {
    solve_cvar_with(inst, &BisectionConfig::default(), &LowerLevelOptions::default())
}

/// Direct LP or lattice enumeration when available, otherwise bisection on t.
pub fn solve_cvar_with(inst: &CcpInstance, cfg: &BisectionConfig, opts: &LowerLevelOptions) -> Result<SolveReport> {
    let start = Instant::now();
    let backend = select_backend(inst, opts.backend)?;
    let sol = match backend {
        Backend::Lp => cvar_lp(inst, &LinearForm::of(inst).expect("polyhedral"))?,
        Backend::Enumeration => cvar_enumerate(inst)?,
        _ => return cvar_bisection(inst, cfg, opts, start),
    };
    let mut r = SolveReport::for_point(inst, "cvar", sol.x.clone());
    r.backend = backend.tag().to_string();
    r.wall_time = start.elapsed().as_secs_f64();
    Ok(r.with_config("beta", sol.beta).with_config("cvar_slack", sol.cvar_slack))
}

fn cvar_bisection(
    inst: &CcpInstance,
    cfg: &BisectionConfig,
    opts: &LowerLevelOptions,
    start: Instant,
) -> Result<SolveReport> {
    let t_l = cfg.t_lower.map_or_else(|| quantile_lower_bound(inst), Ok)?;
    let t_u = match cfg.t_upper {
        Some(u) => u,
        None => crate::alsox::fallback_upper(inst)?.max(if t_l.is_finite() { t_l } else { f64::NEG_INFINITY }),
    };
    let run: Bisection = bisect(cfg, t_l, t_u, |t| {
        let (x, _, _) = cvar_lower_solve(inst, t, opts)?;
        let (slack, _) = cvar_slack(inst, &x);
        Ok((slack <= 1e-7).then_some(x))
    })
    .map_err(|e| match e {
        CcpError::NoFeasibleT { .. } => CcpError::Infeasible("CVaR constraint system".into()),
        other => other,
    })?;
    Ok(finish_report(inst, "cvar", run, "sgd", cfg, start))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog;

    #[test]
    fn three_point_shift_cvar() {
        let r = solve_cvar(&catalog::three_point_shift()).unwrap();
        assert!((r.objective - 8.0 / 3.0).abs() < 1e-6);
        assert!(r.feasible);
    }

    #[test]
    fn symmetric_triangle_cvar() {
        let r = solve_cvar(&catalog::symmetric_triangle()).unwrap();
        assert!((r.objective - 2.0 / 3.0).abs() < 1e-6);
        assert!((r.x_star[0] - 1.0 / 3.0).abs() < 1e-6 && (r.x_star[1] - 1.0 / 3.0).abs() < 1e-6);
    }

    #[test]
    fn divergent_bisection_cvar_infeasible() {
        assert!(matches!(solve_cvar(&catalog::divergent_bisection()), Err(CcpError::Infeasible(_))));
    }

    #[test]
    fn lower_values() {
        let inst = catalog::three_point_shift();
        assert!(cvar_lower_value(&inst, 8.0 / 3.0).unwrap().abs() < 1e-9);
        assert!(cvar_lower_value(&inst, 2.0).unwrap() > 1e-3);
        assert_eq!(cvar_lower_value(&inst, 1e6).unwrap(), 0.0);
    }
}
