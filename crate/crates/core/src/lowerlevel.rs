//! Lower-level problem: min Σ p_k z_k s_k over x ∈ X, cᵀx ≤ t, with backend dispatch.

use serde::{Deserialize, Serialize};

use crate::error::{CcpError, Result};
use crate::linform::LinearForm;
use crate::lp::{solve_lp, LpOutcome};
use crate::model::{CcpInstance, FeasibleSet, TOL_ZERO};
use crate::subgrad::{prepared_budget_set, solve_hinge_sgd, SgdConfig};

/// Largest LP (x plus per-row scenario data) solved by the dense simplex.
pub const LP_SIZE_LIMIT: usize = 10_000;
/// Largest binary dimension enumerated.
pub const ENUM_DIM_LIMIT: usize = 20;
const ZERO_WEIGHT: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Backend {
    #[default]
    Auto,
    Lp,
    Sgd,
    Enumeration,
    ClosedForm,
}

impl Backend {
    pub fn tag(self) -> &'static str {
        match self {
            Backend::Auto => "auto",
            Backend::Lp => "lp",
            Backend::Sgd => "sgd",
            Backend::Enumeration => "enumeration",
            Backend::ClosedForm => "closed_form",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct LowerLevelOptions {
    pub backend: Backend,
    pub sgd: SgdConfig,
}

impl LowerLevelOptions {
    pub fn with_backend(backend: Backend) -> Self {
        LowerLevelOptions { backend, ..Default::default() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LowerLevelSolution {
    pub x: Vec<f64>,
    pub s: Vec<f64>,
    pub z: Vec<f64>,
    pub value: f64,
    pub backend: Backend,
}

impl LowerLevelSolution {
    pub fn at(inst: &CcpInstance, x: Vec<f64>, z: Vec<f64>, backend: Backend) -> Self {
        let s = inst.violations(&x);
        let value = s.iter().zip(&z).zip(&inst.probabilities).map(|((s, z), p)| p * z * s).sum();
        LowerLevelSolution { x, s, z, value, backend }
    }
}

/// Resolve `Auto` and check that an explicit hint applies to this instance.
pub fn select_backend(inst: &CcpInstance, hint: Backend) -> Result<Backend> {
    let binary = inst.x_set.is_binary();
    let lp_size = inst.n + LinearForm::of(inst).map_or(usize::MAX, |f| f.n_rows());
    let lp_ok = !binary && lp_size <= LP_SIZE_LIMIT;
    match hint {
        Backend::Auto if binary => select_backend(inst, Backend::Enumeration),
        Backend::Auto if lp_ok => Ok(Backend::Lp),
        Backend::Auto => Ok(Backend::Sgd),
        Backend::Lp if lp_ok => Ok(Backend::Lp),
        Backend::Lp => Err(CcpError::BackendUnavailable("LP backend needs a polyhedral model and continuous X".into())),
        Backend::Enumeration if binary && inst.n <= ENUM_DIM_LIMIT => Ok(Backend::Enumeration),
        Backend::Enumeration if binary => Err(CcpError::CapExceeded { count: 1u128 << inst.n.min(127), cap: 1 << ENUM_DIM_LIMIT }),
        Backend::Enumeration => Err(CcpError::BackendUnavailable("enumeration needs a binary X".into())),
        Backend::Sgd if binary => Err(CcpError::BackendUnavailable("subgradient backend needs a convex X".into())),
        Backend::Sgd => Ok(Backend::Sgd),
        Backend::ClosedForm => Err(CcpError::BackendUnavailable("closed form applies to elliptical instances".into())),
    }
}

fn check_weights(inst: &CcpInstance, z: &[f64]) -> Result<Vec<f64>> {
    if z.len() != inst.n_scenarios() {
        return Err(CcpError::Dimension(format!("z has length {}, expected {}", z.len(), inst.n_scenarios())));
    }
    if z.iter().any(|v| !(*v >= -1e-12 && *v <= 1.0 + 1e-12)) {
        return Err(CcpError::validation("z", "entries must lie in [0, 1]"));
    }
    let mass: f64 = z.iter().zip(&inst.probabilities).map(|(z, p)| z * p).sum();
    if mass < 1.0 - inst.epsilon - 1e-9 {
        return Err(CcpError::validation("z", format!("mass {mass} below 1 - epsilon")));
    }
    Ok(z.iter().map(|v| if *v < ZERO_WEIGHT { 0.0 } else { v.min(1.0) }).collect())
}

/// Solve the lower-level problem with weights `z` (all ones when `None`).
pub fn solve_lower_level(inst: &CcpInstance, t: f64, z: Option<&[f64]>, hint: Backend) -> Result<LowerLevelSolution> {
    solve_lower_level_with(inst, t, z, &LowerLevelOptions::with_backend(hint))
}

pub fn solve_lower_level_with(
    inst: &CcpInstance,
    t: f64,
    z: Option<&[f64]>,
    opts: &LowerLevelOptions,
) -> Result<LowerLevelSolution> {
    if !t.is_finite() {
        return Err(CcpError::validation("t", "must be finite"));
    }
    let z = match z {
        Some(z) => check_weights(inst, z)?,
        None => vec![1.0; inst.n_scenarios()],
    };
    match select_backend(inst, opts.backend)? {
        Backend::Lp => lp_weighted(inst, t, &z),
        Backend::Enumeration => enumerate(inst, t, &z).map(|(sol, _)| sol),
        _ => {
            let x0 = sgd_start(inst, t)?;
            let (x, _) = solve_hinge_sgd(inst, t, &z, &x0, &opts.sgd)?;
            Ok(LowerLevelSolution::at(inst, x, z, Backend::Sgd))
        }
    }
}

pub(crate) fn sgd_start(inst: &CcpInstance, t: f64) -> Result<Vec<f64>> {
    let set = prepared_budget_set(inst, t)?;
    let x = set.project_lenient(&vec![0.0; inst.n]);
    if !set.contains(&x, 1e-6) {
        return Err(CcpError::InfeasibleBudget { t });
    }
    Ok(x)
}

struct HingeLp {
    b: crate::linform::LpBuilder,
    s: Vec<usize>,
}

fn hinge_lp(inst: &CcpInstance, form: &LinearForm, t: f64, weights: &[f64]) -> HingeLp {
    let mut b = form.builder(inst);
    let s: Vec<usize> = weights.iter().map(|w| b.add_var(*w, 0.0, f64::INFINITY)).collect();
    b.finish_structure();
    b.add_budget(&inst.cost, t);
    for (k, &sk) in s.iter().enumerate() {
        b.add_scenario_le(k, &[(sk, 1.0)]);
    }
    HingeLp { b, s }
}

fn solve_or_budget(lp: &crate::lp::LpProblem, t: f64) -> Result<(Vec<f64>, f64)> {
    match solve_lp(lp)? {
        LpOutcome::Optimal { x, value, .. } => Ok((x, value)),
        LpOutcome::Infeasible => Err(CcpError::InfeasibleBudget { t }),
        LpOutcome::Unbounded => Err(CcpError::Unbounded("lower-level LP".into())),
    }
}

fn face_slack(v: f64) -> f64 {
    1e-9 * (1.0 + v.abs())
}

/// Weighted LP solve; ties are broken by minimizing Σ p_k (1 + k/N) s_k on the optimal face.
fn lp_weighted(inst: &CcpInstance, t: f64, z: &[f64]) -> Result<LowerLevelSolution> {
    let form = LinearForm::of(inst).ok_or_else(|| CcpError::BackendUnavailable("non-polyhedral model".into()))?;
    let nn = inst.n_scenarios() as f64;
    let w: Vec<f64> = z.iter().zip(&inst.probabilities).map(|(z, p)| z * p).collect();
    let mut h = hinge_lp(inst, &form, t, &w);
    let (_, v1) = solve_or_budget(&h.b.lp, t)?;
    let mut row = h.b.zero_row();
    for (k, &sk) in h.s.iter().enumerate() {
        row[sk] = w[k];
        h.b.lp.c[sk] = inst.probabilities[k] * (1.0 + k as f64 / nn);
    }
    h.b.lp.add_le(row, v1 + face_slack(v1));
    let (x, _) = solve_or_budget(&h.b.lp, t)?;
    Ok(LowerLevelSolution::at(inst, x[..inst.n].to_vec(), z.to_vec(), Backend::Lp))
}

/// Chance-feasibility verdict of the hinge-loss minimizers at budget t.
#[derive(Debug, Clone, PartialEq)]
pub struct HingeVerdict {
    /// Representative minimizer (relative-interior point of the optimal face on the LP backend).
    pub solution: LowerLevelSolution,
    /// Scenarios violated by some minimizer.
    pub violated: Vec<bool>,
    pub violated_mass: f64,
    pub feasible: bool,
}

/// Solve the unweighted hinge problem and decide chance feasibility.
///
/// The LP and enumeration backends accept t only when every minimizer is chance-feasible,
/// so the verdict does not depend on which optimal vertex the simplex happens to return.
pub fn hinge_verdict(inst: &CcpInstance, t: f64, opts: &LowerLevelOptions) -> Result<HingeVerdict> {
    if !t.is_finite() {
        return Err(CcpError::validation("t", "must be finite"));
    }
    let z = vec![1.0; inst.n_scenarios()];
    match select_backend(inst, opts.backend)? {
        Backend::Lp => lp_verdict(inst, t),
        Backend::Enumeration => {
            let (solution, violated) = enumerate(inst, t, &z)?;
            Ok(finish_verdict(inst, solution, violated))
        }
        _ => {
            let solution = solve_lower_level_with(inst, t, None, &LowerLevelOptions { backend: Backend::Sgd, ..opts.clone() })?;
            let violated = inst.violated(&solution.x, TOL_ZERO);
            Ok(finish_verdict(inst, solution, violated))
        }
    }
}

fn finish_verdict(inst: &CcpInstance, solution: LowerLevelSolution, violated: Vec<bool>) -> HingeVerdict {
    let violated_mass: f64 = violated.iter().zip(&inst.probabilities).filter(|(v, _)| **v).map(|(_, p)| p).sum();
    let feasible = inst.mass_within_risk(violated_mass) && inst.is_feasible(&solution.x);
    HingeVerdict { solution, violated, violated_mass, feasible }
}

fn lp_verdict(inst: &CcpInstance, t: f64) -> Result<HingeVerdict> {
    let form = LinearForm::of(inst).ok_or_else(|| CcpError::BackendUnavailable("non-polyhedral model".into()))?;
    let n = inst.n;
    let nscen = inst.n_scenarios();
    let mut h = hinge_lp(inst, &form, t, &inst.probabilities);
    let (x0, v) = solve_or_budget(&h.b.lp, t)?;
    let slack = face_slack(v);
    let mut row = h.b.zero_row();
    for (k, &sk) in h.s.iter().enumerate() {
        row[sk] = inst.probabilities[k];
    }
    h.b.lp.add_le(row, v + slack);
    let detect: Vec<f64> = (0..nscen)
        .map(|k| inst.tol_zero(k, TOL_ZERO).max(20.0 * slack / inst.probabilities[k].max(1e-300)))
        .collect();
    let mark = |x: &[f64], violated: &mut Vec<bool>| -> bool {
        let mut grew = false;
        for k in 0..nscen {
            if !violated[k] && inst.g(k, x) > detect[k] {
                violated[k] = true;
                grew = true;
            }
        }
        grew
    };
    let mut violated = vec![false; nscen];
    mark(&x0[..n], &mut violated);
    let mut points = vec![x0[..n].to_vec()];
    loop {
        let mass: f64 = violated.iter().zip(&inst.probabilities).filter(|(v, _)| **v).map(|(_, p)| p).sum();
        if !inst.mass_within_risk(mass) || violated.iter().all(|v| *v) {
            break;
        }
        for (k, &sk) in h.s.iter().enumerate() {
            h.b.lp.c[sk] = if violated[k] { 0.0 } else { -1.0 };
        }
        let (x, _) = solve_or_budget(&h.b.lp, t)?;
        let xk = x[..n].to_vec();
        if !mark(&xk, &mut violated) {
            break;
        }
        points.push(xk);
    }
    let mut center = vec![0.0; n];
    for p in &points {
        for (c, v) in center.iter_mut().zip(p) {
            *c += v / points.len() as f64;
        }
    }
    let solution = LowerLevelSolution::at(inst, center, vec![1.0; nscen], Backend::Lp);
    Ok(finish_verdict(inst, solution, violated))
}

/// Enumerate {0,1}ⁿ ∩ X ∩ {cᵀx ≤ t}; returns the first minimizer and the union of violations
/// over all minimizers.
fn enumerate(inst: &CcpInstance, t: f64, z: &[f64]) -> Result<(LowerLevelSolution, Vec<bool>)> {
    let n = inst.n;
    if n > ENUM_DIM_LIMIT {
        return Err(CcpError::CapExceeded { count: 1u128 << n.min(127), cap: 1 << ENUM_DIM_LIMIT });
    }
    let mut best: Option<(f64, Vec<f64>)> = None;
    let mut values = Vec::new();
    for mask in 0u64..(1u64 << n) {
        let x: Vec<f64> = (0..n).map(|j| ((mask >> j) & 1) as f64).collect();
        if inst.cost_of(&x) > t + 1e-9 * (1.0 + t.abs()) || !inst.x_set.contains(&x, 1e-9) {
            continue;
        }
        let v = inst.weighted_loss(&x, z);
        if best.as_ref().is_none_or(|(b, _)| v < *b - 1e-12) {
            best = Some((v, x.clone()));
        }
        values.push((v, x));
    }
    let (bv, bx) = best.ok_or(CcpError::InfeasibleBudget { t })?;
    let mut violated = vec![false; inst.n_scenarios()];
    for (v, x) in values.iter().filter(|(v, _)| *v <= bv + 1e-12) {
        let _ = v;
        for (flag, hit) in violated.iter_mut().zip(inst.violated(x, TOL_ZERO)) {
            *flag |= hit;
        }
    }
    Ok((LowerLevelSolution::at(inst, bx, z.to_vec(), Backend::Enumeration), violated))
}

/// Lattice points of a binary X (used by the CVaR and oracle enumerations).
pub(crate) fn binary_points(x_set: &FeasibleSet, n: usize) -> Result<Vec<Vec<f64>>> {
    if n > ENUM_DIM_LIMIT {
        return Err(CcpError::CapExceeded { count: 1u128 << n.min(127), cap: 1 << ENUM_DIM_LIMIT });
    }
    Ok((0u64..(1u64 << n))
        .map(|mask| (0..n).map(|j| ((mask >> j) & 1) as f64).collect::<Vec<f64>>())
        .filter(|x| x_set.contains(x, 1e-9))
        .collect())
}
