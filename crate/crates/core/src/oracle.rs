//! Exact solvers for small instances: enumeration of droppable scenario sets, lattice
//! enumeration for binary X, and the nullspace-property check for equality losses.

use serde::{Deserialize, Serialize};

use crate::covering::{nonlinear_subset_minimum, scenario_minima};
use crate::error::{CcpError, Result};
use crate::linform::LinearForm;
use crate::lowerlevel::binary_points;
use crate::lp::{solve_lp, LpOutcome, LpProblem};
use crate::model::{CcpInstance, ConstraintModel, SolveReport};

pub const DEFAULT_SUBSET_CAP: u128 = 200_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleSolution {
    pub value: f64,
    pub x: Vec<f64>,
    /// Scenarios enforced at the optimum.
    pub kept: Vec<usize>,
    /// Kept sets whose inner problem was solved.
    pub subsets_solved: usize,
}

/// n choose k, saturating.
pub fn binomial(n: usize, k: usize) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc.saturating_mul((n - i) as u128) / (i as u128 + 1);
    }
    acc
}

/// k-subsets of 0..n in colex order.
struct Colex {
    idx: Vec<usize>,
    n: usize,
    done: bool,
}

impl Colex {
    fn new(n: usize, k: usize) -> Self {
        Colex { idx: (0..k).collect(), n, done: k > n }
    }
}

impl Iterator for Colex {
    type Item = Vec<usize>;

    fn next(&mut self) -> Option<Vec<usize>> {
        if self.done {
            return None;
        }
        let out = self.idx.clone();
        let k = self.idx.len();
        let limit = |i: usize, idx: &[usize]| if i + 1 < k { idx[i + 1] } else { self.n };
        match (0..k).find(|&i| self.idx[i] + 1 < limit(i, &self.idx)) {
            Some(i) => {
                self.idx[i] += 1;
                for (j, v) in self.idx.iter_mut().take(i).enumerate() {
                    *v = j;
                }
            }
            None => self.done = true,
        }
        Some(out)
    }
}

/// Droppable sets: all ⌊Nε⌋-subsets for equal weights, otherwise every inclusion-maximal
/// set with mass ≤ ε.
fn droppable_sets(inst: &CcpInstance, cap: u128) -> Result<Vec<Vec<usize>>> {
    let n = inst.n_scenarios();
    if inst.is_equiprobable() {
        let m = inst.max_drops().min(n);
        let count = binomial(n, m);
        if count > cap {
            return Err(CcpError::CapExceeded { count, cap });
        }
        return Ok(Colex::new(n, m).collect());
    }
    let p = &inst.probabilities;
    let limit = inst.epsilon + 1e-12;
    let mut out = Vec::new();
    let mut visited: u128 = 0;
    let mut stack: Vec<(Vec<usize>, f64, usize)> = vec![(Vec::new(), 0.0, 0)];
    while let Some((set, mass, next)) = stack.pop() {
        visited += 1;
        if visited > cap {
            return Err(CcpError::CapExceeded { count: visited, cap });
        }
        let maximal = (0..n).all(|k| set.contains(&k) || mass + p[k] > limit);
        if maximal {
            out.push(set.clone());
        }
        for k in next..n {
            if mass + p[k] <= limit {
                let mut s = set.clone();
                s.push(k);
                stack.push((s, mass + p[k], k + 1));
            }
        }
    }
    Ok(out)
}

/// min{cᵀx : x ∈ X, g_k(x) ≤ 0 for k ∈ kept}; `None` when infeasible.
fn kept_minimum(inst: &CcpInstance, form: Option<&LinearForm>, kept: &[usize]) -> Result<Option<(f64, Vec<f64>)>> {
    match form {
        Some(form) => {
            let mut b = form.builder(inst);
            b.lp.c[..inst.n].copy_from_slice(&inst.cost);
            b.finish_structure();
            for &k in kept {
                b.add_scenario_le(k, &[]);
            }
            match solve_lp(&b.lp)? {
                LpOutcome::Optimal { x, value, .. } => Ok(Some((value, x[..inst.n].to_vec()))),
                LpOutcome::Infeasible => Ok(None),
                LpOutcome::Unbounded => Ok(Some((f64::NEG_INFINITY, Vec::new()))),
            }
        }
        None => Ok(nonlinear_subset_minimum(inst, kept)?.map(|(_, hi, x)| (hi, x))),
    }
}

/// Exact optimum by enumerating droppable scenario sets (lattice enumeration for binary X).
pub fn exact_solve(inst: &CcpInstance, subset_cap: u128) -> Result<OracleSolution> {
    if inst.x_set.is_binary() {
        return exact_solve_binary(inst);
    }
    let drops = droppable_sets(inst, subset_cap)?;
    let h = scenario_minima(inst)?;
    let form = LinearForm::of(inst);
    let nscen = inst.n_scenarios();
    let mut best: Option<OracleSolution> = None;
    let mut solved = 0;
    for dropped in drops {
        let kept: Vec<usize> = (0..nscen).filter(|k| !dropped.contains(k)).collect();
        let bound = kept.iter().map(|&k| h[k]).fold(f64::NEG_INFINITY, f64::max);
        if bound == f64::INFINITY {
            continue;
        }
        if let Some(b) = &best {
            if bound >= b.value - 1e-12 * (1.0 + b.value.abs()) {
                continue;
            }
        }
        solved += 1;
        if let Some((value, x)) = kept_minimum(inst, form.as_ref(), &kept)? {
            if value == f64::NEG_INFINITY {
                return Err(CcpError::Unbounded("a kept-scenario problem is unbounded".into()));
            }
            if best.as_ref().is_none_or(|b| value < b.value) {
                best = Some(OracleSolution { value, x, kept, subsets_solved: 0 });
            }
        }
    }
    let mut sol = best.ok_or_else(|| CcpError::Infeasible("every kept-scenario problem is infeasible".into()))?;
    sol.subsets_solved = solved;
    Ok(sol)
}

/// Chance-feasible minimizer over the binary lattice.
pub fn exact_solve_binary(inst: &CcpInstance) -> Result<OracleSolution> {
    let pts = binary_points(&inst.x_set, inst.n)?;
    let total = pts.len();
    let x = pts
        .into_iter()
        .filter(|x| inst.is_feasible(x))
        .min_by(|a, b| inst.cost_of(a).total_cmp(&inst.cost_of(b)))
        .ok_or_else(|| CcpError::Infeasible("no lattice point is chance-feasible".into()))?;
    let kept = (0..inst.n_scenarios()).filter(|&k| !inst.violated(&x, 1e-8)[k]).collect();
    Ok(OracleSolution { value: inst.cost_of(&x), x, kept, subsets_solved: total })
}

/// Oracle result as a report.
pub fn oracle_report(inst: &CcpInstance, subset_cap: u128) -> Result<SolveReport> {
    let start = std::time::Instant::now();
    let sol = exact_solve(inst, subset_cap)?;
    let mut r = SolveReport::for_point(inst, "oracle", sol.x);
    r.objective = sol.value;
    r.t_star = sol.value;
    r.iterations = sol.subsets_solved;
    r.backend = if inst.x_set.is_binary() { "enumeration" } else { "subsets" }.into();
    r.wall_time = start.elapsed().as_secs_f64();
    Ok(r.with_config("subset_cap", subset_cap as f64).with_config("kept", sol.kept))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "verdict", rename_all = "snake_case")]
pub enum NullspaceVerdict {
    Holds,
    /// A homogeneous direction whose residuals put half or more of their mass on `subset`.
    Violated { x: Vec<f64>, s: Vec<f64>, subset: Vec<usize> },
    CapExceeded { count: u128, cap: u128 },
}

/// Nullspace-property limits for the checker.
pub const NULLSPACE_MAX_SCENARIOS: usize = 12;
pub const NULLSPACE_MAX_DIM: usize = 6;

/// Checks whether every nonzero residual vector s = Dx of the homogeneous system
/// {cᵀx = 0, Uᵀx = 0} puts less than half of its ℓ₁ mass on any ⌊Nε⌋ scenarios.
pub fn check_nullspace_property(inst: &CcpInstance, cap: u128) -> Result<NullspaceVerdict> {
    let ConstraintModel::BiAffineEquality { d, .. } = &inst.constraints else {
        return Err(CcpError::validation("constraints", "an equality model is required"));
    };
    if !inst.is_equiprobable() {
        return Err(CcpError::validation("probabilities", "the check needs equiprobable scenarios"));
    }
    let (nscen, n) = (d.len(), inst.n);
    if nscen > NULLSPACE_MAX_SCENARIOS || n > NULLSPACE_MAX_DIM {
        return Err(CcpError::validation("constraints", "the check supports N <= 12 and n <= 6"));
    }
    let m = inst.max_drops().min(nscen);
    if m == 0 {
        return Ok(NullspaceVerdict::Holds);
    }
    // sign patterns up to a global flip
    let count = binomial(nscen, m).saturating_mul(1u128 << (nscen - 1));
    if count > cap {
        return Ok(NullspaceVerdict::CapExceeded { count, cap });
    }
    let eq = inst.x_set.linear_description(n).eq;
    for mask in 0u32..(1u32 << (nscen - 1)) {
        let sigma: Vec<f64> = (0..nscen).map(|i| if i > 0 && (mask >> (i - 1)) & 1 == 1 { -1.0 } else { 1.0 }).collect();
        let mut base = LpProblem::new(0);
        for _ in 0..n {
            base.add_var(0.0, f64::NEG_INFINITY, f64::INFINITY);
        }
        base.add_eq(inst.cost.clone(), 0.0);
        for (a, _) in &eq {
            base.add_eq(a.clone(), 0.0);
        }
        // σ_i d_iᵀx ≥ 0 and Σ σ_i d_iᵀx = 1
        let mut total = vec![0.0; n];
        for (di, si) in d.iter().zip(&sigma) {
            let row: Vec<f64> = di.iter().map(|v| v * si).collect();
            for (t, r) in total.iter_mut().zip(&row) {
                *t += r;
            }
            base.add_ge(row, 0.0);
        }
        base.add_eq(total, 1.0);
        for subset in Colex::new(nscen, m) {
            let mut lp = base.clone();
            for j in 0..n {
                lp.c[j] = -subset.iter().map(|&i| sigma[i] * d[i][j]).sum::<f64>();
            }
            let (x, value) = match solve_lp(&lp)? {
                LpOutcome::Optimal { x, value, .. } => (x, -value),
                LpOutcome::Infeasible => break,
                LpOutcome::Unbounded => (Vec::new(), f64::INFINITY),
            };
            if value >= 0.5 - 1e-9 {
                let s = d.iter().map(|di| di.iter().zip(&x).map(|(a, b)| a * b).sum()).collect();
                return Ok(NullspaceVerdict::Violated { x, s, subset });
            }
        }
    }
    Ok(NullspaceVerdict::Holds)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog;

    #[test]
    fn colex_enumerates_all() {
        let all: Vec<Vec<usize>> = Colex::new(4, 2).collect();
        assert_eq!(all, vec![vec![0, 1], vec![0, 2], vec![1, 2], vec![0, 3], vec![1, 3], vec![2, 3]]);
        assert_eq!(Colex::new(3, 0).count(), 1);
        assert_eq!(Colex::new(5, 3).count() as u128, binomial(5, 3));
    }

    #[test]
    fn shift_and_triangle_optima() {
        let s = exact_solve(&catalog::three_point_shift(), DEFAULT_SUBSET_CAP).unwrap();
        assert!((s.value - 2.0).abs() < 1e-9);
        assert_eq!(s.kept, vec![1, 2]);
        let t = exact_solve(&catalog::symmetric_triangle(), DEFAULT_SUBSET_CAP).unwrap();
        assert!((t.value - 0.5).abs() < 1e-9);
    }

    #[test]
    fn binary_optima() {
        let b = exact_solve(&catalog::binary_cover(), DEFAULT_SUBSET_CAP).unwrap();
        assert_eq!((b.value, b.x.clone()), (1.0, vec![1.0, 0.0]));
        let t = exact_solve_binary(&catalog::binary_threshold()).unwrap();
        assert_eq!(t.value, 0.0);
    }

    #[test]
    fn cap_is_enforced() {
        let inst = catalog::covering_tight_family(40, 0.25);
        assert!(matches!(exact_solve(&inst, 1000), Err(CcpError::CapExceeded { .. })));
    }

    #[test]
    fn nullspace_verdicts() {
        assert_eq!(check_nullspace_property(&catalog::equality_triangle(), DEFAULT_SUBSET_CAP).unwrap(), NullspaceVerdict::Holds);
        let skew = catalog::equality_triangle_with_cost(vec![2.0, 3.0]);
        let v = check_nullspace_property(&skew, DEFAULT_SUBSET_CAP).unwrap();
        assert!(matches!(v, NullspaceVerdict::Violated { .. }), "{v:?}");
    }
}
