//! Linear-programming view of polyhedral scenario losses, shared by the LP-based solvers.

use crate::geometry::NormSpec;
use crate::lp::LpProblem;
use crate::model::{CcpInstance, ConstraintModel, FeasibleSet, Perturb};

#[derive(Debug, Clone, Copy, PartialEq)]
enum DualKind {
    MaxAbs,
    SumAbs,
}

#[derive(Debug, Clone, PartialEq)]
enum RobustLin {
    None,
    /// θ‖y‖_* is a constant (right-hand-side perturbation only).
    Const(f64),
    /// θ·r with r ≥ ‖(x, [1])‖_* modelled by auxiliary variables.
    Aux { theta: f64, dual: DualKind, constant: bool },
}

/// Scenario rows `a·x − b` (plus an optional robust term) of a polyhedral loss.
#[derive(Debug, Clone)]
pub(crate) struct LinearForm {
    rows: Vec<Vec<(Vec<f64>, f64)>>,
    robust: RobustLin,
}

impl LinearForm {
    pub(crate) fn of(inst: &CcpInstance) -> Option<Self> {
        let (base, robust) = match &inst.constraints {
            ConstraintModel::Robust { base, theta, norm, perturb } => {
                base.affine_rows(0)?;
                let robust = if *theta == 0.0 {
                    RobustLin::None
                } else if *perturb == Perturb::Rhs {
                    RobustLin::Const(theta * norm.dual_norm(&[1.0]))
                } else {
                    let dual = match norm.dual() {
                        NormSpec::LInf => DualKind::MaxAbs,
                        NormSpec::L1 => DualKind::SumAbs,
                        _ => return None,
                    };
                    RobustLin::Aux { theta: *theta, dual, constant: *perturb == Perturb::Both }
                };
                (base.as_ref(), robust)
            }
            other => (other, RobustLin::None),
        };
        let rows = (0..inst.n_scenarios()).map(|k| base.affine_rows(k)).collect::<Option<Vec<_>>>()?;
        Some(LinearForm { rows, robust })
    }

    /// No scenario rows: an LP over X alone.
    pub(crate) fn empty() -> Self {
        LinearForm { rows: Vec::new(), robust: RobustLin::None }
    }

    pub(crate) fn n_rows(&self) -> usize {
        self.rows.iter().map(Vec::len).sum()
    }

    /// New LP holding x (bounded per X) and the robust auxiliaries; call `finish_structure`
    /// after adding the caller's own variables.
    pub(crate) fn builder(&self, inst: &CcpInstance) -> LpBuilder {
        self.builder_on(&inst.x_set, inst.n)
    }

    pub(crate) fn builder_on(&self, x_set: &FeasibleSet, n: usize) -> LpBuilder {
        let desc = x_set.linear_description(n);
        let mut lp = LpProblem::new(0);
        for j in 0..n {
            lp.add_var(0.0, desc.lo[j], desc.hi[j]);
        }
        let (r, w) = match self.robust {
            RobustLin::Aux { dual, .. } => {
                let r = lp.add_var(0.0, 0.0, f64::INFINITY);
                let w = match dual {
                    DualKind::MaxAbs => Vec::new(),
                    DualKind::SumAbs => (0..n).map(|_| lp.add_var(0.0, 0.0, f64::INFINITY)).collect(),
                };
                (Some(r), w)
            }
            _ => (None, Vec::new()),
        };
        LpBuilder { lp, n, r, w, desc, robust: self.robust.clone(), rows: self.rows.clone() }
    }
}

#[derive(Clone)]
pub(crate) struct LpBuilder {
    pub lp: LpProblem,
    n: usize,
    r: Option<usize>,
    w: Vec<usize>,
    desc: crate::model::LinearDescription,
    robust: RobustLin,
    rows: Vec<Vec<(Vec<f64>, f64)>>,
}

impl LpBuilder {
    pub(crate) fn add_var(&mut self, cost: f64, lo: f64, hi: f64) -> usize {
        self.lp.add_var(cost, lo, hi)
    }

    pub(crate) fn zero_row(&self) -> Vec<f64> {
        vec![0.0; self.lp.n_vars()]
    }

    fn x_row(&self, a: &[f64]) -> Vec<f64> {
        let mut row = self.zero_row();
        row[..self.n].copy_from_slice(a);
        row
    }

    /// Adds the X rows and the robust auxiliary rows. Call once all variables exist.
    pub(crate) fn finish_structure(&mut self) {
        let desc = std::mem::take(&mut self.desc);
        for (a, b) in &desc.ineq {
            let row = self.x_row(a);
            self.lp.add_le(row, *b);
        }
        for (a, b) in &desc.eq {
            let row = self.x_row(a);
            self.lp.add_eq(row, *b);
        }
        if let (RobustLin::Aux { dual, constant, .. }, Some(r)) = (&self.robust, self.r) {
            match dual {
                DualKind::MaxAbs => {
                    for j in 0..self.n {
                        for sign in [1.0, -1.0] {
                            let mut row = self.zero_row();
                            row[j] = sign;
                            row[r] = -1.0;
                            self.lp.add_le(row, 0.0);
                        }
                    }
                    if *constant {
                        let mut row = self.zero_row();
                        row[r] = -1.0;
                        self.lp.add_le(row, -1.0);
                    }
                }
                DualKind::SumAbs => {
                    for j in 0..self.n {
                        for sign in [1.0, -1.0] {
                            let mut row = self.zero_row();
                            row[j] = sign;
                            row[self.w[j]] = -1.0;
                            self.lp.add_le(row, 0.0);
                        }
                    }
                    let mut row = self.zero_row();
                    for &wj in &self.w {
                        row[wj] = 1.0;
                    }
                    row[r] = -1.0;
                    self.lp.add_le(row, if *constant { -1.0 } else { 0.0 });
                }
            }
        }
    }

    pub(crate) fn add_budget(&mut self, cost: &[f64], t: f64) {
        let row = self.x_row(cost);
        self.lp.add_le(row, t);
    }

    /// Coefficients and constant of the (robust) row value `coef·v + constant`.
    pub(crate) fn row_expr(&self, k: usize, i: usize) -> (Vec<f64>, f64) {
        let (a, b) = &self.rows[k][i];
        let mut coef = self.x_row(a);
        let mut constant = -b;
        match self.robust {
            RobustLin::None => {}
            RobustLin::Const(c) => constant += c,
            RobustLin::Aux { theta, .. } => coef[self.r.expect("robust aux")] = theta,
        }
        (coef, constant)
    }

    pub(crate) fn n_rows(&self, k: usize) -> usize {
        self.rows[k].len()
    }

    /// Adds `row_ki(x) − Σ_j coefs_j v_j ≤ 0` for every row of scenario k.
    pub(crate) fn add_scenario_le(&mut self, k: usize, extra: &[(usize, f64)]) {
        for i in 0..self.n_rows(k) {
            let (mut coef, constant) = self.row_expr(k, i);
            for &(j, v) in extra {
                coef[j] -= v;
            }
            self.lp.add_le(coef, -constant);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog;
    use crate::lp::solve_lp;

    #[test]
    fn all_scenario_lp_of_three_point_shift() {
        let inst = catalog::three_point_shift();
        let form = LinearForm::of(&inst).unwrap();
        let mut b = form.builder(&inst);
        b.lp.c[0] = 1.0;
        b.finish_structure();
        for k in 0..3 {
            b.add_scenario_le(k, &[]);
        }
        let (x, v) = solve_lp(&b.lp).unwrap().optimal().unwrap();
        assert!((v - 3.0).abs() < 1e-9 && (x[0] - 3.0).abs() < 1e-9);
    }

    #[test]
    fn robust_l2_is_not_linear() {
        let inst = catalog::symmetric_triangle();
        let robust = CcpInstance {
            constraints: ConstraintModel::Robust {
                base: Box::new(inst.constraints.clone()),
                theta: 0.1,
                norm: NormSpec::L2,
                perturb: Perturb::Lhs,
            },
            ..inst.clone()
        };
        assert!(LinearForm::of(&robust).is_none());
        let linf = CcpInstance {
            constraints: ConstraintModel::Robust {
                base: Box::new(inst.constraints.clone()),
                theta: 0.1,
                norm: NormSpec::LInf,
                perturb: Perturb::Both,
            },
            ..inst
        };
        assert_eq!(LinearForm::of(&linf).unwrap().n_rows(), 3);
    }
}
