//! Dense two-phase primal simplex with Bland's rule and a recomputed dual certificate.

use nalgebra::{DMatrix, DVector};

use crate::error::{CcpError, Result};

const PIVOT_TOL: f64 = 1e-9;
const COST_TOL: f64 = 1e-9;
const MAX_VARS: usize = 10_000;

/// min cᵀx s.t. A_ub x ≤ b_ub, A_eq x = b_eq, lo ≤ x ≤ hi.
#[derive(Debug, Clone, PartialEq)]
pub struct LpProblem {
    pub c: Vec<f64>,
    pub a_ub: Vec<Vec<f64>>,
    pub b_ub: Vec<f64>,
    pub a_eq: Vec<Vec<f64>>,
    pub b_eq: Vec<f64>,
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum LpOutcome {
    Optimal { x: Vec<f64>, value: f64, certified: bool },
    Infeasible,
    Unbounded,
}

impl LpOutcome {
    pub fn optimal(self) -> Option<(Vec<f64>, f64)> {
        match self {
            LpOutcome::Optimal { x, value, .. } => Some((x, value)),
            _ => None,
        }
    }
}

impl LpProblem {
    /// `n` nonnegative variables with zero objective.
    pub fn new(n: usize) -> Self {
        LpProblem {
            c: vec![0.0; n],
            a_ub: Vec::new(),
            b_ub: Vec::new(),
            a_eq: Vec::new(),
            b_eq: Vec::new(),
            lo: vec![0.0; n],
            hi: vec![f64::INFINITY; n],
        }
    }

    pub fn n_vars(&self) -> usize {
        self.c.len()
    }

    pub fn add_var(&mut self, cost: f64, lo: f64, hi: f64) -> usize {
        self.c.push(cost);
        self.lo.push(lo);
        self.hi.push(hi);
        for r in self.a_ub.iter_mut().chain(self.a_eq.iter_mut()) {
            r.push(0.0);
        }
        self.c.len() - 1
    }

    pub fn add_le(&mut self, row: Vec<f64>, b: f64) {
        self.a_ub.push(row);
        self.b_ub.push(b);
    }

    pub fn add_ge(&mut self, row: Vec<f64>, b: f64) {
        self.a_ub.push(row.into_iter().map(|v| -v).collect());
        self.b_ub.push(-b);
    }

    pub fn add_eq(&mut self, row: Vec<f64>, b: f64) {
        self.a_eq.push(row);
        self.b_eq.push(b);
    }

    fn check(&self) -> Result<()> {
        let n = self.c.len();
        if n > MAX_VARS {
            return Err(CcpError::Dimension(format!("{n} variables exceed the dense limit {MAX_VARS}")));
        }
        if self.lo.len() != n || self.hi.len() != n {
            return Err(CcpError::Dimension("bounds length differs from objective".into()));
        }
        if self.a_ub.len() != self.b_ub.len() || self.a_eq.len() != self.b_eq.len() {
            return Err(CcpError::Dimension("row count differs from right-hand side".into()));
        }
        if self.a_ub.iter().chain(&self.a_eq).any(|r| r.len() != n) {
            return Err(CcpError::Dimension("row length differs from variable count".into()));
        }
        if self.b_ub.iter().chain(&self.b_eq).any(|b| !b.is_finite()) {
            return Err(CcpError::Dimension("right-hand sides must be finite".into()));
        }
        if self.lo.iter().zip(&self.hi).any(|(l, h)| l > h || *l == f64::INFINITY || *h == f64::NEG_INFINITY) {
            return Err(CcpError::Dimension("inconsistent variable bounds".into()));
        }
        Ok(())
    }

    /// Max row violation scaled by row size; used for post-solve checks.
    pub fn max_violation(&self, x: &[f64]) -> f64 {
        let mut worst = 0.0f64;
        for (r, b) in self.a_ub.iter().zip(&self.b_ub) {
            let lhs: f64 = r.iter().zip(x).map(|(a, v)| a * v).sum();
            worst = worst.max((lhs - b) / (1.0 + b.abs()));
        }
        for (r, b) in self.a_eq.iter().zip(&self.b_eq) {
            let lhs: f64 = r.iter().zip(x).map(|(a, v)| a * v).sum();
            worst = worst.max((lhs - b).abs() / (1.0 + b.abs()));
        }
        for ((v, l), h) in x.iter().zip(&self.lo).zip(&self.hi) {
            worst = worst.max(l - v).max(v - h);
        }
        worst
    }
}

/// How an original variable maps to standard-form columns: x = offset + Σ sign·y.
#[derive(Debug, Clone)]
struct ColMap {
    offset: f64,
    cols: Vec<(usize, f64)>,
}

struct Standard {
    a: Vec<Vec<f64>>,
    b: Vec<f64>,
    c: Vec<f64>,
    /// Column of the slack for a row, with its sign (rows were possibly negated).
    slack: Vec<Option<(usize, f64)>>,
    maps: Vec<ColMap>,
}

fn standardize(p: &LpProblem) -> Standard {
    let n = p.c.len();
    let mut maps = Vec::with_capacity(n);
    let mut ncols = 0;
    let mut ub_rows: Vec<(usize, f64)> = Vec::new();
    for j in 0..n {
        let (lo, hi) = (p.lo[j], p.hi[j]);
        if lo.is_finite() {
            maps.push(ColMap { offset: lo, cols: vec![(ncols, 1.0)] });
            if hi.is_finite() {
                ub_rows.push((ncols, hi - lo));
            }
            ncols += 1;
        } else if hi.is_finite() {
            maps.push(ColMap { offset: hi, cols: vec![(ncols, -1.0)] });
            ncols += 1;
        } else {
            maps.push(ColMap { offset: 0.0, cols: vec![(ncols, 1.0), (ncols + 1, -1.0)] });
            ncols += 2;
        }
    }
    let n_ineq = p.a_ub.len() + ub_rows.len();
    let total = ncols + n_ineq;
    let mut a = Vec::new();
    let mut b = Vec::new();
    let mut slack = Vec::new();
    let translate = |row: &[f64], rhs: f64| -> (Vec<f64>, f64) {
        let mut out = vec![0.0; total];
        let mut r = rhs;
        for (j, coef) in row.iter().enumerate() {
            if *coef == 0.0 {
                continue;
            }
            r -= coef * maps[j].offset;
            for (col, sign) in &maps[j].cols {
                out[*col] += coef * sign;
            }
        }
        (out, r)
    };
    let mut next_slack = ncols;
    for (row, rhs) in p.a_ub.iter().zip(&p.b_ub) {
        let (mut out, r) = translate(row, *rhs);
        out[next_slack] = 1.0;
        a.push(out);
        b.push(r);
        slack.push(Some((next_slack, 1.0)));
        next_slack += 1;
    }
    for (col, ub) in &ub_rows {
        let mut out = vec![0.0; total];
        out[*col] = 1.0;
        out[next_slack] = 1.0;
        a.push(out);
        b.push(*ub);
        slack.push(Some((next_slack, 1.0)));
        next_slack += 1;
    }
    for (row, rhs) in p.a_eq.iter().zip(&p.b_eq) {
        let (out, r) = translate(row, *rhs);
        a.push(out);
        b.push(r);
        slack.push(None);
    }
    for i in 0..a.len() {
        if b[i] < 0.0 {
            a[i].iter_mut().for_each(|v| *v = -*v);
            b[i] = -b[i];
            if let Some((col, s)) = slack[i] {
                slack[i] = Some((col, -s));
            }
        }
    }
    let mut c = vec![0.0; total];
    for j in 0..n {
        for (col, sign) in &maps[j].cols {
            c[*col] += p.c[j] * sign;
        }
    }
    Standard { a, b, c, slack, maps }
}

struct Tableau {
    t: Vec<Vec<f64>>,
    rhs: Vec<f64>,
    d: Vec<f64>,
    obj: f64,
    basis: Vec<usize>,
    /// Original standard-form row of each tableau row.
    rows: Vec<usize>,
    ncols: usize,
}

impl Tableau {
    fn pivot(&mut self, r: usize, c: usize) {
        let pv = self.t[r][c];
        for v in self.t[r].iter_mut() {
            *v /= pv;
        }
        self.rhs[r] /= pv;
        let prow = self.t[r].clone();
        let prhs = self.rhs[r];
        for i in 0..self.t.len() {
            if i == r {
                continue;
            }
            let f = self.t[i][c];
            if f != 0.0 {
                for (v, p) in self.t[i].iter_mut().zip(&prow) {
                    *v -= f * p;
                }
                self.t[i][c] = 0.0;
                self.rhs[i] -= f * prhs;
                if self.rhs[i] < 0.0 && self.rhs[i] > -1e-11 {
                    self.rhs[i] = 0.0;
                }
            }
        }
        let f = self.d[c];
        if f != 0.0 {
            for (v, p) in self.d.iter_mut().zip(&prow) {
                *v -= f * p;
            }
            self.d[c] = 0.0;
            self.obj += f * prhs;
        }
        self.basis[r] = c;
    }

    fn set_objective(&mut self, cost: &[f64]) {
        self.d = cost.to_vec();
        self.obj = 0.0;
        for i in 0..self.t.len() {
            let cb = cost[self.basis[i]];
            if cb != 0.0 {
                for (dj, tij) in self.d.iter_mut().zip(&self.t[i]) {
                    *dj -= cb * tij;
                }
                self.obj += cb * self.rhs[i];
            }
        }
    }

    /// Bland's rule simplex; returns false when unbounded.
    fn run(&mut self, allowed: &[bool], iters: &mut usize, cap: usize) -> Result<bool> {
        loop {
            let entering = (0..self.ncols).find(|&j| allowed[j] && self.d[j] < -COST_TOL);
            let Some(c) = entering else { return Ok(true) };
            let mut best: Option<(usize, f64)> = None;
            for i in 0..self.t.len() {
                let a = self.t[i][c];
                if a > PIVOT_TOL {
                    let ratio = self.rhs[i] / a;
                    best = match best {
                        None => Some((i, ratio)),
                        Some((bi, br)) => {
                            let tie = (ratio - br).abs() <= 1e-12 * (1.0 + br.abs());
                            if ratio < br && !tie || tie && self.basis[i] < self.basis[bi] {
                                Some((i, ratio))
                            } else {
                                Some((bi, br))
                            }
                        }
                    };
                }
            }
            let Some((r, _)) = best else { return Ok(false) };
            self.pivot(r, c);
            *iters += 1;
            if *iters > cap {
                return Err(CcpError::CycleGuardTripped { cap });
            }
        }
    }
}

/// Solve a linear program exactly (up to floating point) by the two-phase simplex method.
pub fn solve_lp(problem: &LpProblem) -> Result<LpOutcome> {
    problem.check()?;
    let std = standardize(problem);
    let m = std.a.len();
    let nstd = std.c.len();
    let needs_art: Vec<bool> = (0..m).map(|i| !matches!(std.slack[i], Some((_, s)) if s > 0.0)).collect();
    let n_art = needs_art.iter().filter(|v| **v).count();
    let ncols = nstd + n_art;
    let mut t = Vec::with_capacity(m);
    let mut basis = Vec::with_capacity(m);
    let mut next_art = nstd;
    for i in 0..m {
        let mut row = std.a[i].clone();
        row.resize(ncols, 0.0);
        if needs_art[i] {
            row[next_art] = 1.0;
            basis.push(next_art);
            next_art += 1;
        } else {
            basis.push(std.slack[i].unwrap().0);
        }
        t.push(row);
    }
    let mut tab = Tableau { t, rhs: std.b.clone(), d: vec![0.0; ncols], obj: 0.0, basis, rows: (0..m).collect(), ncols };
    let cap = 50 * (m + ncols).max(1);
    let mut iters = 0;
    let scale = 1.0 + std.b.iter().fold(0.0f64, |a, b| a.max(b.abs()));

    if n_art > 0 {
        let mut phase1 = vec![0.0; ncols];
        phase1[nstd..].iter_mut().for_each(|v| *v = 1.0);
        tab.set_objective(&phase1);
        let allowed = vec![true; ncols];
        tab.run(&allowed, &mut iters, cap)?;
        if tab.obj > 1e-9 * scale {
            return Ok(LpOutcome::Infeasible);
        }
        // Drive artificial variables out of the basis; drop redundant rows.
        let mut i = 0;
        while i < tab.t.len() {
            if tab.basis[i] >= nstd {
                let col = (0..nstd).find(|&j| tab.t[i][j].abs() > 1e-9);
                match col {
                    Some(j) => tab.pivot(i, j),
                    None => {
                        tab.t.remove(i);
                        tab.rhs.remove(i);
                        tab.basis.remove(i);
                        tab.rows.remove(i);
                        continue;
                    }
                }
            }
            i += 1;
        }
    }
    let mut cost = std.c.clone();
    cost.resize(ncols, 0.0);
    tab.set_objective(&cost);
    let allowed: Vec<bool> = (0..ncols).map(|j| j < nstd).collect();
    if !tab.run(&allowed, &mut iters, cap)? {
        return Ok(LpOutcome::Unbounded);
    }
    let mut y = vec![0.0; nstd];
    for (i, &bj) in tab.basis.iter().enumerate() {
        if bj < nstd {
            y[bj] = tab.rhs[i].max(0.0);
        }
    }
    let x: Vec<f64> = std
        .maps
        .iter()
        .map(|mp| mp.offset + mp.cols.iter().map(|(c, s)| s * y[*c]).sum::<f64>())
        .collect();
    let value: f64 = problem.c.iter().zip(&x).map(|(c, v)| c * v).sum();
    let certified = certify(&std, &tab.rows, &tab.basis, &y);
    Ok(LpOutcome::Optimal { x, value, certified })
}

/// Recompute duals from the final basis on the original standard-form data and check
/// dual feasibility plus a zero duality gap.
fn certify(std: &Standard, rows: &[usize], basis: &[usize], y: &[f64]) -> bool {
    let nstd = std.c.len();
    let m = basis.len();
    if m == 0 {
        return std.c.iter().all(|c| *c >= -1e-9);
    }
    if basis.iter().any(|&b| b >= nstd) {
        return false;
    }
    let bmat = DMatrix::from_fn(m, m, |i, k| std.a[rows[i]][basis[k]]);
    let cb = DVector::from_iterator(m, basis.iter().map(|&j| std.c[j]));
    let Some(w) = bmat.transpose().lu().solve(&cb) else { return false };
    let cscale = 1.0 + std.c.iter().fold(0.0f64, |a, c| a.max(c.abs()));
    for j in 0..nstd {
        let aw: f64 = rows.iter().zip(w.iter()).map(|(&r, wi)| std.a[r][j] * wi).sum();
        if std.c[j] - aw < -1e-6 * cscale {
            return false;
        }
    }
    let primal: f64 = std.c.iter().zip(y).map(|(c, v)| c * v).sum();
    let dual: f64 = rows.iter().zip(w.iter()).map(|(&r, wi)| std.b[r] * wi).sum();
    (primal - dual).abs() <= 1e-6 * (1.0 + primal.abs())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn opt(p: &LpProblem) -> (Vec<f64>, f64, bool) {
        match solve_lp(p).unwrap() {
            LpOutcome::Optimal { x, value, certified } => (x, value, certified),
            other => panic!("expected optimum, got {other:?}"),
        }
    }

    #[test]
    fn max_of_lower_bounds() {
        let mut p = LpProblem::new(1);
        p.c[0] = 1.0;
        p.lo[0] = f64::NEG_INFINITY;
        for b in [3.0, 2.0, 1.0] {
            p.add_ge(vec![1.0], b);
        }
        let (x, v, cert) = opt(&p);
        assert!((v - 3.0).abs() < 1e-12 && (x[0] - 3.0).abs() < 1e-12 && cert);
    }

    #[test]
    fn three_point_hinge_at_eight_thirds() {
        // variables x, s1, s2, s3
        let mut p = LpProblem::new(4);
        p.c = vec![0.0, 1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0];
        for (k, xi) in [3.0, 2.0, 1.0].iter().enumerate() {
            let mut row = vec![1.0, 0.0, 0.0, 0.0];
            row[k + 1] = 1.0;
            p.add_ge(row, *xi);
        }
        p.add_le(vec![1.0, 0.0, 0.0, 0.0], 8.0 / 3.0);
        let (x, v, cert) = opt(&p);
        assert!((v - 1.0 / 9.0).abs() < 1e-12);
        assert!((x[1] - 1.0 / 3.0).abs() < 1e-12 && x[2].abs() < 1e-12 && x[3].abs() < 1e-12);
        assert!(cert);
    }

    #[test]
    fn detects_infeasible_and_unbounded() {
        let mut p = LpProblem::new(1);
        p.add_le(vec![1.0], -1.0);
        assert_eq!(solve_lp(&p).unwrap(), LpOutcome::Infeasible);
        let mut q = LpProblem::new(1);
        q.c[0] = -1.0;
        assert_eq!(solve_lp(&q).unwrap(), LpOutcome::Unbounded);
    }

    #[test]
    fn free_variables_and_equalities() {
        // min x + y s.t. 2x + 3y = 1, 2x + y = 1 (free) → x = 1/2, y = 0.
        let mut p = LpProblem::new(2);
        p.c = vec![1.0, 1.0];
        p.lo = vec![f64::NEG_INFINITY; 2];
        p.add_eq(vec![2.0, 3.0], 1.0);
        p.add_eq(vec![2.0, 1.0], 1.0);
        let (x, v, cert) = opt(&p);
        assert!((x[0] - 0.5).abs() < 1e-12 && x[1].abs() < 1e-12 && (v - 0.5).abs() < 1e-12 && cert);
    }

    #[test]
    fn redundant_equalities_and_upper_bounds() {
        let mut p = LpProblem::new(2);
        p.c = vec![-1.0, -2.0];
        p.hi = vec![1.0, 0.5];
        p.add_eq(vec![1.0, 1.0], 1.2);
        p.add_eq(vec![2.0, 2.0], 2.4);
        let (x, v, cert) = opt(&p);
        assert!((x[1] - 0.5).abs() < 1e-12 && (x[0] - 0.7).abs() < 1e-12);
        assert!((v + 1.7).abs() < 1e-12 && cert);
    }

    #[test]
    fn dimension_errors() {
        let mut p = LpProblem::new(2);
        p.a_ub.push(vec![1.0]);
        p.b_ub.push(1.0);
        assert!(matches!(solve_lp(&p), Err(CcpError::Dimension(_))));
    }
}
