//! Euclidean projections, Dykstra's alternating projections and norm helpers.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{CcpError, Result};
use crate::model::{dot, FeasibleSet};

pub const DYKSTRA_TOL: f64 = 1e-9;
pub const DYKSTRA_MAX_ITER: usize = 10_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum NormSpec {
    L1,
    L2,
    #[serde(rename = "linf")]
    LInf,
    Mahalanobis { sigma: Vec<Vec<f64>> },
}

impl NormSpec {
    pub fn validate(&self) -> Result<()> {
        if let NormSpec::Mahalanobis { sigma } = self {
            let m = sigma.len();
            if m == 0 || sigma.iter().any(|r| r.len() != m) {
                return Err(CcpError::validation("sigma", "must be a nonempty square matrix"));
            }
            let mat = DMatrix::from_fn(m, m, |i, j| sigma[i][j]);
            if (0..m).any(|i| (0..m).any(|j| (sigma[i][j] - sigma[j][i]).abs() > 1e-12 * (1.0 + sigma[i][j].abs()))) {
                return Err(CcpError::validation("sigma", "must be symmetric"));
            }
            let chol = mat.cholesky().ok_or_else(|| CcpError::validation("sigma", "not positive definite"))?;
            if chol.l().diagonal().iter().any(|d| *d <= 1e-12) {
                return Err(CcpError::validation("sigma", "Cholesky pivot below 1e-12"));
            }
        }
        Ok(())
    }

    /// The dual norm specification (L1 ↔ LInf, L2 self-dual, Mahalanobis Σ ↔ Σ⁻¹).
    pub fn dual(&self) -> NormSpec {
        match self {
            NormSpec::L1 => NormSpec::LInf,
            NormSpec::LInf => NormSpec::L1,
            NormSpec::L2 => NormSpec::L2,
            NormSpec::Mahalanobis { sigma } => {
                let m = sigma.len();
                let inv = DMatrix::from_fn(m, m, |i, j| sigma[i][j]).try_inverse().expect("validated PD matrix");
                NormSpec::Mahalanobis { sigma: (0..m).map(|i| (0..m).map(|j| inv[(i, j)]).collect()).collect() }
            }
        }
    }

    /// The norm itself; Mahalanobis(Σ) is √(yᵀΣ⁻¹y).
    pub fn norm(&self, y: &[f64]) -> f64 {
        match self {
            NormSpec::L1 => y.iter().map(|v| v.abs()).sum(),
            NormSpec::L2 => y.iter().map(|v| v * v).sum::<f64>().sqrt(),
            NormSpec::LInf => y.iter().fold(0.0, |m, v| m.max(v.abs())),
            NormSpec::Mahalanobis { .. } => self.dual().dual_norm(y),
        }
    }

    pub fn dual_norm(&self, y: &[f64]) -> f64 {
        self.dual_value_grad(y).0
    }

    /// ‖y‖_* and a subgradient with respect to y.
    pub fn dual_value_grad(&self, y: &[f64]) -> (f64, Vec<f64>) {
        match self {
            NormSpec::L1 => {
                let mut arg = 0;
                for j in 0..y.len() {
                    if y[j].abs() > y[arg].abs() {
                        arg = j;
                    }
                }
                let mut g = vec![0.0; y.len()];
                if !y.is_empty() && y[arg] != 0.0 {
                    g[arg] = y[arg].signum();
                }
                (y.get(arg).map_or(0.0, |v| v.abs()), g)
            }
            NormSpec::LInf => {
                let g = y.iter().map(|v| if *v == 0.0 { 0.0 } else { v.signum() }).collect();
                (y.iter().map(|v| v.abs()).sum(), g)
            }
            NormSpec::L2 => {
                let r = y.iter().map(|v| v * v).sum::<f64>().sqrt();
                let g = if r > 0.0 { y.iter().map(|v| v / r).collect() } else { vec![0.0; y.len()] };
                (r, g)
            }
            NormSpec::Mahalanobis { sigma } => {
                let sy: Vec<f64> = sigma.iter().map(|row| dot(row, y)).collect();
                let r = dot(y, &sy).max(0.0).sqrt();
                let g = if r > 0.0 { sy.iter().map(|v| v / r).collect() } else { vec![0.0; y.len()] };
                (r, g)
            }
        }
    }
}

/// Free function form of [`NormSpec::dual_norm`].
pub fn dual_norm(spec: &NormSpec, y: &[f64]) -> f64 {
    spec.dual_norm(y)
}

#[derive(Debug, Clone)]
enum Primitive {
    Box { lo: Vec<f64>, hi: Vec<f64> },
    Halfspace { a: Vec<f64>, b: f64, aa: f64 },
    Simplex { sum: f64 },
    Affine { ut: DMatrix<f64>, pinv: DMatrix<f64>, h: DVector<f64> },
}

impl Primitive {
    fn project(&self, y: &[f64]) -> Vec<f64> {
        match self {
            Primitive::Box { lo, hi } => y.iter().zip(lo.iter().zip(hi)).map(|(v, (l, u))| v.max(*l).min(*u)).collect(),
            Primitive::Halfspace { a, b, aa } => {
                let viol = dot(a, y) - b;
                if viol <= 0.0 || *aa == 0.0 {
                    y.to_vec()
                } else {
                    y.iter().zip(a).map(|(v, ai)| v - viol / aa * ai).collect()
                }
            }
            Primitive::Simplex { sum } => project_simplex(y, *sum),
            Primitive::Affine { ut, pinv, h } => {
                let yv = DVector::from_column_slice(y);
                let r = ut * &yv - h;
                (yv - pinv * r).iter().copied().collect()
            }
        }
    }
}

fn project_simplex(y: &[f64], sum: f64) -> Vec<f64> {
    let mut u = y.to_vec();
    u.sort_by(|a, b| b.total_cmp(a));
    let mut acc = 0.0;
    let mut theta = 0.0;
    for (j, uj) in u.iter().enumerate() {
        acc += uj;
        let cand = (acc - sum) / (j + 1) as f64;
        if uj - cand > 0.0 {
            theta = cand;
        }
    }
    y.iter().map(|v| (v - theta).max(0.0)).collect()
}

fn primitives_of(set: &FeasibleSet, n: usize, out: &mut Vec<Primitive>) -> Result<()> {
    match set {
        FeasibleSet::Box { lower, upper } => out.push(Primitive::Box { lo: lower.clone(), hi: upper.clone() }),
        FeasibleSet::NonNegOrthant { .. } => out.push(Primitive::Box { lo: vec![0.0; n], hi: vec![f64::INFINITY; n] }),
        FeasibleSet::Halfspaces { rows } => {
            for r in rows {
                out.push(Primitive::Halfspace { a: r.a.clone(), b: r.b, aa: dot(&r.a, &r.a) });
            }
        }
        FeasibleSet::Simplex { sum, .. } => out.push(Primitive::Simplex { sum: *sum }),
        FeasibleSet::AffineEqualities { u, h } => {
            let m = h.len();
            let ut = DMatrix::from_fn(m, n, |i, j| u[j][i]);
            let pinv = ut.clone().pseudo_inverse(1e-12).map_err(|e| CcpError::UnsupportedSet(e.to_string()))?;
            out.push(Primitive::Affine { ut, pinv, h: DVector::from_column_slice(h) });
        }
        FeasibleSet::Free { .. } => {}
        FeasibleSet::BinaryTiny { .. } => {
            return Err(CcpError::UnsupportedSet("binary lattice has no Euclidean projection".into()))
        }
        FeasibleSet::Intersection { sets } => {
            for s in sets {
                primitives_of(s, n, out)?;
            }
        }
    }
    Ok(())
}

/// Euclidean projection onto a single primitive set.
pub fn project(set: &FeasibleSet, y: &[f64]) -> Result<Vec<f64>> {
    let n = y.len();
    match set {
        FeasibleSet::Halfspaces { rows } if rows.len() != 1 => {
            Err(CcpError::UnsupportedSet("multi-row halfspaces: use dykstra_project".into()))
        }
        FeasibleSet::Intersection { .. } => Err(CcpError::UnsupportedSet("intersection: use dykstra_project".into())),
        FeasibleSet::Free { .. } => Ok(y.to_vec()),
        _ => {
            let mut prims = Vec::new();
            primitives_of(set, n, &mut prims)?;
            Ok(prims[0].project(y))
        }
    }
}

fn dykstra(prims: &[Primitive], y: &[f64], max_iter: usize, tol: f64) -> Result<Vec<f64>> {
    let n = y.len();
    let mut x = y.to_vec();
    let mut incr = vec![vec![0.0; n]; prims.len()];
    for it in 0..max_iter {
        let mut moved = 0.0f64;
        for (p, inc) in prims.iter().zip(incr.iter_mut()) {
            let shifted: Vec<f64> = x.iter().zip(inc.iter()).map(|(a, b)| a + b).collect();
            let z = p.project(&shifted);
            for j in 0..n {
                inc[j] = shifted[j] - z[j];
                moved = moved.max((z[j] - x[j]).abs());
            }
            x = z;
        }
        if moved <= tol || it + 1 == max_iter {
            let dist = prims.iter().map(|p| max_abs_diff(&p.project(&x), &x)).fold(0.0, f64::max);
            if dist <= tol {
                return Ok(x);
            }
            if it + 1 == max_iter {
                return Err(CcpError::NoConvergence { iterations: max_iter, best: x });
            }
        }
    }
    Err(CcpError::NoConvergence { iterations: max_iter, best: x })
}

/// Dykstra's algorithm for the projection onto an intersection of primitive sets.
pub fn dykstra_project(sets: &[FeasibleSet], y: &[f64], max_iter: usize, tol: f64) -> Result<Vec<f64>> {
    let mut prims = Vec::new();
    for s in sets {
        primitives_of(s, y.len(), &mut prims)?;
    }
    if prims.is_empty() {
        return Ok(y.to_vec());
    }
    if prims.len() == 1 {
        return Ok(prims[0].project(y));
    }
    dykstra(&prims, y, max_iter.max(1), tol)
}

fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

/// X ∩ {cᵀx ≤ t} with precomputed primitives for repeated projections.
#[derive(Debug, Clone)]
pub struct PreparedSet {
    n: usize,
    lo: Vec<f64>,
    hi: Vec<f64>,
    rest: Vec<Primitive>,
}

impl PreparedSet {
    pub fn new(x_set: &FeasibleSet, n: usize, budget: Option<(&[f64], f64)>) -> Result<Self> {
        let mut prims = Vec::new();
        primitives_of(x_set, n, &mut prims)?;
        if let Some((c, t)) = budget {
            prims.push(Primitive::Halfspace { a: c.to_vec(), b: t, aa: dot(c, c) });
        }
        let mut lo = vec![f64::NEG_INFINITY; n];
        let mut hi = vec![f64::INFINITY; n];
        let mut rest = Vec::new();
        for p in prims {
            match p {
                Primitive::Box { lo: l, hi: h } => {
                    for j in 0..n {
                        lo[j] = lo[j].max(l[j]);
                        hi[j] = hi[j].min(h[j]);
                    }
                }
                other => rest.push(other),
            }
        }
        if lo.iter().zip(&hi).any(|(l, h)| l > h) {
            return Err(CcpError::Infeasible("empty box".into()));
        }
        Ok(PreparedSet { n, lo, hi, rest })
    }

    fn has_box(&self) -> bool {
        self.lo.iter().any(|v| v.is_finite()) || self.hi.iter().any(|v| v.is_finite())
    }

    fn clamp(&self, y: &[f64]) -> Vec<f64> {
        y.iter().zip(self.lo.iter().zip(&self.hi)).map(|(v, (l, u))| v.max(*l).min(*u)).collect()
    }

    pub fn project(&self, y: &[f64]) -> Result<Vec<f64>> {
        debug_assert_eq!(y.len(), self.n);
        match self.rest.as_slice() {
            [] => Ok(self.clamp(y)),
            [Primitive::Halfspace { a, b, .. }] if self.has_box() => box_halfspace(&self.lo, &self.hi, a, *b, y),
            [single] if !self.has_box() => Ok(single.project(y)),
            _ => {
                let mut prims = self.rest.clone();
                if self.has_box() {
                    prims.insert(0, Primitive::Box { lo: self.lo.clone(), hi: self.hi.clone() });
                }
                dykstra(&prims, y, DYKSTRA_MAX_ITER, DYKSTRA_TOL)
            }
        }
    }

    /// Projection that falls back to the best Dykstra iterate.
    pub fn project_lenient(&self, y: &[f64]) -> Vec<f64> {
        match self.project(y) {
            Ok(x) => x,
            Err(CcpError::NoConvergence { best, .. }) => best,
            Err(_) => y.to_vec(),
        }
    }

    pub fn contains(&self, x: &[f64], tol: f64) -> bool {
        x.iter().zip(self.lo.iter().zip(&self.hi)).all(|(v, (l, u))| *v >= l - tol && *v <= u + tol)
            && self.rest.iter().all(|p| max_abs_diff(&p.project(x), x) <= tol)
    }

    /// Diameter estimate of the box part, or `None` when unbounded.
    pub fn box_diameter(&self) -> Option<f64> {
        let d2: f64 = self.lo.iter().zip(&self.hi).map(|(l, h)| (h - l) * (h - l)).sum();
        d2.is_finite().then(|| d2.sqrt())
    }
}

/// Exact projection onto a box intersected with one halfspace, by bisection on the multiplier.
fn box_halfspace(lo: &[f64], hi: &[f64], a: &[f64], b: f64, y: &[f64]) -> Result<Vec<f64>> {
    let at = |lam: f64| -> Vec<f64> {
        y.iter().zip(a).zip(lo.iter().zip(hi)).map(|((v, ai), (l, u))| (v - lam * ai).max(*l).min(*u)).collect()
    };
    let x0 = at(0.0);
    if dot(a, &x0) <= b {
        return Ok(x0);
    }
    let floor: f64 = a.iter().zip(lo.iter().zip(hi)).map(|(ai, (l, u))| if *ai > 0.0 { ai * l } else { ai * u }).sum();
    if floor > b + 1e-12 * (1.0 + b.abs()) {
        return Err(CcpError::Infeasible("box and halfspace do not intersect".into()));
    }
    let mut lam_lo = 0.0;
    let mut lam_hi = 1.0;
    while dot(a, &at(lam_hi)) > b {
        lam_hi *= 2.0;
        if lam_hi > 1e300 {
            return Ok(at(lam_hi));
        }
    }
    for _ in 0..200 {
        let mid = 0.5 * (lam_lo + lam_hi);
        if mid <= lam_lo || mid >= lam_hi {
            break;
        }
        if dot(a, &at(mid)) > b {
            lam_lo = mid;
        } else {
            lam_hi = mid;
        }
    }
    Ok(at(lam_hi))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Halfspace;

    fn close(a: &[f64], b: &[f64], tol: f64) -> bool {
        a.len() == b.len() && a.iter().zip(b).all(|(x, y)| (x - y).abs() <= tol)
    }

    #[test]
    fn box_clamps() {
        let s = FeasibleSet::Box { lower: vec![0.0, 0.0], upper: vec![1.0, 1.0] };
        assert_eq!(project(&s, &[2.0, -1.0]).unwrap(), vec![1.0, 0.0]);
    }

    #[test]
    fn halfspace_projection_is_orthogonal() {
        let s = FeasibleSet::Halfspaces { rows: vec![Halfspace { a: vec![1.0, 1.0], b: 1.0 }] };
        assert!(close(&project(&s, &[1.0, 1.0]).unwrap(), &[0.5, 0.5], 1e-15));
    }

    #[test]
    fn simplex_matches_support_enumeration() {
        let y = [0.9, 0.8, -0.5];
        let got = project(&FeasibleSet::Simplex { dim: 3, sum: 1.0 }, &y).unwrap();
        // Active-set oracle: for each support pattern solve the equality-constrained projection.
        let mut best: Option<(f64, Vec<f64>)> = None;
        for mask in 1u32..8 {
            let idx: Vec<usize> = (0..3).filter(|j| mask >> j & 1 == 1).collect();
            let shift = (idx.iter().map(|&j| y[j]).sum::<f64>() - 1.0) / idx.len() as f64;
            let mut x = [0.0; 3];
            for &j in &idx {
                x[j] = y[j] - shift;
            }
            if x.iter().any(|v| *v < -1e-15) {
                continue;
            }
            let d: f64 = x.iter().zip(&y).map(|(a, b)| (a - b) * (a - b)).sum();
            if best.as_ref().map_or(true, |(bd, _)| d < *bd) {
                best = Some((d, x.to_vec()));
            }
        }
        assert!(close(&got, &best.unwrap().1, 1e-12));
        assert!(close(&got, &[0.55, 0.45, 0.0], 1e-12));
    }

    #[test]
    fn dykstra_box_and_halfspace() {
        let sets = [
            FeasibleSet::Box { lower: vec![0.0, 0.0], upper: vec![1.0, 1.0] },
            FeasibleSet::Halfspaces { rows: vec![Halfspace { a: vec![1.0, 1.0], b: 0.5 }] },
        ];
        let x = dykstra_project(&sets, &[1.0, 1.0], DYKSTRA_MAX_ITER, DYKSTRA_TOL).unwrap();
        assert!(close(&x, &[0.25, 0.25], 1e-8));
        // Grid search oracle over the intersection.
        let mut best = (f64::INFINITY, [0.0, 0.0]);
        for i in 0..=200 {
            for j in 0..=200 {
                let p = [i as f64 / 400.0, j as f64 / 400.0];
                if p[0] + p[1] <= 0.5 + 1e-12 {
                    let d = (p[0] - 1.0).powi(2) + (p[1] - 1.0).powi(2);
                    if d < best.0 {
                        best = (d, p);
                    }
                }
            }
        }
        assert!(close(&x, &best.1, 1e-2));
        let inside = dykstra_project(&sets, &[0.1, 0.2], 10, 1e-12).unwrap();
        assert_eq!(inside, vec![0.1, 0.2]);
        let single = dykstra_project(&sets[..1], &[2.0, -1.0], 10, 1e-12).unwrap();
        assert_eq!(single, project(&sets[0], &[2.0, -1.0]).unwrap());
    }

    #[test]
    fn prepared_fast_path_matches_dykstra() {
        let x_set = FeasibleSet::Box { lower: vec![0.0; 3], upper: vec![1.0; 3] };
        let c = [1.0, 2.0, -1.0];
        let p = PreparedSet::new(&x_set, 3, Some((&c, 0.7))).unwrap();
        let y = [2.0, 0.5, -0.3];
        let fast = p.project(&y).unwrap();
        let hs = FeasibleSet::Halfspaces { rows: vec![Halfspace { a: c.to_vec(), b: 0.7 }] };
        let slow = dykstra_project(&[x_set, hs], &y, 100_000, 1e-12).unwrap();
        assert!(close(&fast, &slow, 1e-8), "{fast:?} vs {slow:?}");
    }

    #[test]
    fn affine_projection() {
        let s = FeasibleSet::AffineEqualities { u: vec![vec![1.0], vec![1.0]], h: vec![1.0] };
        assert!(close(&project(&s, &[1.0, 1.0]).unwrap(), &[0.5, 0.5], 1e-12));
    }

    #[test]
    fn unsupported_inputs() {
        let s = FeasibleSet::Intersection { sets: vec![FeasibleSet::NonNegOrthant { dim: 1 }] };
        assert!(matches!(project(&s, &[1.0]), Err(CcpError::UnsupportedSet(_))));
        assert!(matches!(project(&FeasibleSet::BinaryTiny { dim: 1 }, &[1.0]), Err(CcpError::UnsupportedSet(_))));
    }

    #[test]
    fn dual_norms() {
        assert_eq!(NormSpec::L1.dual_norm(&[3.0, -4.0]), 4.0);
        assert_eq!(NormSpec::L2.dual_norm(&[3.0, 4.0]), 5.0);
        assert_eq!(NormSpec::LInf.dual_norm(&[3.0, -4.0]), 7.0);
        let m = NormSpec::Mahalanobis { sigma: vec![vec![4.0, 0.0], vec![0.0, 1.0]] };
        assert!((m.dual_norm(&[1.0, 1.0]) - 5f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn mahalanobis_dual_by_lagrangian() {
        // max yᵀx s.t. xᵀΣ⁻¹x ≤ 1 is attained at x = Σy/√(yᵀΣy).
        let sigma = vec![vec![2.0, 0.5], vec![0.5, 1.0]];
        let spec = NormSpec::Mahalanobis { sigma: sigma.clone() };
        let y = [0.7, -1.3];
        let sy: Vec<f64> = sigma.iter().map(|r| dot(r, &y)).collect();
        let r = dot(&y, &sy).sqrt();
        let x: Vec<f64> = sy.iter().map(|v| v / r).collect();
        assert!((spec.norm(&x) - 1.0).abs() < 1e-12);
        assert!((dot(&y, &x) - spec.dual_norm(&y)).abs() < 1e-12);
        assert!(spec.validate().is_ok());
        let bad = NormSpec::Mahalanobis { sigma: vec![vec![1.0, 2.0], vec![2.0, 1.0]] };
        assert!(bad.validate().is_err());
    }
}
