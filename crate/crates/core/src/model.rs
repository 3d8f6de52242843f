//! Problem data, instance documents and the scenario-wise constraint evaluators.

use serde::{Deserialize, Serialize};

use crate::error::{CcpError, Result};
use crate::geometry::NormSpec;

/// Base factor of the scaled zero test `g > 1e-8 (1 + scale_k)`.
pub const TOL_ZERO: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Halfspace {
    pub a: Vec<f64>,
    pub b: f64,
}

/// The deterministic feasible set X.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum FeasibleSet {
    Box { lower: Vec<f64>, upper: Vec<f64> },
    Halfspaces { rows: Vec<Halfspace> },
    #[serde(rename = "nonneg")]
    NonNegOrthant { dim: usize },
    Simplex { dim: usize, sum: f64 },
    /// `u` is n×m (row-major), meaning Uᵀx = h.
    #[serde(rename = "affine_eq")]
    AffineEqualities { u: Vec<Vec<f64>>, h: Vec<f64> },
    #[serde(rename = "binary")]
    BinaryTiny { dim: usize },
    Free { dim: usize },
    Intersection { sets: Vec<FeasibleSet> },
}

/// Linear description of a polyhedral set: `ineq` rows a·x ≤ b, `eq` rows a·x = b, bounds.
#[derive(Debug, Clone, Default)]
pub struct LinearDescription {
    pub ineq: Vec<(Vec<f64>, f64)>,
    pub eq: Vec<(Vec<f64>, f64)>,
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

impl FeasibleSet {
    pub fn dim(&self) -> Option<usize> {
        match self {
            FeasibleSet::Box { lower, .. } => Some(lower.len()),
            FeasibleSet::Halfspaces { rows } => rows.first().map(|r| r.a.len()),
            FeasibleSet::NonNegOrthant { dim }
            | FeasibleSet::Simplex { dim, .. }
            | FeasibleSet::BinaryTiny { dim }
            | FeasibleSet::Free { dim } => Some(*dim),
            FeasibleSet::AffineEqualities { u, .. } => Some(u.len()),
            FeasibleSet::Intersection { sets } => sets.iter().find_map(|s| s.dim()),
        }
    }

    pub fn validate(&self, n: usize) -> Result<()> {
        let bad = |msg: String| Err(CcpError::validation("x_set", msg));
        match self {
            FeasibleSet::Box { lower, upper } => {
                if lower.len() != n || upper.len() != n {
                    return bad(format!("box bounds must have length {n}"));
                }
                if lower.iter().zip(upper).any(|(l, u)| !(l <= u) || !l.is_finite() || !u.is_finite()) {
                    return bad("box requires finite lower <= upper".into());
                }
            }
            FeasibleSet::Halfspaces { rows } => {
                if rows.is_empty() {
                    return bad("halfspaces needs at least one row".into());
                }
                if rows.iter().any(|r| r.a.len() != n || !r.b.is_finite() || r.a.iter().any(|v| !v.is_finite())) {
                    return bad(format!("halfspace rows must be finite with length {n}"));
                }
            }
            FeasibleSet::NonNegOrthant { dim } | FeasibleSet::Free { dim } => {
                if *dim != n {
                    return bad(format!("dimension {dim} != {n}"));
                }
            }
            FeasibleSet::Simplex { dim, sum } => {
                if *dim != n || !(*sum > 0.0) || !sum.is_finite() {
                    return bad("simplex needs matching dim and positive sum".into());
                }
            }
            FeasibleSet::AffineEqualities { u, h } => {
                if u.len() != n || u.iter().any(|r| r.len() != h.len()) {
                    return bad(format!("U must be {n}×{}", h.len()));
                }
            }
            FeasibleSet::BinaryTiny { dim } => {
                if *dim != n {
                    return bad(format!("dimension {dim} != {n}"));
                }
                if *dim > 20 {
                    return bad("binary lattice dimension is capped at 20".into());
                }
            }
            FeasibleSet::Intersection { sets } => {
                if sets.is_empty() {
                    return bad("empty intersection".into());
                }
                for s in sets {
                    s.validate(n)?;
                }
            }
        }
        Ok(())
    }

    pub fn is_binary(&self) -> bool {
        match self {
            FeasibleSet::BinaryTiny { .. } => true,
            FeasibleSet::Intersection { sets } => sets.iter().any(|s| s.is_binary()),
            _ => false,
        }
    }

    pub fn leaves(&self) -> Vec<&FeasibleSet> {
        match self {
            FeasibleSet::Intersection { sets } => sets.iter().flat_map(|s| s.leaves()).collect(),
            other => vec![other],
        }
    }

    /// Membership test with absolute tolerance `tol`.
    pub fn contains(&self, x: &[f64], tol: f64) -> bool {
        match self {
            FeasibleSet::Box { lower, upper } => x
                .iter()
                .zip(lower.iter().zip(upper))
                .all(|(v, (l, u))| *v >= l - tol && *v <= u + tol),
            FeasibleSet::Halfspaces { rows } => rows.iter().all(|r| dot(&r.a, x) <= r.b + tol),
            FeasibleSet::NonNegOrthant { .. } => x.iter().all(|v| *v >= -tol),
            FeasibleSet::Simplex { sum, .. } => {
                x.iter().all(|v| *v >= -tol) && (x.iter().sum::<f64>() - sum).abs() <= tol * (1.0 + x.len() as f64)
            }
            FeasibleSet::AffineEqualities { u, h } => (0..h.len()).all(|j| {
                let lhs: f64 = u.iter().zip(x).map(|(row, v)| row[j] * v).sum();
                (lhs - h[j]).abs() <= tol * (1.0 + h[j].abs())
            }),
            FeasibleSet::BinaryTiny { .. } => x.iter().all(|v| v.abs() <= tol || (v - 1.0).abs() <= tol),
            FeasibleSet::Free { .. } => true,
            FeasibleSet::Intersection { sets } => sets.iter().all(|s| s.contains(x, tol)),
        }
    }

    /// Per-coordinate lower bound implied by the set (used for nonnegativity checks).
    pub fn implied_lower(&self, n: usize) -> Vec<f64> {
        let mut lo = vec![f64::NEG_INFINITY; n];
        for leaf in self.leaves() {
            match leaf {
                FeasibleSet::Box { lower, .. } => {
                    for (l, v) in lo.iter_mut().zip(lower) {
                        *l = l.max(*v);
                    }
                }
                FeasibleSet::NonNegOrthant { .. } | FeasibleSet::Simplex { .. } | FeasibleSet::BinaryTiny { .. } => {
                    for l in lo.iter_mut() {
                        *l = l.max(0.0);
                    }
                }
                _ => {}
            }
        }
        lo
    }

    pub fn is_nonnegative(&self, n: usize) -> bool {
        self.implied_lower(n).iter().all(|l| *l >= 0.0)
    }

    /// Polyhedral description; binary lattices are relaxed to [0,1].
    pub fn linear_description(&self, n: usize) -> LinearDescription {
        let mut d = LinearDescription {
            lo: vec![f64::NEG_INFINITY; n],
            hi: vec![f64::INFINITY; n],
            ..Default::default()
        };
        for leaf in self.leaves() {
            match leaf {
                FeasibleSet::Box { lower, upper } => {
                    for j in 0..n {
                        d.lo[j] = d.lo[j].max(lower[j]);
                        d.hi[j] = d.hi[j].min(upper[j]);
                    }
                }
                FeasibleSet::Halfspaces { rows } => d.ineq.extend(rows.iter().map(|r| (r.a.clone(), r.b))),
                FeasibleSet::NonNegOrthant { .. } => d.lo.iter_mut().for_each(|l| *l = l.max(0.0)),
                FeasibleSet::Simplex { sum, .. } => {
                    d.lo.iter_mut().for_each(|l| *l = l.max(0.0));
                    d.eq.push((vec![1.0; n], *sum));
                }
                FeasibleSet::AffineEqualities { u, h } => {
                    for (j, hj) in h.iter().enumerate() {
                        d.eq.push((u.iter().map(|row| row[j]).collect(), *hj));
                    }
                }
                FeasibleSet::BinaryTiny { .. } => {
                    for j in 0..n {
                        d.lo[j] = d.lo[j].max(0.0);
                        d.hi[j] = d.hi[j].min(1.0);
                    }
                }
                FeasibleSet::Free { .. } | FeasibleSet::Intersection { .. } => {}
            }
        }
        d
    }
}

/// Which part of a bi-affine row is perturbed by the Wasserstein ball.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Perturb {
    #[default]
    Lhs,
    Rhs,
    Both,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ConstraintModel {
    /// g(x, ξᵏ) = max_i (D_k x − e_k)_i.
    #[serde(rename = "biaffine")]
    BiAffine {
        #[serde(rename = "D")]
        d: Vec<Vec<Vec<f64>>>,
        e: Vec<Vec<f64>>,
    },
    /// loss |d_kᵀx − e_k|.
    #[serde(rename = "biaffine_eq")]
    BiAffineEquality { d: Vec<Vec<f64>>, e: Vec<f64> },
    /// g(x, ξᵏ) = Σ_j ξᵏ_j |x_j|^p − b.
    #[serde(rename = "separable_power")]
    SeparableConvexPower { power: f64, weights: Vec<Vec<f64>>, threshold: f64 },
    /// g(x, ξᵏ) = max_r (1 − (A_k x)_r), data pre-normalized to a unit right-hand side.
    Covering {
        #[serde(rename = "A")]
        a: Vec<Vec<Vec<f64>>>,
    },
    /// Base loss plus θ‖y(x)‖_* from an ∞-Wasserstein ball around the scenarios.
    Robust {
        base: Box<ConstraintModel>,
        theta: f64,
        norm: NormSpec,
        #[serde(default)]
        perturb: Perturb,
    },
}

impl ConstraintModel {
    pub fn n_scenarios(&self) -> usize {
        match self {
            ConstraintModel::BiAffine { d, .. } => d.len(),
            ConstraintModel::BiAffineEquality { d, .. } => d.len(),
            ConstraintModel::SeparableConvexPower { weights, .. } => weights.len(),
            ConstraintModel::Covering { a } => a.len(),
            ConstraintModel::Robust { base, .. } => base.n_scenarios(),
        }
    }

    pub fn base(&self) -> &ConstraintModel {
        match self {
            ConstraintModel::Robust { base, .. } => base.base(),
            other => other,
        }
    }

    pub fn is_equality(&self) -> bool {
        matches!(self.base(), ConstraintModel::BiAffineEquality { .. })
    }

    pub fn is_covering(&self) -> bool {
        matches!(self, ConstraintModel::Covering { .. })
    }

    fn validate(&self, n: usize) -> Result<()> {
        let bad = |msg: String| Err(CcpError::validation("constraints", msg));
        let finite = |v: &[f64]| v.iter().all(|x| x.is_finite());
        match self {
            ConstraintModel::BiAffine { d, e } => {
                if d.is_empty() || d.len() != e.len() {
                    return bad("D and e need one entry per scenario".into());
                }
                for (k, (dk, ek)) in d.iter().zip(e).enumerate() {
                    if dk.is_empty() || dk.len() != ek.len() {
                        return bad(format!("scenario {k}: D rows and e length differ"));
                    }
                    if dk.iter().any(|r| r.len() != n || !finite(r)) || !finite(ek) {
                        return bad(format!("scenario {k}: rows must be finite with length {n}"));
                    }
                }
            }
            ConstraintModel::BiAffineEquality { d, e } => {
                if d.is_empty() || d.len() != e.len() {
                    return bad("d and e need one entry per scenario".into());
                }
                if d.iter().any(|r| r.len() != n || !finite(r)) || !finite(e) {
                    return bad(format!("rows must be finite with length {n}"));
                }
            }
            ConstraintModel::SeparableConvexPower { power, weights, threshold } => {
                if !(*power >= 1.0) || !power.is_finite() || !threshold.is_finite() {
                    return bad("power must be >= 1 and threshold finite".into());
                }
                if weights.is_empty() {
                    return bad("no scenarios".into());
                }
                if weights.iter().any(|w| w.len() != n || w.iter().any(|v| !(*v >= 0.0) || !v.is_finite())) {
                    return bad(format!("weights must be nonnegative with length {n}"));
                }
            }
            ConstraintModel::Covering { a } => {
                if a.is_empty() {
                    return bad("no scenarios".into());
                }
                for (k, ak) in a.iter().enumerate() {
                    if ak.is_empty() || ak.iter().any(|r| r.len() != n) {
                        return bad(format!("scenario {k}: rows must have length {n}"));
                    }
                    if ak.iter().flatten().any(|v| !(*v >= 0.0) || !v.is_finite()) {
                        return bad(format!("scenario {k}: covering entries must be nonnegative"));
                    }
                }
            }
            ConstraintModel::Robust { base, theta, norm, perturb } => {
                base.validate(n)?;
                if !(*theta >= 0.0) || !theta.is_finite() {
                    return Err(CcpError::validation("theta", "must be finite and >= 0"));
                }
                norm.validate()?;
                let ydim = robust_dim(base, n, *perturb)?;
                if let NormSpec::Mahalanobis { sigma } = norm {
                    if sigma.len() != ydim {
                        return Err(CcpError::validation("sigma", format!("expected {ydim}×{ydim}")));
                    }
                }
            }
        }
        Ok(())
    }

    /// Affine rows (a, b) with g_k(x) = max (a·x − b) for the polyhedral base models.
    pub fn affine_rows(&self, k: usize) -> Option<Vec<(Vec<f64>, f64)>> {
        match self {
            ConstraintModel::BiAffine { d, e } => Some(d[k].iter().cloned().zip(e[k].iter().copied()).collect()),
            ConstraintModel::BiAffineEquality { d, e } => {
                Some(vec![(d[k].clone(), e[k]), (d[k].iter().map(|v| -v).collect(), -e[k])])
            }
            ConstraintModel::Covering { a } => {
                Some(a[k].iter().map(|r| (r.iter().map(|v| -v).collect(), -1.0)).collect())
            }
            ConstraintModel::SeparableConvexPower { .. } | ConstraintModel::Robust { .. } => None,
        }
    }

    fn scale(&self, k: usize) -> f64 {
        match self {
            ConstraintModel::BiAffine { e, .. } => e[k].iter().fold(0.0f64, |m, v| m.max(v.abs())),
            ConstraintModel::BiAffineEquality { e, .. } => e[k].abs(),
            ConstraintModel::SeparableConvexPower { threshold, .. } => threshold.abs(),
            ConstraintModel::Covering { .. } => 1.0,
            ConstraintModel::Robust { base, .. } => base.scale(k),
        }
    }

    /// Loss value and one subgradient in x.
    pub fn value_grad(&self, k: usize, x: &[f64]) -> (f64, Vec<f64>) {
        match self {
            ConstraintModel::SeparableConvexPower { power, weights, threshold } => {
                let w = &weights[k];
                let mut v = -threshold;
                let mut g = vec![0.0; x.len()];
                for j in 0..x.len() {
                    let a = x[j].abs();
                    v += w[j] * a.powf(*power);
                    g[j] = if a == 0.0 { 0.0 } else { w[j] * power * a.powf(power - 1.0) * x[j].signum() };
                }
                (v, g)
            }
            ConstraintModel::Robust { base, theta, norm, perturb } => {
                let (v, mut g) = base.value_grad(k, x);
                if *theta == 0.0 {
                    return (v, g);
                }
                let (y, jac) = robust_argument(base, x, *perturb);
                let (r, gy) = norm.dual_value_grad(&y);
                for (j, gj) in g.iter_mut().enumerate() {
                    *gj += theta * gy.iter().zip(&jac).map(|(a, col)| a * col[j]).sum::<f64>();
                }
                (v + theta * r, g)
            }
            _ => {
                let rows = self.affine_rows(k).expect("polyhedral model");
                let mut best = f64::NEG_INFINITY;
                let mut arg = 0;
                for (i, (a, b)) in rows.iter().enumerate() {
                    let v = dot(a, x) - b;
                    if v > best {
                        best = v;
                        arg = i;
                    }
                }
                (best, rows[arg].0.clone())
            }
        }
    }

    pub fn value(&self, k: usize, x: &[f64]) -> f64 {
        match self {
            ConstraintModel::BiAffine { d, e } => {
                d[k].iter().zip(&e[k]).map(|(r, b)| dot(r, x) - b).fold(f64::NEG_INFINITY, f64::max)
            }
            ConstraintModel::BiAffineEquality { d, e } => (dot(&d[k], x) - e[k]).abs(),
            ConstraintModel::Covering { a } => a[k].iter().map(|r| 1.0 - dot(r, x)).fold(f64::NEG_INFINITY, f64::max),
            _ => self.value_grad(k, x).0,
        }
    }
}

/// Dimension of y(x) inside the robust term.
pub(crate) fn robust_dim(base: &ConstraintModel, n: usize, perturb: Perturb) -> Result<usize> {
    let power = matches!(base, ConstraintModel::SeparableConvexPower { .. });
    match perturb {
        Perturb::Lhs => Ok(n),
        _ if power => Err(CcpError::ModeMismatch("separable power thresholds are deterministic".into())),
        Perturb::Rhs => Ok(1),
        Perturb::Both => Ok(n + 1),
    }
}

/// y(x) and its Jacobian rows for the robust term; y(x) = ±a(x) up to sign (norm-invariant).
pub(crate) fn robust_argument(base: &ConstraintModel, x: &[f64], perturb: Perturb) -> (Vec<f64>, Vec<Vec<f64>>) {
    let n = x.len();
    let (ax, jac): (Vec<f64>, Vec<Vec<f64>>) = match base {
        ConstraintModel::SeparableConvexPower { power, .. } => {
            let ax = x.iter().map(|v| v.abs().powf(*power)).collect();
            let jac = (0..n)
                .map(|j| {
                    let mut row = vec![0.0; n];
                    let a = x[j].abs();
                    row[j] = if a == 0.0 { 0.0 } else { power * a.powf(power - 1.0) * x[j].signum() };
                    row
                })
                .collect();
            (ax, jac)
        }
        _ => {
            let jac = (0..n)
                .map(|j| {
                    let mut row = vec![0.0; n];
                    row[j] = 1.0;
                    row
                })
                .collect();
            (x.to_vec(), jac)
        }
    };
    match perturb {
        Perturb::Lhs => (ax, jac),
        Perturb::Rhs => (vec![1.0], vec![vec![0.0; n]]),
        Perturb::Both => {
            let mut y = ax;
            y.push(1.0);
            let mut j = jac;
            j.push(vec![0.0; n]);
            (y, j)
        }
    }
}

/// A finite-support chance-constrained program.
#[derive(Debug, Clone, PartialEq)]
pub struct CcpInstance {
    pub n: usize,
    pub probabilities: Vec<f64>,
    pub constraints: ConstraintModel,
    pub x_set: FeasibleSet,
    pub cost: Vec<f64>,
    pub epsilon: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub(crate) struct InstanceDoc {
    pub n: usize,
    pub epsilon: f64,
    pub cost: Vec<f64>,
    pub x_set: FeasibleSet,
    pub constraints: ConstraintModel,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub probabilities: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub drccp: Option<crate::drccp::DrccpDoc>,
}

impl CcpInstance {
    pub fn new(
        cost: Vec<f64>,
        x_set: FeasibleSet,
        constraints: ConstraintModel,
        epsilon: f64,
        probabilities: Option<Vec<f64>>,
    ) -> Result<Self> {
        let n = cost.len();
        let big_n = constraints.n_scenarios();
        let probabilities = probabilities.unwrap_or_else(|| vec![1.0 / big_n as f64; big_n]);
        let inst = CcpInstance { n, probabilities, constraints, x_set, cost, epsilon };
        inst.validate()?;
        Ok(inst)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(CcpError::validation("n", "must be positive"));
        }
        if self.cost.len() != self.n || self.cost.iter().any(|c| !c.is_finite()) {
            return Err(CcpError::validation("cost", format!("must be {} finite entries", self.n)));
        }
        if !(self.epsilon > 0.0 && self.epsilon < 1.0) {
            return Err(CcpError::validation("epsilon", "must lie in (0, 1)"));
        }
        self.x_set.validate(self.n)?;
        self.constraints.validate(self.n)?;
        let big_n = self.constraints.n_scenarios();
        if self.probabilities.len() != big_n {
            return Err(CcpError::validation("probabilities", format!("expected {big_n} entries")));
        }
        if self.probabilities.iter().any(|p| !(*p >= 0.0) || !p.is_finite()) {
            return Err(CcpError::validation("probabilities", "entries must be nonnegative"));
        }
        let mass: f64 = self.probabilities.iter().sum();
        if (mass - 1.0).abs() > 1e-12 {
            return Err(CcpError::validation("probabilities", format!("mass {mass} != 1")));
        }
        Ok(())
    }

    pub fn n_scenarios(&self) -> usize {
        self.probabilities.len()
    }

    pub fn is_equiprobable(&self) -> bool {
        let p0 = 1.0 / self.n_scenarios() as f64;
        self.probabilities.iter().all(|p| (p - p0).abs() <= 1e-12)
    }

    /// ⌊Nε⌋ with a guard against round-off just below an integer.
    pub fn max_drops(&self) -> usize {
        (self.n_scenarios() as f64 * self.epsilon + 1e-9).floor() as usize
    }

    pub fn cost_of(&self, x: &[f64]) -> f64 {
        dot(&self.cost, x)
    }

    /// g(x, ξᵏ) without bounds checking.
    pub fn g(&self, k: usize, x: &[f64]) -> f64 {
        self.constraints.value(k, x)
    }

    pub fn evaluate_g(&self, x: &[f64], k: usize) -> Result<f64> {
        if k >= self.n_scenarios() {
            return Err(CcpError::Index { k, n: self.n_scenarios() });
        }
        if x.len() != self.n {
            return Err(CcpError::Dimension(format!("x has length {}, expected {}", x.len(), self.n)));
        }
        Ok(self.g(k, x))
    }

    /// Scaled zero tolerance for scenario k.
    pub fn tol_zero(&self, k: usize, base: f64) -> f64 {
        base * (1.0 + self.constraints.scale(k))
    }

    pub fn violated(&self, x: &[f64], base_tol: f64) -> Vec<bool> {
        (0..self.n_scenarios()).map(|k| self.g(k, x) > self.tol_zero(k, base_tol)).collect()
    }

    pub fn violation_probability_with(&self, x: &[f64], base_tol: f64) -> f64 {
        let v: f64 = self
            .violated(x, base_tol)
            .iter()
            .zip(&self.probabilities)
            .filter(|(v, _)| **v)
            .map(|(_, p)| *p)
            .sum();
        v.clamp(0.0, 1.0)
    }

    pub fn violation_probability(&self, x: &[f64]) -> f64 {
        self.violation_probability_with(x, TOL_ZERO)
    }

    /// Chance feasibility; a violation mass equal to ε counts as feasible.
    pub fn is_feasible(&self, x: &[f64]) -> bool {
        self.mass_within_risk(self.violation_probability(x))
    }

    pub fn mass_within_risk(&self, mass: f64) -> bool {
        mass <= self.epsilon + 1e-9
    }

    /// Per-scenario positive-part losses s_k.
    pub fn violations(&self, x: &[f64]) -> Vec<f64> {
        (0..self.n_scenarios()).map(|k| self.g(k, x).max(0.0)).collect()
    }

    pub fn weighted_loss(&self, x: &[f64], z: &[f64]) -> f64 {
        self.violations(x).iter().zip(z).zip(&self.probabilities).map(|((s, z), p)| p * z * s).sum()
    }

    pub fn from_json(text: &str) -> Result<Self> {
        load_instance(text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.to_doc()).expect("instance serializes")
    }

    pub(crate) fn to_doc(&self) -> InstanceDoc {
        InstanceDoc {
            n: self.n,
            epsilon: self.epsilon,
            cost: self.cost.clone(),
            x_set: self.x_set.clone(),
            constraints: self.constraints.clone(),
            probabilities: Some(self.probabilities.clone()),
            drccp: None,
        }
    }

    pub(crate) fn from_doc(doc: InstanceDoc) -> Result<Self> {
        let inst = CcpInstance::new(doc.cost, doc.x_set, doc.constraints, doc.epsilon, doc.probabilities)?;
        if inst.n != doc.n {
            return Err(CcpError::validation("n", format!("n = {} but cost has {} entries", doc.n, inst.n)));
        }
        Ok(inst)
    }
}

pub(crate) fn parse_doc(text: &str) -> Result<InstanceDoc> {
    serde_json::from_str(text).map_err(|e| CcpError::Parse(e.to_string()))
}

/// Parse and validate a finite-support instance document.
pub fn load_instance(text: &str) -> Result<CcpInstance> {
    CcpInstance::from_doc(parse_doc(text)?)
}

/// Outcome record shared by every solver.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveReport {
    pub method: String,
    pub t_star: f64,
    pub x_star: Vec<f64>,
    pub objective: f64,
    pub feasible: bool,
    pub violation_prob: f64,
    pub iterations: usize,
    pub lower_bound_used: f64,
    pub upper_bound_used: f64,
    pub wall_time: f64,
    pub backend: String,
    #[serde(default)]
    pub config: serde_json::Map<String, serde_json::Value>,
}

impl SolveReport {
    pub fn for_point(inst: &CcpInstance, method: &str, x: Vec<f64>) -> Self {
        let violation_prob = inst.violation_probability(&x);
        SolveReport {
            method: method.to_string(),
            t_star: inst.cost_of(&x),
            objective: inst.cost_of(&x),
            feasible: inst.mass_within_risk(violation_prob),
            violation_prob,
            x_star: x,
            iterations: 0,
            lower_bound_used: f64::NEG_INFINITY,
            upper_bound_used: f64::INFINITY,
            wall_time: 0.0,
            backend: String::new(),
            config: Default::default(),
        }
    }

    pub fn with_config(mut self, key: &str, value: impl Serialize) -> Self {
        self.config.insert(key.to_string(), serde_json::to_value(value).unwrap_or(serde_json::Value::Null));
        self
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog;

    #[test]
    fn loads_three_point_document() {
        let doc = r#"{"n":1,"epsilon":0.5,"cost":[1],"x_set":{"type":"nonneg","dim":1},
            "constraints":{"type":"biaffine","D":[[[-1]],[[-1]],[[-1]]],"e":[[-3],[-2],[-1]]}}"#;
        let inst = load_instance(doc).unwrap();
        assert_eq!(inst.n_scenarios(), 3);
        assert_eq!(inst, catalog::three_point_shift());
    }

    #[test]
    fn rejects_excess_mass_and_boundary_risk() {
        let base = catalog::three_point_shift();
        let mut doc = base.to_doc();
        doc.probabilities = Some(vec![0.5, 0.6, 0.0]);
        let err = CcpInstance::from_doc(doc).unwrap_err();
        assert!(matches!(err, CcpError::Validation { ref field, .. } if field == "probabilities"));
        let mut doc = base.to_doc();
        doc.epsilon = 1.0;
        let err = CcpInstance::from_doc(doc).unwrap_err();
        assert!(matches!(err, CcpError::Validation { ref field, .. } if field == "epsilon"));
    }

    #[test]
    fn malformed_json_is_parse_error() {
        assert!(matches!(load_instance("{not json"), Err(CcpError::Parse(_))));
    }

    #[test]
    fn evaluates_scenario_losses() {
        let b1 = catalog::three_point_shift();
        assert!((b1.evaluate_g(&[2.0], 0).unwrap() - 1.0).abs() < 1e-15);
        assert!(matches!(b1.evaluate_g(&[2.0], 3), Err(CcpError::Index { .. })));
        let tri = catalog::symmetric_triangle();
        assert!((tri.evaluate_g(&[0.3, 0.3], 1).unwrap() - 0.1).abs() < 1e-12);
    }

    #[test]
    fn violation_mass() {
        let b1 = catalog::three_point_shift();
        assert!((b1.violation_probability(&[2.0]) - 1.0 / 3.0).abs() < 1e-15);
        assert!(b1.is_feasible(&[2.0]));
        assert_eq!(b1.violation_probability(&[5.0]), 0.0);
        let tri = catalog::symmetric_triangle();
        assert!((tri.violation_probability(&[0.3, 0.3]) - 2.0 / 3.0).abs() < 1e-15);
        assert!(!tri.is_feasible(&[0.3, 0.3]));
    }

    #[test]
    fn zero_row_gives_negative_threshold() {
        let inst = CcpInstance::new(
            vec![1.0, 1.0],
            FeasibleSet::Free { dim: 2 },
            ConstraintModel::BiAffine { d: vec![vec![vec![0.0, 0.0]]], e: vec![vec![4.0]] },
            0.5,
            None,
        )
        .unwrap();
        assert_eq!(inst.g(0, &[3.0, -7.0]), -4.0);
    }
}
