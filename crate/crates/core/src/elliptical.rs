//! Single linear chance constraints under elliptical (Gaussian) uncertainty:
//! P{ξᵀa₁(x) ≤ b₁(x)} ≥ 1 − ε with a₁(x) = Ax + a0 and b₁(x) = bᵀx + b0.

use std::fmt;
use std::sync::Arc;
use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;

use crate::alsox::{bisect, BisectionConfig};
use crate::error::{CcpError, Result};
use crate::geometry::{NormSpec, PreparedSet};
use crate::linform::LinearForm;
use crate::lp::{solve_lp, LpOutcome};
use crate::model::{dot, FeasibleSet, SolveReport};

const SQRT_2: f64 = std::f64::consts::SQRT_2;
const INV_SQRT_2PI: f64 = 0.398_942_280_401_432_7;
/// Bounding box used when the exact conic program is solved over an unbounded X.
pub const CONIC_BOX: f64 = 1e3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NormalFn {
    Pdf,
    Cdf,
    Quantile,
}

pub fn normal_pdf(u: f64) -> f64 {
    INV_SQRT_2PI * (-0.5 * u * u).exp()
}

pub fn normal_cdf(u: f64) -> f64 {
    0.5 * erfc(-u / SQRT_2)
}

/// Upper tail 1 − Φ(u) without cancellation.
pub fn normal_sf(u: f64) -> f64 {
    0.5 * erfc(u / SQRT_2)
}

/// Φ⁻¹ by bisection on `normal_cdf`, so Φ(Φ⁻¹(u)) = u to rounding.
pub fn normal_quantile(u: f64) -> Result<f64> {
    if !(u > 0.0 && u < 1.0) {
        return Err(CcpError::Domain(format!("quantile needs u in (0, 1), got {u}")));
    }
    Ok(bracketed_quantile(normal_cdf, u))
}

fn bracketed_quantile(cdf: impl Fn(f64) -> f64, u: f64) -> f64 {
    let (mut lo, mut hi) = (-40.0, 40.0);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if cdf(mid) < u {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 1e-15 * (1.0 + mid.abs()) {
            break;
        }
    }
    0.5 * (lo + hi)
}

pub fn std_normal(kind: NormalFn, u: f64) -> Result<f64> {
    match kind {
        NormalFn::Pdf => Ok(normal_pdf(u)),
        NormalFn::Cdf => Ok(normal_cdf(u)),
        NormalFn::Quantile => normal_quantile(u),
    }
}

/// E(Z − α)₊ for a standard normal Z: φ(α) − α + αΦ(α).
pub fn hinge_factor(alpha: f64) -> f64 {
    normal_pdf(alpha) - alpha * normal_sf(alpha)
}

/// A spherical generator of an elliptical family: density φ, cdf Φ, quantile and Ḡ,
/// with Ḡ(α²/2) = E[Z·1{Z > α}] for the standardized variable Z.
pub trait EllipticalGenerator: Send + Sync {
    fn pdf(&self, u: f64) -> f64;
    fn cdf(&self, u: f64) -> f64;
    fn quantile(&self, u: f64) -> f64 {
        bracketed_quantile(|v| self.cdf(v), u)
    }
    fn gbar(&self, u: f64) -> f64;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Gaussian;

impl EllipticalGenerator for Gaussian {
    fn pdf(&self, u: f64) -> f64 {
        normal_pdf(u)
    }
    fn cdf(&self, u: f64) -> f64 {
        normal_cdf(u)
    }
    fn quantile(&self, u: f64) -> f64 {
        bracketed_quantile(normal_cdf, u)
    }
    fn gbar(&self, u: f64) -> f64 {
        INV_SQRT_2PI * (-u).exp()
    }
}

#[derive(Clone)]
pub enum Generator {
    Gaussian,
    Custom(Arc<dyn EllipticalGenerator>),
}

impl fmt::Debug for Generator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Generator::Gaussian => f.write_str("Gaussian"),
            Generator::Custom(_) => f.write_str("Custom"),
        }
    }
}

impl Generator {
    fn get(&self) -> &dyn EllipticalGenerator {
        match self {
            Generator::Gaussian => &Gaussian,
            Generator::Custom(g) => g.as_ref(),
        }
    }

    fn check(&self) -> Result<()> {
        let g = self.get();
        let pts = [-3.0, -1.0, 0.0, 1.0, 3.0];
        let ok = pts.windows(2).all(|w| g.cdf(w[0]) <= g.cdf(w[1])) && pts.iter().all(|v| (0.0..=1.0).contains(&g.cdf(*v)));
        if ok {
            Ok(())
        } else {
            Err(CcpError::validation("generator", "cdf must be monotone with values in [0, 1]"))
        }
    }
}

/// Single linear CCP with elliptical uncertainty.
#[derive(Debug, Clone)]
pub struct EllipticalCcp {
    pub mu: Vec<f64>,
    pub sigma: Vec<Vec<f64>>,
    /// m×n matrix of a₁(x) = Ax + a0.
    pub a: Vec<Vec<f64>>,
    pub a0: Vec<f64>,
    pub b: Vec<f64>,
    pub b0: f64,
    pub x_set: FeasibleSet,
    pub cost: Vec<f64>,
    pub epsilon: f64,
    /// ∞-Wasserstein radius (0 for the nominal problem).
    pub theta: f64,
    pub wasserstein_norm: Option<NormSpec>,
    pub generator: Generator,
    sig: DMatrix<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct EllipticalDoc {
    #[serde(rename = "type")]
    kind: String,
    mu: Vec<f64>,
    sigma: Vec<Vec<f64>>,
    #[serde(rename = "A")]
    a: Vec<Vec<f64>>,
    a0: Vec<f64>,
    b: Vec<f64>,
    b0: f64,
    x_set: FeasibleSet,
    cost: Vec<f64>,
    epsilon: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    theta: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    wasserstein_norm: Option<NormSpec>,
}

pub const ELLIPTICAL_TYPE: &str = "elliptical_gaussian";

impl EllipticalCcp {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        mu: Vec<f64>,
        sigma: Vec<Vec<f64>>,
        a: Vec<Vec<f64>>,
        a0: Vec<f64>,
        b: Vec<f64>,
        b0: f64,
        x_set: FeasibleSet,
        cost: Vec<f64>,
        epsilon: f64,
    ) -> Result<Self> {
        let m = mu.len();
        let sig = DMatrix::from_fn(m, m, |i, j| sigma.get(i).and_then(|r| r.get(j)).copied().unwrap_or(f64::NAN));
        let inst = EllipticalCcp {
            mu,
            sigma,
            a,
            a0,
            b,
            b0,
            x_set,
            cost,
            epsilon,
            theta: 0.0,
            wasserstein_norm: None,
            generator: Generator::Gaussian,
            sig,
        };
        inst.validate()?;
        Ok(inst)
    }

    pub fn with_theta(mut self, theta: f64) -> Result<Self> {
        if !(theta >= 0.0) || !theta.is_finite() {
            return Err(CcpError::validation("theta", "must be finite and >= 0"));
        }
        self.theta = theta;
        Ok(self)
    }

    pub fn with_generator(mut self, generator: Generator) -> Result<Self> {
        generator.check()?;
        self.generator = generator;
        Ok(self)
    }

    pub fn n(&self) -> usize {
        self.cost.len()
    }

    pub fn validate(&self) -> Result<()> {
        let m = self.mu.len();
        let n = self.cost.len();
        let bad = |f: &str, msg: &str| Err(CcpError::validation(f, msg));
        if m == 0 || n == 0 {
            return bad("mu", "dimensions must be positive");
        }
        if self.sigma.len() != m || self.sigma.iter().any(|r| r.len() != m) {
            return bad("sigma", "must be m×m");
        }
        NormSpec::Mahalanobis { sigma: self.sigma.clone() }.validate()?;
        if self.a.len() != m || self.a.iter().any(|r| r.len() != n) || self.a0.len() != m || self.b.len() != n {
            return bad("A", "A must be m×n, a0 of length m, b of length n");
        }
        let finite = self.mu.iter().chain(self.a.iter().flatten()).chain(&self.a0).chain(&self.b).chain(&self.cost);
        if finite.copied().any(|v| !v.is_finite()) || !self.b0.is_finite() {
            return bad("A", "entries must be finite");
        }
        if !(self.epsilon > 0.0 && self.epsilon < 1.0) {
            return bad("epsilon", "must lie in (0, 1)");
        }
        self.x_set.validate(n)?;
        if self.x_set.is_binary() {
            return bad("x_set", "binary sets are not supported for elliptical instances");
        }
        Ok(())
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let doc: EllipticalDoc = serde_json::from_str(text).map_err(|e| CcpError::Parse(e.to_string()))?;
        Self::from_value_doc(doc)
    }

    pub(crate) fn from_value(v: serde_json::Value) -> Result<Self> {
        let doc: EllipticalDoc = serde_json::from_value(v).map_err(|e| CcpError::Parse(e.to_string()))?;
        Self::from_value_doc(doc)
    }

    fn from_value_doc(doc: EllipticalDoc) -> Result<Self> {
        if doc.kind != ELLIPTICAL_TYPE {
            return Err(CcpError::Parse(format!("expected type \"{ELLIPTICAL_TYPE}\", got \"{}\"", doc.kind)));
        }
        let mut inst =
            EllipticalCcp::new(doc.mu, doc.sigma, doc.a, doc.a0, doc.b, doc.b0, doc.x_set, doc.cost, doc.epsilon)?;
        if let Some(t) = doc.theta {
            inst = inst.with_theta(t)?;
        }
        if let Some(norm) = doc.wasserstein_norm {
            norm.validate()?;
            inst.wasserstein_norm = Some(norm);
        }
        Ok(inst)
    }

    pub fn to_json(&self) -> String {
        let doc = EllipticalDoc {
            kind: ELLIPTICAL_TYPE.into(),
            mu: self.mu.clone(),
            sigma: self.sigma.clone(),
            a: self.a.clone(),
            a0: self.a0.clone(),
            b: self.b.clone(),
            b0: self.b0,
            x_set: self.x_set.clone(),
            cost: self.cost.clone(),
            epsilon: self.epsilon,
            theta: (self.theta > 0.0).then_some(self.theta),
            wasserstein_norm: self.wasserstein_norm.clone(),
        };
        serde_json::to_string_pretty(&doc).expect("document serializes")
    }

    pub fn a1(&self, x: &[f64]) -> Vec<f64> {
        self.a.iter().zip(&self.a0).map(|(r, c)| dot(r, x) + c).collect()
    }

    pub fn b1(&self, x: &[f64]) -> f64 {
        dot(&self.b, x) + self.b0
    }

    /// σ(x) = √(a₁ᵀΣa₁).
    pub fn sigma_of(&self, x: &[f64]) -> f64 {
        let a1 = DVector::from_vec(self.a1(x));
        a1.dot(&(&self.sig * &a1)).max(0.0).sqrt()
    }

    /// b₁(x) − μᵀa₁(x).
    pub fn mean_margin(&self, x: &[f64]) -> f64 {
        self.b1(x) - dot(&self.mu, &self.a1(x))
    }

    fn q(&self) -> f64 {
        self.generator.get().quantile(1.0 - self.epsilon)
    }

    /// Margin with quantile coefficient Φ⁻¹(1−ε) + θ; ±∞ when σ(x) = 0 by sign convention.
    fn margin_with(&self, x: &[f64], coef: f64) -> f64 {
        let sig = self.sigma_of(x);
        let m = self.mean_margin(x);
        if sig == 0.0 {
            return if m >= 0.0 { f64::INFINITY } else { f64::NEG_INFINITY };
        }
        m - coef * sig
    }

    /// Nominal margin (b₁ − μᵀa₁) − Φ⁻¹(1−ε)σ; x is chance-feasible iff it is ≥ 0.
    pub fn conic_margin(&self, x: &[f64]) -> f64 {
        self.margin_with(x, self.q())
    }

    /// Worst-case margin over the ∞-Wasserstein ball with the Mahalanobis(Σ) norm.
    pub fn robust_conic_margin(&self, x: &[f64], theta: f64) -> Result<f64> {
        if !(theta >= 0.0) {
            return Err(CcpError::validation("theta", "must be >= 0"));
        }
        self.check_norm()?;
        Ok(self.margin_with(x, self.q() + theta))
    }

    fn check_norm(&self) -> Result<()> {
        match &self.wasserstein_norm {
            None => Ok(()),
            Some(NormSpec::Mahalanobis { sigma }) if sigma_eq(sigma, &self.sigma) => Ok(()),
            Some(other) => Err(CcpError::NormMismatch(format!(
                "closed-form robust margin needs the Mahalanobis norm of sigma, got {other:?}"
            ))),
        }
    }

    /// (α, σ) with α = (b₁ − μᵀa₁)/σ − θ.
    fn alpha(&self, x: &[f64]) -> (f64, f64) {
        let sig = self.sigma_of(x);
        (self.mean_margin(x) / sig - self.theta, sig)
    }

    /// Closed-form hinge loss E(ξᵀa₁(x) − b₁(x) + θσ(x))₊.
    pub fn hinge(&self, x: &[f64]) -> f64 {
        self.hinge_grad(x).0
    }

    fn hinge_grad(&self, x: &[f64]) -> (f64, Vec<f64>) {
        let n = self.n();
        let a1 = DVector::from_vec(self.a1(x));
        let sa = &self.sig * &a1;
        let sig = a1.dot(&sa).max(0.0).sqrt();
        // ∇(μᵀa₁ − b₁) = Aᵀμ − b
        let grad_m: Vec<f64> = (0..n).map(|j| self.a.iter().zip(&self.mu).map(|(r, m)| r[j] * m).sum::<f64>() - self.b[j]).collect();
        let m = -self.mean_margin(x);
        if sig <= 1e-300 {
            let v = m.max(0.0);
            let g = if m > 0.0 { grad_m } else { vec![0.0; n] };
            return (v, g);
        }
        let alpha = -m / sig - self.theta;
        let gen = self.generator.get();
        let tail = 1.0 - gen.cdf(alpha);
        let tail = if matches!(self.generator, Generator::Gaussian) { normal_sf(alpha) } else { tail };
        let dens = gen.gbar(0.5 * alpha * alpha);
        let value = sig * (dens - alpha * tail);
        // ∇σ = AᵀΣa₁/σ; ∇h = Ḡ(α²/2)∇σ + (1 − Φ(α))∇(μᵀa₁ − b₁) + θ(1 − Φ(α))∇σ
        let grad: Vec<f64> = (0..n)
            .map(|j| {
                let ds = self.a.iter().zip(sa.iter()).map(|(r, v)| r[j] * v).sum::<f64>() / sig;
                (dens + self.theta * tail) * ds + tail * grad_m[j]
            })
            .collect();
        (value, grad)
    }

    /// Probability (worst case when θ > 0) that ξᵀa₁(x) > b₁(x).
    pub fn violation_probability(&self, x: &[f64]) -> f64 {
        let (alpha, sig) = self.alpha(x);
        if sig == 0.0 {
            return if self.mean_margin(x) >= 0.0 { 0.0 } else { 1.0 };
        }
        1.0 - self.generator.get().cdf(alpha)
    }

    fn feasible(&self, x: &[f64]) -> bool {
        self.margin_with(x, self.q() + self.theta) >= -1e-9 * (1.0 + self.b1(x).abs())
    }

    fn report(&self, method: &str, x: Vec<f64>) -> SolveReport {
        let violation_prob = self.violation_probability(&x);
        let objective = dot(&self.cost, &x);
        SolveReport {
            method: method.to_string(),
            t_star: objective,
            objective,
            feasible: self.feasible(&x),
            violation_prob,
            x_star: x,
            iterations: 0,
            lower_bound_used: f64::NEG_INFINITY,
            upper_bound_used: f64::INFINITY,
            wall_time: 0.0,
            backend: "closed_form".into(),
            config: Default::default(),
        }
    }
}

fn sigma_eq(a: &[Vec<f64>], b: &[Vec<f64>]) -> bool {
    a.len() == b.len() && a.iter().zip(b).all(|(r, s)| r.len() == s.len() && r.iter().zip(s).all(|(x, y)| (x - y).abs() <= 1e-12))
}

/// Gaussian hinge loss σ(φ(α) − α + αΦ(α)) at x.
pub fn gaussian_hinge(inst: &EllipticalCcp, x: &[f64]) -> f64 {
    inst.hinge(x)
}

pub fn conic_margin(inst: &EllipticalCcp, x: &[f64]) -> f64 {
    inst.conic_margin(x)
}

pub fn robust_conic_margin(inst: &EllipticalCcp, x: &[f64], theta: f64) -> Result<f64> {
    inst.robust_conic_margin(x, theta)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConicSolution {
    pub x: Vec<f64>,
    pub value: f64,
    pub cuts: usize,
}

/// min cᵀx over X with (Φ⁻¹(1−ε) + θ)σ(x) + μᵀa₁ − b₁ ≤ 0, by Kelley cutting planes
/// (X intersected with the box |x_j| ≤ `CONIC_BOX`). Needs Φ⁻¹(1−ε) + θ ≥ 0 for convexity.
pub fn exact_conic(inst: &EllipticalCcp) -> Result<ConicSolution> {
    let coef = inst.q() + inst.theta;
    if coef < -1e-12 {
        return Err(CcpError::Domain("the margin constraint is nonconvex for this risk level".into()));
    }
    let coef = coef.max(0.0);
    let n = inst.n();
    let mut b = LinearForm::empty().builder_on(&inst.x_set, n);
    b.lp.c[..n].copy_from_slice(&inst.cost);
    for j in 0..n {
        b.lp.lo[j] = b.lp.lo[j].max(-CONIC_BOX);
        b.lp.hi[j] = b.lp.hi[j].min(CONIC_BOX);
    }
    b.finish_structure();
    let violation = |x: &[f64]| -> (f64, Vec<f64>) {
        let a1 = DVector::from_vec(inst.a1(x));
        let sa = &inst.sig * &a1;
        let sig = a1.dot(&sa).max(0.0).sqrt();
        let v = coef * sig - inst.mean_margin(x);
        let g = (0..n)
            .map(|j| {
                let ds = if sig > 0.0 { inst.a.iter().zip(sa.iter()).map(|(r, v)| r[j] * v).sum::<f64>() / sig } else { 0.0 };
                coef * ds + inst.a.iter().zip(&inst.mu).map(|(r, m)| r[j] * m).sum::<f64>() - inst.b[j]
            })
            .collect();
        (v, g)
    };
    let tol = 1e-9 * (1.0 + inst.b0.abs());
    for cuts in 0..5_000 {
        let x = match solve_lp(&b.lp)? {
            LpOutcome::Optimal { x, .. } => x,
            LpOutcome::Infeasible => return Err(CcpError::Infeasible("conic program".into())),
            LpOutcome::Unbounded => return Err(CcpError::Unbounded("conic program".into())),
        };
        let (v, g) = violation(&x);
        if v <= tol {
            let value = dot(&inst.cost, &x);
            return Ok(ConicSolution { x, value, cuts });
        }
        // v + g·(y − x) ≤ 0
        b.lp.add_le(g.clone(), dot(&g, &x) - v);
    }
    Err(CcpError::NoConvergence { iterations: 5_000, best: Vec::new() })
}

/// Projected gradient with Armijo backtracking on the closed-form hinge over S(t).
fn minimize_hinge(inst: &EllipticalCcp, set: &PreparedSet, x0: &[f64]) -> Vec<f64> {
    let mut x = set.project_lenient(x0);
    let (mut h, mut g) = inst.hinge_grad(&x);
    let mut eta = 1.0;
    for _ in 0..5_000 {
        if g.iter().all(|v| *v == 0.0) || !h.is_finite() {
            break;
        }
        let mut accepted = None;
        while eta > 1e-14 {
            let y: Vec<f64> = x.iter().zip(&g).map(|(a, d)| a - eta * d).collect();
            let y = set.project_lenient(&y);
            let step2: f64 = y.iter().zip(&x).map(|(a, b)| (a - b).powi(2)).sum();
            let hy = inst.hinge(&y);
            if hy <= h - 1e-4 / eta * step2 {
                accepted = Some((y, hy, step2));
                break;
            }
            eta *= 0.5;
        }
        let Some((y, hy, step2)) = accepted else { break };
        let done = step2.sqrt() <= 1e-12 * (1.0 + x.iter().map(|v| v.abs()).fold(0.0, f64::max));
        x = y;
        h = hy;
        g = inst.hinge_grad(&x).1;
        if done || h <= 0.0 {
            break;
        }
        eta = (2.0 * eta).min(1e12);
    }
    x
}

/// Bisection on t with the closed-form hinge lower level and the conic feasibility test.
pub fn also_x_elliptical(inst: &EllipticalCcp, cfg: &BisectionConfig) -> Result<SolveReport> {
    let start = Instant::now();
    inst.check_norm()?;
    let exact = exact_conic(inst).ok();
    let (t_l, t_u) = match (&exact, cfg.t_lower, cfg.t_upper) {
        (_, Some(l), Some(u)) => (l, u),
        (Some(e), l, u) => (l.unwrap_or(e.value), u.unwrap_or(e.value)),
        (None, l, u) => (l.unwrap_or(f64::NEG_INFINITY), u.unwrap_or(0.0)),
    };
    let mut warm = exact.as_ref().map(|e| e.x.clone()).unwrap_or_else(|| vec![0.0; inst.n()]);
    let run = bisect(cfg, t_l, t_u, |t| {
        let (x, _) = solve_elliptical_lower_level(inst, t, None, &warm)?;
        warm.clone_from(&x);
        Ok(inst.feasible(&x).then_some(x))
    })?;
    let mut r = inst.report("alsox", run.x);
    r.t_star = run.t;
    r.iterations = run.checks;
    r.lower_bound_used = run.t_lower;
    r.upper_bound_used = run.t_upper;
    r.wall_time = start.elapsed().as_secs_f64();
    Ok(r.with_config("delta1", cfg.delta1).with_config("theta", inst.theta))
}

/// Condition under which ALSO-X recovers the exact optimum of the single linear CCP.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExactnessCondition {
    /// σ(x) is constant over x.
    ConstantScale,
    /// b₁(x) − μᵀa₁(x) is constant over x.
    ConstantMeanMargin,
}

/// Which exactness condition holds, checked on the data (A = 0, or Aᵀμ = b).
pub fn exactness_condition(inst: &EllipticalCcp) -> Option<ExactnessCondition> {
    let tol = 1e-12;
    if inst.a.iter().flatten().all(|v| v.abs() <= tol) {
        return Some(ExactnessCondition::ConstantScale);
    }
    let n = inst.n();
    let drift = (0..n).map(|j| inst.a.iter().zip(&inst.mu).map(|(r, m)| r[j] * m).sum::<f64>() - inst.b[j]);
    drift.into_iter().all(|d| d.abs() <= 1e-10).then_some(ExactnessCondition::ConstantMeanMargin)
}

/// Minimizer of the closed-form hinge over X ∩ {cᵀx ≤ t}; only unit weights are supported.
pub fn solve_elliptical_lower_level(inst: &EllipticalCcp, t: f64, z: Option<&[f64]>, x0: &[f64]) -> Result<(Vec<f64>, f64)> {
    if let Some(z) = z {
        if z.iter().any(|v| (v - 1.0).abs() > 1e-12) {
            return Err(CcpError::BackendUnavailable("the closed form needs unit scenario weights".into()));
        }
    }
    let set = PreparedSet::new(&inst.x_set, inst.n(), Some((&inst.cost, t))).map_err(|_| CcpError::InfeasibleBudget { t })?;
    let start = set.project_lenient(x0);
    if !set.contains(&start, 1e-6) {
        return Err(CcpError::InfeasibleBudget { t });
    }
    let x = minimize_hinge(inst, &set, &start);
    let v = inst.hinge(&x);
    Ok((x, v))
}

/// Report for the exact conic optimum.
pub fn solve_exact_conic(inst: &EllipticalCcp) -> Result<SolveReport> {
    let start = Instant::now();
    let sol = exact_conic(inst)?;
    let mut r = inst.report("conic", sol.x);
    r.iterations = sol.cuts;
    r.backend = "cutting_plane".into();
    r.wall_time = start.elapsed().as_secs_f64();
    Ok(r)
}

/// ξ ~ N((2,1), I), constraint ξᵀx ≤ 1, ε = 0.05, min −x₁ − 3x₂ over ℝ².
pub fn gaussian_plane() -> EllipticalCcp {
    EllipticalCcp::new(
        vec![2.0, 1.0],
        vec![vec![1.0, 0.0], vec![0.0, 1.0]],
        vec![vec![1.0, 0.0], vec![0.0, 1.0]],
        vec![0.0, 0.0],
        vec![0.0, 0.0],
        1.0,
        FeasibleSet::Free { dim: 2 },
        vec![-1.0, -3.0],
        0.05,
    )
    .expect("valid instance")
}

/// Portfolio selection over the simplex: returns ξ ~ N(μ, Σ), P{ξᵀx ≤ level} ≥ 1 − ε, min cᵀx.
pub fn portfolio(mu: Vec<f64>, sigma: Vec<Vec<f64>>, cost: Vec<f64>, level: f64, epsilon: f64) -> Result<EllipticalCcp> {
    let n = mu.len();
    let eye = (0..n).map(|i| (0..n).map(|j| if i == j { 1.0 } else { 0.0 }).collect()).collect();
    EllipticalCcp::new(mu, sigma, eye, vec![0.0; n], vec![0.0; n], level, FeasibleSet::Simplex { dim: n, sum: 1.0 }, cost, epsilon)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn normal_values() {
        assert_eq!(normal_cdf(0.0), 0.5);
        assert!((normal_pdf(0.0) - 0.398_942_280_4).abs() < 1e-9);
        assert!((normal_quantile(0.95).unwrap() - 1.644_853_626_951).abs() < 1e-6);
        assert!(matches!(normal_quantile(1.0), Err(CcpError::Domain(_))));
        let u = 0.123;
        assert!((normal_cdf(normal_quantile(u).unwrap()) - u).abs() < 1e-9);
    }

    #[test]
    fn hinge_at_zero_alpha() {
        let inst = gaussian_plane();
        // α = 0 when b₁ = μᵀx: x = (0.5, 0), σ = 0.5
        let x = [0.5, 0.0];
        assert!((inst.hinge(&x) - 0.5 * normal_pdf(0.0)).abs() < 1e-12);
    }

    #[test]
    fn margin_at_reference_point() {
        let inst = gaussian_plane();
        assert!(inst.conic_margin(&[-0.375511, 0.598504]) < 0.0);
        let half = EllipticalCcp { epsilon: 0.5, ..gaussian_plane() };
        let x = [0.3, -0.2];
        assert!((half.conic_margin(&x) - half.mean_margin(&x)).abs() < 1e-12);
    }

    #[test]
    fn robust_margin_needs_mahalanobis() {
        let mut inst = gaussian_plane();
        let x = [0.1, 0.1];
        assert_eq!(inst.robust_conic_margin(&x, 0.0).unwrap(), inst.conic_margin(&x));
        inst.wasserstein_norm = Some(NormSpec::L2);
        assert!(matches!(inst.robust_conic_margin(&x, 0.1), Err(CcpError::NormMismatch(_))));
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let inst = gaussian_plane().with_theta(0.2).unwrap();
        let x = [0.3, 0.4];
        let (_, g) = inst.hinge_grad(&x);
        for j in 0..2 {
            let mut xp = x;
            let mut xm = x;
            xp[j] += 1e-6;
            xm[j] -= 1e-6;
            let fd = (inst.hinge(&xp) - inst.hinge(&xm)) / 2e-6;
            assert!((fd - g[j]).abs() < 1e-6, "{j}: {fd} vs {}", g[j]);
        }
    }

    #[test]
    fn plane_exact_and_alsox() {
        let inst = gaussian_plane();
        let exact = exact_conic(&inst).unwrap();
        assert!((exact.value + 1.55432).abs() < 1e-3, "{}", exact.value);
        let r = also_x_elliptical(&inst, &BisectionConfig::default()).unwrap();
        assert!(r.objective >= -1.43 && r.feasible, "{:?}", r);
        assert_eq!(exactness_condition(&inst), None);
    }

    #[test]
    fn portfolio_matches_conic() {
        let mu = vec![1.0, 1.0, 1.0];
        let eye: Vec<Vec<f64>> = (0..3).map(|i| (0..3).map(|j| f64::from(u8::from(i == j))).collect()).collect();
        let inst = portfolio(mu, eye, vec![-1.0, -2.0, -3.0], 2.0, 0.1).unwrap();
        assert_eq!(exactness_condition(&inst), None);
        let exact = exact_conic(&inst).unwrap();
        let r = also_x_elliptical(&inst, &BisectionConfig::default()).unwrap();
        assert!(r.objective - exact.value <= 1e-2 + 1e-9, "{} vs {}", r.objective, exact.value);
    }

    #[test]
    fn unit_weights_only() {
        let inst = gaussian_plane();
        let r = solve_elliptical_lower_level(&inst, 0.0, Some(&[2.0]), &[0.0, 0.0]);
        assert!(matches!(r, Err(CcpError::BackendUnavailable(_))));
    }

    #[test]
    fn json_round_trip() {
        let inst = gaussian_plane();
        let back = EllipticalCcp::from_json(&inst.to_json()).unwrap();
        assert_eq!(back.mu, inst.mu);
        assert!(EllipticalCcp::from_json(r#"{"type":"other"}"#).is_err());
    }
}
