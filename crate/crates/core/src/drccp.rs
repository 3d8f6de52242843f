//! ∞-Wasserstein distributionally robust counterparts of finite-support CCPs.
//!
//! Every distribution within ∞-Wasserstein distance θ of the scenario distribution moves each
//! scenario by at most θ, so the worst case replaces each loss by its supremum over a norm
//! ball: θ‖a(x)‖_* + ζᵀa(x) − b(x) for bi-affine rows, or ζ + θe for losses that are
//! nondecreasing in ξ under the ∞-norm. The result is a regular CCP.

use serde::{Deserialize, Serialize};

use crate::compare::{run_method, Method, MethodConfig};
use crate::error::{CcpError, Result};
use crate::geometry::NormSpec;
use crate::model::{CcpInstance, ConstraintModel, Perturb, SolveReport};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum DrccpMode {
    /// Dual-norm robust loss θ‖a(x)‖_* added to every row.
    #[default]
    #[serde(rename = "dual")]
    BiAffineDual,
    /// Scenarios shifted by θe; needs the ∞-norm and a loss nondecreasing in ξ.
    #[serde(rename = "shift")]
    MonotoneShift,
}

impl std::str::FromStr for DrccpMode {
    type Err = CcpError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "dual" | "biaffine_dual" => Ok(DrccpMode::BiAffineDual),
            "shift" | "monotone_shift" => Ok(DrccpMode::MonotoneShift),
            other => Err(CcpError::validation("mode", format!("unknown mode \"{other}\" (dual|shift)"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DrccpSpec {
    pub base: CcpInstance,
    pub theta: f64,
    pub norm: NormSpec,
    pub mode: DrccpMode,
    /// Which part of each bi-affine row the uncertainty enters.
    pub perturb: Perturb,
}

/// Optional `drccp` block of an instance document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DrccpDoc {
    pub theta: f64,
    pub norm: String,
    #[serde(default)]
    pub mode: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sigma: Option<Vec<Vec<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub perturb: Option<Perturb>,
}

/// Parse a norm name; `mahalanobis` needs `sigma`.
pub fn parse_norm(name: &str, sigma: Option<Vec<Vec<f64>>>) -> Result<NormSpec> {
    let norm = match name.to_ascii_lowercase().as_str() {
        "l1" => NormSpec::L1,
        "l2" => NormSpec::L2,
        "linf" | "inf" => NormSpec::LInf,
        "mahalanobis" => NormSpec::Mahalanobis {
            sigma: sigma.ok_or_else(|| CcpError::validation("sigma", "mahalanobis norm needs sigma"))?,
        },
        other => return Err(CcpError::validation("norm", format!("unknown norm \"{other}\" (l1|l2|linf|mahalanobis)"))),
    };
    norm.validate()?;
    Ok(norm)
}

impl DrccpSpec {
    pub fn new(base: CcpInstance, theta: f64, norm: NormSpec, mode: DrccpMode) -> Result<Self> {
        let spec = DrccpSpec { base, theta, norm, mode, perturb: Perturb::Lhs };
        spec.validate()?;
        Ok(spec)
    }

    pub fn from_doc(base: CcpInstance, doc: &DrccpDoc) -> Result<Self> {
        let mode = doc.mode.as_deref().map_or(Ok(DrccpMode::BiAffineDual), str::parse)?;
        let norm = parse_norm(&doc.norm, doc.sigma.clone())?;
        let spec = DrccpSpec { base, theta: doc.theta, norm, mode, perturb: doc.perturb.unwrap_or_default() };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.theta >= 0.0) || !self.theta.is_finite() {
            return Err(CcpError::validation("theta", "must be finite and >= 0"));
        }
        self.norm.validate()?;
        if matches!(self.base.constraints, ConstraintModel::Robust { .. }) {
            return Err(CcpError::validation("constraints", "instance is already robust"));
        }
        if self.mode == DrccpMode::MonotoneShift {
            self.check_monotone()?;
        }
        Ok(())
    }

    fn check_monotone(&self) -> Result<()> {
        if self.norm != NormSpec::LInf {
            return Err(CcpError::ModeMismatch("the scenario shift needs the linf norm".into()));
        }
        if self.perturb != Perturb::Lhs {
            return Err(CcpError::ModeMismatch("the scenario shift perturbs the x coefficients only".into()));
        }
        match &self.base.constraints {
            ConstraintModel::SeparableConvexPower { .. } => Ok(()),
            ConstraintModel::BiAffine { .. } if self.base.x_set.is_nonnegative(self.base.n) => Ok(()),
            ConstraintModel::BiAffine { .. } => {
                Err(CcpError::ModeMismatch("bi-affine losses are monotone in ξ only over nonnegative x".into()))
            }
            _ => Err(CcpError::ModeMismatch("the loss is not nondecreasing in ξ".into())),
        }
    }
}

/// The robust counterpart as a regular instance.
pub fn robustify(spec: &DrccpSpec) -> Result<CcpInstance> {
    spec.validate()?;
    let base = &spec.base;
    let constraints = match spec.mode {
        DrccpMode::BiAffineDual => ConstraintModel::Robust {
            base: Box::new(base.constraints.clone()),
            theta: spec.theta,
            norm: spec.norm.clone(),
            perturb: spec.perturb,
        },
        DrccpMode::MonotoneShift => shifted(&base.constraints, spec.theta),
    };
    CcpInstance::new(base.cost.clone(), base.x_set.clone(), constraints, base.epsilon, Some(base.probabilities.clone()))
}

fn shifted(model: &ConstraintModel, theta: f64) -> ConstraintModel {
    let bump = |r: &Vec<f64>| r.iter().map(|v| v + theta).collect::<Vec<f64>>();
    match model {
        ConstraintModel::BiAffine { d, e } => {
            ConstraintModel::BiAffine { d: d.iter().map(|dk| dk.iter().map(bump).collect()).collect(), e: e.clone() }
        }
        ConstraintModel::SeparableConvexPower { power, weights, threshold } => ConstraintModel::SeparableConvexPower {
            power: *power,
            weights: weights.iter().map(bump).collect(),
            threshold: *threshold,
        },
        other => other.clone(),
    }
}

/// Run `method` on the robust counterpart; violation probabilities in the report are worst-case.
pub fn worst_case_solve(spec: &DrccpSpec, method: Method, cfg: &MethodConfig) -> Result<SolveReport> {
    let robust = robustify(spec)?;
    let mut r = run_method(&robust, method, cfg)?;
    r.method = format!("wc_{}", r.method);
    Ok(r.with_config("theta", spec.theta).with_config("norm", &spec.norm).with_config("mode", spec.mode))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog;
    use crate::model::FeasibleSet;

    fn single_row() -> CcpInstance {
        let d = vec![vec![vec![1.0, 2.0]], vec![vec![2.0, 1.0]]];
        let e = vec![vec![3.0], vec![3.0]];
        CcpInstance::new(vec![-1.0, -1.0], FeasibleSet::NonNegOrthant { dim: 2 }, ConstraintModel::BiAffine { d, e }, 0.5, None)
            .unwrap()
    }

    #[test]
    fn zero_radius_is_identity() {
        let base = single_row();
        let r = robustify(&DrccpSpec::new(base.clone(), 0.0, NormSpec::L2, DrccpMode::BiAffineDual).unwrap()).unwrap();
        for x in [[0.3, -1.2], [2.0, 0.5]] {
            for k in 0..2 {
                assert!((r.g(k, &x) - base.g(k, &x)).abs() <= 1e-12);
            }
        }
    }

    #[test]
    fn l2_dual_term() {
        let r = robustify(&DrccpSpec::new(single_row(), 0.5, NormSpec::L2, DrccpMode::BiAffineDual).unwrap()).unwrap();
        let x = [3.0, 4.0];
        assert!((r.g(0, &x) - (0.5 * 5.0 + 11.0 - 3.0)).abs() < 1e-12);
    }

    #[test]
    fn shift_matches_dual_on_nonnegative_x() {
        let base = single_row();
        let dual = robustify(&DrccpSpec::new(base.clone(), 0.3, NormSpec::LInf, DrccpMode::BiAffineDual).unwrap()).unwrap();
        let shift = robustify(&DrccpSpec::new(base, 0.3, NormSpec::LInf, DrccpMode::MonotoneShift).unwrap()).unwrap();
        let x = [0.7, 1.9];
        for k in 0..2 {
            assert!((dual.g(k, &x) - shift.g(k, &x)).abs() < 1e-10);
        }
    }

    #[test]
    fn shift_rejects_covering_and_l2() {
        let cover = DrccpSpec::new(catalog::binary_cover(), 0.1, NormSpec::LInf, DrccpMode::MonotoneShift);
        assert!(matches!(cover, Err(CcpError::ModeMismatch(_))));
        let l2 = DrccpSpec::new(single_row(), 0.1, NormSpec::L2, DrccpMode::MonotoneShift);
        assert!(matches!(l2, Err(CcpError::ModeMismatch(_))));
    }

    #[test]
    fn doc_parsing() {
        let doc = DrccpDoc { theta: 0.2, norm: "linf".into(), mode: Some("shift".into()), sigma: None, perturb: None };
        let spec = DrccpSpec::from_doc(single_row(), &doc).unwrap();
        assert_eq!(spec.mode, DrccpMode::MonotoneShift);
        let bad = DrccpDoc { norm: "mahalanobis".into(), ..doc };
        assert!(DrccpSpec::from_doc(single_row(), &bad).is_err());
    }
}
