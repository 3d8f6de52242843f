//! Seeded random instance families.

use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{CcpError, Result};
use crate::model::{CcpInstance, ConstraintModel, FeasibleSet};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Family {
    /// ξᵀx ≤ 100 with ξ uniform on {1..50}, c uniform on {−10..−1}, X = [0,1]ⁿ.
    Linear,
    /// Σ ξ_j x_j² ≤ 100 with ξ uniform on {1..99}, c uniform on {−10..−1}, X = [0,1]ⁿ.
    Nonlinear,
    /// ξᵀx ≥ 40 with ξ uniform on {1..50}, c uniform on {1..10}, X = [0,1]ⁿ.
    Covering,
}

impl FromStr for Family {
    type Err = CcpError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "linear" => Ok(Family::Linear),
            "nonlinear" => Ok(Family::Nonlinear),
            "covering" => Ok(Family::Covering),
            other => Err(CcpError::validation("family", format!("unknown family \"{other}\" (linear|nonlinear|covering)"))),
        }
    }
}

fn unit_box(n: usize) -> FeasibleSet {
    FeasibleSet::Box { lower: vec![0.0; n], upper: vec![1.0; n] }
}

fn int_vec(rng: &mut ChaCha8Rng, len: usize, lo: i64, hi: i64) -> Vec<f64> {
    (0..len).map(|_| rng.random_range(lo..=hi) as f64).collect()
}

/// One instance of `family` with n variables and N equiprobable scenarios.
pub fn generate(family: Family, n: usize, n_scenarios: usize, epsilon: f64, seed: u64) -> Result<CcpInstance> {
    if n == 0 || n_scenarios == 0 {
        return Err(CcpError::validation("n", "n and N must be positive"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (cost, constraints) = match family {
        Family::Linear => {
            let cost = int_vec(&mut rng, n, -10, -1);
            let d = (0..n_scenarios).map(|_| vec![int_vec(&mut rng, n, 1, 50)]).collect();
            (cost, ConstraintModel::BiAffine { d, e: vec![vec![100.0]; n_scenarios] })
        }
        Family::Nonlinear => {
            let cost = int_vec(&mut rng, n, -10, -1);
            let weights = (0..n_scenarios).map(|_| int_vec(&mut rng, n, 1, 99)).collect();
            (cost, ConstraintModel::SeparableConvexPower { power: 2.0, weights, threshold: 100.0 })
        }
        Family::Covering => {
            let cost = int_vec(&mut rng, n, 1, 10);
            let a = (0..n_scenarios)
                .map(|_| vec![int_vec(&mut rng, n, 1, 50).into_iter().map(|v| v / 40.0).collect()])
                .collect();
            (cost, ConstraintModel::Covering { a })
        }
    };
    CcpInstance::new(cost, unit_box(n), constraints, epsilon, None)
}

/// Small random bi-affine instance over [0,1]ⁿ: `rows` rows per scenario with coefficients
/// in [−1, 2], right-hand sides in [0.5, 2] (so x = 0 is always feasible) and cost in [−3, −0.5].
pub fn random_biaffine(n: usize, n_scenarios: usize, rows: usize, epsilon: f64, seed: u64) -> Result<CcpInstance> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let cost = (0..n).map(|_| rng.random_range(-3.0..-0.5)).collect();
    let mut d = Vec::with_capacity(n_scenarios);
    let mut e = Vec::with_capacity(n_scenarios);
    for _ in 0..n_scenarios {
        d.push((0..rows).map(|_| (0..n).map(|_| rng.random_range(-1.0..2.0)).collect()).collect());
        e.push((0..rows).map(|_| rng.random_range(0.5..2.0)).collect());
    }
    CcpInstance::new(cost, unit_box(n), ConstraintModel::BiAffine { d, e }, epsilon, None)
}
