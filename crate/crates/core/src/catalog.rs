//! Small named instances used by tests, the CLI and the Python bindings.

use crate::model::{CcpInstance, ConstraintModel, FeasibleSet};

fn neg(v: &[f64]) -> Vec<f64> {
    v.iter().map(|x| -x).collect()
}

/// One variable, g = ξ − x with ξ ∈ {3, 2, 1}, ε = 1/2, X = ℝ₊, c = 1.
pub fn three_point_shift() -> CcpInstance {
    let xi = [3.0, 2.0, 1.0];
    CcpInstance::new(
        vec![1.0],
        FeasibleSet::NonNegOrthant { dim: 1 },
        ConstraintModel::BiAffine {
            d: xi.iter().map(|_| vec![vec![-1.0]]).collect(),
            e: xi.iter().map(|v| vec![-v]).collect(),
        },
        0.5,
        None,
    )
    .expect("valid instance")
}

fn covering_style(xi: &[[f64; 2]], cost: Vec<f64>, epsilon: f64, x_set: FeasibleSet) -> CcpInstance {
    CcpInstance::new(
        cost,
        x_set,
        ConstraintModel::BiAffine {
            d: xi.iter().map(|r| vec![neg(r)]).collect(),
            e: xi.iter().map(|_| vec![-1.0]).collect(),
        },
        epsilon,
        None,
    )
    .expect("valid instance")
}

/// g = 1 − ξᵀx with ξ ∈ {(2,3), (2,1), (1,2)}, ε = 1/3, X = ℝ₊², c = (1, 1).
pub fn symmetric_triangle() -> CcpInstance {
    covering_style(&[[2.0, 3.0], [2.0, 1.0], [1.0, 2.0]], vec![1.0, 1.0], 1.0 / 3.0, FeasibleSet::NonNegOrthant { dim: 2 })
}

/// |ξᵀx − 1| with the triangle scenarios, X = ℝ², c = (1, 1).
pub fn equality_triangle() -> CcpInstance {
    equality_triangle_with_cost(vec![1.0, 1.0])
}

pub fn equality_triangle_with_cost(cost: Vec<f64>) -> CcpInstance {
    CcpInstance::new(
        cost,
        FeasibleSet::Free { dim: 2 },
        ConstraintModel::BiAffineEquality {
            d: vec![vec![2.0, 3.0], vec![2.0, 1.0], vec![1.0, 2.0]],
            e: vec![1.0, 1.0, 1.0],
        },
        1.0 / 3.0,
        None,
    )
    .expect("valid instance")
}

/// Set covering on {0,1}²: rows x₁ ≥ 1, x₂ ≥ 1, x₁ + x₂ ≥ 1, c = (1, 2), ε = 1/3.
pub fn binary_cover() -> CcpInstance {
    CcpInstance::new(
        vec![1.0, 2.0],
        FeasibleSet::BinaryTiny { dim: 2 },
        ConstraintModel::Covering { a: vec![vec![vec![1.0, 0.0]], vec![vec![0.0, 1.0]], vec![vec![1.0, 1.0]]] },
        1.0 / 3.0,
        None,
    )
    .expect("valid instance")
}

/// x ∈ {0,1}, g = ξ₁x − ξ₂, four scenarios, ε = 1/2, c = −1; optimum 0 at x = 0.
pub fn binary_threshold() -> CcpInstance {
    let a = [-49.0, 101.0, 101.0, 101.0];
    let b = [-50.0, 99.0, 99.0, 99.0];
    CcpInstance::new(
        vec![-1.0],
        FeasibleSet::BinaryTiny { dim: 1 },
        ConstraintModel::BiAffine {
            d: a.iter().map(|v| vec![vec![*v]]).collect(),
            e: b.iter().map(|v| vec![*v]).collect(),
        },
        0.5,
        None,
    )
    .expect("valid instance")
}

/// ξ ∈ {(1,0), (1,1), (1,1)}, g = 1 − ξᵀx, c = (3, 2), ε = 1/3; optimum 2, hinge bisection gives 3.
pub fn stationary_trap() -> CcpInstance {
    covering_style(&[[1.0, 0.0], [1.0, 1.0], [1.0, 1.0]], vec![3.0, 2.0], 1.0 / 3.0, FeasibleSet::NonNegOrthant { dim: 2 })
}

/// Rows 1 − x₁, 1 − x₂, x₁ + x₂ − 1 over ℝ₊², ε = 1/3: the hinge minimizer is never chance-feasible.
pub fn divergent_bisection() -> CcpInstance {
    CcpInstance::new(
        vec![1.0, 1.0],
        FeasibleSet::NonNegOrthant { dim: 2 },
        ConstraintModel::BiAffine {
            d: vec![vec![vec![-1.0, 0.0]], vec![vec![0.0, -1.0]], vec![vec![1.0, 1.0]]],
            e: vec![vec![-1.0], vec![-1.0], vec![1.0]],
        },
        1.0 / 3.0,
        None,
    )
    .expect("valid instance")
}

/// Covering family with ξ = e_i for the first ⌊Nε⌋+1 scenarios and ξ = e otherwise,
/// in dimension ⌊Nε⌋+1, X = ℝ₊, c = e. Optimum 1; hinge bisection returns ⌊Nε⌋+1.
pub fn covering_tight_family(n_scenarios: usize, epsilon: f64) -> CcpInstance {
    let m = (n_scenarios as f64 * epsilon + 1e-9).floor() as usize + 1;
    let a = (0..n_scenarios)
        .map(|i| {
            let row = if i < m { (0..m).map(|j| if j == i { 1.0 } else { 0.0 }).collect() } else { vec![1.0; m] };
            vec![row]
        })
        .collect();
    CcpInstance::new(vec![1.0; m], FeasibleSet::NonNegOrthant { dim: m }, ConstraintModel::Covering { a }, epsilon, None)
        .expect("valid instance")
}

/// All finite-support catalog entries by name.
pub fn by_name(name: &str) -> Option<CcpInstance> {
    Some(match name {
        "three_point_shift" => three_point_shift(),
        "symmetric_triangle" => symmetric_triangle(),
        "equality_triangle" => equality_triangle(),
        "binary_cover" => binary_cover(),
        "binary_threshold" => binary_threshold(),
        "stationary_trap" => stationary_trap(),
        "divergent_bisection" => divergent_bisection(),
        "covering_tight_family" => covering_tight_family(10, 0.25),
        _ => return None,
    })
}

pub const NAMES: &[&str] = &[
    "three_point_shift",
    "symmetric_triangle",
    "equality_triangle",
    "binary_cover",
    "binary_threshold",
    "stationary_trap",
    "divergent_bisection",
    "covering_tight_family",
];
