//! Python bindings for the ccp-core solvers.

use ccp_core::alsox::BisectionConfig;
use ccp_core::alsoxplus::AmConfig;
use ccp_core::catalog;
use ccp_core::compare::{compare as compare_methods, run_method, Method, MethodConfig};
use ccp_core::drccp::{parse_norm, robustify, worst_case_solve, DrccpSpec};
use ccp_core::elliptical::{also_x_elliptical, solve_exact_conic, EllipticalCcp};
use ccp_core::generate::{generate, Family};
use ccp_core::lowerlevel::{Backend, LowerLevelOptions};
use ccp_core::model::{CcpInstance, SolveReport};
use ccp_core::oracle::{check_nullspace_property, exact_solve, DEFAULT_SUBSET_CAP};
use ccp_core::CcpError;
use pyo3::create_exception;
use pyo3::exceptions::PyException;
use pyo3::prelude::*;

create_exception!(ccpsolve, CcpSolveError, PyException, "Solver or model error; the message starts with its kind.");

fn to_py(e: CcpError) -> PyErr {
    CcpSolveError::new_err(format!("{}: {}", e.kind(), e))
}

fn backend(name: &str) -> PyResult<Backend> {
    match name {
        "auto" => Ok(Backend::Auto),
        "lp" => Ok(Backend::Lp),
        "sgd" => Ok(Backend::Sgd),
        "enumeration" => Ok(Backend::Enumeration),
        other => Err(to_py(CcpError::validation("backend", format!("unknown backend \"{other}\"")))),
    }
}

fn method_config(delta1: f64, delta2: f64, backend_name: &str, cap: u128) -> PyResult<MethodConfig> {
    Ok(MethodConfig {
        bisection: BisectionConfig::with_delta1(delta1),
        am: AmConfig { delta2, ..Default::default() },
        lower: LowerLevelOptions::with_backend(backend(backend_name)?),
        subset_cap: cap,
    })
}

/// Finite-scenario chance-constrained program.
#[pyclass(module = "ccpsolve", name = "Instance", frozen, skip_from_py_object)]
#[derive(Clone)]
pub struct PyInstance {
    inner: CcpInstance,
}

#[pymethods]
impl PyInstance {
    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        CcpInstance::from_json(text).map(|inner| PyInstance { inner }).map_err(to_py)
    }

    /// Named instance from the built-in catalog.
    #[staticmethod]
    fn catalog(name: &str) -> PyResult<Self> {
        catalog::by_name(name)
            .map(|inner| PyInstance { inner })
            .ok_or_else(|| to_py(CcpError::validation("name", format!("unknown catalog instance \"{name}\""))))
    }

    #[staticmethod]
    #[pyo3(signature = (family, n, n_scenarios, epsilon, seed=0))]
    fn generate(family: &str, n: usize, n_scenarios: usize, epsilon: f64, seed: u64) -> PyResult<Self> {
        let family: Family = family.parse().map_err(to_py)?;
        generate(family, n, n_scenarios, epsilon, seed).map(|inner| PyInstance { inner }).map_err(to_py)
    }

    fn to_json(&self) -> String {
        self.inner.to_json()
    }

    #[getter]
    fn n(&self) -> usize {
        self.inner.n
    }

    #[getter]
    fn n_scenarios(&self) -> usize {
        self.inner.n_scenarios()
    }

    #[getter]
    fn epsilon(&self) -> f64 {
        self.inner.epsilon
    }

    #[getter]
    fn cost(&self) -> Vec<f64> {
        self.inner.cost.clone()
    }

    /// Loss of scenario k at x.
    fn g(&self, k: usize, x: Vec<f64>) -> PyResult<f64> {
        self.inner.evaluate_g(&x, k).map_err(to_py)
    }

    fn violation_probability(&self, x: Vec<f64>) -> f64 {
        self.inner.violation_probability(&x)
    }

    fn is_feasible(&self, x: Vec<f64>) -> bool {
        self.inner.is_feasible(&x)
    }

    /// Worst-case counterpart over an ∞-Wasserstein ball of radius theta.
    #[pyo3(signature = (theta, norm="linf", mode="dual"))]
    fn robustify(&self, theta: f64, norm: &str, mode: &str) -> PyResult<Self> {
        let spec = self.spec(theta, norm, mode)?;
        robustify(&spec).map(|inner| PyInstance { inner }).map_err(to_py)
    }

    fn __repr__(&self) -> String {
        format!("Instance(n={}, N={}, epsilon={})", self.inner.n, self.inner.n_scenarios(), self.inner.epsilon)
    }
}

impl PyInstance {
    fn spec(&self, theta: f64, norm: &str, mode: &str) -> PyResult<DrccpSpec> {
        let norm = parse_norm(norm, None).map_err(to_py)?;
        DrccpSpec::new(self.inner.clone(), theta, norm, mode.parse().map_err(to_py)?).map_err(to_py)
    }
}

/// Single-constraint elliptical chance-constrained program.
#[pyclass(module = "ccpsolve", name = "EllipticalInstance", frozen, skip_from_py_object)]
#[derive(Clone)]
pub struct PyElliptical {
    inner: EllipticalCcp,
}

#[pymethods]
impl PyElliptical {
    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        EllipticalCcp::from_json(text).map(|inner| PyElliptical { inner }).map_err(to_py)
    }

    #[staticmethod]
    fn gaussian_plane() -> Self {
        PyElliptical { inner: ccp_core::elliptical::gaussian_plane() }
    }

    fn to_json(&self) -> String {
        self.inner.to_json()
    }

    /// Closed-form E[(ξᵀa₁(x) − b₁(x))₊].
    fn hinge(&self, x: Vec<f64>) -> f64 {
        self.inner.hinge(&x)
    }

    fn conic_margin(&self, x: Vec<f64>) -> f64 {
        self.inner.conic_margin(&x)
    }

    fn violation_probability(&self, x: Vec<f64>) -> f64 {
        self.inner.violation_probability(&x)
    }

    #[pyo3(signature = (delta1=1e-2))]
    fn solve_alsox(&self, py: Python<'_>, delta1: f64) -> PyResult<Report> {
        let cfg = BisectionConfig::with_delta1(delta1);
        py.detach(|| also_x_elliptical(&self.inner, &cfg)).map(Report::from).map_err(to_py)
    }

    fn solve_exact(&self, py: Python<'_>) -> PyResult<Report> {
        py.detach(|| solve_exact_conic(&self.inner)).map(Report::from).map_err(to_py)
    }
}

/// Result of one solver run.
#[pyclass(module = "ccpsolve", frozen, get_all)]
pub struct Report {
    method: String,
    objective: f64,
    feasible: bool,
    violation_prob: f64,
    t_star: f64,
    x_star: Vec<f64>,
    iterations: usize,
    backend: String,
    wall_time: f64,
    json: String,
}

impl From<SolveReport> for Report {
    fn from(r: SolveReport) -> Self {
        Report {
            json: serde_json::to_string(&r).expect("reports serialize"),
            method: r.method,
            objective: r.objective,
            feasible: r.feasible,
            violation_prob: r.violation_prob,
            t_star: r.t_star,
            x_star: r.x_star,
            iterations: r.iterations,
            backend: r.backend,
            wall_time: r.wall_time,
        }
    }
}

#[pymethods]
impl Report {
    fn __repr__(&self) -> String {
        format!("Report(method={:?}, objective={}, feasible={})", self.method, self.objective, self.feasible)
    }
}

/// Solve with one of alsox, alsoxplus, cvar, dc, oracle.
#[pyfunction]
#[pyo3(signature = (instance, method, delta1=1e-2, delta2=1e-2, backend="auto", cap=DEFAULT_SUBSET_CAP))]
fn solve(py: Python<'_>, instance: &PyInstance, method: &str, delta1: f64, delta2: f64, backend: &str, cap: u128) -> PyResult<Report> {
    let method: Method = method.parse().map_err(to_py)?;
    let cfg = method_config(delta1, delta2, backend, cap)?;
    py.detach(|| run_method(&instance.inner, method, &cfg)).map(Report::from).map_err(to_py)
}

/// Worst-case solve over the ∞-Wasserstein ball of radius theta.
#[pyfunction]
#[pyo3(signature = (instance, method, theta, norm="linf", mode="dual", delta1=1e-2))]
fn solve_worst_case(
    py: Python<'_>,
    instance: &PyInstance,
    method: &str,
    theta: f64,
    norm: &str,
    mode: &str,
    delta1: f64,
) -> PyResult<Report> {
    let method: Method = method.parse().map_err(to_py)?;
    let spec = instance.spec(theta, norm, mode)?;
    let cfg = method_config(delta1, 1e-2, "auto", DEFAULT_SUBSET_CAP)?;
    py.detach(|| worst_case_solve(&spec, method, &cfg)).map(Report::from).map_err(to_py)
}

/// Comparison report as a JSON string.
#[pyfunction]
#[pyo3(signature = (instance, methods, delta1=1e-2, delta2=1e-2, threads=1))]
fn compare(py: Python<'_>, instance: &PyInstance, methods: Vec<String>, delta1: f64, delta2: f64, threads: usize) -> PyResult<String> {
    let methods = methods.iter().map(|m| m.parse::<Method>()).collect::<Result<Vec<_>, _>>().map_err(to_py)?;
    let cfg = method_config(delta1, delta2, "auto", DEFAULT_SUBSET_CAP)?;
    let report = py.detach(|| compare_methods(&instance.inner, &methods, &cfg, threads));
    Ok(serde_json::to_string(&report).expect("reports serialize"))
}

/// Exact optimum as (value, x, kept scenario indices).
#[pyfunction]
#[pyo3(signature = (instance, cap=DEFAULT_SUBSET_CAP))]
fn oracle(py: Python<'_>, instance: &PyInstance, cap: u128) -> PyResult<(f64, Vec<f64>, Vec<usize>)> {
    let sol = py.detach(|| exact_solve(&instance.inner, cap)).map_err(to_py)?;
    Ok((sol.value, sol.x, sol.kept))
}

/// Nullspace-property verdict for an equality instance as a JSON string.
#[pyfunction]
#[pyo3(signature = (instance, cap=DEFAULT_SUBSET_CAP))]
fn check_nullspace(py: Python<'_>, instance: &PyInstance, cap: u128) -> PyResult<String> {
    let verdict = py.detach(|| check_nullspace_property(&instance.inner, cap)).map_err(to_py)?;
    Ok(serde_json::to_string(&verdict).expect("verdicts serialize"))
}

#[pymodule]
pub fn ccpsolve(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("CcpSolveError", m.py().get_type::<CcpSolveError>())?;
    m.add_class::<PyInstance>()?;
    m.add_class::<PyElliptical>()?;
    m.add_class::<Report>()?;
    m.add_function(wrap_pyfunction!(solve, m)?)?;
    m.add_function(wrap_pyfunction!(solve_worst_case, m)?)?;
    m.add_function(wrap_pyfunction!(compare, m)?)?;
    m.add_function(wrap_pyfunction!(oracle, m)?)?;
    m.add_function(wrap_pyfunction!(check_nullspace, m)?)?;
    Ok(())
}
