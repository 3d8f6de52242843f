use std::ffi::CString;

use ccpsolve::ccpsolve as module;
use pyo3::prelude::*;
use pyo3::types::PyDict;

fn run(script: &str) {
    pyo3::append_to_inittab!(module);
    Python::attach(|py| {
        let globals = PyDict::new(py);
        let code = CString::new(script).unwrap();
        if let Err(e) = py.run(&code, Some(&globals), None) {
            e.print(py);
            panic!("python script failed");
        }
    });
}

#[test]
fn module_solves_and_reports_errors() {
    run(r#"
import json
import ccpsolve

inst = ccpsolve.Instance.catalog("three_point_shift")
assert (inst.n, inst.n_scenarios, inst.epsilon) == (1, 3, 0.5)
r = ccpsolve.solve(inst, "alsox")
assert 2.0 <= r.objective <= 2.01 and r.feasible, r
assert abs(ccpsolve.solve(inst, "cvar").objective - 8 / 3) < 1e-6
value, x, kept = ccpsolve.oracle(inst)
assert value == 2.0 and sorted(kept) == [1, 2]
assert json.loads(r.json)["method"] == "alsox"
wc = ccpsolve.solve_worst_case(inst, "alsox", 0.1)
assert wc.method == "wc_alsox" and wc.objective > r.objective
assert inst.robustify(0.1).g(0, [2.0]) > inst.g(0, [2.0])

tri = ccpsolve.Instance.catalog("symmetric_triangle")
rep = json.loads(ccpsolve.compare(tri, ["cvar", "alsoxplus"], delta1=1e-3, delta2=1e-3))
assert abs(rep["rows"][1]["improvement_pct"] - 25.0) < 0.5
assert json.loads(ccpsolve.check_nullspace(ccpsolve.Instance.catalog("equality_triangle")))["verdict"] == "holds"

back = ccpsolve.Instance.from_json(ccpsolve.Instance.generate("covering", 3, 5, 0.2, seed=4).to_json())
assert back.n == 3

g = ccpsolve.EllipticalInstance.gaussian_plane()
assert abs(g.solve_exact().objective + 1.55432) < 1e-3

try:
    ccpsolve.solve(inst, "nosuch")
except ccpsolve.CcpSolveError as e:
    assert str(e).startswith("ValidationError"), str(e)
else:
    raise AssertionError("expected CcpSolveError")
"#);
}
