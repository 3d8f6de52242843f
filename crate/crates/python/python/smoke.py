"""Smoke test for the installed ccpsolve extension."""

import json

import ccpsolve


def main():
    inst = ccpsolve.Instance.catalog("three_point_shift")
    for method in ("oracle", "alsox", "alsoxplus", "cvar"):
        r = ccpsolve.solve(inst, method)
        print(f"{method:10s} objective={r.objective:.6f} feasible={r.feasible} backend={r.backend}")
    assert ccpsolve.oracle(inst)[0] == 2.0

    tri = ccpsolve.Instance.catalog("symmetric_triangle")
    report = json.loads(ccpsolve.compare(tri, ["cvar", "alsox", "alsoxplus"], delta1=1e-3, delta2=1e-3))
    for row in report["rows"]:
        print(row["method"], row["objective"], row.get("improvement_pct"))

    gen = ccpsolve.Instance.generate("linear", 5, 40, 0.1, seed=1)
    a, c = ccpsolve.solve(gen, "alsox"), ccpsolve.solve(gen, "cvar")
    assert a.objective <= c.objective + 1e-2
    print(f"generated linear: alsox {a.objective:.4f} cvar {c.objective:.4f}")

    ell = ccpsolve.EllipticalInstance.gaussian_plane()
    print(f"gaussian plane: exact {ell.solve_exact().objective:.5f} alsox {ell.solve_alsox().objective:.5f}")
    print("ok")


if __name__ == "__main__":
    main()
