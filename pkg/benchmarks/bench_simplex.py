"""Benchmark the bounded-variable simplex backends (numba vs pure numpy).

Times steady-state solves (numba warmed up first so JIT compilation is not
billed) on two instance families:

  * random dense bounded LPs at a few sizes, feasible by construction
  * the root LP relaxation of each benchmark case's identification MILP

Run from the repo root:

    python3 benchmarks/bench_simplex.py            # full table
    python3 benchmarks/bench_simplex.py --quick    # random LPs only
"""
import argparse
import time

import numpy as np

import sindybrid as sb
from sindybrid import milp
from sindybrid.harness import normalize_hyperparams
from sindybrid.library import build_library, evaluate_library, scale_columns
from sindybrid.milp.simplex import HAS_NUMBA, solve_lp
from sindybrid.residuals import residual_matrix


def random_lp(m, n, seed):
    """Random dense LP, min c@x s.t. A x <= b, box bounds, feasible at x0."""
    rng = np.random.default_rng(seed)
    A = rng.normal(size=(m, n))
    x0 = rng.uniform(-1.0, 1.0, size=n)
    b = A @ x0 + rng.uniform(0.1, 1.0, size=m)
    c = rng.normal(size=n)
    bounds = [(-5.0, 5.0)] * n
    return c, A, b, bounds


def case_root_lp(case_id):
    case = sb.make_case(case_id)
    cfg = sb.nominal_config(case, 0, noise_level=0.0, seed=1)
    ds = sb.build_dataset(cfg)
    res = residual_matrix(ds, case.system)
    funcs = build_library(
        case.default_library, case.system.state_names, case.system.run_condition_names
    )
    XL = evaluate_library(funcs, res.states_at_rows, res.r_at_rows)
    scaled = scale_columns(XL, [f.label for f in funcs])
    hp = normalize_hyperparams(3.0, res.H, scaled)
    prob = milp.assemble(res, scaled, hp)
    return prob.c, prob.A, prob.b, list(zip(prob.lo, prob.up))


def time_backend(instances, backend, repeats):
    best = 0.0
    for c, A, b, bounds in instances:
        per = []
        for _ in range(repeats):
            t0 = time.perf_counter()
            r = solve_lp(c, A, b, bounds, backend=backend)
            per.append(time.perf_counter() - t0)
            assert r.status in ("optimal", "infeasible"), r.status
        best += min(per)
    return best


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--quick", action="store_true", help="skip the case-derived LPs")
    ap.add_argument("--repeats", type=int, default=3)
    args = ap.parse_args()

    if not HAS_NUMBA:
        print("numba not installed; only the numpy backend will run")

    families = [
        ("random 20x10  (x5)", [random_lp(20, 10, s) for s in range(5)]),
        ("random 80x40  (x5)", [random_lp(80, 40, s) for s in range(5)]),
        ("random 200x120 (x3)", [random_lp(200, 120, s) for s in range(3)]),
    ]
    if not args.quick:
        for case_id in ("lotka", "fermentation", "meerwein"):
            print(f"building {case_id} root LP ...")
            families.append((f"{case_id} root LP", [case_root_lp(case_id)]))

    if HAS_NUMBA:
        # JIT warm-up on a tiny instance so compilation is not timed.
        time_backend([random_lp(4, 3, 99)], "numba", 1)

    print(f"\n{'instance family':<24}{'numpy [s]':>12}{'numba [s]':>12}{'speedup':>10}")
    for name, instances in families:
        t_np = time_backend(instances, "numpy", args.repeats)
        if HAS_NUMBA:
            t_nb = time_backend(instances, "numba", args.repeats)
            print(f"{name:<24}{t_np:>12.4f}{t_nb:>12.4f}{t_np / t_nb:>10.2f}x")
        else:
            print(f"{name:<24}{t_np:>12.4f}{'-':>12}{'-':>10}")


if __name__ == "__main__":
    main()
