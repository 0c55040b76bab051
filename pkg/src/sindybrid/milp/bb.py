"""Best-first branch-and-bound over LP relaxations of the sparse-correction MILP.

Nodes are kept lazy: a popped node that has never been evaluated is solved by
dual-simplex re-optimisation from its parent's final basis (bounds are the
only thing that changed), and is pushed back unprocessed if its tightened
bound no longer heads the queue.  Any dual-simplex trouble falls back to a
cold primal solve, so warm starting is purely an optimisation.

The incumbent starts at the always-feasible trivial solution Xi = 0 (pay the
full data misfit, activate nothing), so a well-defined solution exists at
every stopping point.  A rounding heuristic (activate exactly the terms with
|xi_LP| above tolerance) runs at every evaluated node to pull the incumbent
down early.
"""
from __future__ import annotations

import heapq
import json
from dataclasses import dataclass
from itertools import count
from pathlib import Path

import numpy as np
import scipy.sparse

from .problem import MilpProblem
from .simplex import equality_form, get_kernels

__all__ = ["MilpSolution", "MilpSolverError", "solve"]

DEFAULT_NODE_LIMIT = 10**6


class MilpSolverError(RuntimeError):
    """The LP machinery failed numerically in a way that cannot be pruned."""


@dataclass(frozen=True)
class MilpSolution:
    Xi: np.ndarray         # (N_L, N_S) real coefficients
    A: np.ndarray          # (N_L, N_S) 0/1 activations
    Delta: np.ndarray      # (N_S,) 0/1 state activations
    s: int
    objective: float
    status: str            # optimal | gap-limit | infeasible | node-limit
    gap: float
    nodes: int

    def to_json_dict(self) -> dict:
        return {
            "Xi": self.Xi.tolist(),
            "A": self.A.astype(int).tolist(),
            "Delta": self.Delta.astype(int).tolist(),
            "s": int(self.s),
            "objective": self.objective,
            "status": self.status,
            "gap": self.gap,
            "nodes": self.nodes,
        }

    def save(self, path) -> Path:
        p = Path(path)
        p.write_text(json.dumps(self.to_json_dict(), indent=2))
        return p

    @classmethod
    def from_json_dict(cls, d: dict) -> "MilpSolution":
        return cls(
            Xi=np.asarray(d["Xi"], dtype=float),
            A=np.asarray(d["A"], dtype=float),
            Delta=np.asarray(d["Delta"], dtype=float),
            s=int(d["s"]),
            objective=float(d["objective"]),
            status=d["status"],
            gap=float(d["gap"]),
            nodes=int(d["nodes"]),
        )


@dataclass
class _Node:
    fixes: tuple            # ((var index, fixed value), ...)
    warm: tuple | None      # (basis, vstat, art_sign) of the parent, shared
    evaluated: bool = False
    bound: float = -np.inf
    x: np.ndarray | None = None


def _true_objective(problem: MilpProblem, Xi: np.ndarray, s_int: int) -> float:
    """Objective of an integral solution with y and z taken tight."""
    resid = problem.H - problem.XL_sc @ Xi
    return float(
        np.abs(resid).sum()
        + problem.hp.lambda1_xi * np.abs(Xi).sum()
        + problem.c[problem.s_index] * s_int
    )


def solve(
    problem: MilpProblem,
    int_tol: float = 1e-6,
    gap_tol: float = 1e-6,
    node_limit: int = DEFAULT_NODE_LIMIT,
    backend: str | None = None,
    use_dual_reopt: bool = True,
) -> MilpSolution:
    """Minimise the assembled MILP; deterministic for fixed options."""
    primal, dual = get_kernels(backend)
    m, n = problem.A.shape
    A_eq, lo0, up0 = equality_form(
        problem.A, problem.b, -np.ones(m, dtype=int), np.column_stack([problem.lo, problem.up])
    )
    c_eq = np.concatenate([problem.c, np.zeros(m)])
    b = problem.b.astype(float)
    csc = scipy.sparse.csc_matrix(A_eq)
    Ap = csc.indptr.astype(np.int64)
    Ai = csc.indices.astype(np.int64)
    Ax = csc.data.astype(np.float64)
    n_real = n + m
    cold_iter_cap = max(5000, 30 * m + 10 * n_real)
    dual_iter_cap = 2 * m + 200

    binaries = np.flatnonzero(problem.is_binary)   # alpha block then delta block
    nl, ns = problem.n_library, problem.n_states
    K_alpha = nl * ns if problem.hp.K_alpha is None else problem.hp.K_alpha
    K_delta = ns if problem.hp.K_delta is None else problem.hp.K_delta

    # Trivial incumbent: Xi = 0, pay the misfit.
    inc_Xi = np.zeros((nl, ns))
    inc_A = np.zeros((nl, ns))
    inc_Delta = np.zeros(ns)
    inc_s = 0
    inc_obj = _true_objective(problem, inc_Xi, 0)

    def try_incumbent(Xi, A_bin, Delta, s_int) -> bool:
        nonlocal inc_Xi, inc_A, inc_Delta, inc_s, inc_obj
        obj = _true_objective(problem, Xi, s_int)
        if obj < inc_obj - 1e-12:
            inc_Xi, inc_A, inc_Delta, inc_s, inc_obj = Xi, A_bin, Delta, s_int, obj
            return True
        return False

    def solve_node(node: _Node):
        """(status, x_structural, warm-state) for the node's LP relaxation."""
        lo = lo0.copy()
        up = up0.copy()
        for var, val in node.fixes:
            lo[var] = val
            up[var] = val
        if use_dual_reopt and node.warm is not None:
            basis, vstat, art = node.warm
            try:
                st, x_full, basis2, vstat2, art2, _, obj = dual(
                    m, n_real, Ap, Ai, Ax, b, lo[:n_real], up[:n_real], c_eq,
                    basis, vstat, art, dual_iter_cap,
                )
            except np.linalg.LinAlgError:
                st = 4
            if st in (0, 1):
                return st, x_full[:n] if st == 0 else None, (basis2, vstat2, art2), obj
        st, x_full, basis2, vstat2, art2, _, obj = primal(
            m, n_real, Ap, Ai, Ax, b, lo[:n_real], up[:n_real], c_eq, cold_iter_cap
        )
        if st in (2, 3, 4):
            raise MilpSolverError(
                f"LP relaxation failed with status {st} at node fixes {node.fixes}"
            )
        return st, x_full[:n] if st == 0 else None, (basis2, vstat2, art2), obj

    def heuristic(x: np.ndarray):
        """Round by coefficient magnitude and offer the result as incumbent."""
        Xi_lp, _, _, _ = problem.split_solution(x)
        A_hat = (np.abs(Xi_lp) > int_tol).astype(float)
        if A_hat.sum() > K_alpha:
            return
        Delta_hat = A_hat.max(axis=0) if nl else np.zeros(ns)
        if Delta_hat.sum() > K_delta:
            return
        try_incumbent(Xi_lp * A_hat, A_hat, Delta_hat, int(Delta_hat.sum()))

    def integral_extract(x: np.ndarray):
        Xi_lp, A_lp, Delta_lp, _ = problem.split_solution(x)
        A_bin = np.round(A_lp)
        Delta_bin = np.round(Delta_lp)
        Xi_new = np.where(A_bin > 0.5, Xi_lp, 0.0)
        try_incumbent(Xi_new, A_bin, Delta_bin, int(Delta_bin.sum()))

    heap: list = []
    counter = count()
    heapq.heappush(heap, [-np.inf, next(counter), _Node(fixes=(), warm=None)])
    nodes = 0
    status = "optimal"
    break_bound = None

    while heap:
        bound, cnt, node = heapq.heappop(heap)
        abs_gap = gap_tol * max(1.0, abs(inc_obj))
        if bound >= inc_obj - 1e-12:
            continue                       # cannot improve; drain
        if np.isfinite(bound) and inc_obj - bound <= abs_gap:
            status = "gap-limit"
            break_bound = bound
            break

        if not node.evaluated:
            if nodes >= node_limit:
                status = "node-limit"
                break_bound = bound
                break
            st, x, warm_out, lp_obj = solve_node(node)
            nodes += 1
            if st == 1:
                if not node.fixes:         # root relaxation infeasible
                    return MilpSolution(
                        Xi=inc_Xi, A=inc_A, Delta=inc_Delta, s=0,
                        objective=float("inf"), status="infeasible",
                        gap=float("inf"), nodes=nodes,
                    )
                continue                   # infeasible child
            node.evaluated = True
            node.bound = max(bound, lp_obj) if np.isfinite(bound) else lp_obj
            node.x = x
            node.warm = warm_out
            if node.bound >= inc_obj - 1e-12:
                continue
            if heap and node.bound > heap[0][0] + 1e-12:
                heapq.heappush(heap, [node.bound, cnt, node])   # defer, lazily
                continue

        x = node.x
        heuristic(x)
        if node.bound >= inc_obj - 1e-12:
            continue

        # Branch on a state activation (delta) while any is fractional: its
        # 0-side removes a whole library column block and its 1-side pays the
        # full activation price, so both children move the bound.  Only when
        # every delta is integral fall back to the term activations (alpha),
        # most-fractional first, ties to the lowest index.
        frac = x[binaries]
        dist = np.abs(frac - np.round(frac))
        fractional = dist > int_tol
        if not np.any(fractional):
            integral_extract(x)
            continue
        scores = np.where(fractional, 0.5 - np.abs(frac - 0.5), -1.0)
        delta_scores = scores[-ns:]
        if np.any(fractional[-ns:]):
            branch_var = int(binaries[len(binaries) - ns + int(np.argmax(delta_scores))])
        else:
            branch_var = int(binaries[int(np.argmax(scores))])

        for val in (0.0, 1.0):
            child = _Node(fixes=node.fixes + ((branch_var, val),), warm=node.warm)
            heapq.heappush(heap, [node.bound, next(counter), child])

    if break_bound is not None:
        best_remaining = break_bound
    elif heap:
        best_remaining = heap[0][0]
    else:
        best_remaining = inc_obj
    gap = max(0.0, (inc_obj - best_remaining) / max(1.0, abs(inc_obj)))
    if status == "optimal":
        gap = 0.0

    return MilpSolution(
        Xi=inc_Xi,
        A=inc_A,
        Delta=inc_Delta,
        s=inc_s,
        objective=inc_obj,
        status=status,
        gap=gap,
        nodes=nodes,
    )
