"""Independent oracles the solver tests compare against.

Nothing in here may import from sindybrid.milp's solution path beyond the
problem container itself: the LP oracle enumerates polytope vertices from
scratch, and the MILP oracles enumerate binary assignments and price the
remaining continuous program with scipy's HiGHS backend.  They are slow and
simple on purpose.
"""
from __future__ import annotations

from itertools import combinations, product

import numpy as np
import scipy.optimize


# ---------------------------------------------------------------------------
# LP oracle: vertex enumeration for small bounded LPs.


def vertex_enumeration_lp(c, A, b, bounds, sense=None, tol=1e-9):
    """Minimise c@x over {A x (sense) b, lo <= x <= up} by trying every vertex.

    Returns (status, objective, x) with status in {"optimal", "infeasible"}.
    Only valid when the feasible set is a polytope whose optimum (if feasible)
    is attained at a vertex — guaranteed here because callers use finite boxes
    or finite lower bounds with nonnegative costs.
    """
    A = np.atleast_2d(np.asarray(A, dtype=float))
    b = np.asarray(b, dtype=float)
    c = np.asarray(c, dtype=float)
    m, n = A.shape
    if sense is None:
        sense = -np.ones(m, dtype=int)
    sense = np.asarray(sense, dtype=int)
    bounds = np.asarray(bounds, dtype=float)

    eq_G = [A[i] for i in range(m) if sense[i] == 0]
    eq_h = [b[i] for i in range(m) if sense[i] == 0]
    G_list, h_list = [], []
    for i in range(m):
        if sense[i] < 0:
            G_list.append(A[i]); h_list.append(b[i])
        elif sense[i] > 0:
            G_list.append(-A[i]); h_list.append(-b[i])
    for j in range(n):
        lo, up = bounds[j]
        if np.isfinite(up):
            e = np.zeros(n); e[j] = 1.0
            G_list.append(e); h_list.append(up)
        if np.isfinite(lo):
            e = np.zeros(n); e[j] = -1.0
            G_list.append(e); h_list.append(-lo)
    G = np.asarray(G_list).reshape(len(G_list), n)
    h = np.asarray(h_list)

    n_eq = len(eq_h)
    need = n - n_eq
    if need < 0:
        raise ValueError("more equality rows than variables; not supported")

    best, best_x = np.inf, None
    feasible = False
    scale = 1.0 + np.abs(h).max(initial=0.0) + np.abs(eq_h).max(initial=0.0)
    for comb in combinations(range(len(G)), need):
        M = np.asarray(eq_G + [G[i] for i in comb])
        rhs = np.asarray(eq_h + [h[i] for i in comb])
        try:
            x = np.linalg.solve(M, rhs)
        except np.linalg.LinAlgError:
            continue
        if not np.all(np.isfinite(x)):
            continue
        if np.abs(M @ x - rhs).max(initial=0.0) > 1e-8 * scale:
            continue  # solve() succeeded on a near-singular system
        if np.any(G @ x > h + tol * scale):
            continue
        feasible = True
        v = float(c @ x)
        if v < best:
            best, best_x = v, x
    if not feasible:
        return "infeasible", np.inf, None
    return "optimal", best, best_x


# ---------------------------------------------------------------------------
# MILP oracles over the sparse-correction problem container.


def _state_lp(Hj, X, lam, lb, ub, active):
    """Optimal sum|misfit| + lam*sum|xi| for one state, given active terms."""
    R = Hj.size
    k = len(active)
    if k == 0:
        return float(np.abs(Hj).sum())
    Xa = X[:, list(active)]
    # variables: xi (k), y (R), z (k)
    n = 2 * k + R
    c = np.concatenate([np.zeros(k), np.ones(R), np.full(k, lam)])
    blocks, rhs = [], []
    for sign in (1.0, -1.0):
        blk = np.zeros((R, n))
        blk[:, :k] = sign * Xa
        blk[:, k:k + R] = -np.eye(R)
        blocks.append(blk); rhs.append(sign * Hj)
    for sign in (1.0, -1.0):
        blk = np.zeros((k, n))
        blk[:, :k] = sign * np.eye(k)
        blk[:, k + R:] = -np.eye(k)
        blocks.append(blk); rhs.append(np.zeros(k))
    res = scipy.optimize.linprog(
        c, A_ub=np.vstack(blocks), b_ub=np.concatenate(rhs),
        bounds=[(lb, ub)] * k + [(0, None)] * (R + k),
        method="highs",
    )
    if res.status != 0:
        raise RuntimeError(f"oracle state LP failed: {res.message}")
    return float(res.fun)


def milp_oracle(prob):
    """Exhaustive optimum of the sparse-correction MILP.

    Enumerates, per state, every activation pattern (2^N_L of them), keeps the
    cheapest at each term count, then combines states by dynamic programming
    over the shared K_alpha / K_delta budgets.  Equivalent to enumerating all
    binary assignments satisfying alpha <= delta, but prices each state's
    continuous subproblem only once per pattern.
    """
    H, X, hp = prob.H, prob.XL_sc, prob.hp
    R, NS = H.shape
    NL = X.shape[1]
    lam = hp.lambda1_xi
    s_cost = hp.lambda1_delta(NL)
    Ka = NL * NS if hp.K_alpha is None else hp.K_alpha
    Kd = NS if hp.K_delta is None else hp.K_delta

    base = np.abs(H).sum(axis=0)
    w = []
    for j in range(NS):
        byk: dict[int, float] = {}
        for bits in range(1 << NL):
            active = tuple(i for i in range(NL) if bits >> i & 1)
            v = _state_lp(H[:, j], X, lam, hp.lb, hp.ub, active)
            k = len(active)
            if v < byk.get(k, np.inf):
                byk[k] = v
        w.append(byk)

    dp = {(0, 0): 0.0}
    for j in range(NS):
        nxt: dict[tuple[int, int], float] = {}
        for (ka, kd), cost in dp.items():
            v0 = cost + base[j]
            if v0 < nxt.get((ka, kd), np.inf):
                nxt[(ka, kd)] = v0
            if kd + 1 <= Kd:
                for k, v in w[j].items():
                    if ka + k <= Ka:
                        v1 = cost + v + s_cost
                        if v1 < nxt.get((ka + k, kd + 1), np.inf):
                            nxt[(ka + k, kd + 1)] = v1
        dp = nxt
    return min(dp.values())


def milp_oracle_naive(prob):
    """The same optimum by literally fixing every (alpha, delta) assignment.

    Solves the full LP (all continuous variables, the assembled constraint
    matrix) with scipy for each assignment that satisfies the logic
    constraints.  Exponentially slow — only for validating milp_oracle on
    tiny instances.
    """
    NL, NS = prob.n_library, prob.n_states
    Ka = NL * NS if prob.hp.K_alpha is None else prob.hp.K_alpha
    Kd = NS if prob.hp.K_delta is None else prob.hp.K_delta

    best = np.inf
    for delta in product((0.0, 1.0), repeat=NS):
        if sum(delta) > Kd:
            continue
        allowed = [i * NS + j for i in range(NL) for j in range(NS) if delta[j] > 0.5]
        for actives in product((0.0, 1.0), repeat=len(allowed)):
            if sum(actives) > Ka:
                continue
            alpha = np.zeros(NL * NS)
            for pos, k in enumerate(allowed):
                alpha[k] = actives[pos]
            lo = prob.lo.copy()
            up = prob.up.copy()
            for k in range(NL * NS):
                lo[prob.alpha_index(0, 0) + k] = alpha[k]
                up[prob.alpha_index(0, 0) + k] = alpha[k]
            for j in range(NS):
                lo[prob.delta_index(j)] = delta[j]
                up[prob.delta_index(j)] = delta[j]
            lo[prob.s_index] = up[prob.s_index] = float(sum(delta))
            res = scipy.optimize.linprog(
                prob.c, A_ub=prob.A, b_ub=prob.b,
                bounds=list(zip(lo, up)), method="highs",
            )
            if res.status == 0 and res.fun < best:
                best = float(res.fun)
    return best


def scipy_milp_objective(prob):
    """Solve the assembled problem directly with scipy.optimize.milp."""
    integrality = (prob.is_binary | prob.is_integer).astype(int)
    res = scipy.optimize.milp(
        c=prob.c,
        constraints=scipy.optimize.LinearConstraint(prob.A, -np.inf, prob.b),
        integrality=integrality,
        bounds=scipy.optimize.Bounds(prob.lo, prob.up),
    )
    if not res.success:
        raise RuntimeError(f"scipy milp failed: {res.message}")
    return float(res.fun)


# ---------------------------------------------------------------------------
# Random instance generators shared by the solver test suites.


def random_lp_instance(seed):
    """Random bounded LP with <= 4 structural variables; ~30% infeasible-ish."""
    rng = np.random.default_rng(seed)
    n = int(rng.integers(1, 5))
    m = int(rng.integers(1, 7))
    A = rng.normal(size=(m, n))
    c = rng.normal(size=n)
    lo = rng.uniform(-3.0, 0.0, size=n)
    up = lo + rng.uniform(0.5, 4.0, size=n)
    bounds = np.column_stack([lo, up])

    sense = -np.ones(m, dtype=int)
    mix = rng.random()
    if mix < 0.3:
        # mixed senses, feasible by construction at an interior point
        sense = rng.choice([-1, 0, 1], size=m, p=[0.6, 0.2, 0.2])
        (eq_rows,) = np.nonzero(sense == 0)
        for i in eq_rows[max(0, n - 1):]:
            sense[i] = -1  # keep equality count below the variable count
        x0 = rng.uniform(lo, up)
        slack = rng.uniform(0.05, 1.0, size=m)
        b = A @ x0 + np.where(sense < 0, slack, np.where(sense > 0, -slack, 0.0))
    elif mix < 0.7:
        x0 = rng.uniform(lo, up)
        b = A @ x0 + rng.uniform(0.05, 1.0, size=m)
    else:
        b = rng.normal(size=m)  # may or may not be feasible
    return c, A, b, bounds, sense


def random_milp_instance(seed, max_rows=6, max_nl=4, max_ns=3):
    """Random sparse-correction instance within the oracle-tractable sizes."""
    from sindybrid import milp

    rng = np.random.default_rng(seed)
    rows = int(rng.integers(1, max_rows + 1))
    nl = int(rng.integers(1, max_nl + 1))
    ns = int(rng.integers(1, max_ns + 1))
    X = rng.uniform(-1.0, 1.0, size=(rows, nl))
    H = rng.normal(scale=rng.uniform(0.2, 3.0), size=(rows, ns))
    lam = float(rng.uniform(0.0, 5.0))
    ub = float(rng.uniform(0.5, 8.0))
    lb = -float(rng.uniform(0.5, 8.0))
    K_alpha = None if rng.random() < 0.4 else int(rng.integers(0, nl * ns + 1))
    K_delta = None if rng.random() < 0.4 else int(rng.integers(0, ns + 1))
    hp = milp.Hyperparams(lambda1_xi=lam, K_alpha=K_alpha, K_delta=K_delta, lb=lb, ub=ub)
    return milp.assemble(H, X, hp)
