"""Bounded-variable simplex kernels (pure numpy, numba-compilable).

Both kernels operate on the equality form

    A x = b,   lo <= x <= up

with A given column-compressed (Ap/Ai/Ax) over the n_real "real" columns
(structural variables plus slacks added by the caller).  Every real variable
must have at least one finite bound.  Rows additionally carry one artificial
variable each, indexed n_real + i, whose column is art_sign[i] * e_i;
artificials are pinned to [0, 0] except while phase 1 of the primal runs.

The code sticks to the numpy subset numba's njit supports, so the same
source serves both backends: scalar loops for the sparse work, vectorised
dense algebra (dot, broadcasting, inv) for the m-by-m basis inverse, and
closures instead of module-level helpers.

Status codes: 0 optimal, 1 infeasible, 2 unbounded, 3 iteration limit,
4 numerical trouble.  Variable states: 0 at lower bound, 1 at upper, 2 basic.
"""
from __future__ import annotations

import numpy as np

FEAS_TOL = 1e-9
OPT_TOL = 1e-9
PIVOT_TOL = 1e-10
PIVOT_ACCEPT = 1e-8   # demanded of a pivot taken from a possibly drifted inverse
DEGEN_TOL = 1e-12
REFACTOR_EVERY = 150
BLAND_AFTER = 40   # degenerate pivots in a row before switching to Bland's rule
DUAL_STALL = 60
DEVEX_RESET = 1e12


def primal_bounded_simplex(m, n_real, Ap, Ai, Ax, b, lo, up, c, max_iter):
    """Two-phase primal simplex with bounded variables.

    Returns (status, x, basis, vstat, art_sign, iters, objective); x and
    vstat cover n_real + m variables (artificials last), basis holds the
    variable index basic in each row.
    """
    n_full = n_real + m

    lo_f = np.empty(n_full)
    up_f = np.empty(n_full)
    c_f = np.zeros(n_full)          # phase-1 costs: artificials only
    lo_f[:n_real] = lo
    up_f[:n_real] = up

    x = np.zeros(n_full)
    vstat = np.zeros(n_full, dtype=np.int64)
    basis = np.zeros(m, dtype=np.int64)
    art_sign = np.ones(m)
    Binv = np.zeros((m, m))
    # Simplex multipliers, kept current by a rank-one update per pivot and
    # recomputed from scratch whenever Binv is refactorised.
    y = np.zeros(m)

    def objective():
        obj = 0.0
        for j in range(n_real):
            obj += c[j] * x[j]
        return obj

    def recompute_y():
        cB = np.empty(m)
        for i in range(m):
            cB[i] = c_f[basis[i]]
        y[:] = np.dot(cB, Binv)

    def refactor():
        # Returns False when the basis matrix is numerically singular (a
        # drift-admitted pivot can make it exactly so); callers must then
        # stop with the "numerical" status instead of crashing.
        B = np.zeros((m, m))
        for i in range(m):
            col = basis[i]
            if col < n_real:
                for k in range(Ap[col], Ap[col + 1]):
                    B[Ai[k], i] = Ax[k]
            else:
                B[col - n_real, i] = art_sign[col - n_real]
        try:
            Binv[:, :] = np.linalg.inv(B)
        except Exception:
            return False
        if not np.all(np.isfinite(Binv)):
            return False
        resid = b.copy()
        for j in range(n_full):
            if vstat[j] == 2:
                continue
            xj = x[j]
            if xj != 0.0:
                if j < n_real:
                    for k in range(Ap[j], Ap[j + 1]):
                        resid[Ai[k]] -= Ax[k] * xj
                else:
                    resid[j - n_real] -= art_sign[j - n_real] * xj
        xB = np.dot(Binv, resid)
        for i in range(m):
            x[basis[i]] = xB[i]
        cB = np.empty(m)
        for i in range(m):
            cB[i] = c_f[basis[i]]
        y[:] = np.dot(cB, Binv)
        return True

    # Nonbasic start: every real variable at its finite bound nearest zero
    # (ties toward the lower bound).
    for j in range(n_real):
        lj, uj = lo_f[j], up_f[j]
        if lj == -np.inf and uj == np.inf:
            return 4, x, basis, vstat, art_sign, 0, 0.0   # free vars unsupported
        if lj == -np.inf:
            vstat[j] = 1
            x[j] = uj
        elif uj == np.inf:
            vstat[j] = 0
            x[j] = lj
        elif abs(uj) < abs(lj):
            vstat[j] = 1
            x[j] = uj
        else:
            vstat[j] = 0
            x[j] = lj

    # Residual b - A x_N fixes the artificial basis and its column signs.
    resid0 = b.copy()
    for j in range(n_real):
        xj = x[j]
        if xj != 0.0:
            for k in range(Ap[j], Ap[j + 1]):
                resid0[Ai[k]] -= Ax[k] * xj
    # Crash: a row whose residual a singleton column can absorb within its
    # bounds (slack columns, typically) starts with that column basic, so
    # phase 1 only has to drive out artificials for the remaining rows.
    crash_col = np.full(m, -1, dtype=np.int64)
    crash_val = np.zeros(m)
    for j in range(n_real):
        if Ap[j + 1] - Ap[j] != 1:
            continue
        i = Ai[Ap[j]]
        if crash_col[i] >= 0:
            continue
        aij = Ax[Ap[j]]
        if aij == 0.0:
            continue
        xn = resid0[i] / aij + x[j]
        if xn >= lo_f[j] and xn <= up_f[j]:
            crash_col[i] = j
            crash_val[i] = xn
    for i in range(m):
        a = n_real + i
        j = crash_col[i]
        if j >= 0:
            basis[i] = j
            vstat[j] = 2
            x[j] = crash_val[i]
            Binv[i, i] = 1.0 / Ax[Ap[j]]
            art_sign[i] = 1.0
            x[a] = 0.0
            vstat[a] = 0
            lo_f[a] = 0.0
            up_f[a] = 0.0
            c_f[a] = 0.0
        else:
            basis[i] = a
            art_sign[i] = 1.0 if resid0[i] >= 0.0 else -1.0
            x[a] = abs(resid0[i])
            vstat[a] = 2
            lo_f[a] = 0.0
            up_f[a] = np.inf
            c_f[a] = 1.0
            Binv[i, i] = art_sign[i]

    # Devex reference weights (Harris): steepest-edge stand-ins updated from
    # the pivot row, which the explicit inverse hands us for free.
    devex = np.ones(n_full)

    # The crash basis is diagonal, so the multipliers come cheap.
    for i in range(m):
        y[i] = c_f[basis[i]] * Binv[i, i]

    b_scale = 1.0 + np.max(np.abs(b)) if m > 0 else 1.0
    phase = 1
    bland = False
    degen_streak = 0
    since_refactor = 0
    iters = 0
    pivot_retry = False

    while True:
        if iters >= max_iter:
            return 3, x, basis, vstat, art_sign, iters, objective()

        # --- pricing -------------------------------------------------------
        # Eligibility is on the raw reduced cost; ranking divides by the
        # static column norm (cheap steepest-edge stand-in).  Bland's rule
        # takes the first eligible index instead.
        enter = -1
        enter_dj = 0.0
        best_score = 0.0
        for j in range(n_full):
            if vstat[j] == 2 or lo_f[j] == up_f[j]:
                continue
            if j < n_real:
                dj = c_f[j]
                for k in range(Ap[j], Ap[j + 1]):
                    dj -= y[Ai[k]] * Ax[k]
            else:
                dj = c_f[j] - y[j - n_real] * art_sign[j - n_real]
            score = -dj if vstat[j] == 0 else dj
            if score > OPT_TOL:
                if bland:
                    enter = j
                    enter_dj = dj
                    break
                sc = score * score / devex[j]
                if sc > best_score:
                    best_score = sc
                    enter = j
                    enter_dj = dj

        if enter < 0:
            # Don't let accumulated eta drift declare the verdict: confirm
            # any phase exit against a freshly refactorised inverse.
            if since_refactor > 0:
                if not refactor():
                    return 4, x, basis, vstat, art_sign, iters, objective()
                since_refactor = 0
                continue
            if phase == 1:
                infeas = 0.0
                for i in range(m):
                    if basis[i] >= n_real:
                        infeas += x[basis[i]]
                if infeas > FEAS_TOL * b_scale * 100.0:
                    return 1, x, basis, vstat, art_sign, iters, objective()
                # Enter phase 2: pin the artificials, swap in the real costs.
                for i in range(m):
                    a = n_real + i
                    lo_f[a] = 0.0
                    up_f[a] = 0.0
                    c_f[a] = 0.0
                c_f[:n_real] = c
                phase = 2
                bland = False
                degen_streak = 0
                devex[:] = 1.0
                recompute_y()
                continue
            return 0, x, basis, vstat, art_sign, iters, objective()

        # --- entering column w = Binv @ A[:, enter] --------------------------
        w = np.zeros(m)
        if enter < n_real:
            for k in range(Ap[enter], Ap[enter + 1]):
                w += Ax[k] * Binv[:, Ai[k]]
        else:
            w += art_sign[enter - n_real] * Binv[:, enter - n_real]

        direction = 1.0 if vstat[enter] == 0 else -1.0

        # --- ratio test ------------------------------------------------------
        t_bound = up_f[enter] - lo_f[enter]
        t_star = t_bound
        leave = -1
        leave_upper = False
        for i in range(m):
            delta = -w[i] * direction
            bi = basis[i]
            if delta > PIVOT_TOL:
                if up_f[bi] == np.inf:
                    continue
                ti = (up_f[bi] - x[bi]) / delta
                hits_upper = True
            elif delta < -PIVOT_TOL:
                if lo_f[bi] == -np.inf:
                    continue
                ti = (x[bi] - lo_f[bi]) / (-delta)
                hits_upper = False
            else:
                continue
            if ti < 0.0:
                ti = 0.0
            if ti < t_star - DEGEN_TOL:
                t_star = ti
                leave = i
                leave_upper = hits_upper
            elif leave >= 0 and ti <= t_star + DEGEN_TOL:
                if bland:
                    if basis[i] < basis[leave]:
                        leave = i
                        leave_upper = hits_upper
                elif abs(delta) > abs(w[leave]):
                    leave = i
                    leave_upper = hits_upper

        if t_star == np.inf:
            if since_refactor > 0:
                if not refactor():
                    return 4, x, basis, vstat, art_sign, iters, objective()
                since_refactor = 0
                continue
            return 2, x, basis, vstat, art_sign, iters, objective()

        iters += 1
        if t_star < DEGEN_TOL:
            degen_streak += 1
            if degen_streak >= BLAND_AFTER:
                bland = True
        else:
            # Bland's rule is an escape hatch for stalls, not a way of life.
            degen_streak = 0
            bland = False

        if leave < 0:
            # Bound flip: the entering variable crosses to its other bound.
            for i in range(m):
                x[basis[i]] -= w[i] * direction * t_star
            if vstat[enter] == 0:
                vstat[enter] = 1
                x[enter] = up_f[enter]
            else:
                vstat[enter] = 0
                x[enter] = lo_f[enter]
            continue

        piv = w[leave]
        # A fresh inverse (pivot_retry set) is trusted down to PIVOT_TOL; a
        # drifted one must clear PIVOT_ACCEPT measured against the largest
        # entry of the entering column, else the pivot is retried fresh.  A
        # drift-admitted pivot whose true value is zero would make the next
        # basis exactly singular, so cheap refactors here buy robustness.
        wmax = np.max(np.abs(w))
        piv_floor = (PIVOT_TOL if pivot_retry or since_refactor == 0
                     else PIVOT_ACCEPT * (wmax if wmax > 1.0 else 1.0))
        if abs(piv) < piv_floor:
            if pivot_retry or since_refactor == 0:
                return 4, x, basis, vstat, art_sign, iters, objective()
            pivot_retry = True
            iters -= 1
            if not refactor():
                return 4, x, basis, vstat, art_sign, iters, objective()
            since_refactor = 0
            continue
        pivot_retry = False

        for i in range(m):
            x[basis[i]] -= w[i] * direction * t_star
        x[enter] = x[enter] + direction * t_star

        out = basis[leave]
        if leave_upper:
            x[out] = up_f[out]
            vstat[out] = 1
        else:
            x[out] = lo_f[out]
            vstat[out] = 0
        if out >= n_real:
            # An artificial that leaves the basis is retired for good.
            lo_f[out] = 0.0
            up_f[out] = 0.0
            x[out] = 0.0
            vstat[out] = 0
        basis[leave] = enter
        vstat[enter] = 2

        rho_old = Binv[leave].copy()

        # Devex weight propagation from the pivot row.
        gamma_q = devex[enter]
        piv2 = piv * piv
        ref_q = gamma_q / piv2
        if ref_q > DEVEX_RESET:
            devex[:] = 1.0
        else:
            for j in range(n_full):
                if vstat[j] == 2 or lo_f[j] == up_f[j] or j == out:
                    continue
                if j < n_real:
                    aj = 0.0
                    for k in range(Ap[j], Ap[j + 1]):
                        aj += rho_old[Ai[k]] * Ax[k]
                else:
                    aj = rho_old[j - n_real] * art_sign[j - n_real]
                t = (aj * aj / piv2) * gamma_q
                if t > devex[j]:
                    devex[j] = t
            devex[out] = ref_q if ref_q > 1.0 else 1.0

        prow = rho_old / piv
        Binv[leave, :] = prow
        wcol = w.copy()
        wcol[leave] = 0.0
        Binv -= wcol.reshape(m, 1) * prow.reshape(1, m)
        # Rank-one multiplier update: the entering reduced cost must vanish.
        y += enter_dj * Binv[leave]

        since_refactor += 1
        if since_refactor >= REFACTOR_EVERY:
            if not refactor():
                return 4, x, basis, vstat, art_sign, iters, objective()
            since_refactor = 0


def dual_bounded_reopt(m, n_real, Ap, Ai, Ax, b, lo, up, c,
                       basis_in, vstat_in, art_sign, max_iter):
    """Dual simplex re-optimisation from a dual-feasible warm-start basis.

    The warm start comes from a parent solve whose problem differed only in
    the lo/up arrays (costs and A unchanged), so reduced-cost signs carry
    over.  Returns the same tuple shape as the primal kernel.
    """
    n_full = n_real + m
    basis = basis_in.copy()
    vstat = vstat_in.copy()

    lo_f = np.zeros(n_full)
    up_f = np.zeros(n_full)
    c_f = np.zeros(n_full)
    lo_f[:n_real] = lo
    up_f[:n_real] = up
    c_f[:n_real] = c

    x = np.zeros(n_full)
    Binv = np.zeros((m, m))
    y = np.zeros(m)

    def objective():
        obj = 0.0
        for j in range(n_real):
            obj += c[j] * x[j]
        return obj

    def refactor():
        # False means the warm-start basis is numerically singular; the
        # caller bails out with the "numerical" status and the branch-and-
        # bound driver falls back to a cold solve.
        B = np.zeros((m, m))
        for i in range(m):
            col = basis[i]
            if col < n_real:
                for k in range(Ap[col], Ap[col + 1]):
                    B[Ai[k], i] = Ax[k]
            else:
                B[col - n_real, i] = art_sign[col - n_real]
        try:
            Binv[:, :] = np.linalg.inv(B)
        except Exception:
            return False
        if not np.all(np.isfinite(Binv)):
            return False
        resid = b.copy()
        for j in range(n_full):
            if vstat[j] == 2:
                continue
            xj = x[j]
            if xj != 0.0:
                if j < n_real:
                    for k in range(Ap[j], Ap[j + 1]):
                        resid[Ai[k]] -= Ax[k] * xj
                else:
                    resid[j - n_real] -= art_sign[j - n_real] * xj
        xB = np.dot(Binv, resid)
        for i in range(m):
            x[basis[i]] = xB[i]
        cB = np.empty(m)
        for i in range(m):
            cB[i] = c_f[basis[i]]
        y[:] = np.dot(cB, Binv)
        return True

    # Nonbasic variables snap to the child's bounds; basic values follow.
    for j in range(n_full):
        if vstat[j] == 1:
            x[j] = up_f[j]
        elif vstat[j] == 0:
            x[j] = lo_f[j]
    if not refactor():
        return 4, x, basis, vstat, art_sign, 0, objective()

    iters = 0
    stall = 0
    since_refactor = 0
    pivot_retry = False

    while True:
        if iters >= max_iter:
            return 3, x, basis, vstat, art_sign, iters, objective()

        # --- most-violated basic variable leaves -----------------------------
        leave = -1
        worst = 0.0
        target = 0.0
        for i in range(m):
            bi = basis[i]
            tol_i = FEAS_TOL * (1.0 + abs(x[bi]))
            v_lo = lo_f[bi] - x[bi]
            v_up = x[bi] - up_f[bi]
            if v_lo > worst + tol_i:
                worst = v_lo
                leave = i
                target = lo_f[bi]
            elif v_up > worst + tol_i:
                worst = v_up
                leave = i
                target = up_f[bi]

        if leave < 0:
            if since_refactor > 0:
                if not refactor():
                    return 4, x, basis, vstat, art_sign, iters, objective()
                since_refactor = 0
                continue
            return 0, x, basis, vstat, art_sign, iters, objective()

        need_increase = x[basis[leave]] < target

        # --- dual ratio test over eligible entering columns ------------------
        rho = Binv[leave].copy()

        enter = -1
        enter_dj = 0.0
        best_ratio = np.inf
        for j in range(n_full):
            if vstat[j] == 2 or lo_f[j] == up_f[j]:
                continue
            if j < n_real:
                alpha = 0.0
                dj = c_f[j]
                for k in range(Ap[j], Ap[j + 1]):
                    alpha += rho[Ai[k]] * Ax[k]
                    dj -= y[Ai[k]] * Ax[k]
            else:
                alpha = rho[j - n_real] * art_sign[j - n_real]
                dj = c_f[j] - y[j - n_real] * art_sign[j - n_real]
            step = alpha if vstat[j] == 0 else -alpha   # -(d x_B[leave] / d t)
            if need_increase:
                if step >= -PIVOT_TOL:
                    continue
            else:
                if step <= PIVOT_TOL:
                    continue
            ratio = abs(dj) / abs(alpha)
            if ratio < best_ratio - DEGEN_TOL:
                best_ratio = ratio
                enter = j
                enter_dj = dj

        if enter < 0:
            # Dual unbounded: the node's LP is primal infeasible.  Confirm
            # against a fresh inverse before condemning the node.
            if since_refactor > 0:
                if not refactor():
                    return 4, x, basis, vstat, art_sign, iters, objective()
                since_refactor = 0
                continue
            return 1, x, basis, vstat, art_sign, iters, objective()

        w = np.zeros(m)
        if enter < n_real:
            for k in range(Ap[enter], Ap[enter + 1]):
                w += Ax[k] * Binv[:, Ai[k]]
        else:
            w += art_sign[enter - n_real] * Binv[:, enter - n_real]

        piv = w[leave]
        wmax = np.max(np.abs(w))
        piv_floor = (PIVOT_TOL if pivot_retry or since_refactor == 0
                     else PIVOT_ACCEPT * (wmax if wmax > 1.0 else 1.0))
        if abs(piv) < piv_floor:
            if pivot_retry or since_refactor == 0:
                return 4, x, basis, vstat, art_sign, iters, objective()
            # Re-examine the pivot on a fresh inverse before giving up.
            pivot_retry = True
            if not refactor():
                return 4, x, basis, vstat, art_sign, iters, objective()
            since_refactor = 0
            continue
        pivot_retry = False

        delta_q = (x[basis[leave]] - target) / piv
        iters += 1
        if abs(delta_q) < DEGEN_TOL:
            stall += 1
            if stall >= DUAL_STALL:
                return 4, x, basis, vstat, art_sign, iters, objective()
        else:
            stall = 0

        for i in range(m):
            x[basis[i]] -= w[i] * delta_q
        x[enter] = x[enter] + delta_q

        out = basis[leave]
        x[out] = target
        vstat[out] = 0 if target == lo_f[out] else 1
        basis[leave] = enter
        vstat[enter] = 2

        prow = Binv[leave].copy() / piv
        Binv[leave, :] = prow
        wcol = w.copy()
        wcol[leave] = 0.0
        Binv -= wcol.reshape(m, 1) * prow.reshape(1, m)
        y += enter_dj * Binv[leave]

        since_refactor += 1
        if since_refactor >= REFACTOR_EVERY:
            if not refactor():
                return 4, x, basis, vstat, art_sign, iters, objective()
            since_refactor = 0
