"""Backend dispatch and the public bounded-LP interface.

Two interchangeable kernel backends exist: the pure-numpy reference in
``_kernels`` and a numba-jitted compilation of the *same* functions.  The
active one is chosen per call by the ``backend`` argument, falling back to
the ``SINDYBRID_BACKEND`` environment variable (``auto`` | ``numba`` |
``numpy``, default ``auto`` = numba when importable).
"""
from __future__ import annotations

import os
from dataclasses import dataclass

import numpy as np
import scipy.sparse

from ..library import ConfigurationError
from . import _kernels

try:
    import numba

    HAS_NUMBA = True
except ImportError:  # pragma: no cover - numba is an optional accelerator
    HAS_NUMBA = False

__all__ = [
    "HAS_NUMBA",
    "LpResult",
    "solve_lp",
    "active_backend",
    "get_kernels",
]

BACKEND_ENV = "SINDYBRID_BACKEND"

STATUS_NAMES = {
    0: "optimal",
    1: "infeasible",
    2: "unbounded",
    3: "iteration-limit",
    4: "numerical",
}

_JITTED = None


def _jitted_kernels():
    global _JITTED
    if _JITTED is None:
        jit = numba.njit(cache=True, fastmath=False)
        _JITTED = (jit(_kernels.primal_bounded_simplex), jit(_kernels.dual_bounded_reopt))
    return _JITTED


def active_backend(backend: str | None = None) -> str:
    """Resolve 'auto'/'numba'/'numpy' to the backend that will actually run."""
    choice = backend or os.environ.get(BACKEND_ENV, "auto")
    if choice not in ("auto", "numba", "numpy"):
        raise ConfigurationError(
            f"unknown backend {choice!r}; expected 'auto', 'numba' or 'numpy'"
        )
    if choice == "auto":
        return "numba" if HAS_NUMBA else "numpy"
    if choice == "numba" and not HAS_NUMBA:
        raise ConfigurationError("backend 'numba' requested but numba is not installed")
    return choice


def get_kernels(backend: str | None = None):
    """Return (primal, dual) kernel callables for the resolved backend."""
    if active_backend(backend) == "numba":
        return _jitted_kernels()
    return _kernels.primal_bounded_simplex, _kernels.dual_bounded_reopt


@dataclass
class LpResult:
    status: str
    x: np.ndarray          # structural variables only
    objective: float
    iterations: int
    # Warm-start state over structural + slack (+ artificial) variables:
    basis: np.ndarray
    vstat: np.ndarray
    art_sign: np.ndarray
    x_full: np.ndarray


def _as_csc(A: np.ndarray):
    csc = scipy.sparse.csc_matrix(A)
    return (
        csc.indptr.astype(np.int64),
        csc.indices.astype(np.int64),
        csc.data.astype(np.float64),
    )


def equality_form(A, b, sense, bounds):
    """Append one slack column per row, turning A x (sense) b into A' x' = b.

    sense entries: -1 for <=, 0 for =, +1 for >=.  Slack coefficients are +1
    with bounds [0, inf) for <=, [0, 0] for =, (-inf, 0] for >=.
    """
    A = np.atleast_2d(np.asarray(A, dtype=float))
    b = np.asarray(b, dtype=float)
    sense = np.asarray(sense, dtype=int)
    m, n = A.shape
    if b.shape != (m,) or sense.shape != (m,):
        raise ValueError("A, b and sense disagree on the row count")
    bounds = np.asarray(bounds, dtype=float)
    if bounds.shape != (n, 2):
        raise ValueError("bounds must have shape (n, 2)")

    A_eq = np.hstack([A, np.eye(m)])
    lo = np.concatenate([bounds[:, 0], np.where(sense <= 0, 0.0, -np.inf)])
    up = np.concatenate([bounds[:, 1], np.where(sense < 0, np.inf, 0.0)])
    return A_eq, lo, up


def solve_lp(
    c,
    A,
    b,
    bounds,
    sense=None,
    backend: str | None = None,
    max_iter: int | None = None,
) -> LpResult:
    """Minimise c @ x subject to A x (sense) b and per-variable bounds.

    ``sense`` defaults to all <=.  Every variable needs at least one finite
    bound (the kernels are bounded-variable simplex routines, not general
    free-variable LP solvers).
    """
    A = np.atleast_2d(np.asarray(A, dtype=float))
    m, n = A.shape
    c = np.asarray(c, dtype=float)
    if c.shape != (n,):
        raise ValueError("c length must match the column count of A")
    if sense is None:
        sense = -np.ones(m, dtype=int)
    A_eq, lo, up = equality_form(A, b, sense, bounds)
    if np.any((lo == -np.inf) & (up == np.inf)):
        raise ConfigurationError("free variables (no finite bound) are not supported")
    c_eq = np.concatenate([c, np.zeros(m)])
    Ap, Ai, Ax = _as_csc(A_eq)
    n_real = n + m
    if max_iter is None:
        max_iter = max(2000, 50 * (m + n_real))

    primal, _ = get_kernels(backend)
    status, x_full, basis, vstat, art_sign, iters, obj = primal(
        m, n_real, Ap, Ai, Ax,
        np.asarray(b, dtype=float), lo, up, c_eq, max_iter,
    )
    return LpResult(
        status=STATUS_NAMES[int(status)],
        x=x_full[:n].copy(),
        objective=float(obj),
        iterations=int(iters),
        basis=basis,
        vstat=vstat,
        art_sign=art_sign,
        x_full=x_full,
    )
