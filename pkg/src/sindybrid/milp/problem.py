"""Assembly of the sparse-correction MILP from residuals and a scaled library.

Variables, in fixed order (index arithmetic is relied on throughout):

    xi_ij   real, [lb, ub]      coefficient of library term i in state j
    a_ij    binary              term activation
    d_j     binary              state (equation) activation
    y_rj    >= 0                absolute data misfit per row and state
    z_ij    >= 0                absolute-value linearisation of xi
    s       integer 0..N_S      number of active states

packed as xi (i*N_S+j), then a, then d, then y (r*N_S+j), then z, then s —
n_vars = 3*N_L*N_S + N_S + rows*N_S + 1.

Objective:  sum y_rj + lambda1_xi * (sum z_ij + max(|ub|,|lb|) * N_L * s);
the coefficient on s is exactly the coupled regulariser lambda1_delta.

Constraints, all written as <= rows, in fixed blocks:

    (1)  sum_i XLsc[r,i] xi_ij - y_rj <= H[r,j]      (r outer, j inner)
    (2) -sum_i XLsc[r,i] xi_ij - y_rj <= -H[r,j]
    (3a)  xi_ij - z_ij <= 0                          (i outer, j inner)
    (3b) -xi_ij - z_ij <= 0
    (4a)  xi_ij - ub*a_ij <= 0
    (4b) -xi_ij + lb*a_ij <= 0
    (5)   a_ij - d_j <= 0
    (6)   sum_j d_j - s <= 0
    (7)   sum_ij a_ij <= K_alpha   (N_L*N_S when unbounded)
    (8)   sum_j d_j <= K_delta     (N_S when unbounded)

giving 2*rows*N_S + 4*N_L*N_S + N_L*N_S + 3 constraints.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..library import ConfigurationError, ScaledLibraryMatrix
from ..residuals import ResidualMatrix

__all__ = ["Hyperparams", "MilpProblem", "assemble"]


@dataclass(frozen=True)
class Hyperparams:
    """Regularisation weight, cardinality caps and coefficient box."""

    lambda1_xi: float = 3.0
    K_alpha: int | None = None      # None = unbounded
    K_delta: int | None = None
    lb: float = -100.0
    ub: float = 100.0

    def __post_init__(self):
        if self.lambda1_xi < 0:
            raise ConfigurationError("lambda1_xi must be >= 0")
        if not (self.lb < 0 < self.ub):
            raise ConfigurationError("need lb < 0 < ub")
        for name, K in (("K_alpha", self.K_alpha), ("K_delta", self.K_delta)):
            if K is not None and (not isinstance(K, int) or K < 0):
                raise ConfigurationError(f"{name} must be None or a count >= 0")

    @property
    def bound_scale(self) -> float:
        return max(abs(self.ub), abs(self.lb))

    def lambda1_delta(self, n_library: int) -> float:
        """Coupled weight on s: both regularisers act on the same scale."""
        return self.lambda1_xi * self.bound_scale * n_library


@dataclass(frozen=True)
class MilpProblem:
    c: np.ndarray
    A: np.ndarray              # dense (n_constraints, n_vars), all rows <=
    b: np.ndarray
    lo: np.ndarray
    up: np.ndarray
    is_binary: np.ndarray
    is_integer: np.ndarray     # integer but not binary (just s)
    var_names: tuple[str, ...]
    rows: int
    n_library: int
    n_states: int
    hp: Hyperparams
    H: np.ndarray = field(repr=False)
    XL_sc: np.ndarray = field(repr=False)

    @property
    def n_vars(self) -> int:
        return self.c.size

    @property
    def n_constraints(self) -> int:
        return self.b.size

    # Index helpers (see module docstring for the packing).
    def xi_index(self, i: int, j: int) -> int:
        return i * self.n_states + j

    def alpha_index(self, i: int, j: int) -> int:
        return self.n_library * self.n_states + i * self.n_states + j

    def delta_index(self, j: int) -> int:
        return 2 * self.n_library * self.n_states + j

    def y_index(self, r: int, j: int) -> int:
        return 2 * self.n_library * self.n_states + self.n_states + r * self.n_states + j

    def z_index(self, i: int, j: int) -> int:
        base = 2 * self.n_library * self.n_states + self.n_states + self.rows * self.n_states
        return base + i * self.n_states + j

    @property
    def s_index(self) -> int:
        return self.n_vars - 1

    def split_solution(self, x: np.ndarray):
        """Unpack a raw variable vector into (Xi, A, Delta, s) arrays."""
        nl, ns, rows = self.n_library, self.n_states, self.rows
        Xi = x[: nl * ns].reshape(nl, ns)
        A = x[nl * ns: 2 * nl * ns].reshape(nl, ns)
        Delta = x[2 * nl * ns: 2 * nl * ns + ns]
        s = x[self.s_index]
        return Xi, A, Delta, s


def assemble(H, XL, hp: Hyperparams) -> MilpProblem:
    """Build the MILP from aligned residuals and a scaled library matrix.

    ``H`` may be a ResidualMatrix or a plain (rows, N_S) array; ``XL`` a
    ScaledLibraryMatrix or a plain (rows, N_L) array.
    """
    H_mat = H.H if isinstance(H, ResidualMatrix) else np.atleast_2d(np.asarray(H, dtype=float))
    XL_mat = XL.XL_sc if isinstance(XL, ScaledLibraryMatrix) else np.atleast_2d(np.asarray(XL, dtype=float))
    rows, n_states = H_mat.shape
    n_library = XL_mat.shape[1]
    if rows == 0:
        raise ConfigurationError("cannot assemble a problem from zero residual rows")
    if XL_mat.shape[0] != rows:
        raise ConfigurationError(
            f"row mismatch: H has {rows} rows, library matrix has {XL_mat.shape[0]}"
        )
    if not (np.all(np.isfinite(H_mat)) and np.all(np.isfinite(XL_mat))):
        raise ConfigurationError("H and XL_sc must be finite")

    nl, ns = n_library, n_states
    n_xi = nl * ns
    n_vars = 3 * n_xi + ns + rows * ns + 1
    i_alpha = n_xi
    i_delta = 2 * n_xi
    i_y = 2 * n_xi + ns
    i_z = i_y + rows * ns
    i_s = n_vars - 1

    c = np.zeros(n_vars)
    c[i_y: i_y + rows * ns] = 1.0
    c[i_z: i_z + n_xi] = hp.lambda1_xi
    c[i_s] = hp.lambda1_delta(nl)   # equals lambda1_xi * max(|ub|,|lb|) * N_L

    lo = np.zeros(n_vars)
    up = np.full(n_vars, np.inf)
    lo[:n_xi] = hp.lb
    up[:n_xi] = hp.ub
    up[i_alpha: i_alpha + n_xi] = 1.0
    up[i_delta: i_delta + ns] = 1.0
    up[i_s] = float(ns)

    is_binary = np.zeros(n_vars, dtype=bool)
    is_binary[i_alpha: i_delta + ns] = True
    is_integer = np.zeros(n_vars, dtype=bool)
    is_integer[i_s] = True

    n_constraints = 2 * rows * ns + 4 * n_xi + n_xi + 3
    A = np.zeros((n_constraints, n_vars))
    b = np.zeros(n_constraints)
    row = 0

    # (1)/(2) misfit rows: +/-(H - XL_sc Xi) <= y.
    for sign in (1.0, -1.0):
        for r in range(rows):
            for j in range(ns):
                A[row, j: n_xi: ns] = sign * XL_mat[r]
                A[row, i_y + r * ns + j] = -1.0
                b[row] = sign * H_mat[r, j]
                row += 1

    # (3) absolute-value rows: +/-xi <= z.
    for sign in (1.0, -1.0):
        for i in range(nl):
            for j in range(ns):
                k = i * ns + j
                A[row, k] = sign
                A[row, i_z + k] = -1.0
                row += 1

    # (4) big-M activation: lb*a <= xi <= ub*a.
    for i in range(nl):
        for j in range(ns):
            k = i * ns + j
            A[row, k] = 1.0
            A[row, i_alpha + k] = -hp.ub
            row += 1
    for i in range(nl):
        for j in range(ns):
            k = i * ns + j
            A[row, k] = -1.0
            A[row, i_alpha + k] = hp.lb
            row += 1

    # (5) a_ij <= d_j.
    for i in range(nl):
        for j in range(ns):
            A[row, i_alpha + i * ns + j] = 1.0
            A[row, i_delta + j] = -1.0
            row += 1

    # (6) sum d - s <= 0;  (7) sum a <= K_alpha;  (8) sum d <= K_delta.
    A[row, i_delta: i_delta + ns] = 1.0
    A[row, i_s] = -1.0
    row += 1
    A[row, i_alpha: i_alpha + n_xi] = 1.0
    b[row] = float(n_xi if hp.K_alpha is None else hp.K_alpha)
    row += 1
    A[row, i_delta: i_delta + ns] = 1.0
    b[row] = float(ns if hp.K_delta is None else hp.K_delta)
    row += 1
    assert row == n_constraints

    names = []
    names += [f"xi_{i}_{j}" for i in range(nl) for j in range(ns)]
    names += [f"a_{i}_{j}" for i in range(nl) for j in range(ns)]
    names += [f"d_{j}" for j in range(ns)]
    names += [f"y_{r}_{j}" for r in range(rows) for j in range(ns)]
    names += [f"z_{i}_{j}" for i in range(nl) for j in range(ns)]
    names.append("s")

    return MilpProblem(
        c=c, A=A, b=b, lo=lo, up=up,
        is_binary=is_binary, is_integer=is_integer,
        var_names=tuple(names),
        rows=rows, n_library=nl, n_states=ns, hp=hp,
        H=H_mat.copy(), XL_sc=XL_mat.copy(),
    )
