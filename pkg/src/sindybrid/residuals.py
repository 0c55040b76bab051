"""Numerical time derivatives and the stacked residual matrix.

The residual of a mechanistic model f against observed data is

    h_exp = dx_exp/dt - f(x_exp, r_exp)

with the derivative taken numerically from the (noisy) trajectories.  Rows
where the model right-hand side cannot be evaluated (noise pushing a state
out of f's domain) are excluded and counted rather than propagated as NaN.
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.signal import savgol_filter

from .datagen import Dataset
from .odes import OdeSystem

__all__ = [
    "ResidualError",
    "ResidualMatrix",
    "numeric_derivative",
    "residual_matrix",
    "column_means",
    "save_residuals",
]

# Give up rather than silently bias the fit when noise invalidates this
# fraction of the rows.
MAX_EXCLUDED_FRACTION = 0.2

_CSV_FLOAT = "%.17g"


class ResidualError(RuntimeError):
    pass


@dataclass(frozen=True)
class ResidualMatrix:
    """Stacked residuals, aligned row-for-row with the states that made them."""

    H: np.ndarray                      # (rows, N_S)
    rows_index: tuple[tuple[int, int], ...]  # (experiment id, sample index) per row
    states_at_rows: np.ndarray         # (rows, N_S)
    r_at_rows: np.ndarray              # (rows, N_R)
    state_names: tuple[str, ...]
    n_excluded: int = 0

    def __post_init__(self):
        rows = self.H.shape[0]
        if not (len(self.rows_index) == rows == self.states_at_rows.shape[0] == self.r_at_rows.shape[0]):
            raise ValueError("residual matrix rows are misaligned")

    @property
    def n_rows(self) -> int:
        return self.H.shape[0]


def numeric_derivative(t: np.ndarray, X: np.ndarray) -> np.ndarray:
    """Second-order three-point finite differences on a non-uniform grid.

    Central differences at interior points, one-sided second-order formulas
    at both endpoints; exact for polynomials of degree <= 2 on any strictly
    increasing grid.

    Parameters
    ----------
    t : ndarray, shape (N_t,)
        Strictly increasing sample times, N_t >= 3.
    X : ndarray, shape (N_t, N_S)

    Returns
    -------
    ndarray, shape (N_t, N_S)
    """
    t = np.asarray(t, dtype=float)
    X = np.atleast_2d(np.asarray(X, dtype=float))
    if X.shape[0] == 1 and t.size > 1:  # (N_t,) vector promoted the wrong way
        X = X.T
    if t.size < 3:
        raise ValueError("numeric_derivative needs at least 3 samples")
    if np.any(np.diff(t) <= 0):
        raise ValueError("time vector must be strictly increasing")
    if X.shape[0] != t.size:
        raise ValueError("t and X disagree on the number of samples")

    dX = np.empty_like(X)
    h = np.diff(t)
    h1 = h[:-1, None]  # spacing before each interior point
    h2 = h[1:, None]   # spacing after

    # 3-point Lagrange derivative weights, applied in differenced form
    # (each node's own value as reference): the weights sum to zero
    # analytically, and differencing keeps that exact in floating point,
    # so constant data maps to exactly zero.
    dX[1:-1] = (
        -h2 / (h1 * (h1 + h2)) * (X[:-2] - X[1:-1])
        + h1 / (h2 * (h1 + h2)) * (X[2:] - X[1:-1])
    )

    a, b = h[0], h[1]
    dX[0] = (
        (a + b) / (a * b) * (X[1] - X[0])
        - a / (b * (a + b)) * (X[2] - X[0])
    )
    a, b = h[-2], h[-1]
    dX[-1] = (
        b / (a * (a + b)) * (X[-3] - X[-1])
        - (a + b) / (a * b) * (X[-2] - X[-1])
    )
    return dX


def _presmooth(X: np.ndarray) -> np.ndarray:
    """Savitzky-Golay pass (window <= 7, quadratic) ahead of differencing.

    Quadratic local fits are transparent to the 3-point differencing scheme
    (which is itself exact on quadratics), so on clean data the filter is
    close to a no-op while on noisy data it removes most of the
    high-frequency component that differencing would otherwise amplify by
    1/dt.
    """
    n = X.shape[0]
    window = min(7, n if n % 2 == 1 else n - 1)
    if window < 5:
        return X
    return savgol_filter(X, window_length=window, polyorder=2, axis=0)


def residual_matrix(
    dataset: Dataset, fpm: OdeSystem, presmooth: bool = False
) -> ResidualMatrix:
    """Stack h_exp = numeric derivative - f(x, r) over all training experiments.

    Rows where f returns NaN/Inf (or raises) are excluded and counted; more
    than 20% exclusions raises ResidualError.  ``presmooth`` applies a mild
    binomial filter to the states before differentiating (off by default).
    """
    state_names = fpm.state_names
    n_s = fpm.n_states
    rows_H, rows_x, rows_r, index = [], [], [], []
    n_excluded = 0
    n_total = 0

    for exp_id, traj in enumerate(dataset.train):
        X = _presmooth(traj.X) if presmooth else traj.X
        dXdt = numeric_derivative(traj.t, X)
        for i in range(traj.n_samples):
            n_total += 1
            x_row = traj.X[i]
            try:
                f_row = np.asarray(fpm.rhs(x_row, traj.r), dtype=float)
            except (ValueError, FloatingPointError, ZeroDivisionError, OverflowError):
                n_excluded += 1
                continue
            if f_row.shape != (n_s,) or not np.all(np.isfinite(f_row)):
                n_excluded += 1
                continue
            rows_H.append(dXdt[i] - f_row)
            rows_x.append(x_row)
            rows_r.append(traj.r)
            index.append((exp_id, i))

    if n_total == 0:
        raise ResidualError("dataset has no training samples")
    if n_excluded > MAX_EXCLUDED_FRACTION * n_total:
        raise ResidualError(
            f"{n_excluded} of {n_total} rows excluded (model rhs undefined at noisy "
            f"states); exceeds the {MAX_EXCLUDED_FRACTION:.0%} threshold"
        )

    return ResidualMatrix(
        H=np.array(rows_H, dtype=float).reshape(len(rows_H), n_s),
        rows_index=tuple(index),
        states_at_rows=np.array(rows_x, dtype=float).reshape(len(rows_x), n_s),
        r_at_rows=np.array(rows_r, dtype=float).reshape(len(rows_r), -1),
        state_names=state_names,
        n_excluded=n_excluded,
    )


def column_means(H) -> np.ndarray:
    """Arithmetic mean of each residual column."""
    M = H.H if isinstance(H, ResidualMatrix) else np.asarray(H, dtype=float)
    if M.ndim != 2 or M.shape[0] == 0:
        raise ValueError("column_means needs a non-empty matrix")
    return M.mean(axis=0)


def save_residuals(res: ResidualMatrix, csv_path) -> Path:
    """Write residuals.csv (header names the states) plus a row-index sidecar."""
    path = Path(csv_path)
    np.savetxt(
        path, res.H, fmt=_CSV_FLOAT, delimiter=",",
        header=",".join(res.state_names), comments="",
    )
    sidecar = path.with_name(path.stem + "_rows.json")
    sidecar.write_text(json.dumps({
        "rows": [list(pair) for pair in res.rows_index],
        "n_excluded": res.n_excluded,
    }, indent=2))
    return path
