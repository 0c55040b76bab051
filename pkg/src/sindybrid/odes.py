"""Core ODE machinery: systems with constant run conditions, deviations, integration.

A system is a plain right-hand-side ``f(x, r)`` over a state vector ``x`` and a
vector of run conditions ``r`` that stay constant along a trajectory (catalyst
load, temperature, dilution rate, ...).  An optional :class:`DeviationSpec`
adds a structural error term ``h(x, r)`` on a subset of the state equations,
which is how ground-truth data with a known model/plant mismatch is produced.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy.integrate import solve_ivp

__all__ = [
    "OdeSystem",
    "DeviationSpec",
    "Trajectory",
    "RhsDomainError",
    "IntegrationError",
    "eval_rhs",
    "integrate",
]

# Defaults used for ground-truth generation; hybrid-model evaluation uses the
# looser pair (see hybrid.evaluate).  Truth must be resolved well below the
# injected measurement noise.
TRUTH_RTOL = 1e-8
TRUTH_ATOL = 1e-10


class RhsDomainError(ValueError):
    """A right-hand side produced NaN/Inf for the given state."""

    def __init__(self, system_name: str, equation: str, x, r):
        self.equation = equation
        super().__init__(
            f"{system_name}: rhs of equation d{equation}/dt is not finite "
            f"at x={np.asarray(x).tolist()}, r={np.asarray(r).tolist()}"
        )


class IntegrationError(RuntimeError):
    """Adaptive integration failed (step-size underflow or state blow-up).

    Carries ``last_valid_time``, the largest time the integrator reached
    before giving up; callers use it to report where a trajectory died.
    """

    def __init__(self, message: str, last_valid_time: float):
        self.last_valid_time = float(last_valid_time)
        super().__init__(f"{message} (last valid time {last_valid_time:.6g})")


@dataclass(frozen=True)
class OdeSystem:
    """A named ODE system dx/dt = f(x, r) with constant run conditions.

    Parameters
    ----------
    name : str
        Identifier, e.g. ``"lotka"``.
    state_names : tuple of str
        Names of the state variables, length ``n_states``.
    run_condition_names : tuple of str
        Names of the experiment-constant inputs (may be empty).
    params : dict
        Named scalar parameters; kept for provenance/serialisation.
    rhs : callable
        ``rhs(x, r) -> ndarray`` of shape ``(n_states,)``.  Must be
        deterministic and finite on the documented admissible ranges.
    """

    name: str
    state_names: tuple[str, ...]
    run_condition_names: tuple[str, ...]
    rhs: Callable[[np.ndarray, np.ndarray], np.ndarray]
    params: dict = field(default_factory=dict)

    @property
    def n_states(self) -> int:
        return len(self.state_names)


@dataclass(frozen=True)
class DeviationSpec:
    """Structural error term h(x, r) acting on a subset of state equations.

    ``dev(x, r)`` returns a full-length vector that is exactly zero outside
    ``target_states``; construction through :func:`single_state_deviation`
    guarantees that invariant.
    """

    target_states: frozenset[int]
    dev: Callable[[np.ndarray, np.ndarray], np.ndarray]
    label: str = ""


def single_state_deviation(
    n_states: int, index: int, fn: Callable[[np.ndarray, np.ndarray], float], label: str = ""
) -> DeviationSpec:
    """Wrap a scalar deviation on one equation into a DeviationSpec."""

    def dev(x, r):
        out = np.zeros(n_states)
        out[index] = fn(x, r)
        return out

    return DeviationSpec(target_states=frozenset({index}), dev=dev, label=label)


@dataclass(frozen=True)
class Trajectory:
    """Sampled solution: strictly increasing times ``t`` and states ``X``.

    ``X`` has shape ``(len(t), n_states)``.  ``r`` is the run-condition
    vector the trajectory was generated under.
    """

    t: np.ndarray
    X: np.ndarray
    r: np.ndarray

    def __post_init__(self):
        t = np.asarray(self.t, dtype=float)
        if t.ndim != 1 or len(t) < 2 or np.any(np.diff(t) <= 0):
            raise ValueError("trajectory times must be strictly increasing, length >= 2")
        if not np.all(np.isfinite(self.X)):
            raise ValueError("trajectory states contain NaN/Inf")

    @property
    def n_samples(self) -> int:
        return len(self.t)


def eval_rhs(system: OdeSystem, x: Sequence[float], r: Sequence[float]) -> np.ndarray:
    """Evaluate f(x, r), validating dimensions and finiteness.

    Raises
    ------
    ValueError
        If ``x`` or ``r`` have the wrong length.
    RhsDomainError
        If any component of the result is NaN or Inf; the error names the
        offending state equation.
    """
    x = np.asarray(x, dtype=float)
    r = np.asarray(r, dtype=float)
    if x.shape != (system.n_states,):
        raise ValueError(
            f"{system.name}: expected state vector of length {system.n_states}, got shape {x.shape}"
        )
    if r.shape != (len(system.run_condition_names),):
        raise ValueError(
            f"{system.name}: expected {len(system.run_condition_names)} run conditions, got shape {r.shape}"
        )
    out = np.asarray(system.rhs(x, r), dtype=float)
    if not np.all(np.isfinite(out)):
        bad = int(np.flatnonzero(~np.isfinite(out))[0])
        raise RhsDomainError(system.name, system.state_names[bad], x, r)
    return out


def integrate(
    system: OdeSystem,
    deviation: DeviationSpec | None,
    x0: Sequence[float],
    r: Sequence[float],
    t_grid: Sequence[float],
    rel_tol: float = TRUTH_RTOL,
    abs_tol: float = TRUTH_ATOL,
) -> Trajectory:
    """Integrate dx/dt = f(x, r) [+ h(x, r)] and sample at ``t_grid``.

    Uses an adaptive embedded Runge-Kutta 5(4) pair with dense output, so the
    reported samples fall exactly on ``t_grid``.

    Parameters
    ----------
    deviation : DeviationSpec or None
        Optional structural error added to the rhs.  ``None`` and an
        identically-zero deviation behave identically.
    t_grid : array-like
        Strictly increasing sample times; integration starts at
        ``t_grid[0]``.

    Raises
    ------
    IntegrationError
        On step-size underflow or state blow-up, carrying the last valid
        time reached.
    """
    t_grid = np.asarray(t_grid, dtype=float)
    if t_grid.ndim != 1 or len(t_grid) < 2 or np.any(np.diff(t_grid) <= 0):
        raise ValueError("t_grid must be strictly increasing with at least 2 points")
    if rel_tol <= 0 or abs_tol <= 0:
        raise ValueError("tolerances must be positive")
    x0 = np.asarray(x0, dtype=float)
    r = np.asarray(r, dtype=float)

    if deviation is None:
        def fun(t, x):
            return system.rhs(x, r)
    else:
        def fun(t, x):
            return system.rhs(x, r) + deviation.dev(x, r)

    sol = solve_ivp(
        fun,
        (t_grid[0], t_grid[-1]),
        x0,
        method="RK45",
        t_eval=t_grid,
        rtol=rel_tol,
        atol=abs_tol,
        dense_output=False,
    )
    if not sol.success or sol.y.shape[1] != len(t_grid) or not np.all(np.isfinite(sol.y)):
        last_t = float(sol.t[-1]) if sol.t.size else float(t_grid[0])
        raise IntegrationError(
            f"{system.name}: integration failed ({sol.message.strip() if sol.message else 'non-finite state'})",
            last_valid_time=last_t,
        )
    return Trajectory(t=t_grid.copy(), X=sol.y.T.copy(), r=r.copy())
