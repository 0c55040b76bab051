"""Hybrid model assembly, simulation and evaluation metrics.

The hybrid right-hand side is the mechanistic model plus the identified
correction, unscaled back from column-normalised coefficients:

    dx_j/dt = f_j(x, r) + sum_i Xi[i, j] * phi_i(x, r) / scales[i]

with the sum running only over states the solver activated.  Evaluation
integrates the hybrid from each test experiment's first (noisy) observation
and pools R2/MAE per state over all test samples.
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .datagen import Dataset
from .library import CandidateFunction
from .milp import MilpSolution
from .odes import IntegrationError, OdeSystem, Trajectory, integrate

__all__ = [
    "ACTIVATION_XI_TOL",
    "HybridModel",
    "EvalReport",
    "identified_locations",
    "assemble_hybrid",
    "evaluate",
]

# A state counts as identified only if its activation carries real weight.
ACTIVATION_XI_TOL = 1e-6

EVAL_RTOL = 1e-6
EVAL_ATOL = 1e-8


def identified_locations(solution: MilpSolution) -> frozenset[int]:
    """States with delta_j = 1 whose column holds a non-negligible xi."""
    active = []
    for j in range(solution.Delta.size):
        if solution.Delta[j] > 0.5 and np.max(np.abs(solution.Xi[:, j])) > ACTIVATION_XI_TOL:
            active.append(j)
    return frozenset(active)


@dataclass(frozen=True)
class HybridModel:
    fpm: OdeSystem
    library: tuple[CandidateFunction, ...]
    Xi: np.ndarray                  # (N_L, N_S), scaled-column coefficients
    scales: np.ndarray              # (N_L,)
    active_states: frozenset[int]

    def __post_init__(self):
        nl, ns = self.Xi.shape
        if nl != len(self.library) or ns != self.fpm.n_states:
            raise ValueError("Xi shape does not match library/state dimensions")
        if self.scales.shape != (nl,):
            raise ValueError("scales length must match the library")

    def correction(self, x, r) -> np.ndarray:
        """The data-driven term h(x, r), zero outside the active states."""
        out = np.zeros(self.fpm.n_states)
        if not self.active_states:
            return out
        for i, f in enumerate(self.library):
            col = self.Xi[i]
            if not np.any(col):
                continue
            phi = float(f.eval(np.asarray(x, dtype=float), np.asarray(r, dtype=float)))
            for j in self.active_states:
                if col[j] != 0.0:
                    out[j] += col[j] * phi / self.scales[i]
        return out

    def rhs(self, x, r) -> np.ndarray:
        base = np.asarray(self.fpm.rhs(x, r), dtype=float)
        if not self.active_states:
            return base
        return base + self.correction(x, r)

    def as_system(self) -> OdeSystem:
        return OdeSystem(
            name=f"{self.fpm.name}+correction",
            state_names=self.fpm.state_names,
            run_condition_names=self.fpm.run_condition_names,
            rhs=self.rhs,
            params=self.fpm.params,
        )

    def correction_text(self) -> list[str]:
        """Human-readable per-state correction equations."""
        lines = []
        for j in sorted(self.active_states):
            terms = []
            for i, f in enumerate(self.library):
                coef = self.Xi[i, j] / self.scales[i]
                if coef == 0.0:
                    continue
                body = f"{abs(coef):.6g}" if f.label == "1" else f"{abs(coef):.6g}*{f.label}"
                terms.append(("-" if coef < 0 else "+", body))
            if not terms:
                continue
            sign0, body0 = terms[0]
            text = (f"-{body0}" if sign0 == "-" else body0)
            for sign, body in terms[1:]:
                text += f" {sign} {body}"
            lines.append(f"d{self.fpm.state_names[j]}/dt += {text}")
        return lines

    def to_json_dict(self) -> dict:
        return {
            "fpm": self.fpm.name,
            "library_labels": [f.label for f in self.library],
            "Xi": self.Xi.tolist(),
            "scales": self.scales.tolist(),
            "active_states": sorted(self.active_states),
            "active_state_names": [self.fpm.state_names[j] for j in sorted(self.active_states)],
            "correction": self.correction_text(),
        }

    def save(self, path) -> Path:
        p = Path(path)
        p.write_text(json.dumps(self.to_json_dict(), indent=2))
        return p


def assemble_hybrid(
    fpm: OdeSystem,
    library: Sequence[CandidateFunction],
    solution: MilpSolution,
    scales,
) -> HybridModel:
    """Compose the mechanistic model with the solver's correction."""
    active = identified_locations(solution)
    Xi = np.array(solution.Xi, dtype=float)
    Xi[:, [j for j in range(Xi.shape[1]) if j not in active]] = 0.0
    return HybridModel(
        fpm=fpm,
        library=tuple(library),
        Xi=Xi,
        scales=np.asarray(scales, dtype=float),
        active_states=active,
    )


@dataclass(frozen=True)
class EvalReport:
    r2_per_state: dict
    mae_per_state: dict
    r2_mean: float
    mae_mean: float
    identification_success: bool
    identified_states: frozenset[int]
    truth_states: frozenset[int]
    integration_failures: int
    r2_train_mean: float = float("nan")
    mae_train_mean: float = float("nan")

    def to_json_dict(self) -> dict:
        return {
            "r2_per_state": self.r2_per_state,
            "mae_per_state": self.mae_per_state,
            "r2_mean": self.r2_mean,
            "mae_mean": self.mae_mean,
            "identification_success": self.identification_success,
            "identified_states": sorted(self.identified_states),
            "truth_states": sorted(self.truth_states),
            "integration_failures": self.integration_failures,
            "r2_train_mean": self.r2_train_mean,
            "mae_train_mean": self.mae_train_mean,
        }


def _pooled_metrics(system: OdeSystem, trajectories: Sequence[Trajectory]):
    """Integrate from each first observation; pool predictions vs observations.

    Returns (r2 per state, mae per state, failures).
    """
    preds, obs = [], []
    failures = 0
    for traj in trajectories:
        try:
            sim = integrate(
                system, None, traj.X[0], traj.r, traj.t,
                rel_tol=EVAL_RTOL, abs_tol=EVAL_ATOL,
            )
        except IntegrationError:
            failures += 1
            continue
        preds.append(sim.X)
        obs.append(traj.X)
    if not preds:
        n = system.n_states
        return np.full(n, np.nan), np.full(n, np.nan), failures

    P = np.vstack(preds)
    O = np.vstack(obs)
    mae = np.mean(np.abs(P - O), axis=0)
    ss_res = np.sum((P - O) ** 2, axis=0)
    ss_tot = np.sum((O - O.mean(axis=0)) ** 2, axis=0)
    with np.errstate(divide="ignore", invalid="ignore"):
        r2 = 1.0 - ss_res / ss_tot
    r2 = np.where(ss_tot == 0.0, np.where(ss_res == 0.0, 1.0, -np.inf), r2)
    return r2, mae, failures


def evaluate(
    hm: HybridModel,
    dataset: Dataset,
    truth_states,
    solution: MilpSolution | None = None,
    include_train: bool = True,
) -> EvalReport:
    """Score the hybrid on the dataset's test split (and optionally train).

    ``truth_states`` is the set of state indices truly carrying a deviation
    (empty when none was injected).  Identified states come from the hybrid's
    active set, which applied the activation threshold at assembly.
    """
    if not dataset.test:
        raise ValueError("dataset has no test experiments")
    truth = frozenset(int(j) for j in truth_states)
    identified = hm.active_states if solution is None else identified_locations(solution)

    system = hm.as_system()
    names = hm.fpm.state_names
    r2, mae, failures = _pooled_metrics(system, dataset.test)

    r2_train_mean = mae_train_mean = float("nan")
    if include_train and dataset.train:
        r2_tr, mae_tr, _ = _pooled_metrics(system, dataset.train)
        r2_train_mean = float(np.mean(r2_tr))
        mae_train_mean = float(np.mean(mae_tr))

    return EvalReport(
        r2_per_state={name: float(v) for name, v in zip(names, r2)},
        mae_per_state={name: float(v) for name, v in zip(names, mae)},
        r2_mean=float(np.mean(r2)),
        mae_mean=float(np.mean(mae)),
        identification_success=(identified == truth),
        identified_states=frozenset(identified),
        truth_states=truth,
        integration_failures=failures,
        r2_train_mean=r2_train_mean,
        mae_train_mean=mae_train_mean,
    )
