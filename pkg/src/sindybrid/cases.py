"""The three benchmark systems and their ground-truth deviation catalogs.

Each case bundles a first-principles model (FPM), one injected deviation per
state equation (the "reality" the FPM is missing), initial-condition bounds,
the discrete run-condition grid, a simulation horizon, and a default
candidate-function library rich enough to represent every catalog deviation
exactly.

Conventions
-----------
* Meerwein arylation: temperature enters everywhere as the reduced variable
  ``Tstar = T / 273.15``; the grid {313.15, 318.15} K therefore appears as
  {1.146439..., 1.164745...}.  Rate constants use the conventional negative
  Arrhenius exponent with activation energies in kJ/mol and
  R = 8.314e-3 kJ/(mol K), giving k_M ~ 0.13-3.8 and k_S ~ 0.16-5.0 over the
  grid.  Note the ~30x spread: the fastest cell reacts away in a fraction of
  the horizon, which is why the default horizon is short (see HORIZONS).
* Fermentation: kinetic parameters ship in ``data/fermentation_params.json``
  and can be overridden per call; data generation and identification always
  use the same self-consistent set.
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from importlib import resources

import numpy as np

from .library import ConfigurationError, LibrarySpec
from .odes import DeviationSpec, OdeSystem, single_state_deviation

__all__ = ["CaseModel", "make_case", "CASE_IDS", "ConfigurationError"]

CASE_IDS = ("meerwein", "fermentation", "lotka")

GAS_CONSTANT = 8.314e-3  # kJ / (mol K)
T_REF = 273.15  # K; Tstar = T / T_REF

# Simulation horizons (time units of each model).  Not derived from data;
# chosen so residual columns are dominated by the injected deviations rather
# than by finite-difference error of the fastest run-condition cell, while
# keeping noise amplification of the numerical derivative tolerable.
HORIZONS = {"meerwein": 0.6, "fermentation": 30.0, "lotka": 10.0}

FERMENTATION_PARAM_NAMES = (
    "mu_max", "K_S", "K_i", "X_max", "P_max", "m", "n",
    "Y_X", "beta_ms", "K_beta_s2", "Y_PX", "beta_mp", "K_beta_s1",
)


@dataclass(frozen=True)
class CaseModel:
    """A benchmark case: FPM, deviation catalog, sampling ranges, defaults."""

    system: OdeSystem
    deviations: dict[str, DeviationSpec]  # keyed by deviated state name
    ic_bounds: tuple[tuple[float, float], ...]  # per state [lo, hi]; lo == hi means fixed
    run_condition_levels: dict[str, tuple[float, ...]]
    horizon: float
    default_library: LibrarySpec

    @property
    def name(self) -> str:
        return self.system.name


def _make_meerwein(params: dict | None) -> CaseModel:
    if params:
        raise ConfigurationError("meerwein has no overridable parameters")

    def rate_constants(c_cat: float, tstar: float) -> tuple[float, float]:
        T = tstar * T_REF
        k_m = 3.71e31 * np.exp(0.5498 * c_cat) * np.exp(-198.84 / (GAS_CONSTANT * T))
        k_s = 1.06e8 * np.exp(0.7669 * c_cat) * np.exp(-58.81 / (GAS_CONSTANT * T))
        return k_m, k_s

    def rhs(x, r):
        c_a, c_b, _c_p, _c_s = x
        k_m, k_s = rate_constants(r[0], r[1])
        main = k_m * c_a * c_b
        side = k_s * c_a
        return np.array([-main - side, -main, main, side])

    system = OdeSystem(
        name="meerwein",
        state_names=("C_A", "C_B", "C_P", "C_S"),
        run_condition_names=("C_cat", "Tstar"),
        rhs=rhs,
        params={"R": GAS_CONSTANT, "T_ref": T_REF},
    )

    devs = {
        "C_A": single_state_deviation(
            4, 0, lambda x, r: -x[0] * x[1] - x[0] / x[1], label="-C_A*C_B - C_A/C_B"
        ),
        "C_B": single_state_deviation(
            4, 1, lambda x, r: -2.0 * x[1] * r[1], label="-2*C_B*Tstar"
        ),
        "C_P": single_state_deviation(
            4, 2,
            lambda x, r: x[0] * (-0.2 * r[0] - 0.2 * r[1] + 0.3 * r[0] * r[1]),
            label="C_A*(-0.2*C_cat - 0.2*Tstar + 0.3*C_cat*Tstar)",
        ),
        "C_S": single_state_deviation(
            4, 3,
            lambda x, r: -0.1 * x[3] * (1.0 + x[3] + r[0] + r[1] + r[0] * r[1]),
            label="-0.1*C_S*(1 + C_S + C_cat + Tstar + C_cat*Tstar)",
        ),
    }

    library = LibrarySpec(
        polynomial_degree=2,
        include_constant=True,
        rational_terms=("C_A/C_B",),
        custom_terms=("C_A*C_cat*Tstar", "C_S*C_cat*Tstar"),
    )

    return CaseModel(
        system=system,
        deviations=devs,
        ic_bounds=((1.0, 3.0), (1.0, 3.0), (0.0, 0.0), (0.0, 0.0)),
        run_condition_levels={
            "C_cat": (3.0, 5.0, 7.0),
            "Tstar": (313.15 / T_REF, 318.15 / T_REF),
        },
        horizon=HORIZONS["meerwein"],
        default_library=library,
    )


def _load_fermentation_defaults() -> dict:
    text = resources.files("sindybrid.data").joinpath("fermentation_params.json").read_text()
    raw = json.loads(text)
    return {k: float(v) for k, v in raw.items() if k != "comment"}


def _make_fermentation(params: dict | None) -> CaseModel:
    p = _load_fermentation_defaults()
    if params:
        unknown = set(params) - set(FERMENTATION_PARAM_NAMES)
        if unknown:
            raise ConfigurationError(f"unknown fermentation parameters: {sorted(unknown)}")
        p.update({k: float(v) for k, v in params.items()})
    missing = [name for name in FERMENTATION_PARAM_NAMES if name not in p]
    if missing:
        raise ConfigurationError(f"fermentation parameter set incomplete, missing: {missing}")

    mu_max, k_s, k_i = p["mu_max"], p["K_S"], p["K_i"]
    x_max, p_max, m_exp, n_exp = p["X_max"], p["P_max"], p["m"], p["n"]
    y_x, beta_ms, k_bs2 = p["Y_X"], p["beta_ms"], p["K_beta_s2"]
    y_px, beta_mp, k_bs1 = p["Y_PX"], p["beta_mp"], p["K_beta_s1"]

    def rhs(x, r):
        X, S, P = x
        D, S_a = r
        r_x = (
            mu_max
            * (S / (k_s + S))
            * np.exp(k_i * S)
            * (1.0 - X / x_max) ** m_exp
            * (1.0 - P / p_max) ** n_exp
            * X
        )
        r_s = r_x / y_x + beta_ms * S / (k_bs2 + S) * X
        r_p = r_x * y_px + beta_mp * S / (k_bs1 + S) * X
        return np.array([r_x - D * X, D * (S_a - S) - r_s, r_p - D * P])

    system = OdeSystem(
        name="fermentation",
        state_names=("X", "S", "P"),
        run_condition_names=("D", "S_A"),
        rhs=rhs,
        params=dict(p),
    )

    devs = {
        "X": single_state_deviation(
            3, 0, lambda x, r: -0.05 * x[0] * x[1] / (0.01 + x[1]), label="-0.05*X*S/(0.01+S)"
        ),
        "S": single_state_deviation(
            3, 1, lambda x, r: -0.01 * x[1] / r[0], label="-0.01*S/D"
        ),
        "P": single_state_deviation(
            3, 2,
            lambda x, r: -0.05 * (x[0] + x[2]) - 5e-8 * x[0] * x[2] * r[1],
            label="-0.05*(X+P) - 5e-8*X*P*S_A",
        ),
    }

    library = LibrarySpec(
        polynomial_degree=2,
        include_constant=True,
        rational_terms=("X*S/(0.01+S)", "S/(0.01+S)", "S/D", "X*P*S_A"),
        custom_terms=(),
    )

    return CaseModel(
        system=system,
        deviations=devs,
        ic_bounds=((30.0, 50.0), (5.0, 20.0), (9.0, 15.0)),
        run_condition_levels={"D": (0.08, 0.10, 0.12), "S_A": (160.0, 170.0, 180.0)},
        horizon=HORIZONS["fermentation"],
        default_library=library,
    )


def _make_lotka(params: dict | None) -> CaseModel:
    if params:
        raise ConfigurationError("lotka has no overridable parameters")

    def rhs(x, r):
        return np.array([(1.0 - x[1]) * x[0], (x[0] - 1.0) * x[1]])

    system = OdeSystem(
        name="lotka",
        state_names=("x", "y"),
        run_condition_names=(),
        rhs=rhs,
    )

    devs = {
        "x": single_state_deviation(
            2, 0, lambda x, r: -0.2 * x[0] ** 2 - 0.1 * x[1], label="-0.2*x^2 - 0.1*y"
        ),
        "y": single_state_deviation(2, 1, lambda x, r: x[0], label="x"),
    }

    library = LibrarySpec(polynomial_degree=2, include_constant=True)

    return CaseModel(
        system=system,
        deviations=devs,
        ic_bounds=((0.1, 1.0), (0.1, 1.0)),
        run_condition_levels={},
        horizon=HORIZONS["lotka"],
        default_library=library,
    )


_BUILDERS = {
    "meerwein": _make_meerwein,
    "fermentation": _make_fermentation,
    "lotka": _make_lotka,
}


def make_case(case_id: str, params: dict | None = None) -> CaseModel:
    """Build a benchmark case by id ("meerwein", "fermentation", "lotka").

    ``params`` optionally overrides named kinetic parameters (fermentation
    only).  The returned :class:`CaseModel` carries the FPM, the per-state
    deviation catalog, IC bounds, the run-condition grid, the horizon, and
    the default library.
    """
    try:
        builder = _BUILDERS[case_id]
    except KeyError:
        raise ConfigurationError(
            f"unknown case id {case_id!r}; expected one of {CASE_IDS}"
        ) from None
    return builder(params)
