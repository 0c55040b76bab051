"""Candidate-function libraries: construction, evaluation, max-abs scaling.

A library is an ordered list of named scalar functions of (state vector, run
conditions).  Evaluated on the data rows it yields the raw matrix ``X_L``;
:func:`scale_columns` then normalises every column by its maximum absolute
value so the downstream optimisation sees columns of comparable magnitude.

Label grammar
-------------
Canonical labels use ``*`` for products, ``^`` for integer powers, and a
single guarded ``/`` for rational terms: ``"1"``, ``"C_A*C_B"``, ``"x^2"``,
``"X*S/(0.01+S)"``.  For any label containing a top-level ``/``, the
outermost denominator is clamped away from zero by 1e-6 during evaluation so
noisy near-zero states cannot blow a term up.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from itertools import combinations_with_replacement
from typing import Callable, Sequence

import numpy as np
import sympy

__all__ = [
    "ConfigurationError",
    "LibraryEvaluationError",
    "CandidateFunction",
    "LibrarySpec",
    "ScaledLibraryMatrix",
    "build_library",
    "evaluate_library",
    "scale_columns",
]

DENOMINATOR_EPS = 1e-6


class ConfigurationError(ValueError):
    pass


class LibraryEvaluationError(ValueError):
    """A candidate function evaluated to NaN/Inf on some data row."""

    def __init__(self, label: str, row: int):
        self.label = label
        self.row = row
        super().__init__(f"library term {label!r} is not finite at data row {row}")


@dataclass(frozen=True)
class CandidateFunction:
    """A named basis function phi(x, r).

    ``eval`` accepts a single state vector plus run-condition vector, or
    row-stacked matrices of them, and returns a scalar / vector accordingly.
    """

    label: str
    eval: Callable[[np.ndarray, np.ndarray], np.ndarray]


@dataclass(frozen=True)
class LibrarySpec:
    """Recipe for a library: monomials up to a degree, plus explicit terms.

    Monomials are taken over states and run conditions jointly.  Rational
    and custom terms are given as canonical labels (see module docstring)
    and parsed symbolically.
    """

    polynomial_degree: int = 2
    include_constant: bool = True
    rational_terms: tuple[str, ...] = ()
    custom_terms: tuple[str, ...] = ()

    def __post_init__(self):
        if self.polynomial_degree < 0:
            raise ConfigurationError("polynomial_degree must be >= 0")

    @classmethod
    def from_json_dict(cls, d: dict) -> "LibrarySpec":
        return cls(
            polynomial_degree=int(d.get("degree", 2)),
            include_constant=bool(d.get("constant", True)),
            rational_terms=tuple(d.get("rational", ())),
            custom_terms=tuple(d.get("custom", ())),
        )

    def to_json_dict(self) -> dict:
        return {
            "degree": self.polynomial_degree,
            "constant": self.include_constant,
            "rational": list(self.rational_terms),
            "custom": list(self.custom_terms),
        }


@dataclass(frozen=True)
class ScaledLibraryMatrix:
    """Column-scaled library matrix: XL_sc[:, j] = XL[:, j] / scales[j].

    ``scales[j]`` is the max-abs of raw column j, or 1.0 for an all-zero
    (degenerate) column, which is additionally flagged.
    """

    XL_sc: np.ndarray
    scales: np.ndarray
    labels: tuple[str, ...]
    degenerate: np.ndarray = field(default=None)  # bool mask, True where column was all-zero

    @property
    def n_functions(self) -> int:
        return self.XL_sc.shape[1]


def _stack_values(x, r, n_states: int, n_run: int) -> np.ndarray:
    """Return values as a (rows, n_states + n_run) matrix; rows may be 1."""
    x = np.atleast_2d(np.asarray(x, dtype=float))
    if x.shape[1] != n_states:
        raise ValueError(f"expected {n_states} states, got {x.shape[1]}")
    if n_run == 0:
        return x
    r = np.atleast_2d(np.asarray(r, dtype=float))
    if r.shape[1] != n_run:
        raise ValueError(f"expected {n_run} run conditions, got {r.shape[1]}")
    if r.shape[0] == 1 and x.shape[0] > 1:
        r = np.broadcast_to(r, (x.shape[0], n_run))
    return np.hstack([x, r])


def _monomial_label(names: Sequence[str], exponents: Sequence[int]) -> str:
    parts = []
    for name, e in zip(names, exponents):
        if e == 1:
            parts.append(name)
        elif e > 1:
            parts.append(f"{name}^{e}")
    return "*".join(parts) if parts else "1"


def _split_top_level_division(label: str) -> tuple[str, str] | None:
    """Split at the last '/' that sits at parenthesis depth 0, if any."""
    depth = 0
    pos = -1
    for i, ch in enumerate(label):
        if ch == "(":
            depth += 1
        elif ch == ")":
            depth -= 1
        elif ch == "/" and depth == 0:
            pos = i
    if pos <= 0 or pos == len(label) - 1:
        return None
    return label[:pos], label[pos + 1:]


def _parse_expression(text: str, names: Sequence[str]):
    local = {name: sympy.Symbol(name) for name in names}
    try:
        expr = sympy.sympify(text.replace("^", "**"), locals=local)
    except (sympy.SympifyError, SyntaxError, TypeError) as exc:
        raise ConfigurationError(f"cannot parse library term {text!r}: {exc}") from None
    unknown = {str(s) for s in expr.free_symbols} - set(names)
    if unknown:
        raise ConfigurationError(
            f"library term {text!r} uses unknown names {sorted(unknown)}; known: {list(names)}"
        )
    symbols = [local[name] for name in names]
    fn = sympy.lambdify(symbols, expr, modules="numpy")
    return fn


def _symbolic_candidate(label: str, names: Sequence[str], n_states: int, n_run: int) -> CandidateFunction:
    """Parse a rational/custom label into an evaluator with denominator guard."""
    split = _split_top_level_division(label)
    if split is None:
        fn = _parse_expression(label, names)

        def evaluate(x, r=()):
            V = _stack_values(x, r, n_states, n_run)
            out = np.broadcast_to(np.asarray(fn(*V.T), dtype=float), (V.shape[0],)).copy()
            return out[0] if out.shape == (1,) and np.ndim(x) == 1 else out
    else:
        num_text, den_text = split
        num_fn = _parse_expression(num_text, names)
        den_fn = _parse_expression(den_text, names)

        def evaluate(x, r=()):
            V = _stack_values(x, r, n_states, n_run)
            num = np.broadcast_to(np.asarray(num_fn(*V.T), dtype=float), (V.shape[0],)).copy()
            den = np.broadcast_to(np.asarray(den_fn(*V.T), dtype=float), (V.shape[0],)).copy()
            small = np.abs(den) < DENOMINATOR_EPS
            if np.any(small):
                den = den.copy()
                # Clamp to +/-eps, pushing exact zeros to +eps.
                den[small] = np.where(den[small] < 0, -DENOMINATOR_EPS, DENOMINATOR_EPS)
            out = num / den
            return out[0] if out.shape == (1,) and np.ndim(x) == 1 else out

    return CandidateFunction(label=label, eval=evaluate)


def _monomial_candidate(
    label: str, exponents: np.ndarray, n_states: int, n_run: int
) -> CandidateFunction:
    exponents = np.asarray(exponents, dtype=int)

    def evaluate(x, r=()):
        V = _stack_values(x, r, n_states, n_run)
        out = np.ones(V.shape[0])
        for k in np.flatnonzero(exponents):
            out = out * V[:, k] ** int(exponents[k])
        return out[0] if out.shape == (1,) and np.ndim(x) == 1 else out

    return CandidateFunction(label=label, eval=evaluate)


def build_library(
    spec: LibrarySpec,
    state_names: Sequence[str],
    run_condition_names: Sequence[str] = (),
) -> list[CandidateFunction]:
    """Construct the ordered candidate list for a spec.

    Order is deterministic: constant, monomials in graded-lexicographic
    order over (states, then run conditions), rational terms, custom terms.

    Raises
    ------
    ConfigurationError
        On duplicate labels, unparseable terms, or an empty library.
    """
    names = tuple(state_names) + tuple(run_condition_names)
    if len(set(names)) != len(names):
        raise ConfigurationError(f"state/run-condition names are not distinct: {names}")
    n_states, n_run = len(state_names), len(run_condition_names)

    functions: list[CandidateFunction] = []
    if spec.include_constant:
        functions.append(
            _monomial_candidate("1", np.zeros(len(names), dtype=int), n_states, n_run)
        )
    for degree in range(1, spec.polynomial_degree + 1):
        for combo in combinations_with_replacement(range(len(names)), degree):
            exps = np.bincount(np.array(combo, dtype=int), minlength=len(names))
            functions.append(
                _monomial_candidate(_monomial_label(names, exps), exps, n_states, n_run)
            )
    for label in spec.rational_terms:
        functions.append(_symbolic_candidate(label, names, n_states, n_run))
    for label in spec.custom_terms:
        functions.append(_symbolic_candidate(label, names, n_states, n_run))

    labels = [f.label for f in functions]
    dupes = {lab for lab in labels if labels.count(lab) > 1}
    if dupes:
        raise ConfigurationError(f"duplicate library labels: {sorted(dupes)}")
    if not functions:
        raise ConfigurationError("library is empty (degree 0 without constant, no explicit terms)")
    return functions


def evaluate_library(
    library: Sequence[CandidateFunction],
    states_at_rows: np.ndarray,
    r_at_rows: np.ndarray | None = None,
) -> np.ndarray:
    """Evaluate every candidate on every row, returning raw X_L (rows x N_L).

    Raises
    ------
    LibraryEvaluationError
        Naming the first term and row that evaluated to NaN/Inf.
    """
    states_at_rows = np.atleast_2d(np.asarray(states_at_rows, dtype=float))
    n_rows = states_at_rows.shape[0]
    if r_at_rows is None:
        r_at_rows = np.zeros((n_rows, 0))
    XL = np.empty((n_rows, len(library)))
    for j, f in enumerate(library):
        col = np.asarray(f.eval(states_at_rows, r_at_rows), dtype=float)
        if not np.all(np.isfinite(col)):
            bad = int(np.flatnonzero(~np.isfinite(col))[0])
            raise LibraryEvaluationError(f.label, bad)
        XL[:, j] = col
    return XL


def scale_columns(XL: np.ndarray, labels: Sequence[str] | None = None) -> ScaledLibraryMatrix:
    """Divide each column by its max-abs value (all-zero columns get scale 1).

    Degenerate columns are flagged rather than fatal so the downstream
    problem stays well-posed.
    """
    XL = np.asarray(XL, dtype=float)
    if XL.ndim != 2 or XL.shape[0] < 1:
        raise ValueError("XL must be a matrix with at least one row")
    if labels is None:
        labels = tuple(f"f{j}" for j in range(XL.shape[1]))
    labels = tuple(labels)
    if len(labels) != XL.shape[1]:
        raise ValueError("labels length must match column count")

    scales = np.max(np.abs(XL), axis=0)
    degenerate = scales == 0.0
    scales = np.where(degenerate, 1.0, scales)
    return ScaledLibraryMatrix(
        XL_sc=XL / scales, scales=scales, labels=labels, degenerate=degenerate
    )
