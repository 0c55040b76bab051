"""Shared fixtures plus the acceptance-criteria terminal summary.

The acceptance tests in test_acceptance.py record one verdict per criterion
through ``record_criterion``; pytest_terminal_summary prints them as a
compact PASS/FAIL table at the end of the run so the headline result is
readable without scrolling through the full log.
"""
from __future__ import annotations

import os

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

# JIT compilation and single-CPU scheduling make wall-clock deadlines
# meaningless here.
settings.register_profile(
    "pkg",
    deadline=None,
    suppress_health_check=[HealthCheck.too_slow],
    derandomize=True,
)
settings.load_profile("pkg")

CRITERIA = (
    "exact-recovery-at-zero-noise",
    "noise-robustness",
    "time-sample-behaviour",
    "residual-dominance",
    "milp-oracle-equivalence",
    "lp-correctness",
    "structural-identities",
)

_RESULTS: dict[str, tuple[bool, str]] = {}


def record_criterion(name: str, passed: bool, detail: str = "") -> None:
    assert name in CRITERIA, f"unknown criterion {name!r}"
    _RESULTS[name] = (bool(passed), detail)


@pytest.fixture(scope="session")
def acceptance_recorder():
    return record_criterion


@pytest.fixture(scope="session")
def fast_backend():
    """Backend for heavy end-to-end runs: numba when importable (warmed up
    once per session), else numpy."""
    from sindybrid.milp.simplex import HAS_NUMBA, solve_lp

    backend = "numba" if HAS_NUMBA else "numpy"
    if backend == "numba":
        # Trigger JIT compilation outside any timed assertion.
        solve_lp(
            np.array([-1.0, -2.0]),
            np.array([[1.0, 1.0]]),
            np.array([4.0]),
            [(0.0, 10.0), (0.0, 10.0)],
            backend="numba",
        )
        from sindybrid import milp

        prob = milp.assemble(
            np.ones((3, 1)), np.eye(3, 2), milp.Hyperparams(lambda1_xi=0.1)
        )
        milp.solve(prob, backend="numba")
    return backend


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if not _RESULTS:
        return
    tr = terminalreporter
    tr.section("acceptance criteria")
    for name in CRITERIA:
        if name in _RESULTS:
            passed, detail = _RESULTS[name]
            verdict = "PASS" if passed else "FAIL"
        else:
            verdict, detail = "NOT RUN", ""
        line = f"{verdict:7s} {name}"
        if detail:
            line += f" :: {detail}"
        tr.write_line(line)


@pytest.fixture()
def tmp_env(monkeypatch):
    """Isolate backend selection for tests that set it."""
    monkeypatch.delenv("SINDYBRID_BACKEND", raising=False)
    return os.environ
