"""Bounded-variable simplex kernels: oracle agreement, statuses, backends."""
from __future__ import annotations

import numpy as np
import pytest

from oracles import random_lp_instance, vertex_enumeration_lp
from sindybrid.library import ConfigurationError
from sindybrid.milp.simplex import (
    HAS_NUMBA,
    active_backend,
    equality_form,
    solve_lp,
)


def _check_feasible(A, b, sense, bounds, x, tol=1e-8):
    Ax = A @ x
    scale = 1.0 + np.abs(b).max(initial=0.0)
    for i, s in enumerate(sense):
        if s < 0:
            assert Ax[i] <= b[i] + tol * scale
        elif s > 0:
            assert Ax[i] >= b[i] - tol * scale
        else:
            assert abs(Ax[i] - b[i]) <= tol * scale
    assert np.all(x >= bounds[:, 0] - tol)
    assert np.all(x <= bounds[:, 1] + tol)


class TestAgainstVertexEnumeration:
    @pytest.mark.parametrize("seed", range(60))
    def test_random_instances(self, fast_backend, seed):
        c, A, b, bounds, sense = random_lp_instance(seed)
        res = solve_lp(c, A, b, bounds, sense=sense)
        status, obj, x_opt = vertex_enumeration_lp(c, A, b, bounds, sense=sense)

        assert res.status in ("optimal", "infeasible"), res.status
        assert res.status == status
        if status == "optimal":
            scale = max(1.0, abs(obj))
            assert res.objective == pytest.approx(obj, abs=1e-9 * scale)
            _check_feasible(A, b, sense, np.asarray(bounds, float), res.x)


class TestStatuses:
    def test_infeasible(self, fast_backend):
        # x <= -1 with x in [0, 1]
        res = solve_lp(
            c=[1.0], A=[[1.0]], b=[-1.0], bounds=[(0.0, 1.0)]
        )
        assert res.status == "infeasible"

    def test_unbounded(self, fast_backend):
        # minimise -x with x >= 0 unbounded above; constraint never binds.
        res = solve_lp(
            c=[-1.0], A=[[-1.0]], b=[1.0], bounds=[(0.0, np.inf)]
        )
        assert res.status == "unbounded"

    def test_iteration_limit(self, fast_backend):
        rng = np.random.default_rng(0)
        n = 6
        A = rng.normal(size=(8, n))
        res = solve_lp(
            c=rng.normal(size=n),
            A=A,
            b=rng.uniform(1.0, 2.0, size=8),
            bounds=[(-5.0, 5.0)] * n,
            max_iter=1,
        )
        assert res.status == "iteration-limit"

    def test_degenerate_vertex_still_optimal(self, fast_backend):
        # Four redundant constraints meet at the optimum (0, 0).
        c = [1.0, 1.0]
        A = [
            [-1.0, 0.0], [0.0, -1.0],
            [-1.0, -1.0], [-2.0, -1.0],
        ]
        b = [0.0, 0.0, 0.0, 0.0]
        res = solve_lp(c, A, b, bounds=[(-1.0, 10.0), (-1.0, 10.0)], sense=[-1, -1, 1, 1])
        # senses: x <= 0 rows flipped to >= via sense +1 on the last two
        assert res.status == "optimal"
        assert res.objective == pytest.approx(0.0, abs=1e-9)

    def test_equality_rows(self, fast_backend):
        # x + y = 1, minimise x  ->  x = 0, y = 1.
        res = solve_lp(
            c=[1.0, 0.0],
            A=[[1.0, 1.0]],
            b=[1.0],
            bounds=[(0.0, 2.0), (0.0, 2.0)],
            sense=[0],
        )
        assert res.status == "optimal"
        assert res.x == pytest.approx([0.0, 1.0], abs=1e-9)

    def test_binding_bound_optimum(self, fast_backend):
        # Optimum at a variable bound rather than a constraint vertex.
        res = solve_lp(
            c=[-1.0], A=[[1.0]], b=[10.0], bounds=[(0.0, 2.0)]
        )
        assert res.status == "optimal"
        assert res.x[0] == pytest.approx(2.0, abs=1e-12)


class TestInputValidation:
    def test_free_variable_rejected(self):
        with pytest.raises(ConfigurationError):
            solve_lp(
                c=[1.0], A=[[1.0]], b=[1.0], bounds=[(-np.inf, np.inf)]
            )

    def test_dimension_mismatch_rejected(self):
        with pytest.raises(ValueError):
            solve_lp(c=[1.0, 2.0], A=[[1.0]], b=[1.0], bounds=[(0.0, 1.0)])

    def test_equality_form_slack_bounds(self):
        A_eq, lo, up = equality_form(
            np.ones((3, 1)), np.ones(3), np.array([-1, 0, 1]),
            np.array([[0.0, 1.0]]),
        )
        assert A_eq.shape == (3, 4)
        assert lo[1:].tolist() == [0.0, 0.0, -np.inf]
        assert up[1:].tolist() == [np.inf, 0.0, 0.0]


class TestBackends:
    def test_backends_agree_bit_for_bit(self, fast_backend):
        if not HAS_NUMBA:
            pytest.skip("numba backend unavailable")
        for seed in range(12):
            c, A, b, bounds, sense = random_lp_instance(seed)
            r_np = solve_lp(c, A, b, bounds, sense=sense, backend="numpy")
            r_nb = solve_lp(c, A, b, bounds, sense=sense, backend="numba")
            assert r_np.status == r_nb.status
            if r_np.status == "optimal":
                assert np.array_equal(r_np.x, r_nb.x)
                assert r_np.objective == r_nb.objective
                assert r_np.iterations == r_nb.iterations

    def test_env_var_selects_backend(self, monkeypatch):
        monkeypatch.setenv("SINDYBRID_BACKEND", "numpy")
        assert active_backend() == "numpy"
        monkeypatch.setenv("SINDYBRID_BACKEND", "auto")
        assert active_backend() == ("numba" if HAS_NUMBA else "numpy")

    def test_unknown_backend_rejected(self):
        with pytest.raises(ConfigurationError):
            active_backend("fortran")

    def test_determinism(self, fast_backend):
        c, A, b, bounds, sense = random_lp_instance(5)
        a = solve_lp(c, A, b, bounds, sense=sense)
        b2 = solve_lp(c, A, b, bounds, sense=sense)
        assert a.status == b2.status
        assert np.array_equal(a.x_full, b2.x_full)
        assert a.iterations == b2.iterations


class TestResultSurface:
    def test_structural_slice_and_objective_identity(self, fast_backend):
        c, A, b, bounds, sense = random_lp_instance(7)
        res = solve_lp(c, A, b, bounds, sense=sense)
        if res.status != "optimal":
            pytest.skip("instance happens to be infeasible")
        n = len(c)
        assert res.x.shape == (n,)
        assert res.x_full.shape[0] == A.shape[0] + n  # slacks appended
        assert np.array_equal(res.x, res.x_full[:n])
        assert res.objective == pytest.approx(float(np.dot(c, res.x)), abs=1e-9)

    def test_never_raises_on_random_soup(self, fast_backend):
        # The kernels must always come back with a status, never an exception.
        for seed in range(160, 200):
            rng = np.random.default_rng(seed)
            n = int(rng.integers(1, 5))
            m = int(rng.integers(1, 6))
            A = rng.normal(size=(m, n)) * 10 ** rng.integers(-3, 4)
            c = rng.normal(size=n)
            lo = rng.uniform(-2.0, 0.0, size=n)
            bounds = np.column_stack([lo, lo + rng.uniform(0, 3, size=n)])
            sense = rng.choice([-1, 0, 1], size=m)
            res = solve_lp(c, A, rng.normal(size=m), bounds, sense=sense)
            assert res.status in (
                "optimal", "infeasible", "unbounded",
                "iteration-limit", "numerical",
            )
