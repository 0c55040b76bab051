"""ODE core: benchmark systems, deviation catalogs, integration."""
from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from sindybrid.cases import make_case
from sindybrid.odes import (
    DeviationSpec,
    IntegrationError,
    OdeSystem,
    RhsDomainError,
    Trajectory,
    eval_rhs,
    integrate,
)

# Frozen oracle: period of the unit Lotka-Volterra orbit through (0.5, 0.5),
# computed independently with scipy.solve_ivp at rtol=1e-12/atol=1e-14 and an
# event locator on the y=0.5 crossing that returns to the starting state.
LOTKA_PERIOD = 6.693929606576


def _decay_system():
    return OdeSystem(
        name="decay",
        state_names=("u",),
        run_condition_names=(),
        rhs=lambda x, r: np.array([-x[0]]),
    )


class TestEvalRhs:
    def test_lotka_fixed_point(self):
        case = make_case("lotka")
        assert np.array_equal(eval_rhs(case.system, [1.0, 1.0], []), [0.0, 0.0])

    def test_lotka_prey_only(self):
        case = make_case("lotka")
        assert np.allclose(eval_rhs(case.system, [2.0, 0.0], []), [2.0, 0.0])

    def test_meerwein_all_rates_vanish_without_reactant(self):
        case = make_case("meerwein")
        r = [case.run_condition_levels["C_cat"][0],
             case.run_condition_levels["Tstar"][0]]
        out = eval_rhs(case.system, [0.0, 2.0, 1.0, 1.0], r)
        assert np.array_equal(out, np.zeros(4))

    def test_deterministic(self):
        case = make_case("fermentation")
        x = [30.0, 50.0, 20.0]
        r = [0.1, 170.0]
        a = eval_rhs(case.system, x, r)
        b = eval_rhs(case.system, x, r)
        assert np.array_equal(a, b)

    def test_dimension_mismatch_rejected(self):
        case = make_case("lotka")
        with pytest.raises(Exception):
            eval_rhs(case.system, [1.0], [])

    def test_nan_produces_domain_error_naming_equation(self):
        bad = OdeSystem(
            name="bad",
            state_names=("u", "v"),
            run_condition_names=(),
            rhs=lambda x, r: np.array([x[0], np.nan if x[1] < 0 else np.sqrt(x[1])]),
        )
        with pytest.raises(RhsDomainError) as exc:
            eval_rhs(bad, [1.0, -1.0], [])
        assert "v" in str(exc.value)


class TestDeviationCatalog:
    def test_lotka_dev_x_formula(self):
        case = make_case("lotka")
        dev = case.deviations["x"]
        for x, y in [(1.0, 1.0), (0.3, 2.0), (2.5, 0.7)]:
            out = dev.dev(np.array([x, y]), np.array([]))
            assert out[1] == 0.0
            assert np.isclose(out[0], -0.2 * x**2 - 0.1 * y, rtol=0, atol=1e-15)

    def test_lotka_dev_y_formula(self):
        case = make_case("lotka")
        dev = case.deviations["y"]
        out = dev.dev(np.array([1.7, 0.4]), np.array([]))
        assert out[0] == 0.0
        assert np.isclose(out[1], 1.7, rtol=0, atol=1e-15)

    def test_meerwein_dev_on_cb_reference_value(self):
        case = make_case("meerwein")
        dev = case.deviations["C_B"]
        x = np.array([2.0, 1.0, 0.5, 0.5])     # C_B = 1
        r = np.array([5.0, 1.0])               # Tstar = 1
        out = dev.dev(x, r)
        assert np.isclose(out[1], -2.0, rtol=0, atol=1e-12)

    def test_fermentation_dev_s_vanishes_at_zero_substrate(self):
        case = make_case("fermentation")
        dev = case.deviations["S"]
        out = dev.dev(np.array([25.0, 0.0, 15.0]), np.array([0.1, 170.0]))
        assert np.array_equal(out, np.zeros(3))

    @given(
        st.sampled_from(["meerwein", "fermentation", "lotka"]),
        st.integers(min_value=0, max_value=3),
        st.integers(min_value=0, max_value=2**31 - 1),
    )
    def test_deviation_zero_off_target(self, case_id, which, seed):
        case = make_case(case_id)
        names = list(case.deviations)
        dev = case.deviations[names[which % len(names)]]
        rng = np.random.default_rng(seed)
        x = rng.uniform(0.1, 3.0, size=len(case.system.state_names))
        r = np.array([levels[0] for levels in case.run_condition_levels.values()])
        out = dev.dev(x, r)
        for i in range(len(x)):
            if i not in dev.target_states:
                assert out[i] == 0.0


class TestTrajectoryValidation:
    def test_strictly_increasing_time_required(self):
        with pytest.raises(Exception):
            Trajectory(t=np.array([0.0, 1.0, 1.0]), X=np.zeros((3, 1)), r=np.array([]))

    def test_non_finite_states_rejected(self):
        with pytest.raises(Exception):
            Trajectory(
                t=np.array([0.0, 1.0]),
                X=np.array([[0.0], [np.nan]]),
                r=np.array([]),
            )


class TestIntegrate:
    def test_exponential_decay(self):
        traj = integrate(_decay_system(), None, [1.0], [], np.linspace(0, 1, 11))
        assert abs(traj.X[-1, 0] - np.exp(-1.0)) < 1e-6

    def test_lotka_orbit_returns_after_one_period(self):
        case = make_case("lotka")
        t = np.linspace(0.0, LOTKA_PERIOD, 200)
        traj = integrate(case.system, None, [0.5, 0.5], [], t)
        assert np.linalg.norm(traj.X[-1] - [0.5, 0.5]) < 1e-3

    def test_lotka_conserved_quantity(self):
        case = make_case("lotka")
        t = np.linspace(0.0, 10.0, 300)
        traj = integrate(case.system, None, [0.5, 0.5], [], t)
        x, y = traj.X[:, 0], traj.X[:, 1]
        v = x - np.log(x) + y - np.log(y)
        assert np.max(np.abs(v - v[0])) < 1e-6

    def test_meerwein_stoichiometric_sum_constant(self):
        case = make_case("meerwein")
        r = [5.0, case.run_condition_levels["Tstar"][0]]
        t = np.linspace(0.0, case.horizon, 50)
        traj = integrate(case.system, None, [2.0, 2.0, 0.0, 0.0], r, t)
        total = traj.X[:, 1] + traj.X[:, 2]     # C_B + C_P
        assert np.max(np.abs(total - total[0])) < 1e-7 * max(1.0, total[0])

    def test_zero_deviation_bitwise_identical_to_none(self):
        case = make_case("lotka")
        zero_dev = DeviationSpec(
            target_states=frozenset({0}),
            dev=lambda x, r: np.zeros(2),
            label="zero",
        )
        t = np.linspace(0.0, 5.0, 40)
        a = integrate(case.system, None, [0.8, 1.2], [], t)
        b = integrate(case.system, zero_dev, [0.8, 1.2], [], t)
        assert np.array_equal(a.X, b.X)

    def test_deviation_changes_trajectory(self):
        case = make_case("lotka")
        t = np.linspace(0.0, 5.0, 40)
        a = integrate(case.system, None, [0.8, 1.2], [], t)
        b = integrate(case.system, case.deviations["x"], [0.8, 1.2], [], t)
        assert not np.allclose(a.X, b.X)

    def test_blowup_raises_with_last_valid_time(self):
        quad = OdeSystem(
            name="blowup",
            state_names=("u",),
            run_condition_names=(),
            rhs=lambda x, r: np.array([x[0] ** 2]),
        )
        with pytest.raises(IntegrationError) as exc:
            integrate(quad, None, [1.0], [], np.linspace(0, 2, 21))
        assert 0.0 < exc.value.last_valid_time <= 2.0

    def test_dense_output_sampled_exactly_on_grid(self):
        t = np.array([0.0, 0.17, 0.9, 1.0])
        traj = integrate(_decay_system(), None, [1.0], [], t)
        assert np.array_equal(traj.t, t)

    def test_non_increasing_grid_rejected(self):
        with pytest.raises(Exception):
            integrate(_decay_system(), None, [1.0], [], np.array([0.0, 0.5, 0.5]))
