"""Campaign generation: sampling, noise injection, dataset builds, persistence."""
from __future__ import annotations

import dataclasses
import json

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from sindybrid.cases import make_case
from sindybrid.datagen import (
    CampaignConfig,
    CampaignError,
    add_noise,
    build_dataset,
    latin_hypercube,
    load_dataset,
    nominal_config,
    sample_run_conditions,
    save_dataset,
)
from sindybrid.odes import Trajectory


class TestLatinHypercube:
    def test_unit_interval_four_strata(self):
        pts = latin_hypercube([(0.0, 1.0)], 4, seed=7)
        strata = np.floor(pts[:, 0] * 4).astype(int)
        assert sorted(strata) == [0, 1, 2, 3]

    def test_single_point_inside_bounds(self):
        pts = latin_hypercube([(2.0, 5.0)], 1, seed=0)
        assert pts.shape == (1, 1) and 2.0 <= pts[0, 0] <= 5.0

    def test_meerwein_ic_bounds(self):
        case = make_case("meerwein")
        lo = [b[0] for b in case.ic_bounds]
        hi = [b[1] for b in case.ic_bounds]
        # reactants in [1, 3], products pinned at 0
        assert lo[:2] == [1.0, 1.0] and hi[:2] == [3.0, 3.0]
        assert lo[2:] == [0.0, 0.0] and hi[2:] == [0.0, 0.0]

    @given(
        st.integers(min_value=1, max_value=4),
        st.integers(min_value=1, max_value=25),
        st.integers(min_value=0, max_value=2**31 - 1),
    )
    def test_stratification_every_dimension(self, dims, n, seed):
        bounds = [(float(d), float(d) + 1.0 + d) for d in range(dims)]
        pts = latin_hypercube(bounds, n, seed=seed)
        assert pts.shape == (n, dims)
        for d, (lo, hi) in enumerate(bounds):
            strata = np.floor((pts[:, d] - lo) / (hi - lo) * n).astype(int)
            strata = np.clip(strata, 0, n - 1)
            assert sorted(strata) == list(range(n))

    def test_deterministic(self):
        a = latin_hypercube([(0.0, 1.0), (5.0, 6.0)], 9, seed=123)
        b = latin_hypercube([(0.0, 1.0), (5.0, 6.0)], 9, seed=123)
        assert np.array_equal(a, b)

    def test_degenerate_bounds_rejected(self):
        with pytest.raises(Exception):
            latin_hypercube([(1.0, 1.0)], 3, seed=0)


class TestRunConditions:
    def test_meerwein_grid_has_six_cells(self):
        case = make_case("meerwein")
        grid = sample_run_conditions(case.run_condition_levels, 6, seed=0)
        assert grid.shape[0] == 6
        assert len({tuple(row) for row in grid}) == 6

    def test_fermentation_grid_has_nine_cells(self):
        case = make_case("fermentation")
        grid = sample_run_conditions(case.run_condition_levels, 9, seed=1)
        assert grid.shape[0] == 9
        assert len({tuple(row) for row in grid}) == 9

    def test_exhaustive_draw_returns_every_cell(self):
        levels = {"a": (1.0, 2.0), "b": (10.0, 20.0, 30.0)}
        grid = sample_run_conditions(levels, 6, seed=5)
        expect = {(a, b) for a in (1.0, 2.0) for b in (10.0, 20.0, 30.0)}
        assert {tuple(row) for row in grid} == expect

    def test_oversampling_without_replacement_rejected(self):
        levels = {"a": (1.0, 2.0)}
        with pytest.raises(Exception):
            sample_run_conditions(levels, 3, seed=0)

    def test_deterministic(self):
        case = make_case("meerwein")
        a = sample_run_conditions(case.run_condition_levels, 4, seed=9)
        b = sample_run_conditions(case.run_condition_levels, 4, seed=9)
        assert np.array_equal(a, b)


class TestAddNoise:
    def _traj(self):
        t = np.linspace(0.0, 1.0, 6)
        X = np.column_stack([np.exp(-t), 1.0 + t])
        return Trajectory(t=t, X=X, r=np.array([1.0]))

    def test_zero_level_identity(self):
        traj = self._traj()
        noisy = add_noise(traj, 0.0, seed=3)
        assert np.array_equal(noisy.X, traj.X)

    def test_relative_bound_holds_entrywise(self):
        traj = self._traj()
        noisy = add_noise(traj, 0.1, seed=3)
        assert np.all(np.abs(noisy.X - traj.X) <= 0.1 * np.abs(traj.X) + 1e-15)

    def test_time_vector_untouched(self):
        traj = self._traj()
        noisy = add_noise(traj, 0.2, seed=3)
        assert np.array_equal(noisy.t, traj.t)

    def test_monte_carlo_mean_is_centred(self):
        # u ~ Uniform(-l, l): mean 0, var l^2/3; the empirical mean over N
        # draws must land within 3 standard errors of 0.
        level, n_draws = 0.1, 100_000
        t = np.linspace(0.0, 1.0, n_draws // 10)
        X = np.ones((t.size, 10))
        noisy = add_noise(Trajectory(t=t, X=X, r=np.array([])), level, seed=11)
        u = (noisy.X / X - 1.0).ravel()
        se = level / np.sqrt(3.0 * u.size)
        assert abs(u.mean()) < 3.0 * se

    def test_deterministic(self):
        traj = self._traj()
        a = add_noise(traj, 0.15, seed=42)
        b = add_noise(traj, 0.15, seed=42)
        assert np.array_equal(a.X, b.X)


class TestConfigValidation:
    def test_nominal_roundtrips_through_json(self):
        cfg = nominal_config("lotka", 0, noise_level=0.05, seed=4)
        again = CampaignConfig.from_json_dict(cfg.to_json_dict())
        assert again == cfg

    @pytest.mark.parametrize(
        "field,value",
        [
            ("n_train", 1),
            ("n_test", 0),
            ("n_t", 4),
            ("noise_level", -0.01),
            ("noise_level", 0.41),
            ("horizon", 0.0),
            ("deviation_target", 7),
        ],
    )
    def test_invalid_fields_rejected(self, field, value):
        cfg = nominal_config("lotka", 0)
        with pytest.raises(Exception):
            dataclasses.replace(cfg, **{field: value})


class TestBuildDataset:
    def test_nominal_meerwein_counts_and_shared_grid(self):
        cfg = nominal_config("meerwein", 0, seed=2)
        ds = build_dataset(cfg)
        assert len(ds.train) == 6 and len(ds.test) == 2
        grids = [traj.t for traj in ds.train + ds.test]
        for g in grids[1:]:
            assert np.array_equal(g, grids[0])
        assert grids[0].size == cfg.n_t

    def test_noise_hits_both_train_and_test(self):
        cfg = nominal_config("lotka", 0, noise_level=0.1, seed=5)
        ds = build_dataset(cfg)
        assert not np.array_equal(ds.train[0].X, ds.train_truth[0].X)
        assert not np.array_equal(ds.test[0].X, ds.test_truth[0].X)

    def test_zero_noise_equals_truth(self):
        cfg = nominal_config("lotka", 0, noise_level=0.0, seed=5)
        ds = build_dataset(cfg)
        assert np.array_equal(ds.train[0].X, ds.train_truth[0].X)

    def test_no_deviation_target(self):
        cfg = nominal_config("lotka", "none", noise_level=0.0, seed=5)
        ds = build_dataset(cfg)
        assert ds.truth is None

    def test_train_test_disjoint_conditions(self):
        cfg = nominal_config("fermentation", 0, seed=8)
        ds = build_dataset(cfg)
        train_keys = {(tuple(tr.r), tuple(tr.X[0])) for tr in ds.train_truth}
        test_keys = {(tuple(tr.r), tuple(tr.X[0])) for tr in ds.test_truth}
        assert not train_keys & test_keys

    def test_bitwise_determinism(self):
        cfg = nominal_config("fermentation", 1, seed=13)
        a = build_dataset(cfg)
        b = build_dataset(cfg)
        for ta, tb in zip(a.train + a.test, b.train + b.test):
            assert np.array_equal(ta.X, tb.X) and np.array_equal(ta.t, tb.t)

    def test_batch_sweep_style_split(self):
        cfg = nominal_config("fermentation", 0, n_train=9, n_test=3, seed=3)
        ds = build_dataset(cfg)
        assert len(ds.train) == 9 and len(ds.test) == 3


class TestPersistence:
    def test_roundtrip_bit_exact(self, tmp_path):
        cfg = nominal_config("lotka", 1, noise_level=0.1, seed=21)
        ds = build_dataset(cfg)
        out = save_dataset(ds, tmp_path / "campaign")
        assert (out / "config.json").exists()
        assert (out / "truth.json").exists()
        assert (out / "train" / "exp_0.csv").exists()
        assert (out / "test" / "exp_1.csv").exists()
        back = load_dataset(out)
        assert back.config == ds.config
        for ta, tb in zip(ds.train + ds.test, back.train + back.test):
            assert np.array_equal(ta.X, tb.X)
            assert np.array_equal(ta.t, tb.t)
            assert np.array_equal(ta.r, tb.r)

    def test_truth_sidecar_names_target(self, tmp_path):
        cfg = nominal_config("meerwein", 2, noise_level=0.0, seed=1)
        ds = build_dataset(cfg)
        out = save_dataset(ds, tmp_path / "c")
        info = json.loads((out / "truth.json").read_text())
        assert info["deviation_target"] == 2
        assert info["target_state"] == "C_P"

    def test_csv_header_names_states(self, tmp_path):
        cfg = nominal_config("lotka", 0, seed=0)
        ds = build_dataset(cfg)
        out = save_dataset(ds, tmp_path / "c")
        header = (out / "train" / "exp_0.csv").read_text().splitlines()[0]
        assert header.startswith("t,") and "x" in header and "y" in header
