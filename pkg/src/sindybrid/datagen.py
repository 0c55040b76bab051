"""Synthetic experimental campaigns.

Samples initial conditions (Latin hypercube) and discrete run conditions
(full-factorial grid, random cells), simulates the deviated ground truth for
each experiment, injects multiplicative uniform measurement noise, and splits
the experiments into training and test sets.  The noiseless truth is kept on
the side so evaluation metrics always have a clean baseline.

A campaign persists as a directory::

    config.json        # the CampaignConfig
    truth.json         # deviation target + symbolic description
    train/exp_<k>.csv  # t, noisy states, truth states, run conditions
    test/exp_<k>.csv
"""
from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from itertools import product
from pathlib import Path

import numpy as np

from .cases import CaseModel, make_case
from .library import ConfigurationError
from .odes import DeviationSpec, IntegrationError, Trajectory, integrate

__all__ = [
    "CampaignConfig",
    "CampaignError",
    "Dataset",
    "latin_hypercube",
    "sample_run_conditions",
    "add_noise",
    "build_dataset",
    "nominal_config",
    "save_dataset",
    "load_dataset",
]

# Noise levels exercised by the sweeps never exceed this.
MAX_NOISE_LEVEL = 0.4
DEFAULT_N_T = 15

_CSV_FLOAT = "%.17g"


class CampaignError(RuntimeError):
    """Ground-truth simulation failed for one of the sampled experiments."""


@dataclass(frozen=True)
class CampaignConfig:
    """Everything needed to regenerate a campaign bit-for-bit."""

    case_id: str
    deviation_target: int | str  # state index, or "none"
    n_train: int
    n_test: int
    n_t: int
    noise_level: float
    ic_bounds: tuple[tuple[float, float], ...]
    run_condition_levels: dict[str, tuple[float, ...]]
    seed: int
    horizon: float

    def __post_init__(self):
        if self.n_train < 2:
            raise ConfigurationError("n_train must be >= 2")
        if self.n_test < 1:
            raise ConfigurationError("n_test must be >= 1")
        if self.n_t < 5:
            raise ConfigurationError("n_t must be >= 5")
        if not 0.0 <= self.noise_level <= MAX_NOISE_LEVEL:
            raise ConfigurationError(
                f"noise_level must be in [0, {MAX_NOISE_LEVEL}], got {self.noise_level}"
            )
        if self.horizon <= 0:
            raise ConfigurationError("horizon must be positive")
        if self.deviation_target != "none":
            if not isinstance(self.deviation_target, int):
                raise ConfigurationError(
                    f"deviation_target must be a state index or 'none', got {self.deviation_target!r}"
                )
            if not 0 <= self.deviation_target < len(self.ic_bounds):
                raise ConfigurationError(
                    f"deviation_target {self.deviation_target} out of range for "
                    f"{len(self.ic_bounds)} states"
                )

    def to_json_dict(self) -> dict:
        d = asdict(self)
        d["ic_bounds"] = [list(b) for b in self.ic_bounds]
        d["run_condition_levels"] = {k: list(v) for k, v in self.run_condition_levels.items()}
        return d

    @classmethod
    def from_json_dict(cls, d: dict) -> "CampaignConfig":
        return cls(
            case_id=d["case_id"],
            deviation_target=d["deviation_target"],
            n_train=int(d["n_train"]),
            n_test=int(d["n_test"]),
            n_t=int(d["n_t"]),
            noise_level=float(d["noise_level"]),
            ic_bounds=tuple(tuple(float(x) for x in b) for b in d["ic_bounds"]),
            run_condition_levels={
                k: tuple(float(x) for x in v) for k, v in d["run_condition_levels"].items()
            },
            seed=int(d["seed"]),
            horizon=float(d["horizon"]),
        )


@dataclass(frozen=True)
class Dataset:
    """A generated campaign: noisy observations plus hidden noiseless truth."""

    train: tuple[Trajectory, ...]
    test: tuple[Trajectory, ...]
    truth: DeviationSpec | None
    config: CampaignConfig
    train_truth: tuple[Trajectory, ...] = field(default=(), repr=False)
    test_truth: tuple[Trajectory, ...] = field(default=(), repr=False)

    def __post_init__(self):
        grids = [traj.t for traj in self.train + self.test]
        if grids:
            first = grids[0]
            for g in grids[1:]:
                if g.shape != first.shape or not np.array_equal(g, first):
                    raise ValueError("all trajectories in a dataset must share one time grid")


def nominal_config(
    case: CaseModel | str,
    deviation_target: int | str,
    *,
    n_train: int = 6,
    n_test: int = 2,
    n_t: int = DEFAULT_N_T,
    noise_level: float = 0.1,
    seed: int = 0,
    horizon: float | None = None,
) -> CampaignConfig:
    """Fill a CampaignConfig from a case's catalog defaults."""
    if isinstance(case, str):
        case = make_case(case)
    return CampaignConfig(
        case_id=case.name,
        deviation_target=deviation_target,
        n_train=n_train,
        n_test=n_test,
        n_t=n_t,
        noise_level=noise_level,
        ic_bounds=case.ic_bounds,
        run_condition_levels=case.run_condition_levels,
        seed=seed,
        horizon=case.horizon if horizon is None else horizon,
    )


def latin_hypercube(bounds, n: int, seed) -> np.ndarray:
    """Sample n points with one point per equal-width stratum per dimension.

    Parameters
    ----------
    bounds : array-like, shape (d, 2)
        Per-dimension [lo, hi] with lo < hi.
    n : int
        Number of points, >= 1.
    seed : int or numpy Generator

    Returns
    -------
    ndarray, shape (n, d)
    """
    bounds = np.atleast_2d(np.asarray(bounds, dtype=float))
    if bounds.shape[1] != 2:
        raise ValueError("bounds must have shape (d, 2)")
    if n < 1:
        raise ValueError("n must be >= 1")
    lo, hi = bounds[:, 0], bounds[:, 1]
    if np.any(lo >= hi):
        bad = int(np.flatnonzero(lo >= hi)[0])
        raise ConfigurationError(f"degenerate bounds in dimension {bad}: [{lo[bad]}, {hi[bad]}]")
    rng = np.random.default_rng(seed)
    d = bounds.shape[0]
    points = np.empty((n, d))
    for j in range(d):
        strata = rng.permutation(n)
        u = (strata + rng.uniform(size=n)) / n
        points[:, j] = lo[j] + u * (hi[j] - lo[j])
    return points


def sample_run_conditions(
    levels: dict[str, tuple], n: int, seed, replace: bool = False
) -> np.ndarray:
    """Draw n cells from the full-factorial grid of discrete levels.

    Without replacement (default), n must not exceed the grid size; drawing
    exactly the grid size returns every cell once, in random order.
    """
    names = list(levels)
    grid = np.array(list(product(*(levels[k] for k in names))), dtype=float)
    if grid.size == 0:  # no run conditions at all: one empty cell
        grid = np.zeros((1, 0))
    if not replace and n > grid.shape[0]:
        raise ConfigurationError(
            f"cannot draw {n} run-condition cells from a grid of {grid.shape[0]} "
            "without replacement"
        )
    rng = np.random.default_rng(seed)
    idx = rng.choice(grid.shape[0], size=n, replace=replace)
    return grid[idx]


def add_noise(traj: Trajectory, level: float, seed) -> Trajectory:
    """Multiplicative uniform noise: x~ = x * (1 + u), u ~ U(-level, +level).

    Entries are perturbed independently (row-major draw order, so a time-prefix
    of the trajectory sees the same noise realisation as the full one).  The
    time vector is untouched; level 0 returns the trajectory unchanged.
    """
    if level < 0:
        raise ValueError("noise level must be >= 0")
    if level == 0:
        return traj
    rng = np.random.default_rng(seed)
    u = rng.uniform(-level, level, size=traj.X.size).reshape(traj.X.shape)
    return Trajectory(t=traj.t, X=traj.X * (1.0 + u), r=traj.r)


def _resolve_deviation(case: CaseModel, target: int | str) -> DeviationSpec | None:
    if target == "none":
        return None
    state = case.system.state_names[target]
    try:
        return case.deviations[state]
    except KeyError:
        raise ConfigurationError(
            f"case {case.name!r} has no deviation for state {state!r}"
        ) from None


def build_dataset(config: CampaignConfig) -> Dataset:
    """Simulate a full campaign from a config.

    The initial conditions for train and test are drawn as one joint Latin
    hypercube over n_train + n_test points, then split by a random choice of
    training indices, so growing the training share of a fixed batch pool
    reuses the same simulated experiments.  Run conditions are drawn without
    replacement when the factorial grid is large enough, with replacement
    otherwise.  Noise is injected on train *and* test observations.
    """
    case = make_case(config.case_id)
    deviation = _resolve_deviation(case, config.deviation_target)
    n_total = config.n_train + config.n_test

    rng = np.random.default_rng(config.seed)
    rc_seed, ic_seed = (int(s) for s in rng.integers(2**63, size=2))

    grid_size = 1
    for v in config.run_condition_levels.values():
        grid_size *= len(v)
    replace = n_total > grid_size
    r_all = sample_run_conditions(config.run_condition_levels, n_total, rc_seed, replace=replace)

    bounds = np.asarray(config.ic_bounds, dtype=float)
    free = bounds[:, 0] < bounds[:, 1]
    ics = np.tile(bounds[:, 0], (n_total, 1))
    if np.any(free):
        ics[:, free] = latin_hypercube(bounds[free], n_total, ic_seed)

    train_idx = np.sort(rng.choice(n_total, size=config.n_train, replace=False))
    is_train = np.zeros(n_total, dtype=bool)
    is_train[train_idx] = True

    t_grid = np.linspace(0.0, config.horizon, config.n_t)
    noise_seeds = rng.integers(2**63, size=n_total)

    train, test, train_truth, test_truth = [], [], [], []
    for k in range(n_total):
        try:
            truth_traj = integrate(case.system, deviation, ics[k], r_all[k], t_grid)
        except IntegrationError as exc:
            raise CampaignError(
                f"ground-truth simulation failed for experiment {k} "
                f"(ic={ics[k].tolist()}, r={r_all[k].tolist()}): {exc}"
            ) from exc
        noisy = add_noise(truth_traj, config.noise_level, int(noise_seeds[k]))
        (train if is_train[k] else test).append(noisy)
        (train_truth if is_train[k] else test_truth).append(truth_traj)

    return Dataset(
        train=tuple(train),
        test=tuple(test),
        truth=deviation,
        config=config,
        train_truth=tuple(train_truth),
        test_truth=tuple(test_truth),
    )


# ---------------------------------------------------------------------------
# Persistence
# ---------------------------------------------------------------------------

def _write_experiment_csv(path: Path, noisy: Trajectory, truth: Trajectory, case: CaseModel):
    states = case.system.state_names
    rnames = case.system.run_condition_names
    header = ["t", *states, *(f"truth_{s}" for s in states), *rnames]
    r_cols = np.tile(noisy.r, (noisy.n_samples, 1)) if len(rnames) else np.zeros((noisy.n_samples, 0))
    table = np.column_stack([noisy.t, noisy.X, truth.X, r_cols])
    np.savetxt(path, table, fmt=_CSV_FLOAT, delimiter=",", header=",".join(header), comments="")


def _read_experiment_csv(path: Path, case: CaseModel) -> tuple[Trajectory, Trajectory]:
    n_s = case.system.n_states
    n_r = len(case.system.run_condition_names)
    table = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    t = table[:, 0]
    X = table[:, 1 : 1 + n_s]
    X_truth = table[:, 1 + n_s : 1 + 2 * n_s]
    r = table[0, 1 + 2 * n_s : 1 + 2 * n_s + n_r]
    return Trajectory(t=t, X=X, r=r), Trajectory(t=t, X=X_truth, r=r)


def save_dataset(dataset: Dataset, out_dir) -> Path:
    """Persist a campaign as config.json + truth.json + per-experiment CSVs."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    case = make_case(dataset.config.case_id)

    (out / "config.json").write_text(json.dumps(dataset.config.to_json_dict(), indent=2))
    target = dataset.config.deviation_target
    truth_info = {
        "deviation_target": target,
        "target_state": None if target == "none" else case.system.state_names[target],
        "description": dataset.truth.label if dataset.truth is not None else "none",
    }
    (out / "truth.json").write_text(json.dumps(truth_info, indent=2))

    for split, noisy_list, truth_list in (
        ("train", dataset.train, dataset.train_truth),
        ("test", dataset.test, dataset.test_truth),
    ):
        split_dir = out / split
        split_dir.mkdir(exist_ok=True)
        for k, (noisy, truth) in enumerate(zip(noisy_list, truth_list)):
            _write_experiment_csv(split_dir / f"exp_{k}.csv", noisy, truth, case)
    return out


def load_dataset(in_dir) -> Dataset:
    """Inverse of save_dataset (exact round trip at %.17g precision)."""
    src = Path(in_dir)
    config = CampaignConfig.from_json_dict(json.loads((src / "config.json").read_text()))
    case = make_case(config.case_id)
    deviation = _resolve_deviation(case, config.deviation_target)

    def read_split(name: str, count: int):
        noisy, truth = [], []
        for k in range(count):
            a, b = _read_experiment_csv(src / name / f"exp_{k}.csv", case)
            noisy.append(a)
            truth.append(b)
        return tuple(noisy), tuple(truth)

    train, train_truth = read_split("train", config.n_train)
    test, test_truth = read_split("test", config.n_test)
    return Dataset(
        train=train,
        test=test,
        truth=deviation,
        config=config,
        train_truth=train_truth,
        test_truth=test_truth,
    )
