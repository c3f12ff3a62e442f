"""Monte-Carlo experiments: seeded trials, aggregation and CSV persistence."""

from __future__ import annotations

import csv
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .game import benchmark_game, diagonal_game, solve_equilibrium
from .noise import CorruptionModel, NoiseModel, RngStream
from .seekers import MOM_ALGORITHMS, BUDGET_MODES, SeekerConfig, Trajectory, run_seeker, theory_flags

AXES = ("samples", "iterations")
ERROR_KINDS = ("relative", "absolute", "squared")
AGGREGATE_HEADER = ["axis", "grid", "mean_error", "median_error", "trials"]
TRIAL_HEADER = ["trial", "k", "samples", "abs_error", "rel_error", "sq_error"]
CHECKPOINTS = 100
TRIAL_MAX_ROWS = 5000


class ExperimentError(RuntimeError):
    pass


def make_game(game_id: str, n: int | None = None, a: float = 2.0, r: float = -2.0):
    """Build a game from its identifier: ``benchmark15``, ``benchmark`` (``n`` players) or ``diag``."""
    if game_id == "benchmark15":
        return benchmark_game(15)
    if game_id == "benchmark":
        return benchmark_game(n or 15)
    if game_id == "diag":
        return diagonal_game(n or 1, a, r)
    raise ExperimentError(f"unknown game {game_id!r}; valid ids: benchmark15, benchmark, diag")


@dataclass
class ExperimentSpec:
    noise: NoiseModel
    seekers: list
    budget: int = 100_000
    trials: int = 20
    base_seed: int = 0
    game_id: str = "benchmark15"
    game_args: dict = field(default_factory=dict)
    axis: str = "samples"
    error_kind: str = "relative"
    budget_mode: str = "per_player"
    x0: float | list | None = None
    corruption: CorruptionModel = field(default_factory=CorruptionModel)
    corrupt_baselines: bool = False

    def __post_init__(self):
        if self.trials < 1:
            raise ExperimentError("trials must be at least 1")
        if self.budget < 1:
            raise ExperimentError("budget must be positive")
        if not self.seekers:
            raise ExperimentError("at least one seeker is required")
        names = [s.name for s in self.seekers]
        if len(set(names)) != len(names):
            raise ExperimentError(f"seeker names must be unique: {names}")
        if self.axis not in AXES:
            raise ExperimentError(f"axis must be one of {AXES}")
        if self.error_kind not in ERROR_KINDS:
            raise ExperimentError(f"error_kind must be one of {ERROR_KINDS}")
        if self.budget_mode not in BUDGET_MODES:
            raise ExperimentError(f"budget_mode must be one of {BUDGET_MODES}")
        if self.base_seed < 0:
            raise ExperimentError("base_seed must be non-negative")

    def game(self):
        return make_game(self.game_id, **self.game_args)

    def start(self, game) -> np.ndarray:
        if self.x0 is None:
            return game.constraint.lower.copy()
        return np.broadcast_to(np.asarray(self.x0, dtype=float), (game.n_players,)).copy()

    def effective_seekers(self) -> list:
        """Seekers with the experiment corruption attached where it applies."""
        out = []
        for cfg in self.seekers:
            if self.corruption.active and (cfg.algorithm in MOM_ALGORITHMS or self.corrupt_baselines):
                cfg = cfg.with_corruption(self.corruption)
            out.append(cfg)
        return out


@dataclass(eq=False)
class AggregateCurve:
    """Trial-averaged error on a common grid."""

    axis: str
    grid: np.ndarray
    mean_error: np.ndarray
    median_error: np.ndarray
    trials: int
    per_trial_final: np.ndarray = field(default_factory=lambda: np.empty(0))

    def __post_init__(self):
        self.grid = np.asarray(self.grid, dtype=np.int64)
        self.mean_error = np.asarray(self.mean_error, dtype=float)
        self.median_error = np.asarray(self.median_error, dtype=float)
        self.per_trial_final = np.asarray(self.per_trial_final, dtype=float)
        if self.grid.size and np.any(np.diff(self.grid) <= 0):
            raise ExperimentError("grid must be strictly increasing")
        if self.mean_error.shape != self.grid.shape or self.median_error.shape != self.grid.shape:
            raise ExperimentError("error vectors must match the grid length")

    @property
    def final(self) -> float:
        return float(self.mean_error[-1])


def _run_one(args):
    game, cfg, noise, x0, budget, seed, trial, x_star, budget_mode = args
    try:
        return run_seeker(game, cfg, noise, x0, budget, RngStream(seed, trial), x_star, budget_mode)
    except Exception as exc:
        raise ExperimentError(f"seeker {cfg.name!r}, trial {trial}: {exc}") from exc


def run_trials(spec: ExperimentSpec, workers: int = 1) -> dict:
    """All trajectories, keyed by seeker name, one list entry per trial.

    Trial ``t`` of every seeker uses ``RngStream(base_seed, t)``.
    """
    game = spec.game()
    x_star = solve_equilibrium(game)
    x0 = spec.start(game)
    jobs = [
        (game, cfg, spec.noise, x0, spec.budget, spec.base_seed, t, x_star, spec.budget_mode)
        for cfg in spec.effective_seekers()
        for t in range(spec.trials)
    ]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_run_one, jobs))
    else:
        results = [_run_one(job) for job in jobs]
    out = {}
    for job, traj in zip(jobs, results):
        out.setdefault(job[1].name, []).append(traj)
    return out


def sample_grid(budget: int, checkpoints: int = CHECKPOINTS) -> np.ndarray:
    grid = np.unique(np.round(np.linspace(0, budget, checkpoints + 1)).astype(np.int64))
    return grid


def align(traj: Trajectory, axis: str, error_kind: str, grid=None):
    """Errors of one trajectory on ``grid``, carrying the last observation forward."""
    errs = traj.error_series(error_kind)
    if axis == "iterations":
        if grid is None:
            return traj.k.copy(), errs.copy()
        idx = np.minimum(np.asarray(grid), traj.k[-1])
        return np.asarray(grid), errs[idx]
    pos = np.searchsorted(traj.samples, grid, side="right") - 1
    return np.asarray(grid), errs[pos]


def aggregate(trajs: list, axis: str, error_kind: str, budget: int | None = None) -> AggregateCurve:
    """Mean and median over trials on the iteration grid or the 1%-of-budget sample grid."""
    if not trajs:
        raise ExperimentError("nothing to aggregate")
    if axis == "iterations":
        grid = np.arange(min(int(t.k[-1]) for t in trajs) + 1)
    else:
        if budget is None:
            budget = max(int(t.samples[-1]) for t in trajs)
        grid = sample_grid(budget)
    rows = np.array([align(t, axis, error_kind, grid)[1] for t in trajs])
    finals = np.array([t.error_series(error_kind)[-1] for t in trajs])
    return AggregateCurve(axis, grid, rows.mean(axis=0), np.median(rows, axis=0), len(trajs), finals)


def run_experiment(spec: ExperimentSpec, workers: int = 1) -> dict:
    """Run every seeker for ``spec.trials`` trials and average on ``spec.axis``."""
    trajs = run_trials(spec, workers)
    return {
        name: aggregate(runs, spec.axis, spec.error_kind, spec.budget)
        for name, runs in trajs.items()
    }


def _fmt(x: float) -> str:
    return format(float(x), ".17g")


def write_csv(curves, path) -> None:
    """Write aggregate curves as ``axis,grid,mean_error,median_error,trials`` rows."""
    if isinstance(curves, AggregateCurve):
        curves = [curves]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(AGGREGATE_HEADER)
        for c in curves:
            for g, mean, med in zip(c.grid, c.mean_error, c.median_error):
                w.writerow([c.axis, int(g), _fmt(mean), _fmt(med), c.trials])


def read_csv(path) -> list:
    """Inverse of :func:`write_csv`; a new curve starts whenever the axis changes
    or the grid stops increasing."""
    curves = []
    cur = None
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != AGGREGATE_HEADER:
            raise ExperimentError(f"{path}: unexpected header {header}")
        for row in reader:
            axis, g, mean, med, n = row[0], int(row[1]), float(row[2]), float(row[3]), int(row[4])
            if cur is None or cur[0] != axis or g <= cur[1][-1]:
                cur = (axis, [], [], [], n)
                curves.append(cur)
            cur[1].append(g)
            cur[2].append(mean)
            cur[3].append(med)
    return [AggregateCurve(a, g, m, md, n) for a, g, m, md, n in curves]


def trial_rows(n: int, max_rows: int | None = TRIAL_MAX_ROWS) -> np.ndarray:
    """Indices written for a trajectory of ``n`` records: all of them, or a
    geometric selection of about ``max_rows`` (always keeping the first and last)."""
    if max_rows is None or n <= max_rows:
        return np.arange(n)
    picks = np.round(np.geomspace(1, n - 1, max_rows - 1)).astype(np.int64)
    return np.unique(np.concatenate(([0], picks, [n - 1])))


def write_trials_csv(trajs: list, path, max_rows: int | None = TRIAL_MAX_ROWS) -> None:
    """Long-format per-trial records ``trial,k,samples,abs_error,rel_error,sq_error``.

    Trajectories longer than ``max_rows`` are thinned geometrically in ``k``.
    """
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(TRIAL_HEADER)
        for t, traj in enumerate(trajs):
            rel = traj.rel_errors
            sq = traj.sq_errors
            for i in trial_rows(len(traj), max_rows):
                w.writerow([t, int(traj.k[i]), int(traj.samples[i]),
                            _fmt(traj.errors[i]), _fmt(rel[i]), _fmt(sq[i])])


def read_trials_csv(path) -> dict:
    """Columns of a per-trial file as arrays."""
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != TRIAL_HEADER:
            raise ExperimentError(f"{path}: unexpected header {header}")
        rows = list(reader)
    cols = list(zip(*rows)) if rows else [()] * len(TRIAL_HEADER)
    out = {}
    for name, col in zip(TRIAL_HEADER, cols):
        dtype = np.int64 if name in ("trial", "k", "samples") else float
        out[name] = np.array(col, dtype=dtype)
    return out


def mean_by_iteration(cols: dict, column: str = "sq_error"):
    """Average a per-trial column over trials at each ``k`` recorded in every trial."""
    trials = np.unique(cols["trial"])
    kmax = int(cols["k"].max())
    sums = np.bincount(cols["k"], weights=cols[column], minlength=kmax + 1)
    counts = np.bincount(cols["k"], minlength=kmax + 1)
    k = np.nonzero(counts == trials.size)[0]
    return k, sums[k] / trials.size


def metadata(spec: ExperimentSpec, trajs: dict | None = None, extra: dict | None = None) -> dict:
    """Flat description of an experiment: every config field plus theory flags."""
    meta = {
        "game_id": spec.game_id,
        "budget": spec.budget,
        "budget_mode": spec.budget_mode,
        "trials": spec.trials,
        "base_seed": spec.base_seed,
        "axis": spec.axis,
        "error_kind": spec.error_kind,
        "x0": "lower" if spec.x0 is None else spec.x0,
        "noise.kind": spec.noise.kind,
        "noise.alpha": spec.noise.alpha,
        "noise.sigma": spec.noise.sigma,
        "noise.delta": spec.noise.delta,
        "noise.nu": spec.noise.nu,
        "corruption.mode": spec.corruption.mode,
        "corruption.c_blocks": spec.corruption.c_blocks,
        "corruption.p": spec.corruption.p,
        "corruption.magnitude": spec.corruption.magnitude,
        "corruption.random_sign": spec.corruption.random_sign,
        "corrupt_baselines": spec.corrupt_baselines,
    }
    for key, val in sorted(spec.game_args.items()):
        meta[f"game.{key}"] = val
    for cfg in spec.seekers:
        pre = f"seeker.{cfg.name}"
        meta[f"{pre}.algorithm"] = cfg.algorithm
        for key, val in vars(cfg.schedules).items():
            meta[f"{pre}.{key}"] = val
        n_iter = None
        if trajs and cfg.name in trajs:
            n_iter = int(trajs[cfg.name][0].k[-1])
            meta[f"{pre}.iterations"] = n_iter
        for key, val in theory_flags(cfg, spec.noise, n_iter).items():
            meta[f"{pre}.{key}"] = val
    if extra:
        meta.update(extra)
    return meta


def write_metadata(meta: dict, path) -> None:
    with open(path, "w") as fh:
        for key, val in meta.items():
            if isinstance(val, float):
                val = repr(val)
            fh.write(f"{key}={val}\n")


def write_outputs(spec: ExperimentSpec, trajs: dict, out_dir, extra_meta: dict | None = None) -> dict:
    """Write one aggregate CSV per seeker (both axes), per-trial files under
    ``trials/`` and ``metadata.txt``.

    Returns ``{seeker: {axis: AggregateCurve}}``.
    """
    out_dir = Path(out_dir)
    os.makedirs(out_dir / "trials", exist_ok=True)
    curves = {}
    for name, runs in trajs.items():
        curves[name] = {axis: aggregate(runs, axis, spec.error_kind, spec.budget) for axis in AXES}
        write_csv([curves[name][axis] for axis in AXES], out_dir / f"{name}.csv")
        write_trials_csv(runs, out_dir / "trials" / f"{name}.csv")
    write_metadata(metadata(spec, trajs, extra_meta), out_dir / "metadata.txt")
    return curves
