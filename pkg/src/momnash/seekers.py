"""Projected Nash-equilibrium seekers.

Five update rules share one driver:

``mom``
    median-of-means gradient estimate per player, projected step.
``mom_bc``
    median-of-means mixed with the sample mean by a decaying weight.
``gc_sun``
    per-player scalar clipping, one sample per player.
``clipped_sgda``
    whole-vector clipping with a constant step.
``clipped_seg``
    clipped extragradient with two independent samples per player.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import NamedTuple

import numpy as np

from .estimators import bias_corrected_estimate, clip, clip_each, median, mom_estimate, plan_blocks
from .game import project
from .noise import CorruptionModel, NoiseModel, RngStream, corrupt, draw_noise

ALGORITHMS = ("mom", "mom_bc", "gc_sun", "clipped_sgda", "clipped_seg")
MOM_ALGORITHMS = ("mom", "mom_bc")
BUDGET_MODES = ("per_player", "total")


class SeekerError(RuntimeError):
    pass


@dataclass(frozen=True)
class Schedules:
    """Step, sample, confidence, correction and clipping schedules.

    Defaults reproduce the benchmark comparison: ``alpha_k = 1/(k+1)``,
    ``m_k = k+1``, ``gamma_k = (k+1)^-2``, ``eta_k = (k+1)^-0.1``,
    ``tau_k = 20 (k+1)^0.2`` and a constant step 0.005 for the
    SGDA/SEG baselines.
    """

    step_a: float = 1.0
    step_b: float = 1.0
    sample_beta: float = 1.0
    sample_c: int = 1
    conf_exponent: float = 2.0
    eta0: float = 1.0
    rho: float = 0.1
    clip_tau0: float = 20.0
    clip_p: float = 0.2
    fixed_m: int | None = None
    fixed_step: float = 0.005

    def __post_init__(self):
        if not 0.0 < self.step_a <= 1.0:
            raise SeekerError("step_a must lie in (0, 1]")
        if self.step_b <= 0 or self.sample_beta <= 0 or self.conf_exponent <= 0:
            raise SeekerError("step_b, sample_beta and conf_exponent must be positive")
        if self.sample_c < 1 or int(self.sample_c) != self.sample_c:
            raise SeekerError("sample_c must be a positive integer")
        if self.eta0 < 0 or self.rho <= 0:
            raise SeekerError("eta0 must be non-negative and rho positive")
        if self.clip_tau0 <= 0 or self.fixed_step <= 0:
            raise SeekerError("clip_tau0 and fixed_step must be positive")
        if self.fixed_m is not None and self.fixed_m < 1:
            raise SeekerError("fixed_m must be a positive integer")


class ScheduleValues(NamedTuple):
    alpha: float
    m: int
    gamma: float
    eta: float
    tau: float


def _ceil_power(base: int, power: float) -> int:
    val = base**power
    near = round(val)
    # guard against 10.000000000000002-style rounding in integer powers
    return int(near) if abs(val - near) < 1e-9 * max(1.0, val) else math.ceil(val)


def schedule_values(s: Schedules, k: int) -> ScheduleValues:
    if k < 0:
        raise SeekerError("iteration index must be non-negative")
    t = k + 1
    m = s.fixed_m if s.fixed_m is not None else s.sample_c * _ceil_power(t, s.sample_beta)
    return ScheduleValues(
        alpha=s.step_b * t ** (-s.step_a),
        m=int(m),
        gamma=t ** (-s.conf_exponent),
        eta=min(1.0, s.eta0 * t ** (-s.rho)),
        tau=s.clip_tau0 * t**s.clip_p,
    )


def samples_per_player(algorithm: str, s: Schedules, k: int) -> int:
    if algorithm in MOM_ALGORITHMS:
        return schedule_values(s, k).m
    if algorithm == "clipped_seg":
        return 2
    return 1


_NO_CORRUPTION = CorruptionModel()


def _mom_block_means(game, x, vals, noise, corruption, rng):
    n = game.n_players
    grads = game.sample_gradients(x, draw_noise(noise, rng, (n, vals.m)))
    plan = plan_blocks(vals.m, vals.gamma)
    if corruption.active:
        grads = corrupt(grads, corruption, rng, plan.s, plan.b)
    _, means = mom_estimate(grads, plan)
    return means


def step_mom(game, x, k, s: Schedules, noise: NoiseModel, corruption: CorruptionModel = _NO_CORRUPTION,
             rng: RngStream | None = None):
    vals = schedule_values(s, k)
    means = _mom_block_means(game, x, vals, noise, corruption, rng)
    x_next = project(x - vals.alpha * median(means), game.constraint)
    return x_next, game.n_players * vals.m


def step_mom_bc(game, x, k, s: Schedules, noise: NoiseModel, corruption: CorruptionModel = _NO_CORRUPTION,
                rng: RngStream | None = None):
    vals = schedule_values(s, k)
    means = _mom_block_means(game, x, vals, noise, corruption, rng)
    g = bias_corrected_estimate(means, vals.eta)
    x_next = project(x - vals.alpha * g, game.constraint)
    return x_next, game.n_players * vals.m


def _one_sample(game, x, noise, corruption, rng):
    grads = game.sample_gradients(x, draw_noise(noise, rng, (game.n_players, 1)))
    if corruption.active:
        grads = corrupt(grads, corruption, rng, 1)
    return grads[:, 0]


def step_gc_sun(game, x, k, s: Schedules, noise: NoiseModel, corruption: CorruptionModel = _NO_CORRUPTION,
                rng: RngStream | None = None):
    vals = schedule_values(s, k)
    g = clip_each(_one_sample(game, x, noise, corruption, rng), vals.tau)
    return project(x - vals.alpha * g, game.constraint), game.n_players


def step_clipped_sgda(game, x, k, s: Schedules, noise: NoiseModel, corruption: CorruptionModel = _NO_CORRUPTION,
                      rng: RngStream | None = None):
    tau = schedule_values(s, k).tau
    g = clip(_one_sample(game, x, noise, corruption, rng), tau)
    return project(x - s.fixed_step * g, game.constraint), game.n_players


def step_clipped_seg(game, x, k, s: Schedules, noise: NoiseModel, corruption: CorruptionModel = _NO_CORRUPTION,
                     rng: RngStream | None = None):
    tau = schedule_values(s, k).tau
    g1 = clip(_one_sample(game, x, noise, corruption, rng), tau)
    x_half = project(x - s.fixed_step * g1, game.constraint)
    g2 = clip(_one_sample(game, x_half, noise, corruption, rng), tau)
    return project(x - s.fixed_step * g2, game.constraint), 2 * game.n_players


STEPS = {
    "mom": step_mom,
    "mom_bc": step_mom_bc,
    "gc_sun": step_gc_sun,
    "clipped_sgda": step_clipped_sgda,
    "clipped_seg": step_clipped_seg,
}


@dataclass(frozen=True)
class SeekerConfig:
    algorithm: str
    schedules: Schedules = field(default_factory=Schedules)
    corruption: CorruptionModel = _NO_CORRUPTION
    name: str = ""

    def __post_init__(self):
        if self.algorithm not in ALGORITHMS:
            raise SeekerError(f"unknown algorithm {self.algorithm!r}; expected one of {ALGORITHMS}")
        if not self.name:
            object.__setattr__(self, "name", self.algorithm)

    def with_corruption(self, corruption: CorruptionModel) -> "SeekerConfig":
        return replace(self, corruption=corruption)


def theory_flags(config: SeekerConfig, noise: NoiseModel, n_iter: int | None = None) -> dict:
    """Which theoretical conditions a configuration meets.

    ``beta_condition`` is the growth requirement ``beta (delta - 1) > 1`` of
    the bias-corrected method; ``theory_valid_from_k`` is the first iterate
    from which every ``m_k`` satisfies the tail-bound sample condition (up to
    ``n_iter`` when given).
    """
    s = config.schedules
    flags = {}
    if config.algorithm == "mom_bc":
        flags["beta_condition"] = s.fixed_m is None and s.sample_beta * (noise.delta - 1.0) > 1.0
    if config.algorithm in MOM_ALGORITHMS and n_iter:
        first = None
        for k in range(n_iter):
            vals = schedule_values(s, k)
            if plan_blocks(vals.m, vals.gamma).theory_valid:
                if first is None:
                    first = k
            else:
                first = None
        flags["theory_valid_from_k"] = -1 if first is None else first
    return flags


@dataclass
class Trajectory:
    """Iterates of one run: index ``k``, cumulative samples, ``x_k`` and ``||x_k - x*||``."""

    k: np.ndarray
    samples: np.ndarray
    xs: np.ndarray
    errors: np.ndarray
    x_star_norm: float

    def __len__(self):
        return self.k.size

    def __getitem__(self, i) -> "IterationTrace":
        return IterationTrace(int(self.k[i]), int(self.samples[i]), self.xs[i], float(self.errors[i]))

    def __iter__(self):
        return (self[i] for i in range(len(self)))

    @property
    def rel_errors(self) -> np.ndarray:
        return self.errors / self.x_star_norm

    @property
    def sq_errors(self) -> np.ndarray:
        return self.errors**2

    def error_series(self, kind: str) -> np.ndarray:
        if kind == "absolute":
            return self.errors
        if kind == "relative":
            return self.rel_errors
        if kind == "squared":
            return self.sq_errors
        raise SeekerError(f"unknown error kind {kind!r}")


class IterationTrace(NamedTuple):
    k: int
    samples_consumed_total: int
    x: np.ndarray
    error: float


def run_seeker(game, config: SeekerConfig, noise: NoiseModel, x0, budget: int, rng: RngStream,
               x_star=None, budget_mode: str = "per_player") -> Trajectory:
    """Iterate one seeker until the next step would overrun ``budget``.

    ``budget_mode='per_player'`` charges ``m_k`` samples per iteration
    (what each player draws), ``'total'`` charges ``N m_k``.  Entry ``k`` of
    the trajectory holds ``x_k``; entry 0 is the starting point with zero
    samples, so a budget below the first iteration's cost yields that single
    record.
    """
    if budget <= 0:
        raise SeekerError("budget must be positive")
    if budget_mode not in BUDGET_MODES:
        raise SeekerError(f"unknown budget mode {budget_mode!r}")
    box = game.constraint
    x = np.asarray(x0, dtype=float).copy()
    if x.shape != (game.n_players,) or not box.contains(x):
        raise SeekerError("x0 must lie in the constraint set")
    if x_star is None:
        from .game import solve_equilibrium
        x_star = solve_equilibrium(game)
    x_star = np.asarray(x_star, dtype=float)
    step = STEPS[config.algorithm]
    divisor = game.n_players if budget_mode == "per_player" else 1

    ks, counts, xs = [0], [0], [x]
    used = 0
    k = 0
    while True:
        cost = samples_per_player(config.algorithm, config.schedules, k) * (game.n_players // divisor)
        if used + cost > budget:
            break
        try:
            x, drawn = step(game, x, k, config.schedules, noise, config.corruption, rng)
        except Exception as exc:
            raise SeekerError(f"{config.name}: iteration {k} failed: {exc}") from exc
        used += drawn // divisor
        k += 1
        ks.append(k)
        counts.append(used)
        xs.append(x)
    xs = np.array(xs)
    errors = np.linalg.norm(xs - x_star, axis=1)
    return Trajectory(np.array(ks), np.array(counts), xs, errors, float(np.linalg.norm(x_star)))
