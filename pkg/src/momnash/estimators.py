"""Median-of-means gradient estimation.

Samples are split into ``b`` consecutive blocks of ``s`` samples; the
estimate is the median of the block means.  ``b`` and ``s`` follow

    b = floor(min(8 ln(e^{1/8} / gamma), m / 2)),    s = floor(m / b),

and the ``m - b s`` leftover samples are discarded.  All routines operate on
the last axis so one call can serve every player at once.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np


class EstimatorError(ValueError):
    pass


def log_confidence(gamma: float) -> float:
    """``ln(e^{1/8} / gamma)``."""
    return 0.125 + math.log(1.0 / gamma)


def min_theory_samples(gamma: float) -> float:
    """Smallest sample count for which the tail bound is certified."""
    return 16.0 * log_confidence(gamma) + 2.0


@dataclass(frozen=True)
class BlockPlan:
    m: int
    gamma: float
    b: int
    s: int
    m_used: int
    theory_valid: bool


def plan_blocks(m: int, gamma: float) -> BlockPlan:
    """Block count and size for ``m`` samples at confidence ``gamma``.

    ``gamma = 1`` (the first iterate of a ``(k+1)^-2`` schedule) and ``m = 1``
    are accepted and give a single block.
    """
    if m < 1 or int(m) != m:
        raise EstimatorError(f"m must be a positive integer, got {m}")
    if not 0.0 < gamma <= 1.0:
        raise EstimatorError(f"gamma must lie in (0, 1], got {gamma}")
    m = int(m)
    b = max(1, math.floor(min(8.0 * log_confidence(gamma), m / 2.0)))
    s = m // b
    valid = gamma < 1.0 and m >= min_theory_samples(gamma)
    return BlockPlan(m=m, gamma=gamma, b=b, s=s, m_used=b * s, theory_valid=valid)


def median(values, axis: int = -1):
    """Sample median; even counts average the two middle values."""
    values = np.asarray(values, dtype=float)
    n = values.shape[axis] if values.ndim else 0
    if n == 0:
        raise EstimatorError("median of an empty sample")
    srt = np.sort(values, axis=axis)
    mid = n // 2
    upper = np.take(srt, mid, axis=axis)
    if n % 2:
        return upper
    return (np.take(srt, mid - 1, axis=axis) + upper) / 2


def block_means(samples, plan: BlockPlan) -> np.ndarray:
    """Means of the ``plan.b`` consecutive blocks along the last axis.

    Each block is accumulated left to right about its first sample, so a
    block of identical values returns that value exactly.
    """
    samples = np.asarray(samples, dtype=float)
    if samples.shape[-1] < plan.m_used:
        raise EstimatorError(f"need {plan.m_used} samples, got {samples.shape[-1]}")
    blocks = samples[..., : plan.m_used].reshape(samples.shape[:-1] + (plan.b, plan.s))
    anchor = blocks[..., 0]
    dev = blocks - anchor[..., None]
    return anchor + np.cumsum(dev, axis=-1)[..., -1] / plan.s


def mom_estimate(samples, plan: BlockPlan):
    """Median-of-means estimate and the block means it was built from."""
    means = block_means(samples, plan)
    return median(means), means


def bias_corrected_estimate(means, eta: float):
    """``(1 - eta) * median + eta * mean`` of the block means."""
    if not 0.0 <= eta <= 1.0:
        raise EstimatorError(f"eta must lie in [0, 1], got {eta}")
    means = np.asarray(means, dtype=float)
    return (1.0 - eta) * median(means) + eta * np.mean(means, axis=-1)


@dataclass(frozen=True)
class ThresholdParams:
    delta: float
    nu: float

    def __post_init__(self):
        if not 1.0 < self.delta <= 2.0:
            raise EstimatorError("delta must lie in (1, 2]")
        if self.nu < 0:
            raise EstimatorError("nu must be non-negative")

    @property
    def c1(self) -> float:
        return (12.0 * self.nu**self.delta) ** (1.0 / self.delta)


def deviation_threshold(params: ThresholdParams, m: int, gamma: float) -> float:
    """Radius that the MoM error exceeds with probability at most ``2 gamma``."""
    exponent = (params.delta - 1.0) / params.delta
    return params.c1 * (16.0 * log_confidence(gamma) / m) ** exponent


def clip(v, tau: float):
    """Rescale ``v`` to norm at most ``tau``; scalars are truncated in magnitude."""
    if tau <= 0:
        raise EstimatorError("clip threshold must be positive")
    v = np.asarray(v, dtype=float)
    norm = float(np.linalg.norm(v)) if v.ndim else abs(float(v))
    if norm <= tau:
        return v
    return v * (tau / norm)


def clip_each(v, tau: float) -> np.ndarray:
    """Scalar clip applied to every entry of ``v``."""
    if tau <= 0:
        raise EstimatorError("clip threshold must be positive")
    return np.clip(np.asarray(v, dtype=float), -tau, tau)
