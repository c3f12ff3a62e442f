"""Heavy-tailed noise generators, moment certification and sample corruption."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import integrate

NOISE_KINDS = ("symmetrized_pareto", "shifted_pareto", "gaussian", "none")
CORRUPTION_MODES = ("none", "fixed_count", "breakdown", "probabilistic")

NU_MARGIN = 1.05


class NoiseError(ValueError):
    pass


class RngStream:
    """Deterministic random stream identified by ``(seed, stream_id)``.

    Streams are derived with :class:`numpy.random.SeedSequence` spawn keys, so
    distinct ``stream_id`` values give independent PCG64 streams and the same
    pair always replays the same draws.
    """

    def __init__(self, seed: int, stream_id: int = 0):
        if seed < 0 or stream_id < 0:
            raise NoiseError("seed and stream_id must be non-negative")
        self.seed = int(seed) & 0xFFFFFFFFFFFFFFFF
        self.stream_id = int(stream_id) & 0xFFFFFFFFFFFFFFFF
        ss = np.random.SeedSequence(self.seed, spawn_key=(self.stream_id,))
        self.generator = np.random.Generator(np.random.PCG64(ss))

    def __repr__(self):
        return f"RngStream(seed={self.seed}, stream_id={self.stream_id})"

    def uniform(self, size=None):
        """Uniform draws on ``(0, 1]``."""
        u = self.generator.random(size)
        return np.subtract(1.0, u, out=u) if isinstance(u, np.ndarray) else 1.0 - u

    def rademacher(self, size=None):
        bits = self.generator.integers(0, 2, size, dtype=np.int8)
        return (2 * bits - 1).astype(float) if isinstance(bits, np.ndarray) else float(2 * bits - 1)

    def normal(self, size=None):
        return self.generator.standard_normal(size)

    def choice(self, n: int, k: int) -> np.ndarray:
        return self.generator.choice(n, size=k, replace=False)


@dataclass(frozen=True)
class NoiseModel:
    """Zero-mean per-sample noise with certified moment ``E|xi|^delta <= nu^delta``.

    ``alpha`` is the Pareto tail index and ``sigma`` the Gaussian scale; the
    unused one is ignored.  Use the class constructors to get ``nu``
    certified automatically.
    """

    kind: str
    alpha: float = 0.0
    sigma: float = 0.0
    delta: float = 2.0
    nu: float = 0.0

    def __post_init__(self):
        if self.kind not in NOISE_KINDS:
            raise NoiseError(f"unknown noise kind {self.kind!r}; expected one of {NOISE_KINDS}")
        if not 1.0 < self.delta <= 2.0:
            raise NoiseError("delta must lie in (1, 2]")
        if self.kind in ("symmetrized_pareto", "shifted_pareto") and self.alpha <= 1.0:
            raise NoiseError("Pareto tail index must exceed 1")
        if self.nu < 0:
            raise NoiseError("nu must be non-negative")

    @property
    def is_pareto(self) -> bool:
        return self.kind in ("symmetrized_pareto", "shifted_pareto")

    @property
    def variance_finite(self) -> bool:
        return not self.is_pareto or self.alpha > 2.0

    @classmethod
    def symmetrized_pareto(cls, alpha: float, delta: float | None = None) -> "NoiseModel":
        delta = default_delta(alpha) if delta is None else delta
        return cls("symmetrized_pareto", alpha=alpha, delta=delta,
                   nu=certify_moment("symmetrized_pareto", alpha, delta))

    @classmethod
    def shifted_pareto(cls, alpha: float, delta: float | None = None) -> "NoiseModel":
        delta = default_delta(alpha) if delta is None else delta
        return cls("shifted_pareto", alpha=alpha, delta=delta,
                   nu=certify_moment("shifted_pareto", alpha, delta))

    @classmethod
    def gaussian(cls, sigma: float = 1.0, delta: float = 2.0) -> "NoiseModel":
        if sigma <= 0:
            raise NoiseError("sigma must be positive")
        return cls("gaussian", sigma=sigma, delta=delta,
                   nu=certify_moment("gaussian", delta=delta, sigma=sigma))

    @classmethod
    def none(cls) -> "NoiseModel":
        return cls("none", delta=2.0, nu=0.0)


def default_delta(alpha: float) -> float:
    """A moment order strictly below the tail index (1.5 for alpha = 1.8)."""
    if alpha <= 1.0:
        raise NoiseError("Pareto tail index must exceed 1")
    return min(2.0, max(0.5 * (1.0 + alpha), alpha - 0.3))


def pareto_from_uniform(u, alpha: float):
    """Inverse CDF of Pareto(alpha) on ``[1, inf)``: ``u ** (-1/alpha)``."""
    if alpha <= 1.0:
        raise NoiseError("Pareto tail index must exceed 1")
    return np.power(u, -1.0 / alpha)


def draw_pareto(alpha: float, rng: RngStream, size=None):
    """Pareto(alpha) draws by inverse transform; every draw is >= 1."""
    return pareto_from_uniform(rng.uniform(size), alpha)


def draw_noise(model: NoiseModel, rng: RngStream, size=None):
    if model.kind == "none":
        return 0.0 if size is None else np.zeros(size)
    if model.kind == "gaussian":
        return model.sigma * rng.normal(size)
    centered = draw_pareto(model.alpha, rng, size) - model.alpha / (model.alpha - 1.0)
    if model.kind == "shifted_pareto":
        return centered
    return rng.rademacher(size) * centered


def absolute_moment(kind: str, alpha: float = 0.0, delta: float = 2.0, sigma: float = 1.0) -> float:
    """``E|xi|^delta`` by adaptive quadrature of the noise density."""
    if kind == "none":
        return 0.0
    if kind == "gaussian":
        def integrand(t):
            return t**delta * math.exp(-0.5 * (t / sigma) ** 2)
        val, _ = integrate.quad(integrand, 0.0, math.inf, epsabs=1e-13, epsrel=1e-12, limit=200)
        return 2.0 * val / (sigma * math.sqrt(2.0 * math.pi))
    if kind not in ("symmetrized_pareto", "shifted_pareto"):
        raise NoiseError(f"unknown noise kind {kind!r}")
    if alpha <= 1.0:
        raise NoiseError("Pareto tail index must exceed 1")
    if delta >= alpha:
        raise NoiseError(f"moment diverges: delta={delta} >= alpha={alpha}")
    # substitute z = u^(-1/alpha); |z - mean|^delta = u^(-delta/alpha) |1 - mean u^(1/alpha)|^delta
    mean = alpha / (alpha - 1.0)
    kink = mean ** (-alpha)

    def smooth(u):
        return abs(1.0 - mean * u ** (1.0 / alpha)) ** delta

    head, _ = integrate.quad(smooth, 0.0, kink, weight="alg", wvar=(-delta / alpha, 0.0),
                             epsabs=1e-13, epsrel=1e-11, limit=200)
    tail, _ = integrate.quad(lambda u: u ** (-delta / alpha) * smooth(u), kink, 1.0,
                             epsabs=1e-13, epsrel=1e-11, limit=200)
    return head + tail


def certify_moment(kind: str, alpha: float = 0.0, delta: float = 2.0, sigma: float = 1.0,
                   margin: float = NU_MARGIN) -> float:
    """Moment bound ``nu`` with ``E|xi|^delta <= nu^delta``, inflated by ``margin``."""
    if not 1.0 < delta <= 2.0:
        raise NoiseError("delta must lie in (1, 2]")
    return margin * absolute_moment(kind, alpha, delta, sigma) ** (1.0 / delta)


@dataclass(frozen=True)
class CorruptionModel:
    """Adversarial replacement of raw gradient samples.

    ``fixed_count`` overwrites ``c_blocks`` whole blocks, ``breakdown``
    overwrites ``floor((b - 1) / 2)`` blocks (the most a median of ``b`` block
    means tolerates) and ``probabilistic`` overwrites each sample with
    probability ``p``.  With ``random_sign`` each corrupted block (or sample)
    gets ``+magnitude`` or ``-magnitude`` at random.
    """

    mode: str = "none"
    c_blocks: int = 0
    p: float = 0.0
    magnitude: float = 1e9
    random_sign: bool = False

    def __post_init__(self):
        if self.mode not in CORRUPTION_MODES:
            raise NoiseError(f"unknown corruption mode {self.mode!r}; expected one of {CORRUPTION_MODES}")
        if self.c_blocks < 0:
            raise NoiseError("c_blocks must be non-negative")
        if not 0.0 <= self.p < 1.0:
            raise NoiseError("p must lie in [0, 1)")

    @property
    def active(self) -> bool:
        return self.mode != "none"


def corrupt(samples, model: CorruptionModel, rng: RngStream, block_size: int, n_blocks: int | None = None):
    """Return a copy of ``samples`` with corrupted entries set to the model magnitude.

    Blocks are consecutive runs of ``block_size`` samples along the last axis;
    only the first ``n_blocks`` blocks (default: as many as fit) are eligible.
    Leading axes are corrupted independently.
    """
    samples = np.array(samples, dtype=float)
    if model.mode == "none":
        return samples
    if model.mode == "probabilistic":
        hit = rng.generator.random(samples.shape) < model.p
        values = _magnitudes(model, rng, samples.shape)
        samples[hit] = values[hit]
        return samples
    if block_size < 1:
        raise NoiseError("block_size must be positive")
    total = samples.shape[-1] // block_size if n_blocks is None else n_blocks
    if total * block_size > samples.shape[-1]:
        raise NoiseError("n_blocks * block_size exceeds the number of samples")
    count = model.c_blocks if model.mode == "fixed_count" else (total - 1) // 2
    if count >= total and model.mode == "fixed_count":
        raise NoiseError(f"cannot corrupt {count} of {total} blocks")
    if count == 0:
        return samples
    rows = samples.reshape(-1, samples.shape[-1])
    for row in rows:
        chosen = rng.choice(total, count)
        values = _magnitudes(model, rng, count)
        for blk, val in zip(chosen, values):
            row[blk * block_size:(blk + 1) * block_size] = val
    return rows.reshape(samples.shape)


def _magnitudes(model: CorruptionModel, rng: RngStream, size):
    if model.random_sign:
        return model.magnitude * rng.rademacher(size)
    return np.full(size, float(model.magnitude))
