"""Numerical checks of the convergence theory.

* rate envelopes ``max{1/k, (ln k / k^beta)^{2(delta-1)/delta}[, 1/k^{2 rho + 2 zeta}]}``
  fitted to observed squared errors,
* a simulator/certifier for Chung-type recursions with logarithmic forcing,
* an empirical test of the median-of-means conditional tail bound,
* log-log slope fitting.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .estimators import ThresholdParams, deviation_threshold, mom_estimate, plan_blocks
from .noise import NoiseModel, RngStream, draw_noise


class AnalysisError(ValueError):
    pass


def _curve(traj, values=None):
    """Normalize ``(k, values)`` input; a Trajectory yields its squared errors."""
    if values is None:
        k, values = traj.k, traj.sq_errors
    else:
        k = traj
    k = np.asarray(k, dtype=float)
    values = np.asarray(values, dtype=float)
    if k.shape != values.shape:
        raise AnalysisError("k and values must have the same length")
    return k, values


def envelope_shape(k, delta: float, beta: float, rho: float | None = None, zeta: float = 0.0):
    k = np.asarray(k, dtype=float)
    expo = 2.0 * (delta - 1.0) / delta
    with np.errstate(divide="ignore", invalid="ignore"):
        shape = np.maximum(1.0 / k, (np.log(k) / k**beta) ** expo)
        if rho is not None:
            shape = np.maximum(shape, k ** (-(2.0 * rho + 2.0 * zeta)))
    return shape


@dataclass(frozen=True)
class RateEnvelope:
    delta: float
    beta: float
    rho: float | None
    zeta: float
    fitted_A: float
    k_start: int
    ratio_slope: float

    def __call__(self, k):
        return self.fitted_A * envelope_shape(k, self.delta, self.beta, self.rho, self.zeta)

    @property
    def satisfied(self) -> bool:
        """Finite constant and no upward drift of error / envelope."""
        return math.isfinite(self.fitted_A) and self.ratio_slope <= 0.1


def fit_envelope(traj, values=None, *, delta: float, beta: float, rho: float | None = None,
                 zeta: float = 0.0, window: float = 0.5) -> RateEnvelope:
    """Fit the path constant of a rate envelope to squared errors.

    ``k_start`` is placed so that the final ``window`` fraction of iterates
    is used; ``fitted_A`` is the largest ratio of squared error to envelope
    shape from there on, and ``ratio_slope`` the log-log trend of that ratio
    over the final decade of iterations.
    """
    k, sq = _curve(traj, values)
    keep = k >= 2
    k, sq = k[keep], sq[keep]
    if k.size < 20:
        raise AnalysisError("need at least 20 points with k >= 2")
    if not 0.0 < window <= 1.0:
        raise AnalysisError("window must lie in (0, 1]")
    k_start = int(k[int(math.floor((1.0 - window) * (k.size - 1)))])
    ratio = sq / envelope_shape(k, delta, beta, rho, zeta)
    tail = k >= k_start
    fitted = float(np.max(ratio[tail]))
    decade = k >= k[-1] / 10.0
    if np.count_nonzero(decade) < 2:
        decade = tail
    slope = _ls_slope(np.log(k[decade]), np.log(ratio[decade]))
    return RateEnvelope(delta, beta, rho, zeta, fitted, k_start, slope)


def _ls_slope(u, v) -> float:
    good = np.isfinite(u) & np.isfinite(v)
    u, v = u[good], v[good]
    if u.size < 2:
        return math.nan
    uc = u - u.mean()
    return float(np.dot(uc, v - v.mean()) / np.dot(uc, uc))


def fit_loglog_slope(traj, values=None, window: float = 0.9) -> float:
    """Least-squares slope of ``ln values`` against ``ln k`` over the final window.

    The window keeps ``k >= (1 - window) * k_max``; ``window=0.9`` is the
    final decade.  Without ``values`` a Trajectory's squared errors are used.
    """
    k, v = _curve(traj, values)
    sel = (k >= (1.0 - window) * k.max()) & (k > 0) & (v > 0)
    if np.count_nonzero(sel) < 10:
        raise AnalysisError("need at least 10 positive points in the window")
    return _ls_slope(np.log(k[sel]), np.log(v[sel]))


@dataclass(frozen=True)
class ChungInstance:
    """Recursion ``Y_{k+1} = (1 - r/k) Y_k + d (ln k)^tau / k^{p+1}`` from ``Y_{k0} = y0``."""

    r: float
    p: float
    d: float
    tau: float = 0.0
    k0: int = 2
    y0: float = 1.0

    def __post_init__(self):
        if not self.r > self.p >= 0:
            raise AnalysisError(f"need r > p >= 0, got r={self.r}, p={self.p}")
        if self.d < 0 or self.tau < 0 or self.y0 < 0:
            raise AnalysisError("d, tau and y0 must be non-negative")
        if self.k0 < 1:
            raise AnalysisError("k0 must be at least 1")


def chung_oracle(inst: ChungInstance, horizon: int):
    """Simulate the recursion with equality and certify ``Y_k <= A (ln k)^tau / k^p``.

    ``K`` is the first index (at least ``max(k0, 2, r)``) from which the
    comparison sequence ``U_k = A (ln k)^tau / k^p`` satisfies
    ``U_{k+1} - (1 - r/k) U_k >= (r - p)/(2k) U_k`` up to the horizon, and
    ``A = max{2d / (r - p), Y_K K^p / (ln K)^tau} + 1``.  Negative values of
    the recursion (possible only while ``r > k``) are clamped to zero.

    Returns ``(trajectory, A, K, holds)`` where ``trajectory[j]`` is
    ``Y_{k0 + j}`` and ``holds`` reports the pointwise re-check.
    """
    horizon = int(horizon)
    if horizon <= inst.k0:
        raise AnalysisError("horizon must exceed k0")
    r, p, d, tau = inst.r, inst.p, inst.d, inst.tau
    n = horizon - inst.k0 + 1
    Y = [0.0] * n
    y = float(inst.y0)
    Y[0] = y
    for j in range(n - 1):
        k = inst.k0 + j
        y = (1.0 - r / k) * y + d * (math.log(k) ** tau) / k ** (p + 1.0)
        y = max(y, 0.0)
        Y[j + 1] = y
    Y = np.array(Y)

    ks = np.arange(inst.k0, horizon + 1, dtype=float)
    lo = max(inst.k0, 2, math.ceil(r))
    if lo >= horizon:
        raise AnalysisError("horizon too short to certify")
    kk = np.arange(lo, horizon, dtype=float)
    log_ratio = -p * np.log1p(1.0 / kk) + tau * np.log(np.log(kk + 1.0) / np.log(kk))
    drift = r + kk * np.expm1(log_ratio)
    bad = np.nonzero(drift < 0.5 * (r - p))[0]
    K = lo if bad.size == 0 else int(kk[bad[-1]]) + 1

    def shape(k):
        return np.log(k) ** tau / k**p

    y_K = Y[K - inst.k0]
    A = max(2.0 * d / (r - p), float(y_K / shape(float(K)))) + 1.0
    tail = ks >= K
    ratio = Y[tail] / shape(ks[tail])
    holds = bool(np.all(ratio <= A))
    return ChungCertificate(Y, A, K, holds, float(ratio.max()))


@dataclass(frozen=True)
class ChungCertificate:
    trajectory: np.ndarray
    A: float
    K: int
    holds: bool
    tightest_A: float

    def __iter__(self):
        return iter((self.trajectory, self.A, self.K, self.holds))


@dataclass(frozen=True)
class TailTestResult:
    violation_rate: float
    bound: float
    threshold: float
    passed: bool
    per_player: np.ndarray

    def __iter__(self):
        return iter((self.violation_rate, self.bound, self.passed))


def tail_bound_test(game, x, noise: NoiseModel, m: int, gamma: float, trials: int, rng: RngStream,
                    nu: float | None = None, chunk: int = 1000) -> TailTestResult:
    """Empirical frequency of ``|MoM - F_i(x)| > threshold`` at a fixed profile.

    Each player is estimated ``trials`` times.  The reported rate is the
    worst player's; the test passes when it is at most
    ``2 gamma + 3 sqrt(2 gamma (1 - 2 gamma) / trials)``.  The threshold uses
    the gradient-noise moment bound ``noise_gain * nu``.
    """
    if trials < 1000:
        raise AnalysisError("need at least 1000 trials")
    plan = plan_blocks(m, gamma)
    if not plan.theory_valid:
        raise AnalysisError(f"m={m} is below the certified sample size for gamma={gamma}")
    gain = getattr(game, "noise_gain", 1.0)
    nu_grad = gain * (noise.nu if nu is None else nu)
    threshold = deviation_threshold(ThresholdParams(noise.delta, nu_grad), m, gamma)
    x = np.asarray(x, dtype=float)
    truth = game.mean_gradient(x)
    n = game.n_players
    hits = np.zeros(n, dtype=np.int64)
    done = 0
    while done < trials:
        batch = min(chunk, trials - done)
        xi = draw_noise(noise, rng, (n, batch, m))
        grads = game.sample_gradients(x, xi.reshape(n, batch * m)).reshape(n, batch, m)
        est, _ = mom_estimate(grads, plan)
        hits += np.count_nonzero(np.abs(est - truth[:, None]) > threshold, axis=1)
        done += batch
    rates = hits / trials
    p2 = 2.0 * gamma
    bound = p2 + 3.0 * math.sqrt(max(p2 * (1.0 - p2), 0.0) / trials)
    worst = float(rates.max())
    return TailTestResult(worst, bound, threshold, worst <= bound, rates)
