"""Stochastic games with scalar actions on a box.

A game is described by its pseudo-gradient ``F(x)``, the stacked partial
gradients of every player's expected cost with respect to its own action,
together with a per-sample gradient oracle.  The affine family
``F(x) = A x + r`` admits exact analysis (equilibrium, monotonicity modulus,
Lipschitz constant) and hosts the 15-player benchmark game.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Callable

import numpy as np


class GameError(ValueError):
    pass


@dataclass(frozen=True)
class BoxConstraint:
    """Product of closed intervals ``[lower_i, upper_i]``."""

    lower: np.ndarray
    upper: np.ndarray

    def __post_init__(self):
        lower = np.atleast_1d(np.asarray(self.lower, dtype=float)).copy()
        upper = np.atleast_1d(np.asarray(self.upper, dtype=float)).copy()
        if lower.shape != upper.shape or lower.ndim != 1:
            raise GameError("lower and upper must be 1-d vectors of equal length")
        if lower.size == 0:
            raise GameError("box must have at least one coordinate")
        if not (np.all(np.isfinite(lower)) and np.all(np.isfinite(upper))):
            raise GameError("box bounds must be finite")
        if np.any(lower > upper):
            raise GameError("lower bound exceeds upper bound")
        lower.setflags(write=False)
        upper.setflags(write=False)
        object.__setattr__(self, "lower", lower)
        object.__setattr__(self, "upper", upper)

    @classmethod
    def uniform(cls, n: int, lower: float, upper: float) -> "BoxConstraint":
        return cls(np.full(n, float(lower)), np.full(n, float(upper)))

    @property
    def dim(self) -> int:
        return self.lower.size

    def contains(self, x, atol: float = 0.0) -> bool:
        x = np.asarray(x, dtype=float)
        return bool(np.all(x >= self.lower - atol) and np.all(x <= self.upper + atol))

    def corners(self) -> np.ndarray:
        """All ``2**dim`` extreme points, one per row."""
        picks = np.array(list(itertools.product((0, 1), repeat=self.dim)), dtype=bool)
        return np.where(picks, self.upper, self.lower)


def project(x, box: BoxConstraint) -> np.ndarray:
    """Euclidean projection onto ``box`` (componentwise clamp)."""
    x = np.asarray(x, dtype=float)
    if x.shape[-1:] != (box.dim,):
        raise GameError(f"dimension mismatch: got {x.shape}, box has {box.dim} coordinates")
    return np.minimum(np.maximum(x, box.lower), box.upper)


@dataclass(frozen=True)
class GameSpec:
    """A game given by arbitrary oracles.

    ``sample_gradient(i, x, xi)`` returns the scalar ``d f_i(x, xi) / d x_i``
    and ``mean_gradient(x)`` its expectation over ``xi`` for every player.
    """

    n_players: int
    constraint: BoxConstraint
    mean_gradient: Callable[[np.ndarray], np.ndarray]
    sample_gradient: Callable[[int, np.ndarray, float], float]
    noise_gain: float = 1.0

    def __post_init__(self):
        if self.n_players < 1:
            raise GameError("n_players must be positive")
        if self.constraint.dim != self.n_players:
            raise GameError("constraint dimension must equal n_players")

    def sample_gradients(self, x, xi) -> np.ndarray:
        """Per-sample gradients for a noise array of shape ``(n_players, m)``."""
        xi = np.asarray(xi, dtype=float)
        out = np.empty_like(xi)
        for i in range(self.n_players):
            for j in range(xi.shape[1]):
                out[i, j] = self.sample_gradient(i, x, xi[i, j])
        return out


@dataclass(frozen=True)
class AffineGame:
    """Game with pseudo-gradient ``F(x) = matrix @ x + offset``.

    Per-sample gradients are ``F_i(x) + noise_gain * xi_i``: the noise enters
    additively and does not depend on the action profile.
    """

    matrix: np.ndarray
    offset: np.ndarray
    constraint: BoxConstraint
    noise_gain: float = 1.0
    _sym: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        A = np.array(self.matrix, dtype=float)
        r = np.array(self.offset, dtype=float).ravel()
        n = r.size
        if A.shape != (n, n):
            raise GameError(f"matrix must be {n}x{n}, got {A.shape}")
        if self.constraint.dim != n:
            raise GameError("constraint dimension must equal number of players")
        A.setflags(write=False)
        r.setflags(write=False)
        object.__setattr__(self, "matrix", A)
        object.__setattr__(self, "offset", r)
        object.__setattr__(self, "_sym", 0.5 * (A + A.T))

    @property
    def n_players(self) -> int:
        return self.offset.size

    @property
    def symmetric_part(self) -> np.ndarray:
        return self._sym

    def mean_gradient(self, x) -> np.ndarray:
        return self.matrix @ np.asarray(x, dtype=float) + self.offset

    def sample_gradient(self, i: int, x, xi: float) -> float:
        x = np.asarray(x, dtype=float)
        return float(self.matrix[i] @ x + self.offset[i] + self.noise_gain * xi)

    def sample_gradients(self, x, xi) -> np.ndarray:
        xi = np.asarray(xi, dtype=float)
        return self.mean_gradient(x)[:, None] + self.noise_gain * xi

    def as_spec(self) -> GameSpec:
        return GameSpec(
            self.n_players, self.constraint, self.mean_gradient, self.sample_gradient, self.noise_gain
        )


@dataclass(frozen=True)
class GameAnalysis:
    mu: float
    lipschitz: float
    grad_bound: float
    diameter_sq: float


def benchmark_game(n_players: int = 15) -> AffineGame:
    """The benchmark game with costs

        f_i(x, xi) = (x_i - 0.5 i)^2 + (0.05 i (sum_j x_j + 2) + 2 xi_i) x_i,

    players ``i = 1..n`` and actions in ``[0, 5]``.
    """
    if n_players < 1:
        raise GameError("n_players must be positive")
    idx = np.arange(1, n_players + 1, dtype=float)
    A = np.repeat((0.05 * idx)[:, None], n_players, axis=1)
    A[np.diag_indices(n_players)] = 2.0 + 0.1 * idx
    r = -idx + 0.1 * idx
    return AffineGame(A, r, BoxConstraint.uniform(n_players, 0.0, 5.0), noise_gain=2.0)


def diagonal_game(n_players: int, a: float, r: float, lower: float = 0.0, upper: float = 5.0) -> AffineGame:
    """Decoupled game ``F(x) = a x + r`` (all players identical)."""
    return AffineGame(
        a * np.eye(n_players),
        np.full(n_players, float(r)),
        BoxConstraint.uniform(n_players, lower, upper),
    )


def strong_monotonicity(game: AffineGame) -> float:
    """Smallest eigenvalue of the symmetric part of the matrix."""
    try:
        eig = np.linalg.eigvalsh(game.symmetric_part)
    except np.linalg.LinAlgError as exc:
        raise GameError(f"eigensolve failed: {exc}") from exc
    return float(eig[0])


def solve_equilibrium(game: AffineGame, tol: float = 1e-10, max_iter: int = 10**6) -> np.ndarray:
    """Unique Nash equilibrium of a strongly monotone affine game.

    The unconstrained solution of ``A x = -r`` is returned when it lies in the
    box; otherwise a projected fixed-point iteration
    ``x <- P(x - theta F(x))`` with ``theta = mu / L**2`` is run until
    successive iterates differ by less than ``tol``.
    """
    mu = strong_monotonicity(game)
    if mu <= 0:
        raise GameError(f"symmetric part is not positive definite (lambda_min = {mu:.3g})")
    box = game.constraint
    x = np.linalg.solve(game.matrix, -game.offset)
    if box.contains(x):
        return x
    L = float(np.linalg.norm(game.matrix, 2))
    theta = mu / L**2
    x = project(x, box)
    for _ in range(max_iter):
        x_new = project(x - theta * game.mean_gradient(x), box)
        if np.linalg.norm(x_new - x) < tol:
            return x_new
        x = x_new
    raise GameError(f"projected iteration did not converge within {max_iter} steps")


def analyze(game: AffineGame, max_corner_dim: int = 22) -> GameAnalysis:
    """Exact constants of an affine game over its box.

    ``grad_bound`` maximizes ``||A x + r||`` over the box corners, which is
    exact because the norm of an affine map is convex.  Corner enumeration is
    exponential, so it is refused beyond ``max_corner_dim`` players.
    """
    mu = strong_monotonicity(game)
    L = float(np.linalg.norm(game.matrix, 2))
    box = game.constraint
    if box.dim > max_corner_dim:
        raise GameError(f"corner enumeration limited to {max_corner_dim} players")
    best = 0.0
    picks = itertools.product((0, 1), repeat=box.dim)
    while True:
        chunk = np.array(list(itertools.islice(picks, 1 << 14)), dtype=bool)
        if chunk.size == 0:
            break
        corners = np.where(chunk, box.upper, box.lower)
        norms = np.linalg.norm(corners @ game.matrix.T + game.offset, axis=1)
        best = max(best, float(norms.max()))
    diameter_sq = float(np.sum((box.upper - box.lower) ** 2))
    return GameAnalysis(mu=mu, lipschitz=L, grad_bound=best, diameter_sq=diameter_sq)
