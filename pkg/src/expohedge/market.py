"""Exact-step simulation of a discounted geometric Brownian motion market."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from .errors import InvalidParams, SingularSigma

#: Paths are generated in fixed-size blocks, each with its own Philox stream
#: keyed by (seed, block index). Results do not depend on how blocks are
#: scheduled, and a path set of size N is a prefix of any larger one.
BLOCK_SIZE = 4096
RNG_ALGORITHM = f"philox4x64 via SeedSequence([seed, block]), block={BLOCK_SIZE}"


def _as_vector(x, name: str) -> np.ndarray:
    v = np.atleast_1d(np.asarray(x, dtype=float))
    if v.ndim != 1:
        raise InvalidParams(f"{name} must be a scalar or a vector")
    return v


@dataclass(frozen=True)
class MarketParams:
    """Coefficients of a d-asset GBM market in discounted units.

    Scalars are accepted for the single asset case. ``sigma`` is the d x d
    volatility matrix; a scalar means ``[[sigma]]``.
    """

    mu: np.ndarray
    sigma: np.ndarray
    r: float
    s0: np.ndarray
    T: float
    K: int

    def __post_init__(self):
        mu = _as_vector(self.mu, "mu")
        d = mu.size
        sigma = np.asarray(self.sigma, dtype=float)
        if sigma.ndim == 0:
            sigma = sigma.reshape(1, 1)
        s0 = _as_vector(self.s0, "s0")
        if s0.size == 1 and d > 1:
            s0 = np.full(d, s0[0])
        if d < 1 or sigma.shape != (d, d) or s0.shape != (d,):
            raise InvalidParams(
                f"shape mismatch: mu {mu.shape}, sigma {sigma.shape}, s0 {s0.shape}"
            )
        if not (isinstance(self.K, (int, np.integer)) and self.K >= 1):
            raise InvalidParams(f"K must be a positive integer, got {self.K!r}")
        if not self.T > 0:
            raise InvalidParams(f"T must be positive, got {self.T}")
        if np.any(s0 <= 0):
            raise InvalidParams("initial prices must be positive")
        if not (np.all(np.isfinite(mu)) and np.all(np.isfinite(sigma)) and math.isfinite(self.r)):
            raise InvalidParams("non-finite market coefficient")
        for name, value in (("mu", mu), ("sigma", sigma), ("s0", s0)):
            value.setflags(write=False)
            object.__setattr__(self, name, value)
        object.__setattr__(self, "r", float(self.r))
        object.__setattr__(self, "T", float(self.T))
        object.__setattr__(self, "K", int(self.K))

    @property
    def d(self) -> int:
        return self.mu.size

    @property
    def dt(self) -> float:
        return self.T / self.K

    @cached_property
    def market_price_of_risk(self) -> np.ndarray:
        return market_price_of_risk(self)

    def describe(self) -> dict:
        return {
            "mu": self.mu.tolist(),
            "sigma": self.sigma.tolist(),
            "r": self.r,
            "s0": self.s0.tolist(),
            "T": self.T,
            "K": self.K,
        }


@dataclass(frozen=True)
class SimConfig:
    n_paths: int
    seed: int = 0
    antithetic: bool = False

    def __post_init__(self):
        if not (isinstance(self.n_paths, (int, np.integer)) and self.n_paths >= 2):
            raise InvalidParams(f"n_paths must be an integer >= 2, got {self.n_paths!r}")
        if not (0 <= int(self.seed) < 2**64):
            raise InvalidParams("seed must fit in an unsigned 64-bit integer")


@dataclass(frozen=True)
class PathSet:
    """Simulated discounted prices ``states[i, k, j]`` and their increments.

    ``increments[i, k]`` is the price change over step k+1, i.e.
    ``states[i, k + 1] - states[i, k]``. Arrays are read-only.
    """

    states: np.ndarray
    increments: np.ndarray = field(repr=False)
    params: MarketParams | None = field(default=None, repr=False)
    seed: int | None = None
    antithetic: bool = False

    def __post_init__(self):
        states = np.array(self.states, dtype=float)
        if states.ndim == 2:
            states = states[:, :, None]
        if states.ndim != 3 or states.shape[1] < 2:
            raise InvalidParams("states must have shape (N, K+1, d) with K >= 1")
        increments = np.diff(states, axis=1)
        states.setflags(write=False)
        increments.setflags(write=False)
        object.__setattr__(self, "states", states)
        object.__setattr__(self, "increments", increments)

    @classmethod
    def from_states(cls, states, params=None) -> "PathSet":
        return cls(states=states, increments=None, params=params)

    @property
    def n_paths(self) -> int:
        return self.states.shape[0]

    @property
    def n_steps(self) -> int:
        return self.states.shape[1] - 1

    @property
    def d(self) -> int:
        return self.states.shape[2]

    def to_csv(self, path) -> None:
        """Write ``path,step,asset,price`` rows, prices to 12 significant digits."""
        n, k1, d = self.states.shape
        i, k, j = np.meshgrid(np.arange(n), np.arange(k1), np.arange(d), indexing="ij")
        table = np.column_stack([i.ravel(), k.ravel(), j.ravel(), self.states.ravel()])
        with open(path, "w", newline="") as fh:
            fh.write("path,step,asset,price\n")
            np.savetxt(fh, table, fmt=["%d", "%d", "%d", "%.12g"], delimiter=",")


def _check_sigma(sigma: np.ndarray) -> None:
    if not np.linalg.cond(sigma) < 1.0 / np.finfo(float).eps:
        raise SingularSigma("volatility matrix is singular")


def market_price_of_risk(params: MarketParams) -> np.ndarray:
    """Return ``sigma^{-1} (mu - r)``."""
    sigma = params.sigma
    _check_sigma(sigma)
    try:
        return np.linalg.solve(sigma, params.mu - params.r)
    except np.linalg.LinAlgError as exc:
        raise SingularSigma("volatility matrix is singular") from exc


def _block_normals(seed: int, block: int, n: int, K: int, d: int, antithetic: bool) -> np.ndarray:
    rng = np.random.Generator(np.random.Philox(np.random.SeedSequence([int(seed), block])))
    if not antithetic:
        return rng.standard_normal((n, K, d))
    half = rng.standard_normal(((n + 1) // 2, K, d))
    xi = np.empty((2 * half.shape[0], K, d))
    xi[0::2] = half
    xi[1::2] = -half
    return xi[:n]


def simulate_gbm(params: MarketParams, cfg: SimConfig) -> PathSet:
    """Simulate ``cfg.n_paths`` paths with the exact lognormal transition.

    Antithetic pairs are paths (2m, 2m+1).
    """
    _check_sigma(params.sigma)
    K, d, dt = params.K, params.d, params.dt
    sigma = params.sigma
    drift = (params.mu - params.r - 0.5 * np.sum(sigma**2, axis=1)) * dt
    vol = math.sqrt(dt) * sigma

    n = cfg.n_paths
    states = np.empty((n, K + 1, d))
    states[:, 0, :] = params.s0
    for block, start in enumerate(range(0, n, BLOCK_SIZE)):
        stop = min(start + BLOCK_SIZE, n)
        xi = _block_normals(cfg.seed, block, stop - start, K, d, cfg.antithetic)
        log_steps = drift + xi @ vol.T
        states[start:stop, 1:, :] = params.s0 * np.exp(np.cumsum(log_steps, axis=1))
    return PathSet(states=states, increments=None, params=params,
                   seed=int(cfg.seed), antithetic=cfg.antithetic)
