"""Feature maps spanning the space in which allocation rules are learned.

Features are functions of moneyness ``m = S / S0``. A rule evaluates to a
dollar amount per asset, ``a_j(Z) = sum_r c_jr f_r(m)``, so the share holding
is ``a_j / S_j``. The constant feature always comes first.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import ConfigError, NonFiniteFeature

# name -> (number of features excluding the constant, map from m (..., d) to (..., R-1))
_CUSTOM: dict[str, tuple[int, Callable[[np.ndarray], np.ndarray]]] = {}


def register_basis(name: str, n_features: int, func: Callable[[np.ndarray], np.ndarray]) -> None:
    """Register ``custom:<name>``; ``func`` returns the non-constant features only."""
    _CUSTOM[name] = (int(n_features), func)


@dataclass(frozen=True)
class BasisSet:
    descriptor: str
    s0: np.ndarray = field(repr=False)

    def __post_init__(self):
        s0 = np.atleast_1d(np.asarray(self.s0, dtype=float))
        object.__setattr__(self, "s0", s0)
        kind, _, arg = self.descriptor.partition(":")
        if kind == "poly":
            try:
                deg = int(arg)
            except ValueError:
                raise ConfigError(f"bad basis descriptor {self.descriptor!r}") from None
            if deg < 0:
                raise ConfigError("polynomial degree must be >= 0")
            object.__setattr__(self, "_degree", deg)
        elif kind == "custom":
            if arg not in _CUSTOM:
                raise ConfigError(f"no basis registered under {arg!r}")
        else:
            raise ConfigError(f"bad basis descriptor {self.descriptor!r}")

    @property
    def d(self) -> int:
        return self.s0.size

    @property
    def size(self) -> int:
        """Number of features R, constant included."""
        kind, _, arg = self.descriptor.partition(":")
        if kind == "poly":
            return 1 + self.d * self._degree
        return 1 + _CUSTOM[arg][0]

    def _raw(self, states: np.ndarray) -> np.ndarray:
        m = states / self.s0
        kind, _, arg = self.descriptor.partition(":")
        if kind == "poly":
            # column order: 1, m_1, ..., m_d, m_1^2, ..., m_d^2, ...
            cols = [np.ones(m.shape[:-1] + (1,))]
            cols += [m**p for p in range(1, self._degree + 1)]
            return np.concatenate(cols, axis=-1)
        _, func = _CUSTOM[arg]
        extra = np.asarray(func(m), dtype=float).reshape(m.shape[:-1] + (-1,))
        return np.concatenate([np.ones(m.shape[:-1] + (1,)), extra], axis=-1)

    def evaluate(self, state) -> np.ndarray:
        """Feature vector(s) for state(s) with the asset index last."""
        z = np.asarray(state, dtype=float)
        f = self._raw(np.atleast_1d(z))
        if not np.all(np.isfinite(f)):
            raise NonFiniteFeature(f"non-finite feature for basis {self.descriptor}")
        return f


def make_basis(descriptor: str, s0) -> BasisSet:
    return BasisSet(descriptor.strip(), np.asarray(s0, dtype=float))


def evaluate(basis: BasisSet, state) -> np.ndarray:
    return basis.evaluate(state)


def features_at(basis: BasisSet, paths, k: int) -> np.ndarray:
    """Feature matrix (N, R) of the states at time index k."""
    return basis.evaluate(paths.states[:, k, :])


@dataclass(frozen=True)
class FeatureMatrix:
    """Features ``values[k, i, r]`` for k = 0..K-1, the decision times.

    Row k = 0 is identical across paths, which is why the first allocation
    is learned over constants only.
    """

    values: np.ndarray
    descriptor: str

    def at(self, k: int) -> np.ndarray:
        return self.values[k]


def precompute(basis: BasisSet, paths) -> FeatureMatrix:
    values = basis.evaluate(paths.states[:, :-1, :]).transpose(1, 0, 2).copy()
    values.setflags(write=False)
    return FeatureMatrix(values, basis.descriptor)


@dataclass(frozen=True)
class Standardizer:
    """Affine map ``(f - mean) / scale`` on columns 1.. ; column 0 untouched."""

    mean: np.ndarray
    scale: np.ndarray

    @classmethod
    def identity(cls, R: int) -> "Standardizer":
        return cls(np.zeros(R), np.ones(R))

    @classmethod
    def fit(cls, features: np.ndarray) -> "Standardizer":
        R = features.shape[1]
        mean = np.zeros(R)
        scale = np.ones(R)
        if R > 1:
            mean[1:] = features[:, 1:].mean(axis=0)
            sd = features[:, 1:].std(axis=0)
            # constant columns stay unscaled; the optimizer's ridge handles them
            scale[1:] = np.where(sd > 0, sd, 1.0)
        return cls(mean, scale)

    def apply(self, features: np.ndarray) -> np.ndarray:
        return (features - self.mean) / self.scale
