"""Line-based ``key = value`` run configuration."""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .basis import make_basis
from .claims import parse_claim
from .errors import ConfigError, ExpoHedgeError
from .market import MarketParams, SimConfig
from .optimizer import SolverOptions


def _floats(text: str) -> tuple[float, ...]:
    return tuple(float(v) for v in text.replace(",", " ").split())


def _bool(text: str) -> bool:
    t = text.strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


@dataclass
class RunConfig:
    # market, defaults are the weekly-rebalanced one-year example
    mu: tuple[float, ...] = (0.1,)
    sigma: tuple[float, ...] = (0.2,)  # row-major d x d
    r: float = 0.0
    s0: tuple[float, ...] = (1.0,)
    T: float = 1.0
    K: int = 50
    # problem
    claim: str = "put:1.0"
    basis: str = "poly:2"
    gamma: float = 1.0
    gammas: tuple[float, ...] = (0.25, 1.0, 4.0)
    # simulation
    n_paths: int = 100_000
    seed: int = 20240101
    eval_seed: int | None = None
    antithetic: bool = False
    in_sample: bool = False
    smoothing: float = 0.0  # 0 disables; otherwise the exponential weight
    hedge_path: int = 0
    # solver
    tol_g: float = 1e-8
    tol_x: float = 1e-10
    max_iter: int = 100
    coeff_cap: float = 1e3
    ridge: float = 1e-8
    # convergence study
    n_list: tuple[int, ...] = (1000, 10_000, 100_000)
    n_seeds: int = 5
    # output
    output: str = "out"

    _parsers = {
        "mu": _floats, "sigma": _floats, "s0": _floats, "gammas": _floats,
        "n_list": lambda t: tuple(int(float(v)) for v in t.replace(",", " ").split()),
        "r": float, "T": float, "gamma": float, "smoothing": float,
        "tol_g": float, "tol_x": float, "coeff_cap": float, "ridge": float,
        "K": int, "n_paths": int, "seed": int, "max_iter": int, "n_seeds": int,
        "hedge_path": int,
        "eval_seed": lambda t: None if t.strip().lower() in ("", "none") else int(t),
        "antithetic": _bool, "in_sample": _bool,
        "claim": str.strip, "basis": str.strip, "output": str.strip,
    }
    _aliases = {"N": "n_paths", "paths": "n_paths"}

    @classmethod
    def keys(cls) -> list[str]:
        return [f.name for f in dataclasses.fields(cls)]

    def set(self, key: str, value: str) -> None:
        key = self._aliases.get(key, key)
        if key not in self._parsers:
            raise ConfigError(f"unknown config key {key!r}")
        try:
            setattr(self, key, self._parsers[key](value))
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"bad value for {key}: {value!r} ({exc})") from None

    @classmethod
    def parse(cls, text: str, source: str = "<config>") -> "RunConfig":
        cfg = cls()
        for lineno, raw in enumerate(text.splitlines(), 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            key, sep, value = line.partition("=")
            if not sep:
                raise ConfigError(f"{source}:{lineno}: expected 'key = value'")
            cfg.set(key.strip(), value)
        cfg.validate()
        return cfg

    @classmethod
    def from_file(cls, path) -> "RunConfig":
        try:
            text = Path(path).read_text()
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from None
        return cls.parse(text, str(path))

    def to_text(self) -> str:
        lines = ["# fully resolved run configuration"]
        for key in self.keys():
            value = getattr(self, key)
            if isinstance(value, tuple):
                value = " ".join(repr(v) for v in value)
            elif isinstance(value, bool):
                value = str(value).lower()
            elif value is None:
                value = "none"
            elif isinstance(value, float):
                value = repr(value)
            lines.append(f"{key} = {value}")
        return "\n".join(lines) + "\n"

    # derived objects

    def market(self) -> MarketParams:
        d = len(self.mu)
        sigma = np.asarray(self.sigma, dtype=float)
        if sigma.size != d * d:
            raise ConfigError(f"sigma needs {d * d} entries for {d} assets")
        return MarketParams(self.mu, sigma.reshape(d, d), self.r, self.s0, self.T, self.K)

    def sim(self, n_paths: int | None = None, seed: int | None = None) -> SimConfig:
        return SimConfig(n_paths or self.n_paths, self.seed if seed is None else seed, self.antithetic)

    @property
    def resolved_eval_seed(self) -> int:
        return self.seed + 1 if self.eval_seed is None else self.eval_seed

    def solver(self) -> SolverOptions:
        return SolverOptions(self.tol_g, self.tol_x, self.max_iter, self.coeff_cap, self.ridge)

    def validate(self) -> None:
        try:
            params = self.market()
            self.sim()
            parse_claim(self.claim)
            make_basis(self.basis, params.s0)
        except ExpoHedgeError as exc:
            raise ConfigError(str(exc)) from None
        if self.gamma <= 0 or any(g <= 0 for g in self.gammas):
            raise ConfigError("risk aversion must be positive")
        if 1.0 not in self.gammas:
            raise ConfigError("gammas must include 1 (used for utility-implied prices)")
        if not 0 <= self.smoothing <= 1:
            raise ConfigError("smoothing must lie in [0, 1]")
        if not 0 <= self.hedge_path:
            raise ConfigError("hedge_path must be a path index")
        if self.n_seeds < 1 or any(n < 2 for n in self.n_list):
            raise ConfigError("convergence study needs n_seeds >= 1 and path counts >= 2")
