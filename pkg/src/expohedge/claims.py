"""Terminal claims paid as a function of the final market state.

A claim's payoff is the cash the agent *receives* at maturity. A liability is
written as the negation of the claim, e.g. ``-put:1.0`` for a written put.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import ConfigError, DimensionMismatch

_CUSTOM: dict[str, Callable[[np.ndarray], np.ndarray]] = {}


def register_payoff(name: str, func: Callable[[np.ndarray], np.ndarray]) -> None:
    """Make ``custom:<name>`` available. ``func`` maps states (..., d) to (...)."""
    _CUSTOM[name] = func


@dataclass(frozen=True)
class Claim:
    kind: str
    strike: float | None = None
    inner: "Claim | None" = None
    name: str | None = None

    def __post_init__(self):
        if self.kind not in ("zero", "put", "call", "negated", "custom"):
            raise ConfigError(f"unknown claim kind {self.kind!r}")
        if self.kind in ("put", "call") and self.strike is None:
            raise ConfigError(f"{self.kind} claim needs a strike")
        if self.kind == "negated" and self.inner is None:
            raise ConfigError("negated claim needs an inner claim")

    def __neg__(self) -> "Claim":
        return negated(self)

    def __str__(self) -> str:
        if self.kind == "zero":
            return "zero"
        if self.kind == "negated":
            return f"-{self.inner}"
        if self.kind == "custom":
            return f"custom:{self.name}"
        return f"{self.kind}:{self.strike:g}"

    @property
    def is_zero(self) -> bool:
        return self.kind == "zero" or (self.kind == "negated" and self.inner.is_zero)


ZERO = Claim("zero")


def put(strike: float) -> Claim:
    return Claim("put", strike=float(strike))


def call(strike: float) -> Claim:
    return Claim("call", strike=float(strike))


def negated(claim: Claim) -> Claim:
    return Claim("negated", inner=claim)


def custom(name: str) -> Claim:
    return Claim("custom", name=name)


def parse_claim(text: str) -> Claim:
    """Parse ``zero``, ``put:K``, ``call:K``, ``custom:name`` with optional leading ``-``."""
    s = text.strip()
    if s.startswith("-"):
        return negated(parse_claim(s[1:]))
    kind, _, arg = s.partition(":")
    kind = kind.strip().lower()
    if kind == "zero" and not arg:
        return ZERO
    if kind in ("put", "call"):
        try:
            strike = float(arg)
        except ValueError:
            raise ConfigError(f"bad strike in claim {text!r}") from None
        return Claim(kind, strike=strike)
    if kind == "custom" and arg:
        return custom(arg.strip())
    raise ConfigError(f"cannot parse claim {text!r}")


def payoff(claim: Claim, terminal_state, d: int | None = None):
    """Cash received at maturity, vectorised over leading axes of ``terminal_state``.

    ``terminal_state`` has the asset index last. Pass ``d`` to check it
    against the market dimension.
    """
    z = np.asarray(terminal_state, dtype=float)
    scalar = z.ndim <= 1
    z = np.atleast_1d(z)
    if d is not None and z.shape[-1] != d:
        raise DimensionMismatch(f"state has {z.shape[-1]} components, market has {d}")
    s1 = z[..., 0]
    if claim.kind == "zero":
        out = np.zeros_like(s1)
    elif claim.kind == "put":
        out = np.maximum(claim.strike - s1, 0.0)
    elif claim.kind == "call":
        out = np.maximum(s1 - claim.strike, 0.0)
    elif claim.kind == "negated":
        out = -payoff(claim.inner, z)
    else:
        try:
            func = _CUSTOM[claim.name]
        except KeyError:
            raise ConfigError(f"no payoff registered under {claim.name!r}") from None
        out = np.asarray(func(z), dtype=float)
    return float(out) if scalar else out
