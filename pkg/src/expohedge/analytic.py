"""Closed-form results for the complete GBM market.

Everything is in discounted units: the discounted price is a martingale with
volatility ``sigma`` under the risk-neutral measure, so option formulas are
evaluated with zero rate on discounted spot and strike.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import ndtr

from .claims import ZERO, Claim
from .errors import InvalidInput
from .market import MarketParams, market_price_of_risk


@dataclass(frozen=True)
class BsQuote:
    price: float
    delta: float
    spot: float
    strike: float
    vol: float
    rate: float
    maturity: float


def _d1_d2(spot, strike, vol, rate, maturity):
    sq = vol * np.sqrt(maturity)
    d1 = (np.log(spot / strike) + (rate + 0.5 * vol * vol) * maturity) / sq
    return d1, d1 - sq


def _check(spot, strike, vol, maturity):
    if np.any(np.asarray(spot) <= 0) or strike <= 0 or vol <= 0 or maturity <= 0:
        raise InvalidInput("spot, strike, vol and maturity must be positive")


def bs_put(spot, strike, vol, rate, maturity) -> BsQuote:
    """Black-Scholes European put value and delta."""
    _check(spot, strike, vol, maturity)
    d1, d2 = _d1_d2(spot, strike, vol, rate, maturity)
    disc = math.exp(-rate * maturity)
    price = strike * disc * ndtr(-d2) - spot * ndtr(-d1)
    return BsQuote(float(price), float(ndtr(d1) - 1.0), spot, strike, vol, rate, maturity)


def bs_call(spot, strike, vol, rate, maturity) -> BsQuote:
    _check(spot, strike, vol, maturity)
    d1, d2 = _d1_d2(spot, strike, vol, rate, maturity)
    disc = math.exp(-rate * maturity)
    price = spot * ndtr(d1) - strike * disc * ndtr(d2)
    return BsQuote(float(price), float(ndtr(d1)), spot, strike, vol, rate, maturity)


def _asset_vol(params: MarketParams) -> float:
    return float(np.linalg.norm(params.sigma[0]))


def merton_holding(params: MarketParams, gamma: float, spot) -> np.ndarray:
    """Optimal Merton share holdings; the dollar amount per asset is constant."""
    cov = params.sigma @ params.sigma.T
    dollars = np.linalg.solve(cov, params.mu - params.r) / gamma
    return dollars / np.asarray(spot, dtype=float)


def merton_certainty_equivalent(params: MarketParams, t: float) -> float:
    if not 0 <= t <= params.T:
        raise InvalidInput(f"t={t} outside [0, {params.T}]")
    lam = market_price_of_risk(params)
    return 0.5 * float(lam @ lam) * (t - params.T)


def claim_delta(params: MarketParams, claim: Claim, spot1, t: float):
    """Replicating share holding in asset 1 for a received claim at time t < T."""
    tau = params.T - t
    if claim.kind == "zero":
        return np.zeros_like(np.asarray(spot1, dtype=float))
    if claim.kind == "negated":
        return -claim_delta(params, claim.inner, spot1, t)
    if claim.kind not in ("put", "call"):
        raise InvalidInput(f"no closed-form hedge for claim {claim}")
    if tau <= 0:
        raise InvalidInput("hedge ratio undefined at maturity")
    spot1 = np.asarray(spot1, dtype=float)
    d1, _ = _d1_d2(spot1, claim.strike, _asset_vol(params), 0.0, tau)
    return ndtr(d1) - 1.0 if claim.kind == "put" else ndtr(d1)


def theoretical_hedge(params: MarketParams, gamma: float, claim: Claim, state, t: float) -> np.ndarray:
    """Optimal holdings for an agent receiving ``claim``: Merton plus the offsetting hedge.

    For a bought put the second part is minus the put delta.
    """
    state = np.asarray(state, dtype=float)
    h = merton_holding(params, gamma, state)
    h = np.array(h, dtype=float, copy=True)
    h[..., 0] -= claim_delta(params, claim, state[..., 0], t)
    return h


def bs_price_indifference_oracle(params: MarketParams, claim: Claim) -> float:
    """Risk-neutral value of a received claim at time 0."""
    if claim.kind == "zero":
        return 0.0
    if claim.kind == "negated":
        return -bs_price_indifference_oracle(params, claim.inner)
    vol, s = _asset_vol(params), float(params.s0[0])
    if claim.kind == "put":
        return bs_put(s, claim.strike, vol, 0.0, params.T).price
    if claim.kind == "call":
        return bs_call(s, claim.strike, vol, 0.0, params.T).price
    raise InvalidInput(f"no closed-form price for claim {claim}")


@dataclass(frozen=True)
class MertonStrategy:
    params: MarketParams
    gamma: float = 1.0
    claim: Claim = ZERO

    def shares(self, k: int, prev_states: np.ndarray) -> np.ndarray:
        return merton_holding(self.params, self.gamma, np.atleast_2d(prev_states))


@dataclass(frozen=True)
class TheoreticalHedge:
    params: MarketParams
    claim: Claim
    gamma: float = 1.0

    def shares(self, k: int, prev_states: np.ndarray) -> np.ndarray:
        t = (k - 1) * self.params.dt
        return theoretical_hedge(self.params, self.gamma, self.claim, np.atleast_2d(prev_states), t)
