"""Certainty equivalents and indifference prices.

Conventions: a certainty equivalent ``B0`` here is ``(1/gamma) log`` of the
optimal objective for an agent carrying the liability ``-payoff_received``.
With exponential utility wealth drops out, so prices are plain differences.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import analytic
from .claims import Claim
from .errors import InvalidInput, MixedProvenance, NonNegativeUtility
from .market import MarketParams

BUYER = "buyer"
SELLER = "seller"


@dataclass(frozen=True)
class PricingResult:
    ce_claim: float
    ce_merton: float
    indifference_price: float
    side: str
    gamma: float
    provenance: dict = field(default_factory=dict)


def indifference_price(ce_claim: float, ce_merton: float, side: str = BUYER) -> float:
    """Seller: ``ce_claim - ce_merton``. Buyer: ``ce_merton - ce_claim``.

    ``ce_claim`` is for the liability the agent carries, which for a buyer is
    the negated claim.
    """
    if side == SELLER:
        return ce_claim - ce_merton
    if side == BUYER:
        return ce_merton - ce_claim
    raise InvalidInput(f"side must be {BUYER!r} or {SELLER!r}, got {side!r}")


def price_from_expected_utilities(u_merton: float, u_claim: float, gamma: float = 1.0) -> float:
    """Buyer's price implied by expected utilities ``E[-exp(-gamma X)]``."""
    if u_merton >= 0 or u_claim >= 0:
        raise NonNegativeUtility("expected exponential utilities must be negative")
    return (math.log(-u_merton) - math.log(-u_claim)) / gamma


def side_of(claim: Claim) -> tuple[str, Claim]:
    """Which side a received payoff puts the agent on, and the traded claim."""
    if claim.kind == "negated":
        return SELLER, claim.inner
    return BUYER, claim


def price_learned(claim_table, merton_table, **provenance) -> PricingResult:
    """Indifference price from two strategies learned on the same sample."""
    if claim_table.gamma != merton_table.gamma:
        raise MixedProvenance(f"gamma {claim_table.gamma} vs {merton_table.gamma}")
    if claim_table.K != merton_table.K or not np.array_equal(
        claim_table.basis.s0, merton_table.basis.s0
    ):
        raise MixedProvenance("certainty equivalents come from different markets")
    if not merton_table.claim.is_zero:
        raise MixedProvenance("reference strategy must be learned without a claim")
    side, _ = side_of(claim_table.claim)
    ce, ce0 = claim_table.certainty_equivalent, merton_table.certainty_equivalent
    return PricingResult(
        ce_claim=ce,
        ce_merton=ce0,
        indifference_price=indifference_price(ce, ce0, side),
        side=side,
        gamma=claim_table.gamma,
        provenance={"kind": "learned", "basis": claim_table.basis.descriptor, **provenance},
    )


def price_analytic(params: MarketParams, claim: Claim, gamma: float = 1.0) -> PricingResult:
    """Closed-form certainty equivalents and price in the complete GBM market."""
    ce0 = analytic.merton_certainty_equivalent(params, 0.0)
    received = analytic.bs_price_indifference_oracle(params, claim)
    ce = ce0 - received
    side, _ = side_of(claim)
    return PricingResult(
        ce_claim=ce,
        ce_merton=ce0,
        indifference_price=indifference_price(ce, ce0, side),
        side=side,
        gamma=float(gamma),
        provenance={"kind": "analytic"},
    )


def davis_price_complete(params: MarketParams, claim: Claim) -> float:
    """Marginal utility price; in the complete GBM market the risk-neutral value."""
    return analytic.bs_price_indifference_oracle(params, claim)


def davis_price(params, claim: Claim) -> float:
    if isinstance(params, MarketParams):
        return davis_price_complete(params, claim)
    raise NotImplementedError("Davis price in incomplete markets requires the minimal entropy measure")
