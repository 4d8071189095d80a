"""Backward-induction learning of exponential-utility hedging rules.

The learner walks k = K, ..., 2 fitting the rule used over step k as a
function of the state at time k-1, then fits a constant first step. The
per-path exponent accumulated from later steps (the carry) starts at
``-gamma * payoff`` and absorbs each fitted step's gains before moving on.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from . import optimizer as opt
from .basis import BasisSet, Standardizer, make_basis
from .claims import ZERO, Claim, parse_claim, payoff
from .errors import ConfigError, DegenerateData, DimensionMismatch, UnboundedStep
from .market import PathSet

logger = logging.getLogger(__name__)

FORMAT_TAG = "expohedge-strategy/1"


@dataclass(frozen=True)
class StepRule:
    """Dollar allocation ``standardizer.apply(f(Z)) @ coefficients.T`` per asset."""

    coefficients: np.ndarray  # (d, R)
    standardizer: Standardizer


@dataclass
class StrategyTable:
    h1: np.ndarray  # shares held over the first step
    rules: list[StepRule]  # rules[k - 2] is used over step k, k = 2..K
    basis: BasisSet
    gamma: float
    claim: Claim = ZERO
    log_psi1: float = 0.0
    diagnostics: list[opt.OptimResult] = field(default_factory=list, repr=False)

    @property
    def K(self) -> int:
        return len(self.rules) + 1

    @property
    def d(self) -> int:
        return self.h1.size

    @property
    def certainty_equivalent(self) -> float:
        """``(1/gamma) log`` of the optimal first-step objective."""
        return self.log_psi1 / self.gamma

    @property
    def psi1(self) -> float:
        return math.exp(self.log_psi1)

    def dollars(self, k: int, prev_states: np.ndarray) -> np.ndarray:
        prev_states = np.atleast_2d(prev_states)
        if k == 1:
            return np.broadcast_to(self.h1 * prev_states[0], prev_states.shape).copy()
        rule = self.rules[k - 2]
        f = rule.standardizer.apply(self.basis.evaluate(prev_states))
        return f @ rule.coefficients.T

    def shares(self, k: int, prev_states: np.ndarray) -> np.ndarray:
        """Holdings over step k given states at time k-1, shape (N, d)."""
        prev_states = np.atleast_2d(prev_states)
        if k == 1:
            return np.broadcast_to(self.h1, prev_states.shape).copy()
        return self.dollars(k, prev_states) / prev_states

    def raw_coefficients(self, k: int) -> np.ndarray:
        """Coefficients of step k expressed on unstandardised features."""
        rule = self.rules[k - 2]
        c = rule.coefficients / rule.standardizer.scale
        c = c.copy()
        c[:, 0] -= c[:, 1:] @ rule.standardizer.mean[1:]
        return c


@dataclass(frozen=True)
class ConstantStrategy:
    """Fixed share holdings over every step."""

    holdings: np.ndarray
    claim: Claim = ZERO

    def shares(self, k: int, prev_states: np.ndarray) -> np.ndarray:
        prev_states = np.atleast_2d(prev_states)
        return np.broadcast_to(np.asarray(self.holdings, dtype=float), prev_states.shape).copy()


def learn(
    paths: PathSet,
    claim: Claim,
    basis: BasisSet,
    gamma: float = 1.0,
    opts: opt.SolverOptions | None = None,
) -> StrategyTable:
    """Fit a hedging strategy for an agent receiving ``claim`` at maturity.

    Raises ``UnboundedStep`` when some step has no minimiser on the sample and
    ``DegenerateData`` when the solver fails to converge.
    """
    opts = opts or opt.SolverOptions()
    if basis.d != paths.d:
        raise DimensionMismatch(f"basis built for {basis.d} assets, paths have {paths.d}")
    S, dS = paths.states, paths.increments
    K = paths.n_steps
    carry = -gamma * payoff(claim, S[:, K, :])
    rules: list[StepRule] = []
    diagnostics: list[opt.OptimResult] = []
    warm = None
    for k in range(K, 1, -1):
        prev = S[:, k - 1, :]
        raw = basis.evaluate(prev)
        std = Standardizer.fit(raw)
        data = opt.ObjectiveData(std.apply(raw), dS[:, k - 1, :], carry, gamma, scale=prev)
        res = _solve(data, opts, warm, k)
        rules.append(StepRule(res.coefficients, std))
        diagnostics.append(res)
        carry = data.exponents(res.coefficients)
        warm = res.coefficients
    rules.reverse()
    diagnostics.reverse()

    prev = S[:, 0, :]
    data = opt.ObjectiveData(np.ones((paths.n_paths, 1)), dS[:, 0, :], carry, gamma, scale=prev)
    x0 = None if warm is None else warm[:, :1]
    res = _solve(data, opts, x0, 1)
    diagnostics.insert(0, res)
    h1 = res.coefficients[:, 0] / prev[0]
    logger.info("learned K=%d, N=%d, B0=%.6g", K, paths.n_paths, res.log_objective / gamma)
    return StrategyTable(
        h1=h1,
        rules=rules,
        basis=basis,
        gamma=float(gamma),
        claim=claim,
        log_psi1=res.log_objective,
        diagnostics=diagnostics,
    )


def _solve(data, opts, x0, k):
    res = opt.minimize(data, opts, x0=x0)
    if res.status == opt.UNBOUNDED:
        raise UnboundedStep(k)
    if not res.ok:
        raise DegenerateData(
            f"solver did not converge at step {k} ({res.status}, gradient {res.gradient_norm:.3g})"
        )
    return res


def smooth(table: StrategyTable, alpha: float) -> StrategyTable:
    """Exponentially smooth the raw-frame coefficients across steps 2..K.

    ``alpha = 1`` returns an equivalent table. The certainty equivalent is not
    recomputed and refers to the unsmoothed strategy.
    """
    if not 0 < alpha <= 1:
        raise ConfigError("smoothing weight must lie in (0, 1]")
    rules = []
    acc = None
    R = table.basis.size
    for k in range(2, table.K + 1):
        raw = table.raw_coefficients(k)
        acc = raw if acc is None else alpha * raw + (1 - alpha) * acc
        rules.append(StepRule(acc.copy(), Standardizer.identity(R)))
    return replace(table, rules=rules)


def gains(strategy, paths: PathSet) -> np.ndarray:
    """Trading gains ``sum_k h_k(Z_{k-1}) . dS_k`` per path."""
    S, dS = paths.states, paths.increments
    total = np.zeros(paths.n_paths)
    for k in range(1, paths.n_steps + 1):
        h = strategy.shares(k, S[:, k - 1, :])
        if h.shape != dS[:, k - 1, :].shape:
            raise DimensionMismatch(f"strategy returned shape {h.shape} at step {k}")
        total += np.einsum("ij,ij->i", h, dS[:, k - 1, :])
    return total


def apply(strategy, paths: PathSet, claim: Claim | None = None) -> np.ndarray:
    """Terminal P&L per path: trading gains plus the claim payoff received.

    ``claim`` defaults to the claim the strategy was built for.
    """
    if getattr(strategy, "d", paths.d) != paths.d:
        raise DimensionMismatch("strategy and paths disagree on asset count")
    claim = getattr(strategy, "claim", ZERO) if claim is None else claim
    if getattr(strategy, "K", paths.n_steps) != paths.n_steps:
        raise DimensionMismatch("strategy and paths disagree on step count")
    return gains(strategy, paths) + payoff(claim, paths.states[:, -1, :], paths.d)


# -- serialisation ---------------------------------------------------------

def save_strategy(table: StrategyTable, path) -> None:
    """CSV with ``#`` metadata lines then ``step,asset,feature,coefficient`` rows.

    Step 1 rows hold share counts. Rows of later steps hold coefficients on
    standardised features; their transforms use asset labels ``mean`` and
    ``scale``. Floats are written with 17 significant digits.
    """
    g = "{:.17g}".format
    lines = [
        f"# format = {FORMAT_TAG}",
        f"# basis = {table.basis.descriptor}",
        "# s0 = " + " ".join(g(v) for v in table.basis.s0),
        f"# gamma = {g(table.gamma)}",
        f"# claim = {table.claim}",
        f"# K = {table.K}",
        f"# d = {table.d}",
        f"# log_psi1 = {g(table.log_psi1)}",
        f"# certainty_equivalent = {g(table.certainty_equivalent)}",
        "# status = " + " ".join(r.status for r in table.diagnostics),
        "step,asset,feature,coefficient",
    ]
    for j, h in enumerate(table.h1):
        lines.append(f"1,{j},0,{g(h)}")
    for k, rule in enumerate(table.rules, start=2):
        d, R = rule.coefficients.shape
        for j in range(d):
            for r in range(R):
                lines.append(f"{k},{j},{r},{g(rule.coefficients[j, r])}")
        for r in range(R):
            lines.append(f"{k},mean,{r},{g(rule.standardizer.mean[r])}")
            lines.append(f"{k},scale,{r},{g(rule.standardizer.scale[r])}")
    Path(path).write_text("\n".join(lines) + "\n")


def load_strategy(path) -> StrategyTable:
    meta = {}
    rows = []
    for line in Path(path).read_text().splitlines():
        if line.startswith("#"):
            key, _, value = line[1:].partition("=")
            meta[key.strip()] = value.strip()
        elif line and not line.startswith("step,"):
            rows.append(line.split(","))
    if meta.get("format") != FORMAT_TAG:
        raise ConfigError(f"{path}: not a strategy file ({meta.get('format')!r})")
    K, d = int(meta["K"]), int(meta["d"])
    basis = make_basis(meta["basis"], [float(v) for v in meta["s0"].split()])
    R = basis.size
    h1 = np.zeros(d)
    coeffs = np.zeros((K + 1, d, R))
    means = np.zeros((K + 1, R))
    scales = np.ones((K + 1, R))
    for step, asset, feat, value in rows:
        k, r, v = int(step), int(feat), float(value)
        if k == 1:
            h1[int(asset)] = v
        elif asset == "mean":
            means[k, r] = v
        elif asset == "scale":
            scales[k, r] = v
        else:
            coeffs[k, int(asset), r] = v
    rules = [StepRule(coeffs[k], Standardizer(means[k], scales[k])) for k in range(2, K + 1)]
    return StrategyTable(
        h1=h1,
        rules=rules,
        basis=basis,
        gamma=float(meta["gamma"]),
        claim=parse_claim(meta["claim"]),
        log_psi1=float(meta["log_psi1"]),
    )
