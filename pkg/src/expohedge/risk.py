"""Summary statistics and tail risk of a terminal P&L sample."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import EmptySample

DEFAULT_GAMMAS = (0.25, 1.0, 4.0)
DEFAULT_LEVELS = (0.90, 0.99)
QUANTILE_RULE = "lower order statistic at rank ceil((1-c) n), no interpolation"

REPORT_COLUMNS = ("case", "mean", "std", "u1", "u2", "u3", "var99", "var90", "cvar99", "cvar90")


@dataclass(frozen=True)
class RiskReport:
    n: int
    mean: float
    std: float
    gammas: tuple[float, ...]
    utilities: tuple[float, ...]  # E[-exp(-gamma X)], no 1/gamma factor
    levels: tuple[float, ...]
    var: tuple[float, ...]  # P&L quantiles, lower tail
    cvar: tuple[float, ...]

    def utility(self, gamma: float) -> float:
        return self.utilities[self.gammas.index(gamma)]

    def var_at(self, level: float) -> float:
        return self.var[self.levels.index(level)]

    def cvar_at(self, level: float) -> float:
        return self.cvar[self.levels.index(level)]

    def row(self) -> list[float]:
        """Values in table order: mean, std, utilities, VaR 99/90, CVaR 99/90."""
        return [
            self.mean,
            self.std,
            *self.utilities,
            self.var_at(0.99),
            self.var_at(0.90),
            self.cvar_at(0.99),
            self.cvar_at(0.90),
        ]


def expected_utility(pnl: np.ndarray, gamma: float) -> float:
    e = -gamma * pnl
    m = float(np.max(e))
    return -math.exp(m) * float(np.mean(np.exp(e - m)))


def report(pnl, gammas=DEFAULT_GAMMAS, levels=DEFAULT_LEVELS) -> RiskReport:
    x = np.asarray(pnl, dtype=float).ravel()
    n = x.size
    if n < 2:
        raise EmptySample(f"need at least two P&L values, got {n}")
    s = np.sort(x)
    var, cvar = [], []
    for c in levels:
        rank = max(1, math.ceil(round((1.0 - c) * n, 9)))
        q = s[rank - 1]
        var.append(float(q))
        cvar.append(float(np.mean(s[s <= q])))
    return RiskReport(
        n=n,
        mean=float(np.mean(x)),
        std=float(np.std(x, ddof=1)),
        gammas=tuple(float(g) for g in gammas),
        utilities=tuple(expected_utility(x, g) for g in gammas),
        levels=tuple(float(c) for c in levels),
        var=tuple(var),
        cvar=tuple(cvar),
    )
