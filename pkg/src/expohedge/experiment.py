"""End-to-end experiment: simulate, learn, replay, price, report, export."""

from __future__ import annotations

import logging
import shutil
import statistics
import tempfile
import time
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import __version__, analytic, pricing
from .allocation import StrategyTable, apply, learn, save_strategy, smooth
from .basis import make_basis
from .claims import ZERO, parse_claim
from .config import RunConfig
from .errors import ArtifactIOError, InvalidInput
from .market import RNG_ALGORITHM, simulate_gbm
from .risk import QUANTILE_RULE, report

logger = logging.getLogger(__name__)

_F = "{:.12g}".format


@dataclass
class LearnedPair:
    merton: StrategyTable
    claim: StrategyTable | None
    price: pricing.PricingResult | None


def learn_pair(cfg: RunConfig, paths) -> LearnedPair:
    """Learn the Merton strategy and, unless the claim is zero, the hedge."""
    params = cfg.market()
    basis = make_basis(cfg.basis, params.s0)
    claim = parse_claim(cfg.claim)
    solver = cfg.solver()
    merton = learn(paths, ZERO, basis, cfg.gamma, solver)
    if claim.is_zero:
        return LearnedPair(merton, None, None)
    hedge = learn(paths, claim, basis, cfg.gamma, solver)
    price = pricing.price_learned(hedge, merton, n_paths=paths.n_paths, seed=paths.seed)
    return LearnedPair(merton, hedge, price)


def _write_csv(path: Path, header, rows) -> None:
    lines = [",".join(header)]
    lines += [",".join(str(v) if isinstance(v, (str, int)) else _F(v) for v in row) for row in rows]
    path.write_text("\n".join(lines) + "\n")


def run(cfg: RunConfig, outdir=None) -> Path:
    """Run the full experiment and write its artifacts to ``outdir``.

    Artifacts appear only on success: they are built in a scratch directory
    and moved into place at the end.
    """
    outdir = Path(outdir or cfg.output)
    started = time.perf_counter()
    try:
        outdir.parent.mkdir(parents=True, exist_ok=True)
        scratch = Path(tempfile.mkdtemp(prefix=".run-", dir=outdir.parent))
    except OSError as exc:
        raise ArtifactIOError(f"cannot create output directory: {exc}") from None
    try:
        _run_into(cfg, scratch)
        (scratch / "timing.txt").write_text(f"wall_seconds = {time.perf_counter() - started:.3f}\n")
        if outdir.exists():
            shutil.rmtree(outdir)
        scratch.rename(outdir)
    except OSError as exc:
        shutil.rmtree(scratch, ignore_errors=True)
        raise ArtifactIOError(f"writing artifacts failed: {exc}") from None
    except BaseException:
        shutil.rmtree(scratch, ignore_errors=True)
        raise
    return outdir


def _run_into(cfg: RunConfig, out: Path) -> None:
    params = cfg.market()
    claim = parse_claim(cfg.claim)
    train = simulate_gbm(params, cfg.sim())
    evaluation = train if cfg.in_sample else simulate_gbm(params, cfg.sim(seed=cfg.resolved_eval_seed))

    pair = learn_pair(cfg, train)
    merton, hedge = pair.merton, pair.claim
    if cfg.smoothing > 0:
        merton = smooth(merton, cfg.smoothing)
        hedge = hedge and smooth(hedge, cfg.smoothing)

    cases = {
        "learned_merton": (merton, ZERO),
        "true_merton": (analytic.MertonStrategy(params, cfg.gamma), ZERO),
    }
    if hedge is not None:
        cases = {
            "learned_merton": cases["learned_merton"],
            "learned_claim": (hedge, claim),
            "true_merton": cases["true_merton"],
            "true_claim": (analytic.TheoreticalHedge(params, claim, cfg.gamma), claim),
        }
    reports = {}
    for name, (strategy, c) in cases.items():
        pnl = apply(strategy, evaluation, c)
        reports[name] = report(pnl, cfg.gammas)
        _write_csv(out / f"pnl_{name}.csv", ["path", "pnl"], enumerate(pnl.tolist()))

    n_u = len(cfg.gammas)
    header = ["case", "mean", "std", *[f"u{i + 1}" for i in range(n_u)],
              "var99", "var90", "cvar99", "cvar90"]
    _write_csv(out / "report.csv", header, [[name, *rep.row()] for name, rep in reports.items()])

    shown = hedge if hedge is not None else merton
    true_shown = cases["true_claim" if hedge is not None else "true_merton"][0]
    i = min(cfg.hedge_path, evaluation.n_paths - 1)
    rows = []
    for k in range(1, params.K + 1):
        prev = evaluation.states[i : i + 1, k - 1, :]
        learned_h = shown.shares(k, prev)[0]
        true_h = true_shown.shares(k, prev)[0]
        for j in range(params.d):
            rows.append([k, j, prev[0, j], learned_h[j], true_h[j]])
    _write_csv(out / "hedge_path.csv", ["step", "asset", "price", "learned", "theoretical"], rows)

    save_strategy(shown, out / "strategy.csv")
    if hedge is not None:
        save_strategy(merton, out / "strategy_merton.csv")

    _write_csv(out / "prices.csv", ["quantity", "value"], price_rows(cfg, pair, reports))
    (out / "config.resolved").write_text(cfg.to_text())
    (out / "meta.txt").write_text(_meta(cfg, pair))


def price_rows(cfg: RunConfig, pair: LearnedPair, reports=None) -> list:
    params = cfg.market()
    claim = parse_claim(cfg.claim)
    side, traded = pricing.side_of(claim)
    try:
        exact = pricing.price_analytic(params, claim, cfg.gamma)
        ce_exact, bs_price = exact.ce_claim, exact.indifference_price
    except InvalidInput:  # custom payoffs have no closed form
        ce_exact = bs_price = float("nan")
    rows = [
        ["claim", str(claim)],
        ["side", side],
        ["traded_claim", str(traded)],
        ["ce_merton_learned", pair.merton.certainty_equivalent],
        ["ce_merton_analytic", analytic.merton_certainty_equivalent(params, 0.0)],
    ]
    if pair.price is not None:
        rows += [
            ["ce_claim_learned", pair.price.ce_claim],
            ["ce_claim_analytic", ce_exact],
            ["indifference_price", pair.price.indifference_price],
        ]
    rows.append(["bs_price", bs_price])
    if reports and "learned_claim" in reports:
        sign = 1.0 if side == pricing.BUYER else -1.0
        for kind in ("learned", "true"):
            p = pricing.price_from_expected_utilities(
                reports[f"{kind}_merton"].utility(1.0), reports[f"{kind}_claim"].utility(1.0)
            )
            rows.append([f"utility_implied_price_{kind}", sign * p])
    return rows


def _meta(cfg: RunConfig, pair: LearnedPair) -> str:
    tables = [pair.merton] + ([pair.claim] if pair.claim is not None else [])
    statuses = sorted({r.status for t in tables for r in t.diagnostics})
    iters = max(r.iterations for t in tables for r in t.diagnostics)
    lines = [
        f"expohedge_version = {__version__}",
        f"rng = {RNG_ALGORITHM}",
        f"seed = {cfg.seed}",
        f"eval_seed = {'in-sample' if cfg.in_sample else cfg.resolved_eval_seed}",
        f"evaluation = {'in-sample' if cfg.in_sample else 'out-of-sample'}",
        f"basis = {cfg.basis}",
        "basis_frame = dollar allocation on moneyness features standardised per step",
        f"tol_g = {cfg.tol_g!r}",
        f"tol_x = {cfg.tol_x!r}",
        f"max_iter = {cfg.max_iter}",
        f"coeff_cap = {cfg.coeff_cap!r}",
        f"ridge = {cfg.ridge!r}",
        f"solver_statuses = {' '.join(statuses)}",
        f"max_newton_iterations = {iters}",
        f"quantile_rule = {QUANTILE_RULE}",
        "utility_scale = E[-exp(-gamma X)]",
        "premium = option premium not deducted from P&L",
        "timing = see timing.txt",
    ]
    return "\n".join(lines) + "\n"


def price_only(cfg: RunConfig) -> list:
    params = cfg.market()
    train = simulate_gbm(params, cfg.sim())
    return price_rows(cfg, learn_pair(cfg, train))


def convergence_study(cfg: RunConfig, n_list=None, n_seeds=None) -> list[dict]:
    """Learned price error against the closed-form price, per (N, seed)."""
    params = cfg.market()
    claim = parse_claim(cfg.claim)
    oracle = pricing.price_analytic(params, claim, cfg.gamma).indifference_price
    rows = []
    for n in n_list or cfg.n_list:
        for s in range(n_seeds or cfg.n_seeds):
            seed = cfg.seed + s
            paths = simulate_gbm(params, cfg.sim(n_paths=n, seed=seed))
            pair = learn_pair(cfg, paths)
            price = pair.price.indifference_price if pair.price else 0.0
            rows.append({"n_paths": n, "seed": seed, "learned_price": price,
                         "oracle_price": oracle, "abs_error": abs(price - oracle)})
            logger.info("N=%d seed=%d price=%.6f", n, seed, price)
    return rows


def summarize_convergence(rows: list[dict]) -> dict:
    """Median absolute error per N and the log-log slope through the medians."""
    ns = sorted({r["n_paths"] for r in rows})
    medians = {n: statistics.median(r["abs_error"] for r in rows if r["n_paths"] == n) for n in ns}
    slope = float("nan")
    if len(ns) >= 2 and all(m > 0 for m in medians.values()):
        slope = float(np.polyfit(np.log(ns), np.log([medians[n] for n in ns]), 1)[0])
    return {"medians": medians, "slope": slope}


def write_convergence(rows: list[dict], path) -> None:
    keys = ["n_paths", "seed", "learned_price", "oracle_price", "abs_error"]
    _write_csv(Path(path), keys, [[r[k] for k in keys] for r in rows])
