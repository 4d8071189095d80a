"""Command line driver: ``expohedge {run,converge,price,simulate} CONFIG``."""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from . import experiment
from .config import RunConfig
from .errors import ArtifactIOError, ConfigError, ExpoHedgeError
from .market import simulate_gbm

STAGES = {"run": "pipeline", "converge": "convergence study", "price": "pricing", "simulate": "simulation"}


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="expohedge", description=__doc__)
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)
    for name, help_ in (
        ("run", "simulate, learn, replay and write all artifacts"),
        ("converge", "learned price error against the closed form for several N"),
        ("price", "learned and closed-form certainty equivalents and prices"),
        ("simulate", "write simulated price paths as CSV"),
    ):
        s = sub.add_parser(name, help=help_)
        s.add_argument("config", type=Path)
        s.add_argument("-o", "--output", help="output directory (overrides config)")
        s.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                       help="override a config key; repeatable")
    return p


def load_config(args) -> RunConfig:
    cfg = RunConfig.from_file(args.config)
    for item in args.set:
        key, sep, value = item.partition("=")
        if not sep:
            raise ConfigError(f"--set expects KEY=VALUE, got {item!r}")
        cfg.set(key.strip(), value)
    if args.output:
        cfg.output = args.output
    cfg.validate()
    return cfg


def _dispatch(args) -> None:
    cfg = load_config(args)
    out = Path(cfg.output)
    if args.command == "run":
        experiment.run(cfg, out)
        print(f"artifacts written to {out}")
        print((out / "prices.csv").read_text(), end="")
    elif args.command == "converge":
        rows = experiment.convergence_study(cfg)
        out.mkdir(parents=True, exist_ok=True)
        experiment.write_convergence(rows, out / "converge.csv")
        summary = experiment.summarize_convergence(rows)
        for n, m in summary["medians"].items():
            print(f"N={n:<8d} median |error| = {m:.6f}")
        print(f"log-log slope = {summary['slope']:.3f}")
    elif args.command == "price":
        for key, value in experiment.price_only(cfg):
            print(f"{key:>20s}  {value if isinstance(value, str) else format(value, '.6f')}")
    elif args.command == "simulate":
        out.mkdir(parents=True, exist_ok=True)
        paths = simulate_gbm(cfg.market(), cfg.sim())
        paths.to_csv(out / "paths.csv")
        print(f"{paths.n_paths} paths written to {out / 'paths.csv'}")


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        _dispatch(args)
    except ExpoHedgeError as exc:
        print(f"expohedge {args.command}: {STAGES[args.command]} failed: {exc}", file=sys.stderr)
        return exc.exit_code
    except OSError as exc:
        print(f"expohedge {args.command}: I/O error: {exc}", file=sys.stderr)
        return ArtifactIOError.exit_code
    return 0


if __name__ == "__main__":
    sys.exit(main())
