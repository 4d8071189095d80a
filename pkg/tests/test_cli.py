import csv
from pathlib import Path

import pytest

from expohedge.cli import main
from expohedge.config import RunConfig
from expohedge.errors import ConfigError

SMALL = """
mu = 0.1
sigma = 0.2
s0 = 1
K = 10
claim = {claim}
n_paths = {n}
seed = 7
output = {out}
"""


def write_cfg(tmp_path, claim="put:1.0", n=1000, name="c.cfg", **extra):
    out = tmp_path / "out"
    text = SMALL.format(claim=claim, n=n, out=out)
    text += "".join(f"{k} = {v}\n" for k, v in extra.items())
    p = tmp_path / name
    p.write_text(text)
    return p, out


def read_csv(path):
    with open(path) as fh:
        return list(csv.DictReader(fh))


def test_zero_claim_reports_two_cases(tmp_path):
    cfg, out = write_cfg(tmp_path, claim="zero")
    assert main(["run", str(cfg)]) == 0
    rows = read_csv(out / "report.csv")
    assert [r["case"] for r in rows] == ["learned_merton", "true_merton"]
    assert list(rows[0]) == ["case", "mean", "std", "u1", "u2", "u3", "var99", "var90", "cvar99", "cvar90"]


def test_run_writes_all_artifacts(tmp_path):
    cfg, out = write_cfg(tmp_path)
    assert main(["run", str(cfg)]) == 0
    for name in ("report.csv", "pnl_learned_merton.csv", "pnl_learned_claim.csv", "pnl_true_merton.csv",
                 "pnl_true_claim.csv", "hedge_path.csv", "strategy.csv", "prices.csv", "meta.txt",
                 "config.resolved"):
        assert (out / name).is_file(), name
    assert len(read_csv(out / "pnl_true_claim.csv")) == 1000
    assert len(read_csv(out / "hedge_path.csv")) == 10
    prices = {r["quantity"]: r["value"] for r in read_csv(out / "prices.csv")}
    assert prices["side"] == "buyer"
    assert abs(float(prices["bs_price"]) - 0.0797) < 1e-4
    assert abs(float(prices["indifference_price"]) - 0.0797) < 0.02
    meta = (out / "meta.txt").read_text()
    assert "rng = philox" in meta and "evaluation = out-of-sample" in meta


def _artifacts(out: Path):
    return {p.name: p.read_bytes() for p in sorted(out.iterdir()) if p.name != "timing.txt"}


def test_rerun_is_byte_identical(tmp_path):
    cfg, out = write_cfg(tmp_path)
    assert main(["run", str(cfg)]) == 0
    first = _artifacts(out)
    assert main(["run", str(cfg)]) == 0
    assert _artifacts(out) == first


def test_resolved_config_round_trip(tmp_path):
    cfg, out = write_cfg(tmp_path, in_sample="true")
    assert main(["run", str(cfg)]) == 0
    resolved = out / "config.resolved"
    assert main(["run", str(resolved), "-o", str(tmp_path / "again")]) == 0
    first = _artifacts(out)
    second = _artifacts(tmp_path / "again")
    first.pop("config.resolved"), second.pop("config.resolved")
    assert first == second
    assert RunConfig.from_file(resolved).to_text() == RunConfig.from_file(cfg).to_text()


def test_seller_side(tmp_path):
    cfg, out = write_cfg(tmp_path, claim="-put:1.0", in_sample="true")
    assert main(["run", str(cfg)]) == 0
    prices = {r["quantity"]: r["value"] for r in read_csv(out / "prices.csv")}
    assert prices["side"] == "seller" and prices["traded_claim"] == "put:1"
    assert abs(float(prices["indifference_price"]) - 0.0797) < 0.02


def test_config_errors_exit_2(tmp_path, capsys):
    bad = tmp_path / "bad.cfg"
    bad.write_text("mu = 0.1\nbogus = 3\n")
    assert main(["run", str(bad)]) == 2
    assert "pipeline failed" in capsys.readouterr().err
    bad.write_text("claim = swap:1\n")
    assert main(["price", str(bad)]) == 2
    assert main(["run", str(tmp_path / "missing.cfg")]) == 2
    cfg, _ = write_cfg(tmp_path)
    assert main(["run", str(cfg), "--set", "n_paths"]) == 2


def test_numerical_failure_exit_3_and_no_partial_output(tmp_path, capsys):
    cfg, out = write_cfg(tmp_path, n=2)
    assert main(["run", str(cfg)]) == 3
    assert "unbounded" in capsys.readouterr().err
    assert not out.exists()
    assert not list(tmp_path.glob(".run-*"))


def test_io_failure_exit_4(tmp_path):
    blocker = tmp_path / "file"
    blocker.write_text("x")
    cfg, _ = write_cfg(tmp_path)
    assert main(["run", str(cfg), "-o", str(blocker / "sub")]) == 4


def test_converge_rows(tmp_path, capsys):
    cfg, out = write_cfg(tmp_path, n_list="500 1000", n_seeds=2)
    assert main(["converge", str(cfg)]) == 0
    rows = read_csv(out / "converge.csv")
    assert len(rows) == 4
    assert {int(r["n_paths"]) for r in rows} == {500, 1000}
    assert "log-log slope" in capsys.readouterr().out
    assert main(["converge", str(cfg), "--set", "n_list=1000", "--set", "n_seeds=1"]) == 0
    assert len(read_csv(out / "converge.csv")) == 1


def test_price_and_simulate(tmp_path, capsys):
    cfg, out = write_cfg(tmp_path, n=300)
    assert main(["price", str(cfg)]) == 0
    text = capsys.readouterr().out
    assert "indifference_price" in text and "bs_price" in text
    assert main(["simulate", str(cfg), "--set", "n_paths=3"]) == 0
    lines = (out / "paths.csv").read_text().splitlines()
    assert lines[0] == "path,step,asset,price" and len(lines) == 1 + 3 * 11


def test_config_parsing():
    cfg = RunConfig.parse("# comment\nN = 500  # trailing\nsigma = 0.3\nantithetic = yes\n")
    assert cfg.n_paths == 500 and cfg.sigma == (0.3,) and cfg.antithetic is True
    assert cfg.resolved_eval_seed == cfg.seed + 1
    with pytest.raises(ConfigError):
        RunConfig.parse("mu 0.1\n")
    with pytest.raises(ConfigError):
        RunConfig.parse("K = 0\n")
    with pytest.raises(ConfigError):
        RunConfig.parse("mu = 0.1 0.2\n")  # sigma needs four entries
    two = RunConfig.parse("mu = 0.1 0.05\nsigma = 0.2 0 0 0.3\ns0 = 1 1\n")
    assert two.market().d == 2
