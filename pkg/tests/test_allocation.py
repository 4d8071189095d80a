import math

import numpy as np
import pytest

from expohedge import optimizer as opt
from expohedge.allocation import (
    ConstantStrategy, apply, learn, load_strategy, save_strategy, smooth,
)
from expohedge.basis import make_basis
from expohedge.claims import ZERO, put
from expohedge.errors import DimensionMismatch, UnboundedStep
from expohedge.market import MarketParams, PathSet, SimConfig, simulate_gbm


@pytest.fixture(scope="module")
def small_run():
    p = MarketParams(mu=0.1, sigma=0.2, r=0.0, s0=1.0, T=1.0, K=12)
    paths = simulate_gbm(p, SimConfig(4000, seed=17))
    basis = make_basis("poly:2", p.s0)
    return p, paths, basis, learn(paths, put(1.0), basis, 1.0)


def log_mean_exp(x):
    m = np.max(x)
    return m + math.log(np.mean(np.exp(x - m)))


def test_single_step_closed_form():
    paths = PathSet.from_states([[1.0, 3.0], [1.0, 0.0]])
    table = learn(paths, ZERO, make_basis("poly:2", [1.0]), 1.0)
    h = math.log(2) / 3
    assert table.K == 1 and table.rules == []
    assert table.h1[0] == pytest.approx(h, abs=1e-8)
    assert table.certainty_equivalent == pytest.approx(
        math.log((math.exp(-2 * h) + math.exp(h)) / 2), abs=1e-12)


def test_single_step_equals_direct_minimize():
    p = MarketParams(mu=0.1, sigma=0.2, r=0.0, s0=1.3, T=0.5, K=1)
    paths = simulate_gbm(p, SimConfig(3000, seed=9))
    table = learn(paths, put(1.3), make_basis("poly:2", p.s0), 2.0)
    carry = -2.0 * np.maximum(1.3 - paths.states[:, 1, 0], 0.0)
    direct = opt.minimize(opt.ObjectiveData(np.ones((3000, 1)), paths.increments[:, 0, :], carry, 2.0,
                                            scale=paths.states[:, 0, :]))
    assert table.h1[0] == direct.coefficients[0, 0] / 1.3
    assert table.log_psi1 == direct.log_objective


def test_riskless_market_without_claim():
    p = MarketParams(mu=0.0, sigma=1e-12, r=0.0, s0=1.0, T=1.0, K=5)
    paths = simulate_gbm(p, SimConfig(500, seed=1))
    table = learn(paths, ZERO, make_basis("poly:2", p.s0), 1.0)
    assert table.certainty_equivalent == pytest.approx(0.0, abs=1e-10)
    assert table.psi1 == pytest.approx(1.0, abs=1e-10)


def test_apply_trivial_strategies(weekly_market):
    paths = simulate_gbm(weekly_market, SimConfig(100, seed=2))
    np.testing.assert_array_equal(apply(ConstantStrategy(np.zeros(1)), paths), 0.0)
    pnl = apply(ConstantStrategy(np.array([1.7])), paths)
    np.testing.assert_allclose(pnl, 1.7 * (paths.states[:, -1, 0] - 1.0), rtol=1e-12, atol=1e-14)
    pnl_put = apply(ConstantStrategy(np.zeros(1)), paths, put(1.0))
    np.testing.assert_array_equal(pnl_put, np.maximum(1.0 - paths.states[:, -1, 0], 0.0))


def test_apply_dimension_mismatch(small_run):
    p, paths, basis, table = small_run
    other = simulate_gbm(MarketParams(0.1, 0.2, 0.0, 1.0, 1.0, 5), SimConfig(10, seed=1))
    with pytest.raises(DimensionMismatch):
        apply(table, other)


@pytest.mark.parametrize("gamma", [0.5, 1.0, 3.0])
def test_carry_consistency(gamma):
    p = MarketParams(mu=0.1, sigma=0.2, r=0.0, s0=1.0, T=1.0, K=8)
    paths = simulate_gbm(p, SimConfig(3000, seed=4))
    table = learn(paths, put(1.0), make_basis("poly:2", p.s0), gamma)
    recomputed = log_mean_exp(-gamma * apply(table, paths))
    assert recomputed == pytest.approx(table.log_psi1, rel=1e-10)


def test_each_step_is_locally_optimal_given_later_steps(small_run):
    p, paths, basis, table = small_run
    rng = np.random.default_rng(0)
    S, dS = paths.states, paths.increments
    gamma = table.gamma
    carry = -gamma * np.maximum(1.0 - S[:, -1, 0], 0.0)
    for k in range(table.K, 1, -1):
        rule = table.rules[k - 2]
        data = opt.ObjectiveData(rule.standardizer.apply(basis.evaluate(S[:, k - 1])),
                                 dS[:, k - 1], carry, gamma, scale=S[:, k - 1])
        best = opt.log_objective(data, rule.coefficients)
        for _ in range(10):
            bumped = rule.coefficients + 1e-3 * rng.standard_normal(rule.coefficients.shape)
            assert opt.log_objective(data, bumped) >= best
        carry = data.exponents(rule.coefficients)
    assert table.diagnostics[0].status == opt.CONVERGED


def test_all_steps_converged(small_run):
    _, _, _, table = small_run
    assert len(table.diagnostics) == table.K
    assert all(r.status == opt.CONVERGED and r.gradient_norm <= 1e-8 for r in table.diagnostics)


def test_learning_is_deterministic(small_run):
    p, paths, basis, table = small_run
    again = learn(simulate_gbm(p, SimConfig(4000, seed=17)), put(1.0), basis, 1.0)
    assert again.log_psi1 == table.log_psi1
    for a, b in zip(again.rules, table.rules):
        assert a.coefficients.tobytes() == b.coefficients.tobytes()


def test_strategy_csv_round_trip(small_run, tmp_path):
    p, paths, basis, table = small_run
    save_strategy(table, tmp_path / "s.csv")
    loaded = load_strategy(tmp_path / "s.csv")
    assert loaded.h1.tobytes() == table.h1.tobytes()
    assert loaded.log_psi1 == table.log_psi1 and loaded.claim == table.claim
    for a, b in zip(loaded.rules, table.rules):
        assert a.coefficients.tobytes() == b.coefficients.tobytes()
        assert a.standardizer.mean.tobytes() == b.standardizer.mean.tobytes()
        assert a.standardizer.scale.tobytes() == b.standardizer.scale.tobytes()
    assert apply(loaded, paths).tobytes() == apply(table, paths).tobytes()
    text = (tmp_path / "s.csv").read_text()
    assert "step,asset,feature,coefficient" in text and text.startswith("# format")


def test_raw_coefficients_and_smoothing(small_run):
    p, paths, basis, table = small_run
    same = smooth(table, 1.0)
    np.testing.assert_allclose(apply(same, paths), apply(table, paths), atol=1e-12)
    smoothed = smooth(table, 0.3)
    assert all(np.array_equal(r.standardizer.scale, np.ones(basis.size)) for r in smoothed.rules)
    prev = paths.states[:, 4, :]
    raw = basis.evaluate(prev) @ table.raw_coefficients(5).T
    np.testing.assert_allclose(raw, table.dollars(5, prev), atol=1e-12)


def test_one_sided_step_is_unbounded():
    states = np.array([[1.0, 1.1, 1.2], [1.0, 0.9, 1.0], [1.0, 1.05, 1.1]])
    paths = PathSet.from_states(states)
    with pytest.raises(UnboundedStep) as info:
        learn(paths, ZERO, make_basis("poly:0", [1.0]), 1.0)
    assert info.value.step == 2


def test_merton_certainty_equivalent_from_learning(weekly_market):
    paths = simulate_gbm(weekly_market, SimConfig(100_000, seed=101))
    table = learn(paths, ZERO, make_basis("poly:2", weekly_market.s0), 1.0)
    assert table.certainty_equivalent == pytest.approx(-0.125, abs=0.01)
    # the learned dollar allocation sits near the constant 2.5 at every step
    mid = table.dollars(25, paths.states[:, 24, :])
    assert np.median(mid) == pytest.approx(2.5, abs=0.25)


def test_wealth_never_enters():
    import inspect
    for fn in (learn, apply):
        assert "wealth" not in inspect.signature(fn).parameters
