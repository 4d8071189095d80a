import pytest

from expohedge.market import MarketParams


@pytest.fixture
def weekly_market():
    """One asset, S0=1, mu=0.1, sigma=0.2, r=0, one year in 50 steps."""
    return MarketParams(mu=0.1, sigma=0.2, r=0.0, s0=1.0, T=1.0, K=50)


_CRITERIA = []


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(id, text): acceptance criterion")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    marker = item.get_closest_marker("criterion")
    if marker and rep.when == "call":
        detail = getattr(item, "criterion_detail", "")
        _CRITERIA.append((marker.args[0], marker.args[1], rep.passed, detail))


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for cid, text, passed, detail in sorted(_CRITERIA):
        status = "PASS" if passed else "FAIL"
        terminalreporter.write_line(f"{cid} {status}  {text}  {detail}".rstrip())
