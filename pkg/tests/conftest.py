import pytest

from ndopo_steer import SystemParams

# the three loss-rate regimes used throughout, all at kappa=0.01, eps0=100
REGIMES = {
    "equal": (1.0, 1.0, 1.0),
    "fast_pair": (1.0, 2.0, 2.0),
    "slow_signal": (1.0, 0.5, 1.0),
}


def regime(name, eps1=0.0):
    return SystemParams(REGIMES[name], 0.01, 100.0, eps1)


@pytest.fixture(params=sorted(REGIMES))
def regime_name(request):
    return request.param


# one line per acceptance criterion, echoed in the terminal summary
ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
