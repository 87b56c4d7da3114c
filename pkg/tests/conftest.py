import numpy as np
import pytest

_ACCEPTANCE = pytest.StashKey[dict]()


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def report(request):
    """Record one PASS/FAIL line for an acceptance criterion."""
    lines = request.config.stash.setdefault(_ACCEPTANCE, {})

    def _report(number: int, passed: bool, detail: str) -> None:
        lines[number] = f"{'PASS' if passed else 'FAIL'} criterion {number}: {detail}"

    return _report


def pytest_terminal_summary(terminalreporter, config):
    lines = config.stash.get(_ACCEPTANCE, {})
    if lines:
        terminalreporter.section("acceptance criteria")
        for number in sorted(lines):
            terminalreporter.write_line(lines[number])
