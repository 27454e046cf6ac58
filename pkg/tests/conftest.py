import numpy as np
import pytest

from sdpcomp.datagen import GaussianMixtureSpec
from sdpcomp.model import Scorer


@pytest.fixture
def mixture():
    # 1-D task used throughout: means +/-1, sigma 0.7, pi_+ 0.7
    return GaussianMixtureSpec.symmetric(0.7, dim=1, mean_gap=2.0, sigma=0.7)


@pytest.fixture
def g0():
    return Scorer(1, (), [1.0, 0.2])


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


_LINES = pytest.StashKey[dict]()


@pytest.fixture
def acceptance(request):
    """Record ``(criterion, passed, detail)``; printed in the terminal summary."""
    store = request.config.stash.setdefault(_LINES, {})

    def record(number, passed, detail):
        line = f"criterion {number}: {'PASS' if passed else 'FAIL'}  {detail}"
        store[number] = line
        print(line)
        return passed

    return record


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = config.stash.get(_LINES, {})
    if lines:
        terminalreporter.section("acceptance criteria")
        for k in sorted(lines):
            terminalreporter.write_line(lines[k])
