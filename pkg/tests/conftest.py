import math

import numpy as np
import pytest

from ehcap.channel import DiscreteDistribution, ExtendedChannel


def phi(z):
    return math.exp(-0.5 * z * z) / math.sqrt(2.0 * math.pi)


@pytest.fixture(scope="session")
def static_15():
    return ExtendedChannel.build([1.5], [1.0])


@pytest.fixture(scope="session")
def onoff_half():
    """On-off channel with p_on = 0.5 and E = 2.25."""
    return ExtendedChannel.build([0.0, 1.5], [0.5, 0.5])


@pytest.fixture
def binary_15():
    return DiscreteDistribution([[-1.5], [1.5]], [0.5, 0.5])


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


# acceptance verdicts, collected per run and repeated in the terminal summary
_VERDICTS = pytest.StashKey[list]()


@pytest.fixture
def verdict(request, capsys):
    """Record and print one PASS/FAIL line for an acceptance criterion."""
    lines = request.config.stash.setdefault(_VERDICTS, [])

    def record(number: int, ok: bool, detail: str):
        line = f"criterion {number:>2}: {'PASS' if ok else 'FAIL'}  {detail}"
        lines.append(line)
        with capsys.disabled():
            print(f"\n{line}")
        return ok

    return record


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = config.stash.get(_VERDICTS, [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines):
            terminalreporter.write_line(line)
