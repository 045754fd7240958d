import math

import numpy as np
import pytest

from indexflow import presets

PI = math.pi


@pytest.fixture(scope="session")
def scalar35():
    return presets.scalar((3.5 * PI) ** 2)


@pytest.fixture(scope="session")
def suite():
    return presets.random_suite(20)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def pytest_configure(config):
    config._acceptance_lines = {}


@pytest.fixture
def criterion(request):
    """``criterion(n, passed, detail)`` records one acceptance line."""
    lines = request.config._acceptance_lines

    def record(n, passed, detail):
        lines[n] = f"criterion {n:2d}: {'PASS' if passed else 'FAIL'}  {detail}"
        return passed

    return record


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = getattr(config, "_acceptance_lines", {})
    if not lines:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(lines):
        terminalreporter.write_line(lines[n])
