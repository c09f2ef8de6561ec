"""Shared (session-scoped) numerical fixtures for the reference set (3, 1/2, 3)."""

import numpy as np
import pytest
from hypothesis import settings

from fraclane import ball, entire, linearized
from fraclane.cylinder import CylinderGrid, calibrate
from fraclane.params import ProblemParams, compute_constants

settings.register_profile("fraclane", deadline=None, max_examples=25, derandomize=True)
settings.load_profile("fraclane")


@pytest.fixture(scope="session")
def ref():
    return ProblemParams(3, 0.5, 3.0)


@pytest.fixture(scope="session")
def ref_consts(ref):
    return compute_constants(ref)


@pytest.fixture(scope="session")
def grid():
    return CylinderGrid(20.0, 0.05)


@pytest.fixture(scope="session")
def table0(ref, grid):
    return calibrate(ref, 0, grid)


@pytest.fixture(scope="session")
def table1(ref, grid):
    return calibrate(ref, 1, grid)


@pytest.fixture(scope="session")
def sol(ref, ref_consts, grid, table0):
    """Entire solution with w(0) = 1."""
    raw = entire.solve_entire(ref, table0, entire.sigmoid_guess(ref, ref_consts, grid), ref_consts, tol=1e-10)
    return entire.normalize_origin(raw, table0, ref_consts, tol=1e-10)


@pytest.fixture(scope="session")
def pot(sol, ref_consts):
    return linearized.build_potential(sol, ref_consts)


@pytest.fixture(scope="session")
def norms(ref):
    return linearized.WeightedNorms(ref)


@pytest.fixture(scope="session")
def green(ref):
    return ball.build_green(ref, ball.BallGrid(400))


@pytest.fixture(scope="session")
def branch(green):
    start = ball.minimal_branch(green, 0.05)
    return ball.continue_branch(green, start, target_sup=1e3)


@pytest.fixture(scope="session")
def rng():
    return np.random.default_rng(20240611)


def pytest_configure(config):
    config._acceptance_lines = {}


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = getattr(config, "_acceptance_lines", {})
    if lines:
        terminalreporter.section("acceptance criteria")
        for k in sorted(lines):
            terminalreporter.write_line(lines[k])
