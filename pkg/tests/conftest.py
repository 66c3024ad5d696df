"""Shared fixtures and the acceptance summary printed after the run."""

import numpy as np
import pytest

from fredpert import catalog
from fredpert.quadrature import build_rule

ACCEPTANCE_RESULTS = {}


@pytest.fixture(scope="session")
def t1():
    return catalog.load("t1_separable")


@pytest.fixture(scope="session")
def resonant():
    return catalog.load("resonant_cos")


@pytest.fixture(scope="session")
def hammerstein():
    return catalog.load("hammerstein_quadratic")


@pytest.fixture(scope="session")
def gauss32():
    return build_rule("gauss", 32)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_runtest_logreport(report):
    crit = dict(report.user_properties).get("acceptance")
    if crit is None:
        return
    if report.failed:
        ACCEPTANCE_RESULTS[crit] = False
    elif report.when == "call" and report.passed:
        ACCEPTANCE_RESULTS.setdefault(crit, True)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_RESULTS:
        return
    from test_acceptance import CRITERIA

    terminalreporter.section("acceptance criteria")
    for num, title in CRITERIA.items():
        state = ACCEPTANCE_RESULTS.get(num)
        label = "PASS" if state else ("FAIL" if state is False else "NOT RUN")
        terminalreporter.write_line(f"{label}  criterion {num:2d}: {title}")
