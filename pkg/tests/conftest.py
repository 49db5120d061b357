import numpy as np
import pytest

from cxsharp.comparison import compute_exponential_comparison, compute_gaussian_comparison
from cxsharp.extremal import ExtremalDistribution

ACCEPTANCE_LINES: list[str] = []


@pytest.fixture(scope="session")
def gauss():
    return compute_gaussian_comparison()


@pytest.fixture(scope="session")
def expo():
    return compute_exponential_comparison()


@pytest.fixture(scope="session")
def xstar():
    return ExtremalDistribution.for_kind("gaussian")


@pytest.fixture(scope="session")
def xstar_e():
    return ExtremalDistribution.for_kind("exponential")


@pytest.fixture(scope="session")
def xstar_samples(xstar):
    return xstar.sample(1_000_000, 1)


@pytest.fixture
def record_criterion():
    def record(number: int, ok: bool, text: str) -> None:
        ACCEPTANCE_LINES.append(f"[{'PASS' if ok else 'FAIL'}] criterion {number}: {text}")

    return record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
