"""Shared fixtures and the acceptance summary printed after the run."""

from fractions import Fraction

import numpy as np
import pytest

from ustat_chaos.measure_kernel import FiniteProbabilitySpace, Kernel, axes_for_row

ACCEPTANCE_RESULTS = {}


def record_acceptance(number: int, passed: bool, detail: str) -> None:
    ACCEPTANCE_RESULTS[number] = (passed, detail)
    print(f"\nACCEPTANCE {number:2d}: {'PASS' if passed else 'FAIL'} | {detail}")


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(ACCEPTANCE_RESULTS):
        passed, detail = ACCEPTANCE_RESULTS[number]
        terminalreporter.write_line(
            f"criterion {number:2d}: {'PASS' if passed else 'FAIL'} | {detail}")


@pytest.fixture
def coin():
    """Uniform two-point space with exact weights."""
    return FiniteProbabilitySpace(("a", "b"), (Fraction(1, 2), Fraction(1, 2)))


@pytest.fixture
def sign(coin):
    """``f = (1, -1)`` on the coin space."""
    return Kernel(coin, axes_for_row(1, 1), [1, -1])


def kernel(space, row, values):
    values = np.asarray(values, dtype=object if space.exact else float)
    return Kernel(space, axes_for_row(row, values.ndim), values)
