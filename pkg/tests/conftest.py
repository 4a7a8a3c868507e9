import numpy as np
import pytest


@pytest.fixture
def rng():
    return np.random.default_rng(20240607)


class ConstantStub:
    """Generator stand-in that returns fixed draws, for degenerate-case tests."""

    def __init__(self, normal_row=None, integers_value=0, index_rows=None):
        self.normal_row = normal_row
        self.integers_value = integers_value
        self.index_rows = index_rows

    def standard_normal(self, size):
        B, N = size
        row = np.zeros(N) if self.normal_row is None else np.asarray(self.normal_row)[:N]
        return np.tile(row, (B, 1))

    def integers(self, low, high, size=None):
        if self.index_rows is not None:
            B, N = size
            return np.tile(np.arange(N), (B, 1))
        return np.full(size, self.integers_value, dtype=np.int64)


@pytest.fixture
def stub():
    return ConstantStub


ACCEPTANCE_LINES = {}


@pytest.fixture
def acceptance():
    """Record one pass/fail line per acceptance criterion."""

    def record(number: int, passed: bool, detail: str) -> bool:
        line = f"criterion {number:2d}: {'PASS' if passed else 'FAIL'}  {detail}"
        ACCEPTANCE_LINES[number] = line
        print(line)
        return passed

    return record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for k in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(ACCEPTANCE_LINES[k])
