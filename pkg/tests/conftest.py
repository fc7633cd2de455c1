import numpy as np
import pytest

import shefluct as sf


@pytest.fixture
def grid1():
    return sf.build_grid(1, 32)


@pytest.fixture
def grid2():
    return sf.build_grid(2, 16)


@pytest.fixture
def bump1(grid1):
    x = grid1.coordinates()[0]
    return 1.0 + 0.5 * np.cos(2 * np.pi * x)


_CRITERIA: dict[int, str] = {}


@pytest.fixture
def record_criterion():
    """Log one PASS/FAIL line per acceptance criterion; repeated in the terminal summary."""

    def record(number: int, title: str, passed: bool, detail: str, seconds: float) -> None:
        line = f"[{'PASS' if passed else 'FAIL'}] criterion {number:2d} {title}: {detail} ({seconds:.1f} s)"
        _CRITERIA[number] = line
        print(line)

    return record


def pytest_terminal_summary(terminalreporter):
    if _CRITERIA:
        terminalreporter.section("acceptance criteria")
        for number in sorted(_CRITERIA):
            terminalreporter.write_line(_CRITERIA[number])
