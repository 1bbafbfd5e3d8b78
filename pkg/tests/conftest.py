import numpy as np
import pytest
from hypothesis import settings

settings.register_profile("default", max_examples=40, deadline=None)
settings.load_profile("default")


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def example_222():
    """2x2x2 tensor with x(i,j,l) = i + 2j + 4l + 1 (0-based)."""
    i, j, l = np.meshgrid(range(2), range(2), range(2), indexing="ij")
    return (i + 2 * j + 4 * l + 1).astype(float)


# one line per acceptance criterion, printed at the end of the run
ACCEPTANCE = []


def record(criterion, passed, detail):
    ACCEPTANCE.append((criterion, bool(passed), detail))


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for criterion, passed, detail in sorted(ACCEPTANCE, key=lambda r: r[0]):
        terminalreporter.write_line(f"[{'PASS' if passed else 'FAIL'}] {criterion}: {detail}")
