import numpy as np
import pytest

from fishingnet.grid import GridSpec


@pytest.fixture
def small_spec():
    return GridSpec(rows_x=32, cols_y=48, resolution=0.5)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def pytest_terminal_summary(terminalreporter):
    # one line per acceptance criterion, filled in by test_acceptance.py
    import sys

    mod = sys.modules.get("test_acceptance")
    results = getattr(mod, "RESULTS", None)
    if not results:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(results):
        ok, detail = results[key]
        terminalreporter.write_line(f"criterion {key:>2}: {'PASS' if ok else 'FAIL'}  {detail}")
