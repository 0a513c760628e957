import time

import numpy as np
import pytest

from spinboson.asymptotics import (
    counterexample_demo,
    sweep_excited_state,
    sweep_massless,
    sweep_strong_coupling,
    sweep_uv_renormalization,
)
from spinboson.scenarios import get_preset, make_scenario

ACCEPTANCE_LINES: dict[int, str] = {}

STRONG_GS = (0, 1, 2, 4, 8, 12, 16)


def record(criterion: int, passed: bool, detail: str):
    line = f"criterion {criterion:>2}: {'PASS' if passed else 'FAIL'}  {detail}"
    ACCEPTANCE_LINES[criterion] = line
    print(line)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(ACCEPTANCE_LINES[k])


def _timed(build):
    start = time.perf_counter()
    report = build()
    report.meta["elapsed"] = time.perf_counter() - start
    return report


@pytest.fixture(scope="session")
def single_mode_grid():
    return make_scenario(get_preset("single_mode"))


@pytest.fixture(scope="session")
def strong_report(single_mode_grid):
    return _timed(lambda: sweep_strong_coupling(single_mode_grid, -1.0, STRONG_GS))


@pytest.fixture(scope="session")
def excited_report(single_mode_grid):
    return _timed(lambda: sweep_excited_state(single_mode_grid, -1.0, STRONG_GS, gap=1.0))


@pytest.fixture(scope="session")
def uv_report():
    return _timed(lambda: sweep_uv_renormalization(get_preset("uv_cutoff_3d"), -1.0, (2, 4, 8, 16)))


@pytest.fixture(scope="session")
def massless_report():
    return _timed(lambda: sweep_massless(make_scenario(get_preset("massless_ir_regular")), -1.0, (0, 2, 4, 8)))


@pytest.fixture(scope="session")
def counterexample_report():
    return _timed(lambda: counterexample_demo(-1.0, 1.0, (1, 10, 100)))


@pytest.fixture
def rng():
    return np.random.default_rng(20240917)
