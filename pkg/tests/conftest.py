import datetime as dt

import numpy as np
import pytest

from qralloc.panel import ReturnPanel

ACCEPTANCE_LINES = []


def record_acceptance(line: str):
    ACCEPTANCE_LINES.append(line)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


def make_panel(values, start=dt.date(2020, 1, 1), assets=None) -> ReturnPanel:
    values = np.asarray(values, dtype=float)
    T, n = values.shape
    dates = [start + dt.timedelta(days=i) for i in range(T)]
    if assets is None:
        assets = [f"A{j + 1:03d}" for j in range(n)]
    return ReturnPanel(dates, assets, values)


@pytest.fixture
def rng():
    return np.random.default_rng(20240517)
