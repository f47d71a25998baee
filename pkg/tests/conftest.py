import sys
from pathlib import Path

import numpy as np
import pytest

from ifrf.data import load_csv

DATA = Path(__file__).parent / "data"


@pytest.fixture(scope="session")
def iris():
    return load_csv(DATA / "iris.csv")


@pytest.fixture(scope="session")
def wine():
    return load_csv(DATA / "wine.csv")


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    lines = getattr(mod, "RESULTS", [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
