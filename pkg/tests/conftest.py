import sys
from pathlib import Path

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from fairmiss.table import CATEGORICAL, NUMERIC, OUTCOME, PREDICTOR, SENSITIVE, ColumnSpec, from_values

ROOT = Path(__file__).resolve().parents[1]
DATA = ROOT / "data"

settings.register_profile("default", deadline=None, max_examples=60,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


def spec_num(name, role=PREDICTOR):
    return ColumnSpec(name, NUMERIC, role)


def spec_cat(name, levels, role=PREDICTOR, ordinal=None):
    return ColumnSpec(name, CATEGORICAL, role, tuple(levels), ordinal)


def small_schema():
    return (
        spec_num("s", SENSITIVE),
        spec_num("x"),
        spec_cat("c", ["a", "b", "c"]),
        spec_cat("y", ["0", "1"], OUTCOME),
    )


def make_table(values, schema=None):
    return from_values(schema or small_schema(), values)


@pytest.fixture
def tiny():
    """Six complete rows with one numeric, one categorical predictor."""
    return make_table({
        "s": [1, 0, 1, 0, 1, 0],
        "x": [0.5, 1.5, 2.0, -1.0, 3.0, 0.0],
        "c": ["a", "b", "c", "a", "b", "a"],
        "y": ["1", "0", "1", "0", "1", "0"],
    })


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def german_path():
    p = DATA / "german.csv"
    if not p.exists():
        pytest.skip("data/german.csv not present")
    return p


def pytest_terminal_summary(terminalreporter):
    """One line per acceptance criterion, when the acceptance module ran."""
    mod = sys.modules.get("test_acceptance")
    if mod is None or not mod.RESULTS:
        return
    terminalreporter.write_sep("=", "acceptance criteria")
    for n in range(1, 9):
        terminalreporter.write_line(mod.RESULTS.get(n, f"criterion {n}: NOT RUN - test skipped, deselected or errored before recording"))
