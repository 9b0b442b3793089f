import numpy as np
import pytest

from countyrisk.dataset import CountyRecord, Dataset, VariableSpec
from countyrisk.models import DesignMatrix

SMALL_SCHEMA = (
    VariableSpec("a_pct", "percent", True),
    VariableSpec("b", "index", False),
    VariableSpec("c", "dollars", False),
    VariableSpec("y", "per_100000", False, "outcome"),
)


def make_dataset(coords, table, schema=SMALL_SCHEMA, fips=None):
    """Dataset from an (n, 2) lat/lon array and an (n, len(schema)) table; NaN means missing."""
    coords = np.asarray(coords, dtype=float)
    table = np.asarray(table, dtype=float)
    names = [s.name for s in schema]
    if fips is None:
        fips = [f"{i + 1:05d}" for i in range(len(coords))]
    records = []
    for i, f in enumerate(fips):
        vals = {k: None if np.isnan(table[i, j]) else float(table[i, j]) for j, k in enumerate(names)}
        records.append(CountyRecord(f, float(coords[i, 0]), float(coords[i, 1]), vals))
    return Dataset(tuple(schema), tuple(records))


def random_coords(rng, n):
    return np.column_stack([rng.uniform(30, 45, n), rng.uniform(-110, -75, n)])


def random_matrix(rng, n, p):
    x = rng.normal(size=(n, p))
    y = rng.normal(size=n)
    return DesignMatrix(x, y, tuple(f"x{j}" for j in range(p)), tuple(f"{i:05d}" for i in range(n)))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


# one line per acceptance criterion, echoed at the end of the run
ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
