"""Shared fixtures and dataset builders for the test suite.

Hypothesis runs derandomized so the suite is reproducible run to run; the
data builders below key their generators through the package's own Philox
construction so fixture bytes are stable across platforms too.
"""

from __future__ import annotations

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from dcpriv.rng import generator
from dcpriv.stats import Dataset

settings.register_profile(
    "deterministic",
    derandomize=True,
    deadline=None,
    max_examples=50,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("deterministic")

UNIT_SQUARE = ((0.0, 1.0), (0.0, 1.0))

# Private key streams for fixture data; distinct from the package's own
# streams so fixtures never collide with what the code under test draws.
_FIXTURE_STREAM = 7001


def make_two_gaussian(n_per_class: int = 60, seed: int = 404, sd: float = 0.08) -> Dataset:
    """Two separated Gaussian blobs in the unit square, labeled a/b."""
    g = generator(seed, _FIXTURE_STREAM, 1)
    lo = g.normal(0.3, sd, size=(n_per_class, 2))
    hi = g.normal(0.7, sd, size=(n_per_class, 2))
    values = np.clip(np.concatenate([lo, hi]), 0.0, 1.0)
    labels = ("a",) * n_per_class + ("b",) * n_per_class
    return Dataset(("u", "v"), values, UNIT_SQUARE, labels, "cls")


def make_uniform(n: int = 200, seed: int = 11) -> Dataset:
    """Single uniform [0, 1] column with declared unit bounds."""
    g = generator(seed, _FIXTURE_STREAM, 2)
    values = g.uniform(0.0, 1.0, size=(n, 1))
    return Dataset(("x",), values, ((0.0, 1.0),), None, None)


def dataset_csv_lines(data: Dataset) -> list[str]:
    """Render a Dataset as CSV lines with exact round-trip float cells."""
    header = list(data.names)
    if data.label_name is not None:
        header.append(data.label_name)
    lines = [",".join(header)]
    for i in range(data.n):
        cells = [f"{float(v)!r}" for v in data.values[i]]
        if data.labels is not None:
            cells.append(data.labels[i])
        lines.append(",".join(cells))
    return lines


@pytest.fixture
def csv_factory(tmp_path):
    """Return a writer: csv_factory(name, header, rows) -> path string."""

    def write(name: str, header, rows) -> str:
        path = tmp_path / name
        lines = [",".join(str(h) for h in header)]
        for row in rows:
            lines.append(",".join(str(c) for c in row))
        path.write_text("\n".join(lines) + "\n", encoding="utf-8")
        return str(path)

    return write


@pytest.fixture
def dataset_csv(tmp_path):
    """Return a writer that persists a Dataset to CSV and yields its path."""

    def write(data: Dataset, name: str = "data.csv") -> str:
        path = tmp_path / name
        path.write_text("\n".join(dataset_csv_lines(data)) + "\n", encoding="utf-8")
        return str(path)

    return write


@pytest.fixture
def two_gaussian() -> Dataset:
    return make_two_gaussian()


@pytest.fixture
def uniform_data() -> Dataset:
    return make_uniform()
