"""Tabular data container, CSV ingestion, and moment summaries.

The moment summary is the package's single source of distributional truth:
the privacy calibrations consume its variance and centered third/fourth
moments, and the auditor bootstraps from the raw column.  Moments use the
population convention (divide by n) and are accumulated with compensated
summation over an ascending sort, so two datasets with the same multiset of
values produce bit-identical summaries regardless of row order.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from typing import Iterable, Mapping, Optional, Sequence

import numpy as np

from .errors import DataIOError, DomainError, UsageError

Bounds = tuple[float, float]


@dataclass(frozen=True)
class Sensitivity:
    """Worst-case change of a bounded column's sum when one record moves."""

    lower: float
    upper: float

    def __post_init__(self) -> None:
        if not (math.isfinite(self.lower) and math.isfinite(self.upper)):
            raise DomainError(f"bounds must be finite, got ({self.lower}, {self.upper})")
        if not self.lower < self.upper:
            raise DomainError(
                f"bounds must satisfy lower < upper, got ({self.lower}, {self.upper})"
            )

    @property
    def span(self) -> float:
        """Width of the value range; the sum statistic moves by at most this."""
        return self.upper - self.lower


def sensitivity(bounds: Bounds) -> Sensitivity:
    """Validate a (lower, upper) pair and wrap it as a Sensitivity."""
    lo, hi = bounds
    return Sensitivity(float(lo), float(hi))


@dataclass(frozen=True)
class MomentSummary:
    """Population moments of one column.

    ``var``, ``abs3`` and ``cen4`` are per-record averages; ``sum_abs3`` and
    ``sum_cen4`` are the corresponding totals (n times the average), which is
    what the tail bounds consume.
    """

    n: int
    mean: float
    var: float
    abs3: float
    cen4: float

    @property
    def sum_abs3(self) -> float:
        return self.n * self.abs3

    @property
    def sum_cen4(self) -> float:
        return self.n * self.cen4

    def __post_init__(self) -> None:
        if self.n < 1:
            raise DomainError(f"summary needs at least one record, got n={self.n}")
        if self.var < 0 or self.abs3 < 0 or self.cen4 < 0:
            raise DomainError("centered absolute moments cannot be negative")


def summarize(column: Sequence[float] | np.ndarray) -> MomentSummary:
    """Compute population mean/var/E|X-mean|^3/E(X-mean)^4 of a column.

    Accumulation is order-canonical: values are sorted ascending and reduced
    with ``math.fsum``, so the result does not depend on input permutation.
    """
    xs = np.asarray(column, dtype=np.float64)
    if xs.ndim != 1:
        raise UsageError(f"summarize expects a 1-d column, got shape {xs.shape}")
    n = xs.size
    if n < 1:
        raise DomainError("summarize needs at least one value")
    if not np.all(np.isfinite(xs)):
        raise DomainError("column contains non-finite values")

    xs = np.sort(xs)
    mean = math.fsum(xs.tolist()) / n
    dev = xs - mean
    dev_list = dev.tolist()
    var = math.fsum(d * d for d in dev_list) / n
    abs3 = math.fsum(abs(d) ** 3 for d in dev_list) / n
    cen4 = math.fsum(d ** 4 for d in dev_list) / n
    return MomentSummary(n=n, mean=mean, var=var, abs3=abs3, cen4=cen4)


@dataclass(frozen=True)
class Dataset:
    """Immutable table of float features with optional labels and bounds.

    ``values`` is an (n, d) float64 array marked read-only.  ``bounds[j]`` is
    the declared value range of column j or None when the caller declared
    nothing; operations that need bounds (calibration, auditing) insist on the
    declared kind rather than inferring one silently.
    """

    names: tuple[str, ...]
    values: np.ndarray
    bounds: tuple[Optional[Bounds], ...]
    labels: Optional[tuple[str, ...]] = None
    label_name: Optional[str] = None

    def __post_init__(self) -> None:
        vals = np.asarray(self.values, dtype=np.float64)
        if vals.ndim != 2:
            raise DomainError(f"values must be 2-d, got shape {vals.shape}")
        n, d = vals.shape
        if n < 1:
            raise DomainError("dataset needs at least one row")
        if d < 1:
            raise DomainError("dataset needs at least one feature column")
        if len(self.names) != d:
            raise DomainError(f"{len(self.names)} names for {d} columns")
        if len(set(self.names)) != len(self.names):
            raise DomainError("column names must be unique")
        if any(not name for name in self.names):
            raise DomainError("column names must be non-empty")
        if len(self.bounds) != d:
            raise DomainError(f"{len(self.bounds)} bounds entries for {d} columns")
        for name, b in zip(self.names, self.bounds):
            if b is not None:
                sensitivity(b)  # validates lower < upper, finite
        if not np.all(np.isfinite(vals)):
            raise DomainError("dataset contains non-finite values")
        if self.labels is not None and len(self.labels) != n:
            raise DomainError(f"{len(self.labels)} labels for {n} rows")
        if (self.labels is None) != (self.label_name is None):
            raise DomainError("labels and label_name must be provided together")
        vals.setflags(write=False)
        object.__setattr__(self, "values", vals)

    @property
    def n(self) -> int:
        return self.values.shape[0]

    @property
    def dim(self) -> int:
        return self.values.shape[1]

    def column(self, name: str) -> np.ndarray:
        try:
            j = self.names.index(name)
        except ValueError:
            raise UsageError(f"no column named {name!r}") from None
        return self.values[:, j]

    def column_bounds(self, name: str) -> Optional[Bounds]:
        return self.bounds[self.names.index(name)]


def ingest_csv(
    path: str,
    bounds: Optional[Mapping[str, Bounds]] = None,
    label_column: Optional[str] = None,
    clip: bool = False,
) -> Dataset:
    """Read a headered CSV into a Dataset.

    Feature cells must parse as finite floats; violations report the 1-based
    data row and column name.  Columns listed in ``bounds`` are range-checked
    (first offending cell reported) unless ``clip`` is set, in which case they
    are clipped to the declared range.  Row order is preserved.
    """
    bounds = dict(bounds) if bounds else {}
    try:
        with open(path, newline="", encoding="utf-8") as fh:
            reader = csv.reader(fh)
            try:
                header = next(reader)
            except StopIteration:
                raise DataIOError(f"{path}: empty file") from None
            rows = list(reader)
    except OSError as exc:
        raise DataIOError(f"cannot read {path}: {exc}") from exc

    header = [h.strip() for h in header]
    if label_column is not None and label_column not in header:
        raise UsageError(f"label column {label_column!r} not found in {path}")
    label_idx = header.index(label_column) if label_column is not None else None
    feature_names = tuple(h for i, h in enumerate(header) if i != label_idx)

    unknown = set(bounds) - set(feature_names)
    if unknown:
        raise UsageError(f"bounds declared for unknown columns: {sorted(unknown)}")

    if not rows:
        raise DataIOError(f"{path}: no data rows")

    values = np.empty((len(rows), len(feature_names)), dtype=np.float64)
    labels: list[str] = []
    for r, row in enumerate(rows):
        if len(row) != len(header):
            raise DataIOError(
                f"{path}: row {r + 1} has {len(row)} cells, expected {len(header)}"
            )
        c = 0
        for i, cell in enumerate(row):
            if i == label_idx:
                labels.append(cell.strip())
                continue
            try:
                x = float(cell)
            except ValueError:
                raise DataIOError(
                    f"{path}: row {r + 1}, column {header[i]!r}: "
                    f"cannot parse {cell.strip()!r} as a number"
                ) from None
            if not math.isfinite(x):
                raise DataIOError(
                    f"{path}: row {r + 1}, column {header[i]!r}: non-finite value"
                )
            values[r, c] = x
            c += 1

    col_bounds: list[Optional[Bounds]] = []
    for j, name in enumerate(feature_names):
        b = bounds.get(name)
        if b is None:
            col_bounds.append(None)
            continue
        lo, hi = sensitivity(b).lower, sensitivity(b).upper
        col = values[:, j]
        if clip:
            np.clip(col, lo, hi, out=col)
        else:
            bad = np.flatnonzero((col < lo) | (col > hi))
            if bad.size:
                r = int(bad[0])
                raise DomainError(
                    f"{path}: row {r + 1}, column {name!r}: value {float(col[r])!r} "
                    f"outside declared bounds [{lo}, {hi}] (use clipping to accept)"
                )
        col_bounds.append((lo, hi))

    return Dataset(
        names=feature_names,
        values=values,
        bounds=tuple(col_bounds),
        labels=tuple(labels) if label_idx is not None else None,
        label_name=label_column,
    )


def write_csv(
    path: str,
    names: Iterable[str],
    values: np.ndarray,
    labels: Optional[Sequence[str]] = None,
    label_name: Optional[str] = None,
) -> None:
    """Write a feature table (plus optional label column) as CSV.

    Floats are rendered with repr-style shortest round-trip formatting, so a
    byte-identical array yields a byte-identical file.
    """
    names = list(names)
    if (labels is None) != (label_name is None):
        raise UsageError("labels and label_name must be provided together")
    try:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(names + ([label_name] if label_name else []))
            for i, row in enumerate(np.asarray(values, dtype=np.float64)):
                cells = [repr(float(x)) for x in row]
                if labels is not None:
                    cells.append(labels[i])
                writer.writerow(cells)
    except OSError as exc:
        raise DataIOError(f"cannot write {path}: {exc}") from exc
