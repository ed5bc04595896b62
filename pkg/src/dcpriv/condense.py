"""Condense a labeled dataset into a few synthetic rows per class.

The synthetic set minimizes, by full-batch projected gradient descent, the
sum over classes of the squared distance between the mean embedded features
of the synthetic rows and of the real rows.  The embedding is a frozen random
feature map phi(x) = tanh(x @ W + b) — never trained — so the objective has a
closed-form gradient and the whole procedure is deterministic given the seed.

An identity embedding is part of the public surface: with it the optimum of
the one-row-per-class problem is exactly the class mean, which test oracles
lean on.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Protocol, Sequence

import numpy as np

from .errors import DomainError, UsageError
from .rng import STREAM_CONDENSE_INIT, STREAM_EMBEDDING, generator
from .stats import Bounds, Dataset, write_csv

# Line search: try the configured step, then halve on any loss increase.
MAX_HALVINGS = 30


class Embedding(Protocol):
    """Feature map with enough structure to pull gradients back to inputs."""

    def features(self, x: np.ndarray) -> np.ndarray:
        """Map an (m, d) batch to an (m, k) feature batch."""
        ...

    def pull_back(self, x: np.ndarray, cotangent: np.ndarray) -> np.ndarray:
        """Given dL/dfeatures at x, return dL/dx (same shape as x)."""
        ...


class IdentityEmbedding:
    """Pass-through embedding; makes the matching objective a plain mean match."""

    def features(self, x: np.ndarray) -> np.ndarray:
        return np.asarray(x, dtype=np.float64)

    def pull_back(self, x: np.ndarray, cotangent: np.ndarray) -> np.ndarray:
        return np.asarray(cotangent, dtype=np.float64)


class RandomFeatureEmbedding:
    """Frozen tanh random features: phi(x) = tanh(x @ W + b).

    W has N(0, 1/input_dim) entries and b has N(0, 1) entries, keeping
    pre-activations O(1) for roughly unit-scale inputs so tanh stays in its
    responsive range.
    """

    def __init__(self, weights: np.ndarray, bias: np.ndarray) -> None:
        weights = np.asarray(weights, dtype=np.float64)
        bias = np.asarray(bias, dtype=np.float64)
        if weights.ndim != 2 or bias.ndim != 1 or weights.shape[1] != bias.shape[0]:
            raise UsageError(
                f"inconsistent embedding shapes: weights {weights.shape}, "
                f"bias {bias.shape}"
            )
        weights.setflags(write=False)
        bias.setflags(write=False)
        self.weights = weights
        self.bias = bias

    @classmethod
    def from_seed(cls, seed: int, input_dim: int, width: int) -> "RandomFeatureEmbedding":
        if input_dim < 1 or width < 1:
            raise UsageError("embedding dimensions must be >= 1")
        g = generator(seed, STREAM_EMBEDDING)
        weights = g.normal(0.0, 1.0, size=(input_dim, width)) / math.sqrt(input_dim)
        bias = g.normal(0.0, 1.0, size=width)
        return cls(weights, bias)

    def features(self, x: np.ndarray) -> np.ndarray:
        return np.tanh(np.asarray(x, dtype=np.float64) @ self.weights + self.bias)

    def pull_back(self, x: np.ndarray, cotangent: np.ndarray) -> np.ndarray:
        phi = self.features(x)
        return (cotangent * (1.0 - phi * phi)) @ self.weights.T


@dataclass(frozen=True)
class CondenseConfig:
    m_per_class: int
    iters: int
    seed: int
    step_size: float = 0.5
    feature_dim: int = 32
    loss_tol: float = 0.0

    def __post_init__(self) -> None:
        if self.m_per_class < 1:
            raise UsageError(f"m_per_class must be >= 1, got {self.m_per_class}")
        if self.iters < 1:
            raise UsageError(f"iters must be >= 1, got {self.iters}")
        if self.seed < 0:
            raise UsageError(f"seed must be a non-negative integer, got {self.seed}")
        if not (self.step_size > 0):
            raise UsageError(f"step_size must be > 0, got {self.step_size}")
        if self.feature_dim < 1:
            raise UsageError(f"feature_dim must be >= 1, got {self.feature_dim}")
        if self.loss_tol < 0:
            raise UsageError(f"loss_tol must be >= 0, got {self.loss_tol}")


@dataclass(frozen=True)
class SyntheticSet:
    """Condensed rows, m_per_class per class, inside the source bounds box."""

    names: tuple[str, ...]
    values: np.ndarray
    bounds: tuple[Bounds, ...]
    labels: tuple[str, ...]
    label_name: str
    m_per_class: int

    def __post_init__(self) -> None:
        vals = np.asarray(self.values, dtype=np.float64)
        if vals.ndim != 2 or vals.shape != (len(self.labels), len(self.names)):
            raise DomainError(
                f"synthetic values shape {vals.shape} inconsistent with "
                f"{len(self.labels)} labels and {len(self.names)} columns"
            )
        vals.setflags(write=False)
        object.__setattr__(self, "values", vals)
        counts: dict[str, int] = {}
        for label in self.labels:
            counts[label] = counts.get(label, 0) + 1
        off = {c: k for c, k in counts.items() if k != self.m_per_class}
        if off:
            raise DomainError(
                f"per-class row counts {off} do not match the requested "
                f"{self.m_per_class} rows per class"
            )

    @property
    def m(self) -> int:
        return self.values.shape[0]

    @property
    def classes(self) -> tuple[str, ...]:
        return tuple(sorted(set(self.labels)))


@dataclass(frozen=True)
class MatchLoss:
    """Sum over classes of squared embedded-mean mismatch; zero iff they coincide."""

    value: float

    def __post_init__(self) -> None:
        if not (self.value >= 0):
            raise DomainError(f"match loss cannot be negative, got {self.value}")


def _sorted_class_rows(data: Dataset) -> dict[str, np.ndarray]:
    """Rows of each class in lexicographic order, so row order never matters."""
    if data.labels is None:
        raise UsageError("condensation requires labeled data (no label column given)")
    out: dict[str, np.ndarray] = {}
    labels = np.asarray(data.labels, dtype=object)
    for cls in sorted(set(data.labels)):
        rows = data.values[labels == cls]
        order = np.lexsort(tuple(rows[:, j] for j in reversed(range(rows.shape[1]))))
        out[cls] = rows[order]
    return out


def _class_means(
    class_rows: dict[str, np.ndarray], embedding: Embedding
) -> dict[str, np.ndarray]:
    return {cls: embedding.features(rows).mean(axis=0) for cls, rows in class_rows.items()}


def _loss_value(
    synth_values: np.ndarray,
    slices: Sequence[tuple[str, slice]],
    target_means: dict[str, np.ndarray],
    embedding: Embedding,
) -> float:
    phi = embedding.features(synth_values)
    total = 0.0
    for cls, sl in slices:  # ascending class order fixes the reduction order
        diff = phi[sl].mean(axis=0) - target_means[cls]
        total += float(diff @ diff)
    return total


def _loss_gradient(
    synth_values: np.ndarray,
    slices: Sequence[tuple[str, slice]],
    target_means: dict[str, np.ndarray],
    embedding: Embedding,
) -> np.ndarray:
    phi = embedding.features(synth_values)
    cotangent = np.empty_like(phi)
    for cls, sl in slices:
        diff = phi[sl].mean(axis=0) - target_means[cls]
        m_c = sl.stop - sl.start
        cotangent[sl] = (2.0 / m_c) * diff
    return embedding.pull_back(synth_values, cotangent)


def _bounds_box(data: Dataset) -> tuple[Bounds, ...]:
    """Declared bounds where given, otherwise the observed column range."""
    box: list[Bounds] = []
    for j, b in enumerate(data.bounds):
        if b is not None:
            box.append(b)
        else:
            col = data.values[:, j]
            box.append((float(col.min()), float(col.max())))
    return tuple(box)


def condense(
    data: Dataset,
    config: CondenseConfig,
    embedding: Optional[Embedding] = None,
) -> tuple[SyntheticSet, list[float]]:
    """Optimize m_per_class synthetic rows per class against the class means.

    Returns the synthetic set and the accepted-step loss trace (first entry is
    the initialization loss).  The trace is non-increasing: a step that fails
    to improve after 30 halvings ends the optimization.  Output is a pure
    function of (data-as-multiset, config, embedding).
    """
    class_rows = _sorted_class_rows(data)
    classes = sorted(class_rows)
    if embedding is None:
        embedding = RandomFeatureEmbedding.from_seed(
            config.seed, data.dim, config.feature_dim
        )
    target_means = _class_means(class_rows, embedding)

    m = config.m_per_class
    slices = [(cls, slice(i * m, (i + 1) * m)) for i, cls in enumerate(classes)]

    # Start each synthetic row at a seeded draw from its own class; the key
    # (seed, class index, slot) makes the draw independent of row order and of
    # the other slots.
    synth = np.empty((m * len(classes), data.dim), dtype=np.float64)
    for ci, cls in enumerate(classes):
        rows = class_rows[cls]
        for slot in range(m):
            g = generator(config.seed, STREAM_CONDENSE_INIT, ci, slot)
            synth[ci * m + slot] = rows[int(g.integers(rows.shape[0]))]

    box = _bounds_box(data)
    lo = np.array([b[0] for b in box])
    hi = np.array([b[1] for b in box])
    np.clip(synth, lo, hi, out=synth)

    current = _loss_value(synth, slices, target_means, embedding)
    trace = [current]
    for _ in range(config.iters):
        grad = _loss_gradient(synth, slices, target_means, embedding)
        step = config.step_size
        accepted = False
        for _ in range(MAX_HALVINGS + 1):
            candidate = np.clip(synth - step * grad, lo, hi)
            cand_loss = _loss_value(candidate, slices, target_means, embedding)
            if cand_loss <= current:
                accepted = True
                break
            step *= 0.5
        if not accepted:
            break
        improvement = current - cand_loss
        synth, current = candidate, cand_loss
        trace.append(current)
        if improvement < config.loss_tol:
            break

    labels = tuple(cls for cls, _ in slices for _ in range(m))
    synth_set = SyntheticSet(
        names=data.names,
        values=synth,
        bounds=box,
        labels=labels,
        label_name=data.label_name or "label",
        m_per_class=m,
    )
    return synth_set, trace


def match_loss(
    data: Dataset, synth: SyntheticSet, embedding: Embedding
) -> MatchLoss:
    """Embedded-mean mismatch between a dataset and a synthetic set."""
    if data.names != synth.names:
        raise UsageError(
            f"schema mismatch: data columns {data.names} vs synthetic "
            f"columns {synth.names}"
        )
    class_rows = _sorted_class_rows(data)
    if set(class_rows) != set(synth.labels):
        raise UsageError(
            f"class mismatch: data has {sorted(class_rows)}, synthetic has "
            f"{sorted(set(synth.labels))}"
        )
    target_means = _class_means(class_rows, embedding)
    labels = np.asarray(synth.labels, dtype=object)
    total = 0.0
    for cls in sorted(class_rows):
        phi = embedding.features(synth.values[labels == cls])
        diff = phi.mean(axis=0) - target_means[cls]
        total += float(diff @ diff)
    return MatchLoss(value=total)


def write_synthetic_csv(synth: SyntheticSet, path: str) -> None:
    """Persist the synthetic set with the same schema as its source."""
    write_csv(
        path,
        synth.names,
        synth.values,
        labels=list(synth.labels),
        label_name=synth.label_name,
    )
