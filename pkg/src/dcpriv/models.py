"""Small deterministic classifier for measuring synthetic-data utility.

Multinomial logistic regression, trained full-batch with the same
accept-only-improvement backtracking rule as the condenser, so training loss
is non-increasing by construction and a (data, params) pair maps to exactly
one model.  This is deliberately the most boring classifier that can exhibit
a utility gap; nothing here is tuned.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Union

import numpy as np

from .condense import SyntheticSet
from .errors import DomainError, UsageError
from .rng import STREAM_MODEL_INIT, generator
from .stats import Dataset

MAX_HALVINGS = 30

Trainable = Union[Dataset, SyntheticSet]


@dataclass(frozen=True)
class TrainParams:
    epochs: int
    lr: float = 1.0
    seed: int = 0

    def __post_init__(self) -> None:
        if self.epochs < 1:
            raise UsageError(f"epochs must be >= 1, got {self.epochs}")
        if not (self.lr > 0):
            raise UsageError(f"learning rate must be > 0, got {self.lr}")
        if self.seed < 0:
            raise UsageError(f"seed must be non-negative, got {self.seed}")


@dataclass(frozen=True)
class LinearModel:
    """Multinomial logistic weights plus the label vocabulary they index."""

    classes: tuple[str, ...]
    feature_names: tuple[str, ...]
    weights: np.ndarray  # (n_features, n_classes)
    bias: np.ndarray  # (n_classes,)
    trained_on: str  # "original" | "synthetic"

    def __post_init__(self) -> None:
        w = np.asarray(self.weights, dtype=np.float64)
        b = np.asarray(self.bias, dtype=np.float64)
        if w.shape != (len(self.feature_names), len(self.classes)):
            raise DomainError(
                f"weights shape {w.shape} inconsistent with "
                f"{len(self.feature_names)} features x {len(self.classes)} classes"
            )
        if b.shape != (len(self.classes),):
            raise DomainError(f"bias shape {b.shape} inconsistent with classes")
        w.setflags(write=False)
        b.setflags(write=False)
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "bias", b)

    def logits(self, x: np.ndarray) -> np.ndarray:
        return np.asarray(x, dtype=np.float64) @ self.weights + self.bias


@dataclass(frozen=True)
class EvalResult:
    """Accuracy and confusion counts; FP/FN rates only for binary tasks.

    For two classes the positive class is the lexicographically larger label;
    fp_rate conditions on actual negatives and fn_rate on actual positives.
    """

    accuracy: float
    confusion: tuple[tuple[int, ...], ...]  # confusion[true][pred], class order
    classes: tuple[str, ...]
    n: int
    fp_rate: Optional[float] = None
    fn_rate: Optional[float] = None


def _softmax(logits: np.ndarray) -> np.ndarray:
    shifted = logits - logits.max(axis=1, keepdims=True)
    expd = np.exp(shifted)
    return expd / expd.sum(axis=1, keepdims=True)


def _mean_cross_entropy(probs: np.ndarray, y: np.ndarray) -> float:
    # probs rows sum to 1 and every entry is positive after the shift in
    # _softmax, so the log is safe.
    return float(-np.log(probs[np.arange(len(y)), y]).mean())


def _encode(data: Trainable) -> tuple[np.ndarray, np.ndarray, tuple[str, ...]]:
    if data.labels is None:
        raise UsageError("training requires labeled data")
    classes = tuple(sorted(set(data.labels)))
    if len(classes) < 2:
        raise DomainError(
            f"need at least 2 classes to train, got {classes!r}"
        )
    index = {cls: i for i, cls in enumerate(classes)}
    y = np.array([index[lbl] for lbl in data.labels], dtype=np.int64)
    return data.values, y, classes


def cross_entropy(model: LinearModel, data: Trainable) -> float:
    """Mean cross-entropy of the model on labeled data (for loss tracking)."""
    if data.labels is None:
        raise UsageError("cross_entropy requires labeled data")
    index = {cls: i for i, cls in enumerate(model.classes)}
    try:
        y = np.array([index[lbl] for lbl in data.labels], dtype=np.int64)
    except KeyError as exc:
        raise UsageError(f"label {exc.args[0]!r} unknown to the model") from None
    return _mean_cross_entropy(_softmax(model.logits(data.values)), y)


def train(data: Trainable, epochs: int, lr: float, seed: int) -> LinearModel:
    """Fit multinomial logistic regression; deterministic in (data, args).

    Weights start at small seeded noise (keeps argmax tie-breaking stable),
    bias at zero.  Each epoch takes one full-batch gradient step with
    backtracking halving, accepting only non-increasing loss; if no step
    length improves, training stops early.
    """
    params = TrainParams(epochs=epochs, lr=lr, seed=seed)
    x, y, classes = _encode(data)
    n, d = x.shape
    n_classes = len(classes)
    onehot = np.zeros((n, n_classes))
    onehot[np.arange(n), y] = 1.0

    g = generator(params.seed, STREAM_MODEL_INIT)
    weights = g.normal(0.0, 0.01, size=(d, n_classes))
    bias = np.zeros(n_classes)

    current = _mean_cross_entropy(_softmax(x @ weights + bias), y)
    for _ in range(params.epochs):
        probs = _softmax(x @ weights + bias)
        residual = (probs - onehot) / n
        grad_w = x.T @ residual
        grad_b = residual.sum(axis=0)
        step = params.lr
        accepted = False
        for _ in range(MAX_HALVINGS + 1):
            cand_w = weights - step * grad_w
            cand_b = bias - step * grad_b
            cand_loss = _mean_cross_entropy(_softmax(x @ cand_w + cand_b), y)
            if cand_loss <= current:
                accepted = True
                break
            step *= 0.5
        if not accepted:
            break
        weights, bias, current = cand_w, cand_b, cand_loss

    tag = "synthetic" if isinstance(data, SyntheticSet) else "original"
    return LinearModel(
        classes=classes,
        feature_names=data.names,
        weights=weights,
        bias=bias,
        trained_on=tag,
    )


def evaluate(model: LinearModel, test: Dataset) -> EvalResult:
    """Confusion counts and accuracy of the model on a labeled test set."""
    if test.labels is None:
        raise UsageError("evaluation requires a labeled test set")
    if test.names != model.feature_names:
        raise UsageError(
            f"schema mismatch: model features {model.feature_names} vs test "
            f"columns {test.names}"
        )
    index = {cls: i for i, cls in enumerate(model.classes)}
    unknown = sorted(set(test.labels) - set(model.classes))
    if unknown:
        raise UsageError(f"test labels {unknown} unknown to the model")
    y = np.array([index[lbl] for lbl in test.labels], dtype=np.int64)
    pred = np.argmax(model.logits(test.values), axis=1)

    k = len(model.classes)
    counts = np.zeros((k, k), dtype=np.int64)
    np.add.at(counts, (y, pred), 1)
    accuracy = float(np.trace(counts) / test.n)

    fp_rate = fn_rate = None
    if k == 2:
        # positive = lexicographically larger label = index 1 (classes sorted)
        actual_neg = counts[0].sum()
        actual_pos = counts[1].sum()
        fp = counts[0, 1]  # actual negative, predicted positive
        fn = counts[1, 0]
        fp_rate = float(fp / actual_neg) if actual_neg else 0.0
        fn_rate = float(fn / actual_pos) if actual_pos else 0.0

    return EvalResult(
        accuracy=accuracy,
        confusion=tuple(tuple(int(c) for c in row) for row in counts),
        classes=model.classes,
        n=test.n,
        fp_rate=fp_rate,
        fn_rate=fn_rate,
    )


def utility_gap(
    original: Dataset,
    synth: SyntheticSet,
    test: Dataset,
    train_params: TrainParams,
) -> float:
    """Accuracy(train on original) - accuracy(train on synthetic), on one test set."""
    model_full = train(original, train_params.epochs, train_params.lr, train_params.seed)
    model_synth = train(synth, train_params.epochs, train_params.lr, train_params.seed)
    acc_full = evaluate(model_full, test).accuracy
    acc_synth = evaluate(model_synth, test).accuracy
    return acc_full - acc_synth
