"""Per-command configuration bags echoed verbatim into reports.

Field names mirror the CLI flags (dashes become underscores) so the config
block of a report reads as the parsed argv.  Every bag round-trips through
JSON losslessly: ``to_dict`` emits exactly the JSON shape, ``from_dict``
rebuilds the bag and rejects unknown keys.
"""

from __future__ import annotations

from dataclasses import dataclass, field, fields
from typing import Any, Mapping, Optional

from .errors import UsageError


@dataclass(frozen=True)
class RunConfig:
    def to_dict(self) -> dict[str, Any]:
        return {f.name: getattr(self, f.name) for f in fields(self)}

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "RunConfig":
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(data) - known)
        if unknown:
            raise UsageError(
                f"unknown {cls.__name__} keys: {unknown} (known: {sorted(known)})"
            )
        try:
            return cls(**dict(data))
        except TypeError as exc:
            raise UsageError(f"invalid {cls.__name__}: {exc}") from None


@dataclass(frozen=True)
class CalibrateRun(RunConfig):
    input: str
    bounds: dict[str, list[float]] = field(default_factory=dict)
    gamma: float = 0.0
    columns: Optional[list[str]] = None
    label: Optional[str] = None
    clip: bool = False
    report: Optional[str] = None
    figures: Optional[str] = None


@dataclass(frozen=True)
class CondenseRun(RunConfig):
    input: str
    label: str
    per_class: int
    iters: int
    seed: int
    output: str
    feature_dim: int = 32
    step: float = 0.5
    loss_tol: float = 0.0
    bounds: dict[str, list[float]] = field(default_factory=dict)
    clip: bool = False
    trace: Optional[str] = None
    report: Optional[str] = None
    figures: Optional[str] = None


@dataclass(frozen=True)
class AuditRun(RunConfig):
    input: str
    mechanism: str
    trials: int
    seed: int
    bounds: dict[str, list[float]] = field(default_factory=dict)
    gamma: float = 0.0
    delta: Optional[float] = None
    slack: float = 0.25
    threshold_grid: int = 33
    label: Optional[str] = None
    clip: bool = False
    per_class: int = 1
    iters: int = 40
    feature_dim: int = 16
    step: float = 0.5
    report: Optional[str] = None
    figures: Optional[str] = None


@dataclass(frozen=True)
class EvaluateRun(RunConfig):
    train: str
    test: str
    label: str
    epochs: int
    seed: int
    lr: float = 1.0
    report: Optional[str] = None
    figures: Optional[str] = None


@dataclass(frozen=True)
class PipelineRun(RunConfig):
    input: str
    label: str
    per_class: int
    trials: int
    seed: int
    bounds: dict[str, list[float]] = field(default_factory=dict)
    iters: int = 150
    feature_dim: int = 32
    step: float = 0.5
    loss_tol: float = 0.0
    gamma: float = 0.0
    delta: Optional[float] = None
    slack: float = 0.25
    threshold_grid: int = 33
    epochs: int = 200
    lr: float = 1.0
    test: Optional[str] = None
    output: Optional[str] = None
    clip: bool = False
    report: Optional[str] = None
    figures: Optional[str] = None
