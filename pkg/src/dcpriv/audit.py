"""Empirical privacy audit via membership-inference trials.

The audit plays the distinguishing game behind the (epsilon, delta)
definition: two neighboring datasets D and D' differ only in record 0 of the
audited column (set to the lower/upper target bound — the most
distinguishable pair).  Each trial picks one world by a fair seeded coin,
runs the mechanism with fresh bootstrap-resampled masking records, and a
threshold attacker guesses the world from a scalar statistic:

* ``sum`` — the released noiseless sum (minus the exact contribution of the
  floor(gamma*n) records the attacker already knows);
* ``condense`` — negated distance from the target's candidate record to the
  nearest synthetic row of a freshly condensed set (close means memorized).

False-positive/false-negative rates over the trials convert into an empirical
epsilon, maximized over a threshold grid, and are reconciled against the
closed-form epsilon calibrated from the same column.

Determinism contract: trial t draws all of its randomness from a generator
keyed (seed, trial stream, t), trials write disjoint array slots, and
aggregation is single-threaded — so reports are byte-identical no matter how
many threads DCPRIV_THREADS grants.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from typing import Callable, Optional

import numpy as np

from .calibrate import (
    ConfusionRates,
    EpsilonEstimate,
    ThreatModel,
    VACUOUS_DELTA,
    calibrate_params,
    epsilon_from_rates,
)
from .condense import CondenseConfig, condense
from .errors import DomainError, UsageError
from .rng import STREAM_AUDIT_TRIAL, generator
from .stats import Bounds, Dataset, sensitivity, summarize

MIN_TRIALS = 100
MIN_THRESHOLD_GRID = 3
DEFAULT_SLACK = 0.25

# When the calibrated delta is vacuous the working delta is capped just
# below 1 so the rate-based estimator stays defined; the vacuous flag rides
# along in the report.
DELTA_USED_CAP = 0.999999

VERDICT_CONSISTENT = "consistent"
VERDICT_VIOLATION = "violation_suspected"


@dataclass(frozen=True)
class AuditConfig:
    mechanism: str  # "sum" | "condense"
    trials: int
    seed: int
    target_bounds: Bounds
    delta: Optional[float] = None  # None: default to the calibrated delta
    gamma: float = 0.0
    threshold_grid: int = 33
    slack: float = DEFAULT_SLACK
    condense: Optional[CondenseConfig] = None

    def __post_init__(self) -> None:
        if self.mechanism not in ("sum", "condense"):
            raise UsageError(f"unknown mechanism {self.mechanism!r}")
        if self.trials < MIN_TRIALS:
            raise UsageError(
                f"trials must be >= {MIN_TRIALS} for rate estimates to mean "
                f"anything, got {self.trials}"
            )
        if self.seed < 0:
            raise UsageError(f"seed must be non-negative, got {self.seed}")
        sensitivity(self.target_bounds)
        if self.delta is not None and not (0.0 <= self.delta < 1.0):
            raise UsageError(f"delta must lie in [0, 1), got {self.delta}")
        if not (0.0 <= self.gamma < 1.0):
            raise UsageError(f"gamma must lie in [0, 1), got {self.gamma}")
        if self.threshold_grid < MIN_THRESHOLD_GRID:
            raise UsageError(
                f"threshold_grid must be >= {MIN_THRESHOLD_GRID}, got "
                f"{self.threshold_grid}"
            )
        if self.slack < 0:
            raise UsageError(f"slack must be >= 0, got {self.slack}")
        if self.mechanism == "condense" and self.condense is None:
            raise UsageError("condense mechanism requires a condense configuration")


@dataclass(frozen=True)
class AuditReport:
    """Everything the reconciliation needs, plus the sweep behind it.

    ``fp_rate``/``fn_rate`` are floored at 1/trials (so ``epsilon_empirical``
    is always finite); the raw rates carry what was actually observed, and the
    ``unbounded`` flag records that a raw rate was exactly zero with slack
    left over.  ``epsilon_theoretical`` is None when the theory side is
    structurally incomputable (single-record data), in which case the verdict
    rests on the flags alone.
    """

    mechanism: str
    trials: int
    n: int
    gamma: float
    delta_used: float
    fp_rate: float
    fn_rate: float
    fp_rate_raw: float
    fn_rate_raw: float
    epsilon_empirical: float
    epsilon_theoretical: Optional[float]
    delta_theoretical: Optional[float]
    theory_provenance: Optional[str]
    best_threshold: float
    slack: float
    verdict: str
    clamped: bool
    unbounded: bool
    vacuous_delta: bool
    thresholds: tuple[float, ...]
    sweep_fp_raw: tuple[float, ...]
    sweep_fn_raw: tuple[float, ...]
    sweep_epsilon: tuple[float, ...]

    @property
    def flags(self) -> tuple[str, ...]:
        out = []
        if self.clamped:
            out.append("clamped")
        if self.unbounded:
            out.append("unbounded")
        if self.vacuous_delta:
            out.append("vacuous_delta")
        return tuple(out)


def make_neighbors(data: Dataset, target_bounds: Bounds) -> tuple[Dataset, Dataset]:
    """The maximally distinguishable neighbor pair for the audited column.

    Returns (D, D') where record 0 of the first feature column is pinned to
    the lower/upper target bound respectively; all other cells are shared.
    """
    bounds = sensitivity(target_bounds)
    low = data.values.copy()
    high = data.values.copy()
    low[0, 0] = bounds.lower
    high[0, 0] = bounds.upper
    common = dict(
        names=data.names,
        bounds=data.bounds,
        labels=data.labels,
        label_name=data.label_name,
    )
    return (
        Dataset(values=low, **common),
        Dataset(values=high, **common),
    )


def _thread_count() -> int:
    raw = os.environ.get("DCPRIV_THREADS")
    if raw is None:
        return 1
    try:
        threads = int(raw)
    except ValueError:
        threads = 0
    if threads < 1:
        raise UsageError(
            f"DCPRIV_THREADS must be a positive integer, got {raw!r}"
        )
    return threads


def _run_trials(
    trials: int, trial_fn: Callable[[int], tuple[int, float]]
) -> tuple[np.ndarray, np.ndarray]:
    """Fill per-trial (world, statistic) arrays, possibly on several threads.

    Threads own disjoint contiguous index ranges and write only their own
    slots; the result is identical for any thread count.
    """
    worlds = np.empty(trials, dtype=np.int64)
    stats = np.empty(trials, dtype=np.float64)

    def fill(lo: int, hi: int) -> None:
        for t in range(lo, hi):
            worlds[t], stats[t] = trial_fn(t)

    threads = min(_thread_count(), trials)
    if threads <= 1:
        fill(0, trials)
    else:
        chunk = -(-trials // threads)
        ranges = [(i, min(i + chunk, trials)) for i in range(0, trials, chunk)]
        with ThreadPoolExecutor(max_workers=threads) as pool:
            futures = [pool.submit(fill, lo, hi) for lo, hi in ranges]
            for f in futures:
                f.result()
    return worlds, stats


def _sum_trial_fn(
    data: Dataset, config: AuditConfig
) -> Callable[[int], tuple[int, float]]:
    col = data.values[:, 0]
    n = data.n
    lower, upper = config.target_bounds
    known = math.floor(config.gamma * n)
    n_mask = n - 1 - known
    if n_mask < 0:
        raise DomainError(
            f"gamma={config.gamma} leaves no unknown masking records at n={n}"
        )

    def run(t: int) -> tuple[int, float]:
        g = generator(config.seed, STREAM_AUDIT_TRIAL, t)
        world = int(g.integers(0, 2))
        target = upper if world else lower
        if n_mask:
            idx = g.integers(0, n, size=n_mask)
            return world, target + float(col[idx].sum())
        return world, float(target)

    return run


def _condense_trial_fn(
    data: Dataset, config: AuditConfig
) -> Callable[[int], tuple[int, float]]:
    if data.labels is None:
        raise UsageError("condense-mechanism audits need labeled data")
    base = config.condense
    assert base is not None  # enforced by AuditConfig
    labels = np.asarray(data.labels, dtype=object)
    lower, upper = config.target_bounds
    n = data.n
    probe = data.values[0].copy()
    probe[0] = upper  # the candidate record whose membership is tested
    probe.setflags(write=False)

    def run(t: int) -> tuple[int, float]:
        g = generator(config.seed, STREAM_AUDIT_TRIAL, t)
        world = int(g.integers(0, 2))
        target_row = data.values[0].copy()
        target_row[0] = upper if world else lower
        if n > 1:
            idx = g.integers(0, n, size=n - 1)
            rows = np.vstack([target_row[None, :], data.values[idx]])
            row_labels = (data.labels[0], *labels[idx])
        else:
            rows = target_row[None, :]
            row_labels = (data.labels[0],)
        trial_data = Dataset(
            names=data.names,
            values=rows,
            bounds=data.bounds,
            labels=row_labels,
            label_name=data.label_name,
        )
        trial_config = replace(base, seed=int(g.integers(0, 2**62)))
        synth, _ = condense(trial_data, trial_config)
        dists = np.sqrt(((synth.values - probe) ** 2).sum(axis=1))
        # Negate: nearer to the candidate record reads as "member".
        return world, -float(dists.min())

    return run


def run_audit(data: Dataset, config: AuditConfig) -> AuditReport:
    """Play the membership game and reconcile measured vs calibrated epsilon.

    The theory side calibrates from the audited column's own moments (the
    inherent model at gamma=0, the compromised model otherwise).  With a
    single record there is no masking randomness to calibrate from, so an
    explicit delta is required and the theoretical epsilon is reported as
    None; the verdict then rests on the unbounded flag, which a one-record
    audit always raises.
    """
    span = sensitivity(config.target_bounds)
    n = data.n

    eps_theory: Optional[float] = None
    delta_theory: Optional[float] = None
    provenance: Optional[str] = None
    if n >= 2:
        summary = summarize(data.values[:, 0])
        model = ThreatModel(
            gamma=config.gamma, n=n, delta_f=span, moments=summary
        )
        params = calibrate_params(model)  # degenerate data raises here
        eps_theory, delta_theory = params.epsilon, params.delta
        provenance = params.provenance
    elif config.delta is None:
        raise UsageError(
            "single-record audits cannot default delta from the calibrator; "
            "pass an explicit delta"
        )

    if config.delta is not None:
        delta_used = config.delta
    else:
        assert delta_theory is not None
        delta_used = min(delta_theory, DELTA_USED_CAP)
    vacuous = delta_used >= VACUOUS_DELTA or (
        delta_theory is not None and delta_theory >= VACUOUS_DELTA
    )

    trial_fn = (
        _sum_trial_fn(data, config)
        if config.mechanism == "sum"
        else _condense_trial_fn(data, config)
    )
    worlds, stats = _run_trials(config.trials, trial_fn)

    n_out = int((worlds == 0).sum())
    n_in = config.trials - n_out
    if n_out == 0 or n_in == 0:
        raise DomainError(
            "all trials landed in one world; cannot form both error rates "
            "(astronomically unlikely under a fair coin — check the seed path)"
        )

    floor_rate = 1.0 / config.trials
    thresholds = np.linspace(float(stats.min()), float(stats.max()), config.threshold_grid)
    guesses = stats[None, :] > thresholds[:, None]  # guess "member" above threshold
    out_mask = worlds == 0
    fp_raw = (guesses[:, out_mask]).sum(axis=1) / n_out
    fn_raw = (~guesses[:, ~out_mask]).sum(axis=1) / n_in

    estimates: list[EpsilonEstimate] = []
    for fp, fn in zip(fp_raw, fn_raw):
        rates = ConfusionRates(
            fp=min(1.0, max(fp, floor_rate)),
            fn=min(1.0, max(fn, floor_rate)),
            delta=delta_used,
        )
        estimates.append(epsilon_from_rates(rates))

    values = [e.value for e in estimates]
    best = int(np.argmax(values))  # ties resolve to the smaller threshold
    best_estimate = estimates[best]
    best_fp_raw = float(fp_raw[best])
    best_fn_raw = float(fn_raw[best])
    unbounded = (
        best_fn_raw == 0.0 and 1.0 - delta_used - best_fp_raw > 0.0
    ) or (best_fp_raw == 0.0 and 1.0 - delta_used - best_fn_raw > 0.0)

    if unbounded or eps_theory is None:
        verdict = VERDICT_VIOLATION
    else:
        verdict = reconcile(
            best_estimate,
            eps_theory,
            config.slack,
            empirical_delta=delta_used,
            theoretical_delta=delta_used,
        )

    return AuditReport(
        mechanism=config.mechanism,
        trials=config.trials,
        n=n,
        gamma=config.gamma,
        delta_used=delta_used,
        fp_rate=min(1.0, max(best_fp_raw, floor_rate)),
        fn_rate=min(1.0, max(best_fn_raw, floor_rate)),
        fp_rate_raw=best_fp_raw,
        fn_rate_raw=best_fn_raw,
        epsilon_empirical=best_estimate.value,
        epsilon_theoretical=eps_theory,
        delta_theoretical=delta_theory,
        theory_provenance=provenance,
        best_threshold=float(thresholds[best]),
        slack=config.slack,
        verdict=verdict,
        clamped=best_estimate.clamped,
        unbounded=unbounded,
        vacuous_delta=vacuous,
        thresholds=tuple(float(x) for x in thresholds),
        sweep_fp_raw=tuple(float(x) for x in fp_raw),
        sweep_fn_raw=tuple(float(x) for x in fn_raw),
        sweep_epsilon=tuple(values),
    )


def reconcile(
    empirical: EpsilonEstimate,
    theoretical: float,
    slack: float,
    *,
    empirical_delta: Optional[float] = None,
    theoretical_delta: Optional[float] = None,
) -> str:
    """Compare a measured epsilon against a calibrated one.

    The comparison is only meaningful at a shared delta; callers that track
    the deltas pass both and mismatches are rejected.  An unbounded empirical
    estimate is a violation regardless of the theoretical value.
    """
    if (
        empirical_delta is not None
        and theoretical_delta is not None
        and empirical_delta != theoretical_delta
    ):
        raise UsageError(
            f"cannot reconcile epsilons computed at different deltas "
            f"({empirical_delta} vs {theoretical_delta})"
        )
    if slack < 0:
        raise UsageError(f"slack must be >= 0, got {slack}")
    if empirical.unbounded:
        return VERDICT_VIOLATION
    if empirical.value <= theoretical + slack:
        return VERDICT_CONSISTENT
    return VERDICT_VIOLATION
