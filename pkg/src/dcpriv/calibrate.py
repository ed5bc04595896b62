"""Closed-form privacy calibration from a dataset's inherent randomness.

Two threat models are supported for the bounded-sum release:

* *inherent* — the attacker knows nothing beyond the bounds; privacy comes
  from the variance of all n records.  epsilon grows like
  sqrt(span^2 * ln(n) / total_variance) and delta carries a Berry-Esseen
  style third-moment term plus a 4/(5*sqrt(n)) floor.
* *compromised* — the attacker already knows a fraction gamma of the records
  exactly; only the m = n - floor(gamma*n) uncompromised records mask the
  target, so the same shapes apply with n replaced by m and the moment sums
  restricted to the uncompromised subset.

The remaining operations convert membership-attack confusion rates into an
empirical epsilon estimate and check whether observed rates are consistent
with a claimed (epsilon, delta) pair.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Union

from .errors import DegenerateDataError, DomainError, UsageError
from .stats import MomentSummary, Sensitivity

# A reported delta at or above this is flagged vacuous: the guarantee admits
# failure so often that "flip a coin" is a competitive attack.
VACUOUS_DELTA = 0.5

# Absolute slop when testing the rate-tradeoff inequalities at a boundary.
FEASIBILITY_TOL = 1e-12

_SpanLike = Union[Sensitivity, float, int]


def _span(delta_f: _SpanLike) -> float:
    span = delta_f.span if isinstance(delta_f, Sensitivity) else float(delta_f)
    if not (math.isfinite(span) and span > 0):
        raise DomainError(f"sensitivity must be a positive finite span, got {span}")
    return span


@dataclass(frozen=True)
class PrivacyParams:
    """An (epsilon, delta) pair tagged with how it was obtained.

    ``delta`` is reported verbatim even when it exceeds 1; consumers flag such
    values as vacuous instead of clamping them away.
    """

    epsilon: float
    delta: float
    provenance: str  # one of {"inherent", "compromised", "empirical"}

    def __post_init__(self) -> None:
        if not (self.epsilon >= 0):  # also rejects NaN
            raise DomainError(f"epsilon must be >= 0, got {self.epsilon}")
        if not (self.delta >= 0):
            raise DomainError(f"delta must be >= 0, got {self.delta}")
        if self.provenance not in ("inherent", "compromised", "empirical"):
            raise UsageError(f"unknown provenance {self.provenance!r}")

    @property
    def vacuous(self) -> bool:
        return self.delta >= VACUOUS_DELTA


@dataclass(frozen=True)
class ThreatModel:
    """What the attacker already knows about an n-record bounded column."""

    gamma: float
    n: int
    delta_f: Sensitivity
    moments: MomentSummary

    def __post_init__(self) -> None:
        if not (0.0 <= self.gamma < 1.0):
            raise UsageError(f"gamma must lie in [0, 1), got {self.gamma}")
        if self.n < 1:
            raise DomainError(f"n must be positive, got {self.n}")
        if self.uncompromised_count < 2:
            raise DomainError(
                f"fewer than 2 uncompromised records remain "
                f"(n={self.n}, gamma={self.gamma}); nothing masks the target"
            )

    @property
    def compromised_count(self) -> int:
        return math.floor(self.gamma * self.n)

    @property
    def uncompromised_count(self) -> int:
        return self.n - self.compromised_count


def epsilon_inherent(delta_f: _SpanLike, n: int, sigma2_bar: float) -> float:
    """Privacy loss of the bounded sum under the default threat model.

    ``sigma2_bar`` is the per-record average variance, so ``n * sigma2_bar``
    is the total variance masking any single record.
    """
    span = _span(delta_f)
    if n < 2:
        raise DomainError(f"need n >= 2 records, got n={n}")
    if sigma2_bar < 0 or not math.isfinite(sigma2_bar):
        raise DomainError(f"variance must be finite and >= 0, got {sigma2_bar}")
    if sigma2_bar == 0:
        raise DegenerateDataError(
            "column variance is zero: constant data carries no inherent "
            "randomness, so no privacy can be calibrated from it"
        )
    return math.sqrt(span * span * math.log(n) / (n * sigma2_bar))


def delta_inherent(epsilon: float, n: int, sigma2_bar: float, sum_abs3: float) -> float:
    """Failure slack paired with :func:`epsilon_inherent`.

    delta = 1.12 * sum_abs3 / (n*sigma2_bar)^{3/2} * (1 + e^epsilon)
            + 4 / (5*sqrt(n))

    where ``sum_abs3`` estimates the summed third absolute central moments.
    The 4/(5*sqrt(n)) term is a normal-approximation floor that no amount of
    well-behaved data removes.
    """
    if n < 2:
        raise DomainError(f"need n >= 2 records, got n={n}")
    if sigma2_bar <= 0 or not math.isfinite(sigma2_bar):
        raise DegenerateDataError(
            f"variance must be positive to calibrate, got {sigma2_bar}"
        )
    if sum_abs3 < 0:
        raise DomainError(f"sum_abs3 must be >= 0, got {sum_abs3}")
    if epsilon < 0:
        raise DomainError(f"epsilon must be >= 0, got {epsilon}")
    total_var = n * sigma2_bar
    return 1.12 * sum_abs3 / total_var ** 1.5 * (1.0 + math.exp(epsilon)) + 4.0 / (
        5.0 * math.sqrt(n)
    )


def uncompromised_count(n: int, gamma: float) -> int:
    """Records the attacker does not already know: n - floor(gamma*n)."""
    if not (0.0 <= gamma < 1.0):
        raise UsageError(f"gamma must lie in [0, 1), got {gamma}")
    if n < 1:
        raise DomainError(f"n must be positive, got {n}")
    return n - math.floor(gamma * n)


def epsilon_compromised(
    delta_f: _SpanLike, n: int, gamma: float, sigma2_uncomp: float
) -> float:
    """Privacy loss when the attacker already knows a gamma fraction.

    ``sigma2_uncomp`` is the TOTAL variance of the m = n - floor(gamma*n)
    uncompromised records (not a per-record average); at gamma=0 with
    sigma2_uncomp = n * sigma2_bar this reduces exactly to
    :func:`epsilon_inherent`.
    """
    span = _span(delta_f)
    m = uncompromised_count(n, gamma)
    if m < 2:
        raise DomainError(
            f"fewer than 2 uncompromised records (n={n}, gamma={gamma})"
        )
    if sigma2_uncomp < 0 or not math.isfinite(sigma2_uncomp):
        raise DomainError(f"variance must be finite and >= 0, got {sigma2_uncomp}")
    if sigma2_uncomp == 0:
        raise DegenerateDataError(
            "uncompromised records have zero total variance; nothing masks "
            "the target"
        )
    return math.sqrt(span * span * math.log(m) / sigma2_uncomp)


def tail_constant(epsilon: float) -> float:
    """Leading constant of the compromised-model delta: 2*(1+e^eps)*(2/pi)^(1/4)."""
    if epsilon < 0:
        raise DomainError(f"epsilon must be >= 0, got {epsilon}")
    return 2.0 * (1.0 + math.exp(epsilon)) * (2.0 / math.pi) ** 0.25


def delta_compromised(
    epsilon: float,
    n: int,
    gamma: float,
    delta_f: _SpanLike,
    sigma2_uncomp: float,
    sum_abs3_uncomp: float,
    sum_cen4_uncomp: float,
) -> float:
    """Failure slack paired with :func:`epsilon_compromised`.

    delta = tail_constant(epsilon) * sqrt(
                span^2 * M3 / sigma^3
                + span^{3/2} * sqrt(26) / (sigma^2 * sqrt(pi)) * sqrt(M4)
            ) + 4 / (5*sqrt(m))

    with sigma^2 the total uncompromised variance, M3/M4 the summed third
    absolute / fourth central moments of the uncompromised records, and
    m = n - floor(gamma*n).  The value can exceed 1 for small or heavy-tailed
    data; callers flag rather than clamp.
    """
    span = _span(delta_f)
    m = uncompromised_count(n, gamma)
    if m < 2:
        raise DomainError(
            f"fewer than 2 uncompromised records (n={n}, gamma={gamma})"
        )
    if sigma2_uncomp <= 0 or not math.isfinite(sigma2_uncomp):
        raise DegenerateDataError(
            f"uncompromised variance must be positive, got {sigma2_uncomp}"
        )
    if sum_abs3_uncomp < 0 or sum_cen4_uncomp < 0:
        raise DomainError("moment sums must be >= 0")
    if epsilon < 0:
        raise DomainError(f"epsilon must be >= 0, got {epsilon}")
    sigma3 = sigma2_uncomp ** 1.5
    inner = span * span * sum_abs3_uncomp / sigma3 + (
        span ** 1.5 * math.sqrt(26.0) / (sigma2_uncomp * math.sqrt(math.pi))
    ) * math.sqrt(sum_cen4_uncomp)
    return tail_constant(epsilon) * math.sqrt(inner) + 4.0 / (5.0 * math.sqrt(m))


def calibrate_params(model: ThreatModel) -> PrivacyParams:
    """(epsilon, delta) for a column under the given threat model.

    ``model.moments`` summarizes the observed column; for gamma > 0 the
    uncompromised subset is modeled as m records sharing those per-record
    moments, so the moment sums scale by m rather than n.
    """
    s = model.moments
    if model.gamma == 0.0:
        eps = epsilon_inherent(model.delta_f, model.n, s.var)
        delta = delta_inherent(eps, model.n, s.var, s.sum_abs3)
        return PrivacyParams(epsilon=eps, delta=delta, provenance="inherent")
    m = model.uncompromised_count
    sigma2 = m * s.var
    eps = epsilon_compromised(model.delta_f, model.n, model.gamma, sigma2)
    delta = delta_compromised(
        eps, model.n, model.gamma, model.delta_f, sigma2, m * s.abs3, m * s.cen4
    )
    return PrivacyParams(epsilon=eps, delta=delta, provenance="compromised")


@dataclass(frozen=True)
class ConfusionRates:
    """Membership-attack false positive / false negative rates at a given delta."""

    fp: float
    fn: float
    delta: float

    def __post_init__(self) -> None:
        if not (0.0 <= self.fp <= 1.0):
            raise DomainError(f"fp must lie in [0, 1], got {self.fp}")
        if not (0.0 <= self.fn <= 1.0):
            raise DomainError(f"fn must lie in [0, 1], got {self.fn}")
        if not (0.0 <= self.delta < 1.0):
            raise DomainError(f"delta must lie in [0, 1), got {self.delta}")


@dataclass(frozen=True)
class EpsilonEstimate:
    """Empirical epsilon from attack rates, with clamping/unboundedness flags.

    ``value`` is ``math.inf`` when the rates admit no finite bound (a zero
    rate with slack left over); it is 0.0 with ``clamped`` set when the attack
    performed worse than random at the given delta.
    """

    value: float
    clamped: bool = False
    unbounded: bool = False


def _log_ratio(numerator: float, rate: float) -> float:
    """ln(numerator / rate) extended to the closed domain of rates."""
    if numerator <= 0.0:
        # This side of the tradeoff yields no lower bound at all.
        return -math.inf
    if rate == 0.0:
        return math.inf
    return math.log(numerator / rate)


def epsilon_from_rates(rates: ConfusionRates) -> EpsilonEstimate:
    """Largest epsilon lower bound implied by observed attack rates.

    Evaluates max(ln((1-delta-fp)/fn), ln((1-delta-fn)/fp)).  A negative
    maximum (attack worse than random) clamps to 0; a zero rate with positive
    remaining slack has no finite bound and returns the infinity sentinel.
    Callers that need finite report values floor their rates first.
    """
    a = _log_ratio(1.0 - rates.delta - rates.fp, rates.fn)
    b = _log_ratio(1.0 - rates.delta - rates.fn, rates.fp)
    best = max(a, b)
    if best == math.inf:
        return EpsilonEstimate(value=math.inf, unbounded=True)
    if best < 0.0 or best == -math.inf:
        return EpsilonEstimate(value=0.0, clamped=True)
    return EpsilonEstimate(value=best)


class Feasibility(enum.Enum):
    """Outcome of testing observed rates against a claimed (epsilon, delta).

    An (epsilon, delta)-DP mechanism forces every attack to satisfy both
    fp + e^eps * fn >= 1 - delta and fn + e^eps * fp >= 1 - delta; a shortfall
    means the rates are too good to be compatible with the claim.  The member
    names say which inequality failed, identified by its epsilon-free term.
    """

    FEASIBLE = "feasible"
    VIOLATES_FP_SIDE = "violates_fp_side"
    VIOLATES_FN_SIDE = "violates_fn_side"
    VIOLATES_BOTH = "violates_both"


def check_dp_feasible(rates: ConfusionRates, epsilon: float) -> Feasibility:
    """Can a mechanism with the claimed epsilon produce these attack rates?

    Both tradeoff inequalities are evaluated with a small absolute tolerance
    so that rates generated exactly on the boundary test as feasible.
    """
    if not (epsilon >= 0):
        raise DomainError(f"epsilon must be >= 0, got {epsilon}")
    grow = math.exp(epsilon)
    floor = (1.0 - rates.delta) - FEASIBILITY_TOL
    fp_side_ok = rates.fp + grow * rates.fn >= floor
    fn_side_ok = rates.fn + grow * rates.fp >= floor
    if fp_side_ok and fn_side_ok:
        return Feasibility.FEASIBLE
    if fn_side_ok:
        return Feasibility.VIOLATES_FP_SIDE
    if fp_side_ok:
        return Feasibility.VIOLATES_FN_SIDE
    return Feasibility.VIOLATES_BOTH
