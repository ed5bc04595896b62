"""Dataset condensation with privacy calibrated from inherent randomness.

The package condenses a labeled table into a few synthetic rows per class,
derives (epsilon, delta) differential-privacy parameters from the data's own
variance (no noise is added — privacy comes from what the attacker cannot
know), measures epsilon empirically with a membership-inference audit, and
reconciles the two in one deterministic JSON report.
"""

from .audit import (
    AuditConfig,
    AuditReport,
    make_neighbors,
    reconcile,
    run_audit,
)
from .calibrate import (
    ConfusionRates,
    EpsilonEstimate,
    Feasibility,
    PrivacyParams,
    ThreatModel,
    calibrate_params,
    check_dp_feasible,
    delta_compromised,
    delta_inherent,
    epsilon_compromised,
    epsilon_from_rates,
    epsilon_inherent,
    tail_constant,
    uncompromised_count,
)
from .condense import (
    CondenseConfig,
    IdentityEmbedding,
    MatchLoss,
    RandomFeatureEmbedding,
    SyntheticSet,
    condense,
    match_loss,
    write_synthetic_csv,
)
from .errors import (
    DataIOError,
    DcprivError,
    DegenerateDataError,
    DomainError,
    UsageError,
)
from .models import (
    EvalResult,
    LinearModel,
    TrainParams,
    cross_entropy,
    evaluate,
    train,
    utility_gap,
)
from .stats import (
    Dataset,
    MomentSummary,
    Sensitivity,
    ingest_csv,
    sensitivity,
    summarize,
)

__version__ = "0.1.0"

__all__ = [
    "AuditConfig",
    "AuditReport",
    "ConfusionRates",
    "CondenseConfig",
    "Dataset",
    "DataIOError",
    "DcprivError",
    "DegenerateDataError",
    "DomainError",
    "EpsilonEstimate",
    "EvalResult",
    "Feasibility",
    "IdentityEmbedding",
    "LinearModel",
    "MatchLoss",
    "MomentSummary",
    "PrivacyParams",
    "RandomFeatureEmbedding",
    "Sensitivity",
    "SyntheticSet",
    "ThreatModel",
    "TrainParams",
    "UsageError",
    "calibrate_params",
    "check_dp_feasible",
    "condense",
    "cross_entropy",
    "delta_compromised",
    "delta_inherent",
    "epsilon_compromised",
    "epsilon_from_rates",
    "epsilon_inherent",
    "evaluate",
    "ingest_csv",
    "make_neighbors",
    "match_loss",
    "reconcile",
    "run_audit",
    "sensitivity",
    "summarize",
    "tail_constant",
    "train",
    "uncompromised_count",
    "utility_gap",
    "write_synthetic_csv",
]
