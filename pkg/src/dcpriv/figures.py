"""Matplotlib renderers for the CLI report path.

Each renderer writes one PNG next to the delimited outputs and returns the
path it wrote.  The Agg backend is forced so rendering works headless; plots
favor legibility over polish.
"""

from __future__ import annotations

import os
from typing import Mapping, Sequence

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402  (backend must be set first)
import numpy as np  # noqa: E402

from .audit import AuditReport  # noqa: E402
from .errors import DataIOError  # noqa: E402
from .models import EvalResult  # noqa: E402

_DPI = 120


def _save(fig: "plt.Figure", path: str) -> str:
    try:
        fig.savefig(path, dpi=_DPI, bbox_inches="tight")
    except OSError as exc:
        raise DataIOError(f"cannot write figure {path}: {exc}") from exc
    finally:
        plt.close(fig)
    return path


def render_loss_trace(trace: Sequence[float], path: str) -> str:
    """Accepted-step loss of a condensation run, log-scaled when possible."""
    fig, ax = plt.subplots(figsize=(5.5, 3.5))
    steps = np.arange(len(trace))
    ax.plot(steps, trace, marker="o", markersize=2.5, linewidth=1.2)
    if min(trace) > 0:
        ax.set_yscale("log")
    ax.set_xlabel("accepted step")
    ax.set_ylabel("matching loss")
    ax.set_title("condensation loss trace")
    ax.grid(True, alpha=0.3)
    return _save(fig, path)


def render_calibration(
    per_column: Mapping[str, tuple[float, float]], path: str
) -> str:
    """Per-column epsilon and delta bars from a calibration run."""
    names = list(per_column)
    eps = [per_column[c][0] for c in names]
    deltas = [per_column[c][1] for c in names]
    fig, (ax_e, ax_d) = plt.subplots(1, 2, figsize=(9, 3.5))
    pos = np.arange(len(names))
    ax_e.bar(pos, eps, color="tab:blue")
    ax_e.set_xticks(pos, names, rotation=30, ha="right")
    ax_e.set_ylabel("epsilon")
    ax_e.set_title("privacy loss per column")
    ax_d.bar(pos, deltas, color="tab:orange")
    ax_d.axhline(1.0, color="crimson", linestyle="--", linewidth=1, label="vacuous")
    ax_d.set_xticks(pos, names, rotation=30, ha="right")
    ax_d.set_ylabel("delta")
    ax_d.set_title("failure slack per column")
    ax_d.legend(loc="best", fontsize=8)
    for ax in (ax_e, ax_d):
        ax.grid(True, axis="y", alpha=0.3)
    fig.tight_layout()
    return _save(fig, path)


def render_audit_sweep(report: AuditReport, path: str) -> str:
    """Attack rates and empirical epsilon across the threshold grid."""
    thr = np.asarray(report.thresholds)
    fig, (ax_r, ax_e) = plt.subplots(1, 2, figsize=(9, 3.5))
    ax_r.plot(thr, report.sweep_fp_raw, label="false positive", linewidth=1.2)
    ax_r.plot(thr, report.sweep_fn_raw, label="false negative", linewidth=1.2)
    ax_r.axvline(report.best_threshold, color="gray", linestyle=":", linewidth=1)
    ax_r.set_xlabel("threshold")
    ax_r.set_ylabel("rate")
    ax_r.set_title(f"attack rates ({report.mechanism} mechanism)")
    ax_r.legend(loc="best", fontsize=8)
    ax_e.plot(thr, report.sweep_epsilon, color="tab:green", linewidth=1.2)
    ax_e.axvline(
        report.best_threshold,
        color="gray",
        linestyle=":",
        linewidth=1,
        label="best threshold",
    )
    if report.epsilon_theoretical is not None:
        ax_e.axhline(
            report.epsilon_theoretical,
            color="crimson",
            linestyle="--",
            linewidth=1,
            label="calibrated epsilon",
        )
    ax_e.set_xlabel("threshold")
    ax_e.set_ylabel("empirical epsilon")
    ax_e.set_title(f"verdict: {report.verdict}")
    ax_e.legend(loc="best", fontsize=8)
    for ax in (ax_r, ax_e):
        ax.grid(True, alpha=0.3)
    fig.tight_layout()
    return _save(fig, path)


def render_confusion(result: EvalResult, path: str) -> str:
    """Confusion-count heatmap for an evaluation run."""
    counts = np.asarray(result.confusion)
    k = len(result.classes)
    fig, ax = plt.subplots(figsize=(1.2 * k + 2.5, 1.2 * k + 2))
    image = ax.imshow(counts, cmap="Blues")
    for i in range(k):
        for j in range(k):
            color = "white" if counts[i, j] > counts.max() / 2 else "black"
            ax.text(j, i, str(counts[i, j]), ha="center", va="center", color=color)
    ax.set_xticks(range(k), result.classes)
    ax.set_yticks(range(k), result.classes)
    ax.set_xlabel("predicted")
    ax.set_ylabel("actual")
    ax.set_title(f"accuracy {result.accuracy:.3f} on n={result.n}")
    fig.colorbar(image, ax=ax, shrink=0.8)
    return _save(fig, path)


def figures_dir(path: str) -> str:
    """Create the figures directory if needed and return it."""
    try:
        os.makedirs(path, exist_ok=True)
    except OSError as exc:
        raise DataIOError(f"cannot create figures directory {path}: {exc}") from exc
    return path
