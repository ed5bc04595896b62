"""Command-line surface.

Five subcommands share one report envelope: ``calibrate`` computes (epsilon,
delta) per bounded column, ``condense`` writes a synthetic CSV, ``audit``
plays the membership game against a mechanism, ``evaluate`` measures
classifier utility, and ``pipeline`` chains all four on one input.  Reports
go to stdout or ``--report``; ``--figures DIR`` additionally renders PNGs
alongside the delimited outputs.

Exit codes are a stable contract: 0 success, 2 usage/config, 3 mathematical
or domain failure (e.g. constant data), 4 I/O, 5 audit verdict
``violation_suspected`` (distinct so CI can gate on it).
"""

from __future__ import annotations

import argparse
import os
import sys
from collections import Counter
from typing import Callable, Optional

from .audit import AuditConfig, AuditReport, run_audit
from .calibrate import ThreatModel, calibrate_params
from .condense import CondenseConfig, condense, write_synthetic_csv
from .errors import DataIOError, DcprivError, DegenerateDataError, UsageError
from .models import TrainParams, evaluate, train, utility_gap
from .report import build_report, dumps, write_report
from .run_configs import (
    AuditRun,
    CalibrateRun,
    CondenseRun,
    EvaluateRun,
    PipelineRun,
    RunConfig,
)
from .stats import Dataset, ingest_csv, sensitivity, summarize

def _figs():
    # Deferred so plain report runs never pay the matplotlib import cost.
    from . import figures

    return figures


EXIT_OK = 0
EXIT_USAGE = 2
EXIT_DOMAIN = 3
EXIT_IO = 4
EXIT_VIOLATION = 5


def _parse_bounds(items: Optional[list[str]]) -> dict[str, list[float]]:
    out: dict[str, list[float]] = {}
    for item in items or []:
        name, sep, rest = item.partition("=")
        name = name.strip()
        parts = rest.split(",")
        if not sep or not name or len(parts) != 2:
            raise UsageError(
                f"--bounds expects COLUMN=LOW,HIGH, got {item!r}"
            )
        try:
            low, high = float(parts[0]), float(parts[1])
        except ValueError:
            raise UsageError(f"--bounds {item!r}: endpoints must be numbers") from None
        if name in out:
            raise UsageError(f"duplicate --bounds for column {name!r}")
        out[name] = [low, high]
    return out


def _bounds_mapping(bounds: dict[str, list[float]]) -> dict[str, tuple[float, float]]:
    return {name: (b[0], b[1]) for name, b in bounds.items()}


def _calibrate_columns(
    data: Dataset, columns: Optional[list[str]], gamma: float
) -> tuple[dict, dict]:
    """Per-column privacy params plus the worst-case block."""
    names = list(columns) if columns else list(data.names)
    per_column: dict[str, dict] = {}
    for name in names:
        col = data.column(name)  # raises UsageError on unknown names
        declared = data.column_bounds(name)
        if declared is None:
            raise UsageError(
                f"column {name!r} has no declared bounds; calibration needs "
                f"--bounds {name}=LOW,HIGH"
            )
        summary = summarize(col)
        model = ThreatModel(
            gamma=gamma, n=data.n, delta_f=sensitivity(declared), moments=summary
        )
        try:
            params = calibrate_params(model)
        except DegenerateDataError as exc:
            raise DegenerateDataError(f"column {name!r}: {exc}") from None
        per_column[name] = {
            "epsilon": params.epsilon,
            "delta": params.delta,
            "provenance": params.provenance,
            "n": data.n,
            "variance": summary.var,
            "vacuous_delta": params.vacuous,
        }
    worst_name = max(per_column, key=lambda c: per_column[c]["epsilon"])
    worst = {
        "column": worst_name,
        "epsilon": per_column[worst_name]["epsilon"],
        "delta": per_column[worst_name]["delta"],
        "provenance": per_column[worst_name]["provenance"],
    }
    return per_column, worst


def cmd_calibrate(run: CalibrateRun) -> tuple[dict, int]:
    data = ingest_csv(
        run.input,
        bounds=_bounds_mapping(run.bounds),
        label_column=run.label,
        clip=run.clip,
    )
    per_column, worst = _calibrate_columns(data, run.columns, run.gamma)
    results = {"gamma": run.gamma, "columns": per_column, "worst_case": worst}
    flags = ["vacuous_delta"] if any(
        c["vacuous_delta"] for c in per_column.values()
    ) else []

    figure_paths = None
    if run.figures:
        out_dir = _figs().figures_dir(run.figures)
        figure_paths = [
            _figs().render_calibration(
                {name: (c["epsilon"], c["delta"]) for name, c in per_column.items()},
                os.path.join(out_dir, "calibrate_params.png"),
            )
        ]
    report = build_report("calibrate", run.to_dict(), results, flags, figure_paths)
    return report, EXIT_OK


def _condense_results(
    run_output: Optional[str],
    data: Dataset,
    synth,
    trace: list[float],
    trace_path: Optional[str],
) -> tuple[dict, list[str]]:
    assert data.labels is not None
    class_sizes = Counter(data.labels)
    oversampled = sorted(
        cls for cls, size in class_sizes.items() if synth.m_per_class > size
    )
    results = {
        "output_path": run_output,
        "rows_written": synth.m,
        "m_per_class": synth.m_per_class,
        "classes": list(synth.classes),
        "iterations_used": len(trace) - 1,
        "initial_loss": trace[0],
        "final_loss": trace[-1],
        "oversampled_classes": oversampled,
        "loss_trace_path": trace_path,
    }
    return results, (["oversampling"] if oversampled else [])


def _write_trace(trace: list[float], path: str) -> None:
    try:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(dumps(list(trace)))
    except OSError as exc:
        raise DataIOError(f"cannot write loss trace to {path}: {exc}") from exc


def cmd_condense(run: CondenseRun) -> tuple[dict, int]:
    data = ingest_csv(
        run.input,
        bounds=_bounds_mapping(run.bounds),
        label_column=run.label,
        clip=run.clip,
    )
    config = CondenseConfig(
        m_per_class=run.per_class,
        iters=run.iters,
        seed=run.seed,
        step_size=run.step,
        feature_dim=run.feature_dim,
        loss_tol=run.loss_tol,
    )
    synth, trace = condense(data, config)
    write_synthetic_csv(synth, run.output)
    if run.trace:
        _write_trace(trace, run.trace)
    results, flags = _condense_results(run.output, data, synth, trace, run.trace)

    figure_paths = None
    if run.figures:
        out_dir = _figs().figures_dir(run.figures)
        figure_paths = [
            _figs().render_loss_trace(trace, os.path.join(out_dir, "condense_loss.png"))
        ]
    report = build_report("condense", run.to_dict(), results, flags, figure_paths)
    return report, EXIT_OK


def _audit_results(rep: AuditReport) -> dict:
    return {
        "mechanism": rep.mechanism,
        "trials": rep.trials,
        "n": rep.n,
        "gamma": rep.gamma,
        "delta_used": rep.delta_used,
        "fp_rate": rep.fp_rate,
        "fn_rate": rep.fn_rate,
        "fp_rate_raw": rep.fp_rate_raw,
        "fn_rate_raw": rep.fn_rate_raw,
        "epsilon_empirical": rep.epsilon_empirical,
        "epsilon_theoretical": rep.epsilon_theoretical,
        "delta_theoretical": rep.delta_theoretical,
        "theory_provenance": rep.theory_provenance,
        "best_threshold": rep.best_threshold,
        "slack": rep.slack,
        "verdict": rep.verdict,
        "sweep": {
            "thresholds": list(rep.thresholds),
            "fp_raw": list(rep.sweep_fp_raw),
            "fn_raw": list(rep.sweep_fn_raw),
            "epsilon": list(rep.sweep_epsilon),
        },
    }


def _audit_config(run: AuditRun, data: Dataset) -> AuditConfig:
    audited = data.names[0]
    target_bounds = data.column_bounds(audited)
    if target_bounds is None:
        raise UsageError(
            f"the audit targets the first feature column ({audited!r}); its "
            f"bounds are required: --bounds {audited}=LOW,HIGH"
        )
    condense_config = None
    if run.mechanism == "condense":
        if data.labels is None:
            raise UsageError("condense-mechanism audits require --label")
        condense_config = CondenseConfig(
            m_per_class=run.per_class,
            iters=run.iters,
            seed=run.seed,
            step_size=run.step,
            feature_dim=run.feature_dim,
        )
    return AuditConfig(
        mechanism=run.mechanism,
        trials=run.trials,
        seed=run.seed,
        target_bounds=target_bounds,
        delta=run.delta,
        gamma=run.gamma,
        threshold_grid=run.threshold_grid,
        slack=run.slack,
        condense=condense_config,
    )


def cmd_audit(run: AuditRun) -> tuple[dict, int]:
    data = ingest_csv(
        run.input,
        bounds=_bounds_mapping(run.bounds),
        label_column=run.label,
        clip=run.clip,
    )
    rep = run_audit(data, _audit_config(run, data))
    results = _audit_results(rep)

    figure_paths = None
    if run.figures:
        out_dir = _figs().figures_dir(run.figures)
        figure_paths = [
            _figs().render_audit_sweep(rep, os.path.join(out_dir, "audit_sweep.png"))
        ]
    report = build_report("audit", run.to_dict(), results, list(rep.flags), figure_paths)
    code = EXIT_VIOLATION if rep.verdict == "violation_suspected" else EXIT_OK
    return report, code


def _eval_results(result) -> dict:
    return {
        "accuracy": result.accuracy,
        "n": result.n,
        "classes": list(result.classes),
        "confusion": [list(row) for row in result.confusion],
        "fp_rate": result.fp_rate,
        "fn_rate": result.fn_rate,
    }


def cmd_evaluate(run: EvaluateRun) -> tuple[dict, int]:
    train_data = ingest_csv(run.train, label_column=run.label)
    test_data = ingest_csv(run.test, label_column=run.label)
    model = train(train_data, epochs=run.epochs, lr=run.lr, seed=run.seed)
    result = evaluate(model, test_data)
    results = _eval_results(result)

    figure_paths = None
    if run.figures:
        out_dir = _figs().figures_dir(run.figures)
        figure_paths = [
            _figs().render_confusion(result, os.path.join(out_dir, "evaluate_confusion.png"))
        ]
    report = build_report("evaluate", run.to_dict(), results, [], figure_paths)
    return report, EXIT_OK


def cmd_pipeline(run: PipelineRun) -> tuple[dict, int]:
    """condense -> calibrate -> audit-the-condenser -> evaluate, one report.

    A stage failure stops the chain but still emits a partial report naming
    the failed stage; the stage's exit code propagates.
    """
    results: dict = {"failed_stage": None}
    flags: set[str] = set()
    figure_paths: list[str] = []
    out_dir = _figs().figures_dir(run.figures) if run.figures else None
    exit_code = EXIT_OK
    stage = "ingest"
    try:
        data = ingest_csv(
            run.input,
            bounds=_bounds_mapping(run.bounds),
            label_column=run.label,
            clip=run.clip,
        )

        stage = "condense"
        condense_config = CondenseConfig(
            m_per_class=run.per_class,
            iters=run.iters,
            seed=run.seed,
            step_size=run.step,
            feature_dim=run.feature_dim,
            loss_tol=run.loss_tol,
        )
        synth, trace = condense(data, condense_config)
        if run.output:
            write_synthetic_csv(synth, run.output)
        results["condense"], condense_flags = _condense_results(
            run.output, data, synth, trace, None
        )
        flags.update(condense_flags)
        if out_dir:
            figure_paths.append(
                _figs().render_loss_trace(trace, os.path.join(out_dir, "condense_loss.png"))
            )

        stage = "calibrate"
        per_column, worst = _calibrate_columns(data, None, run.gamma)
        results["calibrate"] = {
            "gamma": run.gamma,
            "columns": per_column,
            "worst_case": worst,
        }
        if any(c["vacuous_delta"] for c in per_column.values()):
            flags.add("vacuous_delta")
        if out_dir:
            figure_paths.append(
                _figs().render_calibration(
                    {n: (c["epsilon"], c["delta"]) for n, c in per_column.items()},
                    os.path.join(out_dir, "calibrate_params.png"),
                )
            )

        stage = "audit"
        audit_run = AuditRun(
            input=run.input,
            mechanism="condense",
            trials=run.trials,
            seed=run.seed,
            gamma=run.gamma,
            delta=run.delta,
            slack=run.slack,
            threshold_grid=run.threshold_grid,
            label=run.label,
            per_class=run.per_class,
            iters=run.iters,
            feature_dim=run.feature_dim,
            step=run.step,
        )
        audit_report = run_audit(data, _audit_config(audit_run, data))
        results["audit"] = _audit_results(audit_report)
        results["verdict"] = audit_report.verdict
        flags.update(audit_report.flags)
        if out_dir:
            figure_paths.append(
                _figs().render_audit_sweep(
                    audit_report, os.path.join(out_dir, "audit_sweep.png")
                )
            )

        stage = "evaluate"
        test_data = (
            ingest_csv(run.test, label_column=run.label) if run.test else data
        )
        params = TrainParams(epochs=run.epochs, lr=run.lr, seed=run.seed)
        synth_model = train(synth, run.epochs, run.lr, run.seed)
        result = evaluate(synth_model, test_data)
        results["evaluate"] = _eval_results(result)
        results["utility_gap"] = utility_gap(data, synth, test_data, params)
        if out_dir:
            figure_paths.append(
                _figs().render_confusion(
                    result, os.path.join(out_dir, "evaluate_confusion.png")
                )
            )

        if audit_report.verdict == "violation_suspected":
            exit_code = EXIT_VIOLATION
    except DcprivError as exc:
        results["failed_stage"] = stage
        results["error"] = str(exc)
        flags.add("partial")
        print(f"error in stage {stage}: {exc}", file=sys.stderr)
        exit_code = exc.exit_code

    report = build_report(
        "pipeline",
        run.to_dict(),
        results,
        sorted(flags),
        figure_paths if out_dir else None,
    )
    return report, exit_code


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="dcpriv",
        description=(
            "Condense tabular data, calibrate (epsilon, delta) privacy from "
            "its inherent randomness, and audit epsilon empirically."
        ),
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p: argparse.ArgumentParser, bounds_help: str) -> None:
        p.add_argument(
            "--bounds",
            action="append",
            metavar="COL=LOW,HIGH",
            help=bounds_help,
        )
        p.add_argument(
            "--clip",
            action="store_true",
            help="clip out-of-bounds values instead of rejecting the file",
        )
        p.add_argument("--report", metavar="PATH", help="write the JSON report here")
        p.add_argument(
            "--figures",
            metavar="DIR",
            help="render PNG figures for this run into DIR",
        )

    p = sub.add_parser("calibrate", help="closed-form (epsilon, delta) per column")
    p.add_argument("--input", required=True, metavar="CSV")
    p.add_argument("--gamma", type=float, default=0.0,
                   help="fraction of records the attacker already knows")
    p.add_argument("--columns", metavar="C1,C2,...",
                   help="calibrate only these columns (default: all)")
    p.add_argument("--label", metavar="NAME",
                   help="treat this column as labels, not a feature")
    add_common(p, "declared record bounds, required per calibrated column")

    p = sub.add_parser("condense", help="write a small synthetic CSV")
    p.add_argument("--input", required=True, metavar="CSV")
    p.add_argument("--label", required=True, metavar="NAME")
    p.add_argument("--per-class", required=True, type=int, metavar="M")
    p.add_argument("--iters", required=True, type=int, metavar="K")
    p.add_argument("--seed", required=True, type=int)
    p.add_argument("--output", required=True, metavar="CSV")
    p.add_argument("--feature-dim", type=int, default=32,
                   help="width of the frozen random embedding")
    p.add_argument("--step", type=float, default=0.5, help="initial step size")
    p.add_argument("--loss-tol", type=float, default=0.0,
                   help="stop when an accepted step improves less than this")
    p.add_argument("--trace", metavar="PATH",
                   help="write the loss trace as a JSON array")
    add_common(p, "value box for synthetic rows (default: observed range)")

    p = sub.add_parser("audit", help="membership-inference audit of a mechanism")
    p.add_argument("--input", required=True, metavar="CSV")
    p.add_argument("--mechanism", required=True, choices=["sum", "condense"])
    p.add_argument("--trials", required=True, type=int)
    p.add_argument("--seed", required=True, type=int)
    p.add_argument("--gamma", type=float, default=0.0,
                   help="fraction of records the attacker already knows")
    p.add_argument("--delta", type=float, default=None,
                   help="delta for the empirical epsilon (default: calibrated)")
    p.add_argument("--slack", type=float, default=0.25,
                   help="tolerance when comparing empirical vs calibrated epsilon")
    p.add_argument("--threshold-grid", type=int, default=33,
                   help="number of attack thresholds swept")
    p.add_argument("--label", metavar="NAME",
                   help="label column (required for the condense mechanism)")
    p.add_argument("--per-class", type=int, default=1,
                   help="condense mechanism: synthetic rows per class")
    p.add_argument("--iters", type=int, default=40,
                   help="condense mechanism: optimizer iterations per trial")
    p.add_argument("--feature-dim", type=int, default=16,
                   help="condense mechanism: embedding width per trial")
    p.add_argument("--step", type=float, default=0.5,
                   help="condense mechanism: optimizer step size")
    add_common(p, "bounds of the audited (first feature) column are required")

    p = sub.add_parser("evaluate", help="train/test a linear classifier")
    p.add_argument("--train", required=True, metavar="CSV")
    p.add_argument("--test", required=True, metavar="CSV")
    p.add_argument("--label", required=True, metavar="NAME")
    p.add_argument("--epochs", required=True, type=int)
    p.add_argument("--seed", required=True, type=int)
    p.add_argument("--lr", type=float, default=1.0, help="initial learning rate")
    p.add_argument("--report", metavar="PATH", help="write the JSON report here")
    p.add_argument("--figures", metavar="DIR",
                   help="render PNG figures for this run into DIR")

    p = sub.add_parser(
        "pipeline",
        help="condense, calibrate, audit the condenser, evaluate; one report",
    )
    p.add_argument("--input", required=True, metavar="CSV")
    p.add_argument("--label", required=True, metavar="NAME")
    p.add_argument("--per-class", required=True, type=int, metavar="M")
    p.add_argument("--trials", required=True, type=int)
    p.add_argument("--seed", required=True, type=int)
    p.add_argument("--iters", type=int, default=150)
    p.add_argument("--feature-dim", type=int, default=32)
    p.add_argument("--step", type=float, default=0.5)
    p.add_argument("--loss-tol", type=float, default=0.0)
    p.add_argument("--gamma", type=float, default=0.0)
    p.add_argument("--delta", type=float, default=None)
    p.add_argument("--slack", type=float, default=0.25)
    p.add_argument("--threshold-grid", type=int, default=33)
    p.add_argument("--epochs", type=int, default=200)
    p.add_argument("--lr", type=float, default=1.0)
    p.add_argument("--test", metavar="CSV",
                   help="held-out test CSV (default: evaluate on the input)")
    p.add_argument("--output", metavar="CSV", help="write the synthetic CSV here")
    add_common(p, "declared bounds; required for every calibrated column")

    return parser


def _make_run(args: argparse.Namespace) -> tuple[RunConfig, Callable]:
    bounds = _parse_bounds(getattr(args, "bounds", None))
    if args.command == "calibrate":
        columns = args.columns.split(",") if args.columns else None
        return (
            CalibrateRun(
                input=args.input,
                bounds=bounds,
                gamma=args.gamma,
                columns=columns,
                label=args.label,
                clip=args.clip,
                report=args.report,
                figures=args.figures,
            ),
            cmd_calibrate,
        )
    if args.command == "condense":
        return (
            CondenseRun(
                input=args.input,
                label=args.label,
                per_class=args.per_class,
                iters=args.iters,
                seed=args.seed,
                output=args.output,
                feature_dim=args.feature_dim,
                step=args.step,
                loss_tol=args.loss_tol,
                bounds=bounds,
                clip=args.clip,
                trace=args.trace,
                report=args.report,
                figures=args.figures,
            ),
            cmd_condense,
        )
    if args.command == "audit":
        return (
            AuditRun(
                input=args.input,
                mechanism=args.mechanism,
                trials=args.trials,
                seed=args.seed,
                bounds=bounds,
                gamma=args.gamma,
                delta=args.delta,
                slack=args.slack,
                threshold_grid=args.threshold_grid,
                label=args.label,
                clip=args.clip,
                per_class=args.per_class,
                iters=args.iters,
                feature_dim=args.feature_dim,
                step=args.step,
                report=args.report,
                figures=args.figures,
            ),
            cmd_audit,
        )
    if args.command == "evaluate":
        return (
            EvaluateRun(
                train=args.train,
                test=args.test,
                label=args.label,
                epochs=args.epochs,
                seed=args.seed,
                lr=args.lr,
                report=args.report,
                figures=args.figures,
            ),
            cmd_evaluate,
        )
    if args.command == "pipeline":
        return (
            PipelineRun(
                input=args.input,
                label=args.label,
                per_class=args.per_class,
                trials=args.trials,
                seed=args.seed,
                bounds=bounds,
                iters=args.iters,
                feature_dim=args.feature_dim,
                step=args.step,
                loss_tol=args.loss_tol,
                gamma=args.gamma,
                delta=args.delta,
                slack=args.slack,
                threshold_grid=args.threshold_grid,
                epochs=args.epochs,
                lr=args.lr,
                test=args.test,
                output=args.output,
                clip=args.clip,
                report=args.report,
                figures=args.figures,
            ),
            cmd_pipeline,
        )
    raise UsageError(f"unknown command {args.command!r}")


def main(argv: Optional[list[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        run, command = _make_run(args)
        report, exit_code = command(run)
        text = write_report(report, run.report)
        if run.report is None:
            sys.stdout.write(text)
        return exit_code
    except DcprivError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code


def entrypoint() -> None:
    sys.exit(main())


if __name__ == "__main__":
    entrypoint()
