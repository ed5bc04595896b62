"""Report assembly, deterministic JSON serialization, and schema validation.

Reports must be byte-identical across reruns, which rules out ``json.dumps``
float handling (repr shortest-form is value-dependent in shape).  The emitter
here renders every float with 17 significant digits — enough to round-trip
any IEEE double exactly — appending ``.0`` where needed so floats stay floats
on re-parse.  Dict keys serialize in insertion order; all report builders
insert keys in a fixed order.
"""

from __future__ import annotations

import json
import math
from importlib import resources
from typing import Any, Optional

import jsonschema
import numpy as np

from .errors import DataIOError, UsageError

SCHEMA_VERSION = "1"
TOOL_VERSION = "0.1.0"
SCHEMA_RESOURCE = "report-v1.schema.json"


def format_float(x: float) -> str:
    """17-significant-digit decimal form that json parsers read back as float."""
    if not math.isfinite(x):
        raise UsageError(f"reports may not contain non-finite numbers, got {x}")
    s = format(x, ".17g")
    if not any(c in s for c in ".eE"):
        s += ".0"
    return s


def _serialize(obj: Any, level: int) -> str:
    pad = "  " * level
    inner_pad = "  " * (level + 1)
    if obj is None:
        return "null"
    if isinstance(obj, bool):
        return "true" if obj else "false"
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        return format_float(float(obj))
    if isinstance(obj, str):
        return json.dumps(obj)
    if isinstance(obj, (list, tuple)):
        if not obj:
            return "[]"
        body = ",\n".join(inner_pad + _serialize(v, level + 1) for v in obj)
        return "[\n" + body + "\n" + pad + "]"
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        parts = []
        for key, value in obj.items():
            if not isinstance(key, str):
                raise UsageError(f"report keys must be strings, got {key!r}")
            parts.append(f"{inner_pad}{json.dumps(key)}: {_serialize(value, level + 1)}")
        return "{\n" + ",\n".join(parts) + "\n" + pad + "}"
    raise UsageError(f"cannot serialize {type(obj).__name__} into a report")


def dumps(obj: Any) -> str:
    """Deterministic, human-diffable JSON text (trailing newline included)."""
    return _serialize(obj, 0) + "\n"


def load_schema() -> dict:
    text = resources.files("dcpriv.schemas").joinpath(SCHEMA_RESOURCE).read_text("utf-8")
    return json.loads(text)


_validator: Optional[jsonschema.protocols.Validator] = None


def validate_report(report: dict) -> None:
    """Check a report against the shipped schema; raises on any mismatch."""
    global _validator
    if _validator is None:
        schema = load_schema()
        jsonschema.Draft202012Validator.check_schema(schema)
        _validator = jsonschema.Draft202012Validator(schema)
    errors = sorted(_validator.iter_errors(report), key=lambda e: list(e.absolute_path))
    if errors:
        first = errors[0]
        where = "/".join(str(p) for p in first.absolute_path) or "<root>"
        raise UsageError(f"report does not match schema at {where}: {first.message}")


def build_report(
    command: str,
    config: dict,
    results: dict,
    flags: list[str],
    figures: Optional[list[str]] = None,
) -> dict:
    report: dict[str, Any] = {
        "schema_version": SCHEMA_VERSION,
        "tool_version": TOOL_VERSION,
        "command": command,
        "config": config,
        "results": results,
        "flags": sorted(flags),
    }
    if figures is not None:
        report["figures"] = sorted(figures)
    validate_report(report)
    return report


def write_report(report: dict, path: Optional[str]) -> str:
    """Write the report JSON to ``path`` (or return it for stdout printing)."""
    text = dumps(report)
    if path is not None:
        try:
            with open(path, "w", encoding="utf-8") as fh:
                fh.write(text)
        except OSError as exc:
            raise DataIOError(f"cannot write report to {path}: {exc}") from exc
    return text
