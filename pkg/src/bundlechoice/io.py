"""File formats, canonical serialization, and CSV emission.

Instances, ROLs, matchings, and strategy profiles all travel as JSON
documents.  Canonical serialization sorts every key, flattens sets into
sorted lists, and prints with fixed separators, so equal inputs always
produce byte-identical output; a sha256 digest of the canonicalized inputs
ties each result document to what produced it.
"""

import hashlib
import json
from fractions import Fraction

import numpy as np

from .engines import EngineTrace
from .experiments import OutcomeMetrics, StrategyProfile, compute_metrics
from .model import ValidationReport, validate_instance, validate_rols


def canonicalize(obj):
    """Reduce to plain JSON types with deterministic ordering."""
    if isinstance(obj, dict):
        return {str(k): canonicalize(v) for k, v in sorted(obj.items(), key=lambda kv: str(kv[0]))}
    if isinstance(obj, (set, frozenset)):
        return sorted(canonicalize(v) for v in obj)
    if isinstance(obj, (list, tuple)):
        return [canonicalize(v) for v in obj]
    if isinstance(obj, Fraction):
        return str(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.floating):
        return float(obj)
    if isinstance(obj, bool) or obj is None:
        return obj
    if isinstance(obj, (int, float, str)):
        return obj
    raise TypeError(f"cannot canonicalize {type(obj).__name__}")


def canonical_document(obj):
    return json.dumps(canonicalize(obj), sort_keys=True, separators=(",", ":")) + "\n"


def content_digest(obj):
    return hashlib.sha256(canonical_document(obj).encode("utf-8")).hexdigest()


def _load_document(path):
    """Parsed JSON or a ValidationReport with the failure position."""
    report = ValidationReport([])
    try:
        with open(path, "r", encoding="utf-8") as handle:
            text = handle.read()
    except OSError as err:
        report.add(f"{path}: {err.strerror or err}")
        return report
    try:
        return json.loads(text)
    except json.JSONDecodeError as err:
        report.add(
            f"{path}: line {err.lineno} column {err.colno}: {err.msg}"
        )
        return report


def _located(report, path):
    out = ValidationReport([])
    for problem in report.problems:
        out.add(f"{path}: {problem}")
    return out


def parse_instance(path):
    """Validated Instance, or a ValidationReport with file positions."""
    raw = _load_document(path)
    if isinstance(raw, ValidationReport):
        return raw
    if not isinstance(raw, dict):
        report = ValidationReport([])
        report.add(f"{path}: top-level document must be an object")
        return report
    result = validate_instance(raw)
    if isinstance(result, ValidationReport):
        return _located(result, path)
    return result


def parse_rols(path, instance):
    """ROL mapping from a {"rols": {student: [...]}} document."""
    raw = _load_document(path)
    if isinstance(raw, ValidationReport):
        return raw
    if not isinstance(raw, dict) or "rols" not in raw:
        report = ValidationReport([])
        report.add(f'{path}: expected an object with a "rols" field')
        return report
    rols = {i: list(entries) for i, entries in raw["rols"].items()}
    report = validate_rols(instance, rols)
    if report.problems:
        return _located(report, path)
    return rols


def parse_matching(path, instance):
    """(kind, assignment) from a matching document.

    A {"matching": {student: bundle|null}} document is bundle-level; a
    {"seats": {student: school|null}} document is seat-level.
    """
    raw = _load_document(path)
    if isinstance(raw, ValidationReport):
        return raw
    if isinstance(raw, dict) and "matching" in raw:
        return "bundle", dict(raw["matching"])
    if isinstance(raw, dict) and "seats" in raw:
        return "standard", dict(raw["seats"])
    report = ValidationReport([])
    report.add(f'{path}: expected an object with a "matching" or "seats" field')
    return report


def parse_profile(path):
    """StrategyProfile from a {"kind": ..., ...} document."""
    raw = _load_document(path)
    if isinstance(raw, ValidationReport):
        return raw
    kind = raw.get("kind") if isinstance(raw, dict) else None
    if kind == "per-type":
        return StrategyProfile("per-type", raw["strategies"])
    if kind == "by-rank":
        return StrategyProfile("by-rank", raw["rols"])
    report = ValidationReport([])
    report.add(f'{path}: profile "kind" must be "per-type" or "by-rank"')
    return report


def serialize_instance(instance):
    """Round-trippable raw document for a validated instance."""
    students = set(instance.students)
    bundles = []
    for bid in instance.bundle_order:
        bundle = instance.bundles[bid]
        if bundle.trivial:
            continue
        bundles.append({
            "id": bid,
            "schools": sorted(bundle.schools),
            "targets": "all" if bundle.targets == students
            else sorted(bundle.targets),
        })
    return {
        "students": list(instance.students),
        "schools": [
            {
                "id": s,
                "quota": instance.schools[s].quota,
                "priority": list(instance.schools[s].priority),
            }
            for s in instance.school_order
        ],
        "bundles": bundles,
        "rol_length": instance.rol_length,
    }


def verdict_summary(verdict):
    return {
        "stable": verdict.stable,
        "violations": [list(v) for v in verdict.violations],
    }


def metrics_block(metrics):
    block = {name: value for name, value in metrics.rows()}
    block["rounds"] = metrics.rounds
    if metrics.exact:
        block["exact"] = {k: str(v) for k, v in metrics.exact.items()}
    if metrics.components:
        block["components"] = dict(metrics.components)
    return block


def canonical_result(command, inputs, **blocks):
    """One canonical result document: digest of inputs plus payload blocks."""
    doc = {"command": command, "digest": content_digest(inputs)}
    doc.update(blocks)
    return canonical_document(doc)


def trace_csv(trace):
    """One row per engine event: round, event, student, option."""
    lines = ["round,event,student,option"]
    for event in trace.events():
        number, kind, student = event[0], event[1], event[2]
        option = event[3] if len(event) > 3 and isinstance(event[3], str) else ""
        lines.append(f"{number},{kind},{student},{option}")
    return "\n".join(lines) + "\n"


def metrics_csv(treatment, metrics):
    """Metric rows: treatment, metric, value."""
    lines = ["treatment,metric,value"]
    for name, value in metrics.rows():
        lines.append(f"{treatment},{name},{value}")
    return "\n".join(lines) + "\n"


def rounds_csv(records, kind):
    """Round-indexed metric rows for time-series plots."""
    lines = ["round,metric,value"]
    for number, record in enumerate(records, start=1):
        metrics = compute_metrics([record], kind)
        for name, value in metrics.rows():
            lines.append(f"{number},{name},{value}")
    return "\n".join(lines) + "\n"


def emit_csv(payload, kind=None, treatment=""):
    """CSV text for a trace, an OutcomeMetrics, or per-round records."""
    if isinstance(payload, EngineTrace):
        return trace_csv(payload)
    if isinstance(payload, OutcomeMetrics):
        return metrics_csv(treatment, payload)
    return rounds_csv(payload, kind)
