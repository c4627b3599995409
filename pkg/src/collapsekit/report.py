"""Report documents and their serializations.

JSON output is byte-reproducible for identical inputs: keys are sorted,
floats use repr, and wall-clock timing never enters the document (the
text renderer may show elapsed time; determinism applies to files).
Writes are atomic (temp file in the target directory, then rename).
"""

from __future__ import annotations

import json
import math
import os
import tempfile

import numpy as np

from . import __version__
from .collapsibility import CollapsibilityVerdict, ProbeResult
from .errors import CollapseKitError
from .scenarios import ScenarioReport

SCHEMA_VERSION = 1


def _num(v):
    if v is None:
        return None
    v = float(v)
    if math.isnan(v):
        return "nan"
    if math.isinf(v):
        return "inf" if v > 0 else "-inf"
    return v


def verdict_to_dict(verdict: CollapsibilityVerdict) -> dict:
    return {
        "measure": verdict.measure,
        "mode": verdict.mode,
        "classification": verdict.classification,
        "grid": {
            "x_points": list(verdict.grid.x_points),
            "y_points": list(verdict.grid.y_points) if verdict.grid.y_points else None,
            "w_points": list(verdict.grid.w_points) if verdict.grid.w_points else None,
            "tol_abs": verdict.grid.tol_abs,
            "tol_rel": verdict.grid.tol_rel,
        },
        "records": [
            {
                "x": _num(r.x),
                "y": _num(r.y),
                "conditional_avg": _num(r.conditional_average.value)
                if r.conditional_average
                else None,
                "marginal": _num(r.marginal.value) if r.marginal else None,
                "gap": _num(r.gap),
                "residual": _num(r.residual),
                "w_sup_gap": _num(r.w_sup_gap),
                "status": r.status,
                "message": r.message,
            }
            for r in verdict.records
        ],
    }


def probes_to_dict(probes: dict[str, ProbeResult]) -> dict:
    return {
        name: {
            "status": p.status,
            "deviation": _num(p.deviation),
            "passed": p.passed,
            "tol": _num(p.tol),
        }
        for name, p in probes.items()
    }


def scenario_report_doc(report: ScenarioReport) -> dict:
    return {
        "schema_version": SCHEMA_VERSION,
        "tool": "collapsekit",
        "tool_version": __version__,
        "kind": "scenario",
        "identity": {"scenario": report.scenario, "params": _jsonable(report.params)},
        "seed": report.seed,
        "pass": report.passed,
        "checks": [
            {
                "name": o.name,
                "passed": o.passed,
                "expected": o.expected,
                "actual": o.actual,
                "provenance": o.provenance,
                "gap": _num(o.gap),
            }
            for o in report.outcomes
        ],
        "probes": probes_to_dict(report.probes),
        "verdicts": [verdict_to_dict(v) for v in report.verdicts],
        "notes": list(report.notes),
    }


def check_report_doc(identity: dict, verdict: CollapsibilityVerdict, probes: dict, seed: int) -> dict:
    return {
        "schema_version": SCHEMA_VERSION,
        "tool": "collapsekit",
        "tool_version": __version__,
        "kind": "check",
        "identity": _jsonable(identity),
        "seed": seed,
        "pass": verdict.classification in ("SimpleCollapsible", "AverageCollapsible"),
        "checks": [],
        "probes": probes_to_dict(probes),
        "verdicts": [verdict_to_dict(verdict)],
        "notes": [],
    }


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.bool_):
        return bool(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.floating):
        return _num(float(obj))
    if obj is None or isinstance(obj, (bool, int, str)):
        return obj
    if isinstance(obj, float):
        return _num(obj)
    return repr(obj)


def emit_json(doc: dict) -> str:
    return json.dumps(doc, sort_keys=True, indent=2) + "\n"


def emit_csv_grid(doc: dict) -> str:
    lines = ["x,y,w,conditional_avg,marginal,gap,residual"]
    for verdict in doc.get("verdicts", []):
        for rec in verdict["records"]:

            def cell(v):
                return "" if v is None else repr(v) if isinstance(v, float) else str(v)

            lines.append(
                ",".join(
                    [
                        cell(rec["x"]),
                        cell(rec["y"]),
                        "",
                        cell(rec["conditional_avg"]),
                        cell(rec["marginal"]),
                        cell(rec["gap"]),
                        cell(rec["residual"]),
                    ]
                )
            )
    return "\n".join(lines) + "\n"


def emit_text(doc: dict) -> str:
    out = []
    ident = doc.get("identity", {})
    title = ident.get("scenario") or ident.get("config") or doc.get("kind", "report")
    out.append(f"collapsekit {doc.get('tool_version', '')} — {doc.get('kind')} report: {title}")
    out.append(f"seed: {doc.get('seed')}    overall: {'PASS' if doc.get('pass') else 'FAIL'}")
    checks = doc.get("checks", [])
    if checks:
        out.append("")
        out.append(f"{'check':52s} {'status':6s} {'expected':28s} actual")
        for c in checks:
            status = "pass" if c["passed"] else "FAIL"
            out.append(f"{c['name'][:52]:52s} {status:6s} {str(c['expected'])[:28]:28s} {c['actual']}")
    for verdict in doc.get("verdicts", []):
        out.append("")
        out.append(
            f"{verdict['measure']} ({verdict['mode']}): {verdict['classification']}"
        )
        out.append(f"{'x':>8s} {'y':>8s} {'cond_avg':>14s} {'marginal':>14s} {'gap':>12s}")
        for rec in verdict["records"]:
            y = "" if rec["y"] is None else f"{rec['y']:.4g}"
            ca = "" if rec["conditional_avg"] is None else f"{rec['conditional_avg']:.8g}"
            mg = "" if rec["marginal"] is None else f"{rec['marginal']:.8g}"
            gap = "" if rec["gap"] is None else f"{rec['gap']:.3g}"
            out.append(f"{rec['x']:>8.4g} {y:>8s} {ca:>14s} {mg:>14s} {gap:>12s}")
    probes = doc.get("probes", {})
    if probes:
        out.append("")
        out.append(f"{'condition probe':36s} {'result':12s} {'deviation':>12s} {'tol':>8s}")
        for name in sorted(probes):
            p = probes[name]
            if p["status"] == "unavailable":
                result, dev = "unavailable", ""
            else:
                result = "holds" if p["passed"] else "fails"
                dev = f"{p['deviation']:.3g}"
            out.append(f"{name:36s} {result:12s} {dev:>12s} {p['tol']:>8g}")
    for note in doc.get("notes", []):
        out.append("")
        out.append(f"note: {note}")
    return "\n".join(out) + "\n"


def emit_report(doc: dict, format: str) -> str:
    if format == "json":
        return emit_json(doc)
    if format == "csv-grid":
        return emit_csv_grid(doc)
    if format == "text":
        return emit_text(doc)
    raise CollapseKitError(f"unknown report format {format!r}")


def write_atomic(path: str, content: str) -> None:
    directory = os.path.dirname(os.path.abspath(path)) or "."
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".collapsekit-", suffix=".tmp")
    try:
        with os.fdopen(fd, "w") as fh:
            fh.write(content)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
