"""Score files and report bundles.

Score files are UTF-8 CSV with header ``subject_id,y,score``. A report
bundle is a directory holding ``report.json``, ``per_split_metrics.csv``
and ``ctoc.csv``. Reported numbers carry 6 significant digits, infinite
thresholds are written as ``"inf"`` and undefined metrics as ``null``
(JSON) or an empty field (CSV).
"""

from __future__ import annotations

import csv
import io
import json
import math
from pathlib import Path
from typing import Any

from ._validation import InputError
from .domain import Cohort, ScoredSubject
from .engine import AuditReport, input_digest
from .metrics import METRIC_NAMES, SplitMetrics

SCORE_COLUMNS = ("subject_id", "y", "score")
INF_SENTINEL = "inf"

SCOPE_NOTE = (
    "Split-level results on this cohort measure sensitivity to the random C1/C2/T "
    "allocation, not independent external validation. Synthetic cohorts reproduce "
    "directions of effect only; clinical magnitudes require the original score arrays."
)


def sig6(x: float) -> float:
    return float(f"{x:.6g}")


def _fmt(x: Any) -> Any:
    if x is None or isinstance(x, (bool, str, int)):
        return x
    x = float(x)
    if math.isinf(x) and x > 0:
        return INF_SENTINEL
    if math.isnan(x):
        return None
    return sig6(x)


def canonical_dumps(obj: Any) -> str:
    return json.dumps(obj, sort_keys=True, indent=2, ensure_ascii=False, allow_nan=False) + "\n"


# -- score files -----------------------------------------------------------

def parse_scores(text: str) -> Cohort:
    reader = csv.DictReader(io.StringIO(text))
    header = reader.fieldnames or []
    for col in SCORE_COLUMNS:
        if col not in header:
            raise InputError(f"missing column {col!r}")
    subjects = []
    seen = set()
    for lineno, row in enumerate(reader, start=2):
        sid = (row["subject_id"] or "").strip()
        if not sid:
            raise InputError(f"line {lineno}: empty subject_id")
        if sid in seen:
            raise InputError(f"line {lineno}: duplicate subject_id {sid!r}")
        seen.add(sid)
        y_raw = (row["y"] or "").strip()
        if y_raw not in ("0", "1"):
            raise InputError(f"line {lineno}: y must be 0 or 1, got {y_raw!r}")
        try:
            score = float(row["score"])
        except (TypeError, ValueError):
            raise InputError(f"line {lineno}: non-numeric score {row['score']!r}") from None
        if not 0.0 <= score <= 1.0:
            raise InputError(f"line {lineno}: score {score!r} outside [0, 1]")
        subjects.append(ScoredSubject(sid, int(y_raw), score))
    if not subjects:
        raise InputError("score file has no rows")
    return Cohort(tuple(subjects))


def read_scores(path: str | Path) -> tuple[Cohort, str]:
    """Load a score file; returns the cohort and the sha256 digest of its bytes."""
    data = Path(path).read_bytes()
    try:
        text = data.decode("utf-8-sig")
    except UnicodeDecodeError:
        raise InputError(f"{path}: not UTF-8") from None
    return parse_scores(text), input_digest(data)


def write_scores(cohort: Cohort, path: str | Path) -> None:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(SCORE_COLUMNS)
    for s in cohort.subjects:
        w.writerow([s.id, s.label, repr(s.score)])
    Path(path).write_text(buf.getvalue(), encoding="utf-8")


# -- report bundle ---------------------------------------------------------

SPLIT_COLUMNS = (
    ("split_index", "method", "alpha", "status")
    + tuple(SplitMetrics.__dataclass_fields__)
    + ("fitted_b", "q_pool", "q0", "q1", "error")
)
CTOC_COLUMNS = ("method", "alpha", "mean_hrr", "mean_fn_rel", "n_splits_ok")


def _thresholds(rule) -> dict[str, Any]:
    if rule is None:
        return {"q_pool": None, "q0": None, "q1": None}
    q0, q1 = rule.thresholds
    pooled = rule.pooled_q if rule.mode.value == "pooled" else None
    return {"q_pool": _fmt(pooled), "q0": _fmt(q0), "q1": _fmt(q1)}


def report_dict(report: AuditReport) -> dict:
    cfg = report.config
    methods = {}
    for m in cfg.methods:
        agg = report.aggregates[m]
        methods[m.value] = {
            "aggregate": {
                name: {
                    "mean": _fmt(agg[name].mean),
                    "std": _fmt(agg[name].std),
                    "n_defined": agg[name].n_defined,
                }
                for name in METRIC_NAMES
            },
            "fn_p95": _fmt(agg.fn_p95),
            "n_splits": agg.n_splits,
            "n_splits_with_events": agg.n_splits_with_events,
            "n_failed_splits": report.failed_splits[m],
            "ctoc": [
                {"alpha": _fmt(p.alpha), "mean_hrr": _fmt(p.mean_hrr),
                 "mean_fn_rel": _fmt(p.mean_fn_rel), "n_splits_ok": p.n_ok}
                for p in report.ctoc[m]
            ],
        }
    primary = {}
    for r in report.rows(alpha=cfg.alpha):
        entry = primary.setdefault(r.split_index, {"fitted_b": None, "thresholds": {}})
        if r.shift is not None:
            entry["fitted_b"] = _fmt(r.shift.b)
        entry["thresholds"][r.method.value] = _thresholds(r.rule)
    splits = []
    for i, alloc in enumerate(report.allocations):
        splits.append({
            "split_index": i,
            "c1": list(alloc.c1),
            "c2": list(alloc.c2),
            "t": list(alloc.t),
            **primary.get(i, {"fitted_b": None, "thresholds": {}}),
        })
    return {
        "config": {k: (_fmt(v) if isinstance(v, float) else
                       [_fmt(a) for a in v] if k == "alpha_grid" else v)
                   for k, v in cfg.as_dict().items()},
        "provenance": dict(report.provenance),
        "methods": methods,
        "splits": splits,
        "leakage_check": "passed" if all(led.is_disjoint() for led in report.ledgers) else "failed",
        "note": SCOPE_NOTE,
    }


def _csv_cell(v: Any) -> str:
    v = _fmt(v)
    if v is None:
        return ""
    return str(v)


def per_split_rows(report: AuditReport) -> list[dict[str, str]]:
    rows = []
    for r in report.results:
        row = {"split_index": str(r.split_index), "method": r.method.value,
               "alpha": _csv_cell(r.alpha), "status": "ok" if r.ok else "failed"}
        fields = r.metrics.as_dict() if r.metrics else dict.fromkeys(SplitMetrics.__dataclass_fields__)
        row.update({k: _csv_cell(v) for k, v in fields.items()})
        row["fitted_b"] = _csv_cell(r.shift.b if r.shift else None)
        row.update({k: _csv_cell(v) for k, v in _thresholds(r.rule).items()})
        row["error"] = r.error or ""
        rows.append(row)
    return rows


def ctoc_rows(report: AuditReport) -> list[dict[str, str]]:
    return [
        {"method": m.value, "alpha": _csv_cell(p.alpha), "mean_hrr": _csv_cell(p.mean_hrr),
         "mean_fn_rel": _csv_cell(p.mean_fn_rel), "n_splits_ok": str(p.n_ok)}
        for m in report.config.methods for p in report.ctoc[m]
    ]


def _write_csv(path: Path, columns, rows) -> None:
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=list(columns), lineterminator="\n")
    w.writeheader()
    w.writerows(rows)
    path.write_text(buf.getvalue(), encoding="utf-8")


def write_bundle(report: AuditReport, out_dir: str | Path, *, ctoc_only: bool = False) -> list[Path]:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = []
    if not ctoc_only:
        p = out / "report.json"
        p.write_text(canonical_dumps(report_dict(report)), encoding="utf-8")
        written.append(p)
        p = out / "per_split_metrics.csv"
        _write_csv(p, SPLIT_COLUMNS, per_split_rows(report))
        written.append(p)
    p = out / "ctoc.csv"
    _write_csv(p, CTOC_COLUMNS, ctoc_rows(report))
    written.append(p)
    return written


def _parse_cell(v: str) -> Any:
    if v == "":
        return None
    if v == INF_SENTINEL:
        return math.inf
    try:
        return int(v)
    except ValueError:
        pass
    try:
        return float(v)
    except ValueError:
        return v


def read_csv_table(path: str | Path) -> list[dict[str, Any]]:
    """Read a bundle CSV back, restoring numbers, ``inf`` and nulls."""
    with open(path, newline="", encoding="utf-8") as fh:
        return [{k: _parse_cell(v) for k, v in row.items()} for row in csv.DictReader(fh)]


def read_report(path: str | Path) -> dict:
    return json.loads(Path(path).read_text(encoding="utf-8"))
