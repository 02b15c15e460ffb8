"""Text and JSON serialization for metric matrices, leaderboards and reports.

Every writer goes through :func:`atomic_write` (temp file + rename) so an
interrupted run never leaves a truncated output behind. Floats are written
with ``repr`` which round-trips exactly.
"""
from __future__ import annotations

import csv
import io
import json
import math
import os
import re
import tempfile
from pathlib import Path
from typing import Any, Mapping, TextIO

import numpy as np

from .aggregation import Leaderboard, MetricMatrix

_MATRIX_NAME = re.compile(r"^(?P<metric>.+)@(?P<k>\d+)$")


class FormatError(ValueError):
    pass


def atomic_write(path: str | os.PathLike, text: str) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
    return path


def read_text(source: str | os.PathLike | TextIO) -> tuple[str, str | None]:
    """Return ``(text, file stem or None)`` for a path, an open file or literal text."""
    if hasattr(source, "read"):
        name = getattr(source, "name", None)
        return source.read(), Path(name).stem if isinstance(name, str) else None
    if isinstance(source, os.PathLike) or ("\n" not in str(source) and Path(source).exists()):
        path = Path(source)
        return path.read_text(encoding="utf-8"), path.stem
    return str(source), None


def to_json(doc: Any) -> str:
    return json.dumps(_jsonable(doc), indent=2, allow_nan=False) + "\n"


def _jsonable(obj):
    if isinstance(obj, Mapping):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        value = float(obj)
        if math.isinf(value):
            return "inf" if value > 0 else "-inf"
        if math.isnan(value):
            return None
        return value
    return obj


# ---------------------------------------------------------------------------
# metric matrices
# ---------------------------------------------------------------------------

def matrix_file_name(q: MetricMatrix) -> str:
    return f"{q.name}.csv"


def export_metric_matrix(q: MetricMatrix, target: str | os.PathLike | None = None) -> str:
    """Render ``q`` as ``dataset,<method...>`` text; also written to ``target`` if given."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["dataset", *q.methods])
    for label, row in zip(q.datasets, q.values):
        writer.writerow([label, *(repr(float(v)) for v in row)])
    text = buf.getvalue()
    if target is not None:
        atomic_write(target, text)
    return text


def import_metric_matrix(source, metric: str | None = None, k: int | None = None) -> MetricMatrix:
    """Parse a metric-matrix file; metric and k default to the ``<metric>@<k>`` file stem."""
    text, stem = read_text(source)
    rows = [r for r in csv.reader(io.StringIO(text)) if r]
    if len(rows) < 2:
        raise FormatError("metric matrix needs a header and at least one dataset row")
    header = [h.strip() for h in rows[0]]
    if len(header) < 3:
        raise FormatError("metric matrix header needs a dataset column and >= 2 methods")
    methods = header[1:]
    if len(set(methods)) != len(methods):
        raise FormatError("duplicate method label in header")
    datasets, values = [], []
    for line_no, row in enumerate(rows[1:], start=2):
        if len(row) != len(header):
            raise FormatError(f"line {line_no}: expected {len(header)} fields, got {len(row)}")
        try:
            cells = [float(c) for c in row[1:]]
        except ValueError as exc:
            raise FormatError(f"line {line_no}: {exc}") from None
        if not all(math.isfinite(c) for c in cells):
            raise FormatError(f"line {line_no}: non-finite cell")
        datasets.append(row[0].strip())
        values.append(cells)
    if len(set(datasets)) != len(datasets):
        raise FormatError("duplicate dataset label")
    if stem is not None and (metric is None or k is None):
        match = _MATRIX_NAME.match(stem)
        if match:
            metric = metric or match["metric"]
            k = k if k is not None else int(match["k"])
        elif metric is None:
            metric = stem
    try:
        return MetricMatrix(np.array(values), tuple(datasets), tuple(methods),
                            metric or "metric", k)
    except ValueError as exc:
        raise FormatError(str(exc)) from None


# ---------------------------------------------------------------------------
# leaderboards
# ---------------------------------------------------------------------------

def leaderboard_to_csv(board: Leaderboard) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["position", "method", "score"])
    for pos, method, score in board.rows():
        writer.writerow([pos, method, repr(float(score))])
    return buf.getvalue()


def leaderboard_from_csv(source, rule: str | None = None,
                         higher_is_better: bool | None = None) -> Leaderboard:
    """Parse ``position,method,score``; direction is inferred from the score order if unknown."""
    text, stem = read_text(source)
    rows = [r for r in csv.reader(io.StringIO(text)) if r]
    if not rows or [h.strip() for h in rows[0]] != ["position", "method", "score"]:
        raise FormatError("leaderboard header must be position,method,score")
    body = sorted(rows[1:], key=lambda r: int(r[0]))
    methods = tuple(r[1] for r in body)
    scores = tuple(float(r[2]) for r in body)
    if higher_is_better is None:
        higher_is_better = not all(a <= b for a, b in zip(scores, scores[1:])) or \
            all(a == b for a, b in zip(scores, scores[1:]))
    return Leaderboard(rule or stem or "rule", methods, scores, higher_is_better)


def leaderboard_doc(board: Leaderboard) -> dict:
    return {
        "direction": "higher" if board.higher_is_better else "lower",
        "ranking": [{"position": p, "method": m, "score": s} for p, m, s in board.rows()],
    }


def leaderboards_to_json(boards: Mapping[str, Leaderboard], extra: Mapping | None = None) -> str:
    doc = {"leaderboards": {rule: leaderboard_doc(b) for rule, b in boards.items()}}
    if extra:
        doc.update(extra)
    return to_json(doc)


def leaderboards_from_json(text: str) -> dict[str, Leaderboard]:
    doc = json.loads(text)
    out = {}
    for rule, entry in doc["leaderboards"].items():
        ranking = sorted(entry["ranking"], key=lambda r: r["position"])
        out[rule] = Leaderboard(rule, tuple(r["method"] for r in ranking),
                                tuple(float(r["score"]) for r in ranking),
                                entry["direction"] == "higher")
    return out
