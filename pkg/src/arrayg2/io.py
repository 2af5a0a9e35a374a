"""Tabular and JSON output with embedded provenance.

Every CSV starts with ``#``-prefixed header lines carrying the provenance as
``# key: value`` pairs (read back with ``pandas.read_csv(path, comment="#")``
or :func:`read_csv`).  JSON outputs hold the same record under the
``"provenance"`` key.  Layouts are versioned by :data:`FORMAT_VERSION`.
"""

from __future__ import annotations

import csv
import hashlib
import json
import math
from pathlib import Path
from typing import Any, Iterable, Mapping, Sequence

import numpy as np

from . import __version__
from ._backend import NAME as BACKEND

__all__ = [
    "FORMAT_VERSION",
    "config_digest",
    "make_provenance",
    "write_table",
    "write_json",
    "read_csv",
    "spectrum_table",
    "trace_table",
    "map_table",
    "audit_table",
]

FORMAT_VERSION = 1


def _jsonable(obj: Any):
    if isinstance(obj, Mapping):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        # JSON has no inf/nan; keep them readable and round-trippable
        return v if math.isfinite(v) else str(v)
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    if isinstance(obj, complex):
        return [obj.real, obj.imag]
    return obj


def config_digest(config: Mapping) -> str:
    """sha256 of the canonical (sorted-key, compact) JSON form."""
    blob = json.dumps(_jsonable(config), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode()).hexdigest()


def make_provenance(config: Mapping, command: str, **extra) -> dict:
    prov = {
        "tool": "arrayg2",
        "version": __version__,
        "format_version": FORMAT_VERSION,
        "backend": BACKEND,
        "command": command,
        "config_sha256": config_digest(config),
    }
    prov.update(extra)
    return prov


def write_json(path: Path, payload: Mapping, provenance: Mapping) -> Path:
    path = Path(path)
    data = {"provenance": dict(provenance), **payload}
    path.write_text(json.dumps(_jsonable(data), indent=2) + "\n")
    return path


def write_table(
    path: Path,
    columns: Sequence[str],
    rows: Iterable[Sequence],
    provenance: Mapping,
    fmt: str = "csv",
) -> Path:
    """Write rows as CSV (provenance in ``#`` header lines) or as JSON records."""
    path = Path(path)
    if fmt == "json":
        records = [dict(zip(columns, r)) for r in rows]
        return write_json(path.with_suffix(".json"), {"columns": list(columns), "rows": records}, provenance)
    with path.with_suffix(".csv").open("w", newline="") as fh:
        for key, value in provenance.items():
            fh.write(f"# {key}: {json.dumps(_jsonable(value))}\n")
        w = csv.writer(fh)
        w.writerow(columns)
        for r in rows:
            w.writerow([repr(float(v)) if isinstance(v, (float, np.floating)) else v for v in r])
    return path.with_suffix(".csv")


def read_csv(path: Path) -> tuple[dict, list[str], np.ndarray]:
    """Inverse of :func:`write_table` for numeric CSVs: ``(provenance, columns, data)``."""
    prov: dict = {}
    lines = Path(path).read_text().splitlines()
    body = []
    for line in lines:
        if line.startswith("#"):
            key, _, value = line[1:].partition(":")
            prov[key.strip()] = json.loads(value)
        else:
            body.append(line)
    columns = next(csv.reader([body[0]]))
    data = np.array([[float(x) for x in r] for r in csv.reader(body[1:])]).reshape(-1, len(columns))
    return prov, columns, data


def spectrum_table(spec, c=None):
    """Rows ``(index, Re E, Im E, -2 Im E, |C|, arg C / pi)``; C columns are NaN without constants."""
    cols = ["index", "re_E", "im_E", "decay_rate", "abs_C", "arg_C_over_pi"]
    rows = []
    for k, e in enumerate(spec.eigenvalues):
        if c is None:
            ac, ph = math.nan, math.nan
        else:
            ac, ph = abs(c[k]), float(np.angle(c[k]) / np.pi)
        rows.append((k, float(e.real), float(e.imag), float(-2 * e.imag), float(ac), ph))
    return cols, rows


def trace_table(trace):
    """Rows ``(tau, g2, re_term_k, im_term_k ...)`` with per-eigenstate terms."""
    n = len(trace.c_constants)
    cols = ["tau", "g2"]
    for k in range(n):
        cols += [f"re_term_{k}", f"im_term_{k}"]
    terms = trace.contributions()
    rows = []
    for t, g, row in zip(trace.tau, trace.g2, terms):
        r = [float(t), float(g)]
        for z in row:
            r += [float(z.real), float(z.imag)]
        rows.append(r)
    return cols, rows


def map_table(result):
    """Long format ``(axis1, axis2, value, flag)``."""
    (n1, g1), (n2, g2) = result.axes.items()
    rows = []
    for i, a in enumerate(g1):
        for j, b in enumerate(g2):
            rows.append((float(a), float(b), float(result.values[i, j]), int(result.flags[i, j])))
    return [n1, n2, result.quantity, "flag"], rows


def audit_table(audit: Sequence[Mapping]):
    if not audit:
        return ["stage"], []
    cols = list(audit[0].keys())
    for rec in audit:
        for k in rec:
            if k not in cols:
                cols.append(k)
    return cols, [[rec.get(c, "") for c in cols] for rec in audit]
