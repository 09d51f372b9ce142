"""Reports: checks, JSON/CSV emission and standalone SVG line plots."""

from __future__ import annotations

import csv
import io
import json
import math
import os
import tempfile
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__

RELATIONS = {
    "<": lambda a, b, tol: a < b + tol,
    "<=": lambda a, b, tol: a <= b + tol,
    ">": lambda a, b, tol: a > b - tol,
    ">=": lambda a, b, tol: a >= b - tol,
    "==": lambda a, b, tol: abs(a - b) <= tol,
}


def _plain(obj):
    """JSON-ready copy: numpy scalars/arrays to Python, non-finite floats to
    strings (JSON has no inf/nan)."""
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _plain(obj.tolist())
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        return x if math.isfinite(x) else repr(x)
    return obj


def check(name: str, lhs, rhs, relation: str = "<=", tolerance: float = 0.0,
          anchor: str = "") -> dict:
    """One named comparison lhs <relation> rhs (with tolerance)."""
    if relation not in RELATIONS:
        raise ValueError(f"unknown relation {relation!r}")
    holds = bool(RELATIONS[relation](float(lhs), float(rhs), float(tolerance)))
    return {"name": name, "anchor": anchor or name, "lhs": float(lhs), "rhs": float(rhs),
            "relation": relation, "holds": holds, "tolerance": float(tolerance)}


@dataclass
class Report:
    command: str
    inputs: dict = field(default_factory=dict)
    checks: list = field(default_factory=list)
    results: dict = field(default_factory=dict)
    timing: dict = field(default_factory=dict)
    _t0: float = field(default_factory=time.perf_counter, repr=False)

    def add(self, name, lhs, rhs, relation="<=", tolerance=0.0, anchor="") -> dict:
        c = check(name, lhs, rhs, relation, tolerance, anchor)
        self.checks.append(c)
        return c

    def extend(self, checks) -> None:
        for c in checks:
            c = dict(c)
            c.setdefault("anchor", c["name"])
            self.checks.append(c)

    @property
    def holds(self) -> bool:
        return all(c["holds"] for c in self.checks)

    def finish(self) -> "Report":
        self.timing["seconds"] = time.perf_counter() - self._t0
        return self

    def as_dict(self) -> dict:
        # deterministic ordered reduction by check name
        checks = sorted(self.checks, key=lambda c: c["name"])
        return _plain({"tool": "diffeo1d", "version": __version__, "command": self.command,
                       "inputs": self.inputs, "checks": checks, "holds": self.holds,
                       "results": self.results, "timing": self.timing})


# -- serialization ------------------------------------------------------------------

def atomic_write(path, text: str) -> Path:
    """Write through a temporary file in the target directory, then rename."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(prefix=f".{path.name}.", dir=path.parent)
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
    return path


def dumps(obj) -> str:
    # repr of a float is the shortest round-trip decimal (<= 17 digits)
    return json.dumps(_plain(obj), indent=2, sort_keys=False, allow_nan=False) + "\n"


def write_json(path, obj) -> Path:
    return atomic_write(path, dumps(obj))


def _flat_rows(prefix: str, obj, rows: list) -> None:
    if isinstance(obj, dict):
        for k, v in obj.items():
            _flat_rows(f"{prefix}.{k}" if prefix else str(k), v, rows)
    elif isinstance(obj, list):
        for i, v in enumerate(obj):
            _flat_rows(f"{prefix}[{i}]", v, rows)
    else:
        rows.append((prefix, obj))


def report_csv(data: dict) -> str:
    """key,value rows of the flattened report; floats use the same shortest
    round-trip text as the JSON."""
    rows: list = []
    _flat_rows("", _plain(data), rows)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["key", "value"])
    for k, v in rows:
        w.writerow([k, json.dumps(v) if not isinstance(v, str) else v])
    return buf.getvalue()


def table_csv(columns: dict) -> str:
    """Columns of equal length as CSV (for sampled functions)."""
    names = list(columns)
    cols = [np.asarray(columns[n], dtype=float).ravel() for n in names]
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(names)
    for row in zip(*cols):
        w.writerow([repr(float(v)) for v in row])
    return buf.getvalue()


def write_report(path, report: Report, fmt: str = "json") -> Path:
    data = report.as_dict()
    if fmt == "json":
        return write_json(path, data)
    if fmt == "csv":
        return atomic_write(path, report_csv(data))
    raise ValueError(f"unknown format {fmt!r}")


def read_csv_report(text: str) -> dict:
    """key -> value for a CSV report (values parsed back from JSON text)."""
    out = {}
    for row in list(csv.reader(io.StringIO(text)))[1:]:
        k, v = row
        try:
            out[k] = json.loads(v)
        except json.JSONDecodeError:
            out[k] = v
    return out


# -- SVG ------------------------------------------------------------------------------

SVG_W, SVG_H = 800, 500
_MARGIN = (70, 30, 30, 50)     # left, right, top, bottom
_COLORS = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b")


def _ticks(lo: float, hi: float, count: int = 5) -> list[float]:
    if hi <= lo:
        return [lo]
    return list(np.linspace(lo, hi, count))


def svg_plot(series: dict, title: str = "", xlabel: str = "", ylabel: str = "") -> str:
    """Standalone SVG with axes and one polyline per series.

    ``series`` maps a label to (x, y) arrays.  Non-finite points are dropped.
    """
    ml, mr, mt, mb = _MARGIN
    pw, ph = SVG_W - ml - mr, SVG_H - mt - mb
    clean = {}
    for label, (x, y) in series.items():
        x, y = np.asarray(x, dtype=float).ravel(), np.asarray(y, dtype=float).ravel()
        ok = np.isfinite(x) & np.isfinite(y)
        clean[label] = (x[ok], y[ok])
    allx = np.concatenate([v[0] for v in clean.values()] + [np.zeros(0)])
    ally = np.concatenate([v[1] for v in clean.values()] + [np.zeros(0)])
    x0, x1 = (float(allx.min()), float(allx.max())) if allx.size else (0.0, 1.0)
    y0, y1 = (float(ally.min()), float(ally.max())) if ally.size else (0.0, 1.0)
    if x1 == x0:
        x0, x1 = x0 - 0.5, x1 + 0.5
    if y1 == y0:
        y0, y1 = y0 - 0.5, y1 + 0.5

    def sx(v):
        return ml + (v - x0) / (x1 - x0) * pw

    def sy(v):
        return mt + ph - (v - y0) / (y1 - y0) * ph

    out = [f'<svg xmlns="http://www.w3.org/2000/svg" viewBox="0 0 {SVG_W} {SVG_H}" '
           f'width="{SVG_W}" height="{SVG_H}" font-family="sans-serif" font-size="12">',
           f'<rect x="0" y="0" width="{SVG_W}" height="{SVG_H}" fill="white"/>',
           f'<line x1="{ml}" y1="{mt + ph}" x2="{ml + pw}" y2="{mt + ph}" stroke="black"/>',
           f'<line x1="{ml}" y1="{mt}" x2="{ml}" y2="{mt + ph}" stroke="black"/>']
    for v in _ticks(x0, x1):
        px = sx(v)
        out.append(f'<line x1="{px:.2f}" y1="{mt + ph}" x2="{px:.2f}" y2="{mt + ph + 5}" '
                   'stroke="black"/>')
        out.append(f'<text x="{px:.2f}" y="{mt + ph + 18}" text-anchor="middle">{v:.4g}</text>')
    for v in _ticks(y0, y1):
        py = sy(v)
        out.append(f'<line x1="{ml - 5}" y1="{py:.2f}" x2="{ml}" y2="{py:.2f}" stroke="black"/>')
        out.append(f'<text x="{ml - 8}" y="{py + 4:.2f}" text-anchor="end">{v:.4g}</text>')
    if title:
        out.append(f'<text x="{SVG_W / 2}" y="{mt - 10}" text-anchor="middle">{_esc(title)}</text>')
    if xlabel:
        out.append(f'<text x="{ml + pw / 2}" y="{SVG_H - 10}" text-anchor="middle">'
                   f'{_esc(xlabel)}</text>')
    if ylabel:
        out.append(f'<text x="15" y="{mt + ph / 2}" text-anchor="middle" '
                   f'transform="rotate(-90 15 {mt + ph / 2})">{_esc(ylabel)}</text>')
    for i, (label, (x, y)) in enumerate(clean.items()):
        color = _COLORS[i % len(_COLORS)]
        pts = " ".join(f"{sx(a):.2f},{sy(b):.2f}" for a, b in zip(x, y))
        out.append(f'<polyline fill="none" stroke="{color}" stroke-width="1.5" '
                   f'points="{pts}"><title>{_esc(label)}</title></polyline>')
        out.append(f'<text x="{ml + pw - 5}" y="{mt + 15 + 15 * i}" text-anchor="end" '
                   f'fill="{color}">{_esc(label)}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def _esc(s: str) -> str:
    return (str(s).replace("&", "&amp;").replace("<", "&lt;").replace(">", "&gt;")
            .replace('"', "&quot;"))


def write_svg(path, series: dict, **kw) -> Path:
    return atomic_write(path, svg_plot(series, **kw))
