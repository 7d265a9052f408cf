"""Report files: JSON, CSV and a plain SVG line plot, all written atomically."""

from __future__ import annotations

import csv
import io
import json
import math
import os
import tempfile
from pathlib import Path
from typing import Sequence

import numpy as np

SCHEMA_VERSION = 1
SVG_WIDTH, SVG_HEIGHT = 800, 600


def atomic_write(path, text: str) -> Path:
    """Write ``text`` to ``path`` through a temporary file in the same directory."""
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


def jsonable(obj):
    """Plain JSON types; non-finite floats become strings so output stays valid JSON."""
    if isinstance(obj, dict):
        return {str(k): jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return jsonable(obj.tolist())
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        if math.isnan(v):
            return "nan"
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        return v
    return obj


def json_text(payload: dict) -> str:
    body = {"schema_version": SCHEMA_VERSION}
    body.update({k: v for k, v in payload.items() if k != "schema_version"})
    return json.dumps(jsonable(body), indent=2) + "\n"


def csv_text(header: Sequence[str], rows: Sequence[Sequence]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([repr(float(v)) if isinstance(v, (float, np.floating)) else v for v in row])
    return buf.getvalue()


def _ticks(lo, hi, log):
    if log:
        a, b = math.floor(lo), math.ceil(hi)
        step = max(1, (b - a) // 8)
        return [float(v) for v in range(a, b + 1, step)]
    span = hi - lo
    raw = span / 6
    mag = 10 ** math.floor(math.log10(raw))
    step = min((m * mag for m in (1, 2, 5, 10) if m * mag >= raw), default=raw)
    first = math.ceil(lo / step) * step
    return [first + i * step for i in range(int((hi - first) / step + 1e-9) + 1)]


def _fmt(v, log):
    if log:
        return f"1e{int(v)}"
    return f"{v:.4g}"


def svg_line_plot(series: dict, title: str, xlabel: str, ylabel: str,
                  logx: bool = False, logy: bool = True) -> str:
    """One polyline per entry of ``series`` (``name -> (xs, ys)``) on an 800x600 canvas.

    Points that cannot be drawn on a log axis (``<= 0`` or non-finite) are dropped.
    """
    if not series:
        raise ValueError("nothing to plot")
    left, right, top, bottom = 90, 30, 50, 70
    pw, ph = SVG_WIDTH - left - right, SVG_HEIGHT - top - bottom
    cleaned = {}
    for name, (xs, ys) in series.items():
        pts = []
        for x, y in zip(xs, ys):
            x, y = float(x), float(y)
            if not (math.isfinite(x) and math.isfinite(y)):
                continue
            if (logx and x <= 0) or (logy and y <= 0):
                continue
            pts.append((math.log10(x) if logx else x, math.log10(y) if logy else y))
        cleaned[name] = pts
    allpts = [p for pts in cleaned.values() for p in pts] or [(0.0, 0.0)]
    x0, x1 = min(p[0] for p in allpts), max(p[0] for p in allpts)
    y0, y1 = min(p[1] for p in allpts), max(p[1] for p in allpts)
    if x1 - x0 < 1e-12:
        x0, x1 = x0 - 1, x1 + 1
    if y1 - y0 < 1e-12:
        y0, y1 = y0 - 1, y1 + 1
    if logy:
        y0, y1 = math.floor(y0), math.ceil(y1)

    def sx(x):
        return left + (x - x0) / (x1 - x0) * pw

    def sy(y):
        return top + (1 - (y - y0) / (y1 - y0)) * ph

    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{SVG_WIDTH}" height="{SVG_HEIGHT}" '
           f'viewBox="0 0 {SVG_WIDTH} {SVG_HEIGHT}">',
           f'<rect x="0" y="0" width="{SVG_WIDTH}" height="{SVG_HEIGHT}" fill="white"/>',
           f'<text x="{SVG_WIDTH / 2}" y="28" text-anchor="middle" font-size="18">{title}</text>',
           f'<line x1="{left}" y1="{top + ph}" x2="{left + pw}" y2="{top + ph}" stroke="black"/>',
           f'<line x1="{left}" y1="{top}" x2="{left}" y2="{top + ph}" stroke="black"/>']
    for t in _ticks(x0, x1, logx):
        if x0 - 1e-9 <= t <= x1 + 1e-9:
            X = sx(t)
            out.append(f'<line x1="{X:.2f}" y1="{top + ph}" x2="{X:.2f}" y2="{top + ph + 6}" stroke="black"/>')
            out.append(f'<text x="{X:.2f}" y="{top + ph + 22}" text-anchor="middle" font-size="12">'
                       f'{_fmt(t, logx)}</text>')
    for t in _ticks(y0, y1, logy):
        if y0 - 1e-9 <= t <= y1 + 1e-9:
            Y = sy(t)
            out.append(f'<line x1="{left - 6}" y1="{Y:.2f}" x2="{left}" y2="{Y:.2f}" stroke="black"/>')
            out.append(f'<text x="{left - 10}" y="{Y + 4:.2f}" text-anchor="end" font-size="12">'
                       f'{_fmt(t, logy)}</text>')
    out.append(f'<text x="{left + pw / 2}" y="{SVG_HEIGHT - 20}" text-anchor="middle" font-size="14">{xlabel}</text>')
    out.append(f'<text x="20" y="{top + ph / 2}" text-anchor="middle" font-size="14" '
               f'transform="rotate(-90 20 {top + ph / 2})">{ylabel}</text>')
    colors = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e")
    for i, (name, pts) in enumerate(cleaned.items()):
        color = colors[i % len(colors)]
        if pts:
            coords = " ".join(f"{sx(x):.2f},{sy(y):.2f}" for x, y in pts)
            out.append(f'<polyline fill="none" stroke="{color}" stroke-width="2" points="{coords}"/>')
            for x, y in pts:
                out.append(f'<circle cx="{sx(x):.2f}" cy="{sy(y):.2f}" r="3" fill="{color}"/>')
        out.append(f'<text x="{left + pw - 10}" y="{top + 18 + 18 * i}" text-anchor="end" font-size="13" '
                   f'fill="{color}">{name}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def emit_report(out_dir, name: str, payload: dict, checks: Sequence[dict],
                curves: dict | None = None) -> dict:
    """Write ``<name>.json`` plus one CSV and one SVG per curve.

    ``curves`` maps a file stem to ``{"header", "rows", "x", "y", "title",
    "xlabel", "ylabel", "logx", "logy"}``. Returns the written paths.
    """
    if not checks:
        raise ValueError("report needs at least one check")
    out_dir = Path(out_dir)
    body = dict(payload)
    body["checks"] = list(checks)
    body["pass"] = all(bool(c["pass"]) for c in checks)
    paths = {"json": atomic_write(out_dir / f"{name}.json", json_text(body))}
    for stem, curve in (curves or {}).items():
        paths[f"{stem}.csv"] = atomic_write(out_dir / f"{stem}.csv", csv_text(curve["header"], curve["rows"]))
        xs = [row[curve["x"]] for row in curve["rows"]]
        ys = [row[curve["y"]] for row in curve["rows"]]
        svg = svg_line_plot({curve["header"][curve["y"]]: (xs, ys)}, curve["title"], curve["xlabel"],
                            curve["ylabel"], curve.get("logx", False), curve.get("logy", True))
        paths[f"{stem}.svg"] = atomic_write(out_dir / f"{stem}.svg", svg)
    return paths
