"""CSV, JSON, SVG and manifest writers."""

from __future__ import annotations

import csv
import hashlib
import json
import math
from pathlib import Path

import numpy as np


def fmt(x) -> str:
    """Round-trip float formatting (17 significant digits); ints and strings pass through."""
    if isinstance(x, (bool, np.bool_)):
        return str(bool(x)).lower()
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        return f"{float(x):.17g}"
    return str(x)


def write_csv(path, header, rows):
    path = Path(path)
    with path.open("w", newline="") as fh:
        wr = csv.writer(fh, lineterminator="\n")
        wr.writerow(header)
        for row in rows:
            wr.writerow([fmt(x) for x in row])
    return path


def write_columns(path, columns: dict):
    """CSV from equal-length columns."""
    header = list(columns)
    return write_csv(path, header, zip(*(np.asarray(c) for c in columns.values())))


def jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [jsonable(v) for v in obj.tolist()]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        return x if math.isfinite(x) else None
    return obj


def dumps(obj) -> str:
    return json.dumps(jsonable(obj), indent=2, sort_keys=True, allow_nan=False) + "\n"


def write_json(path, obj):
    path = Path(path)
    path.write_text(dumps(obj))
    return path


def sha256(path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def write_manifest(out_dir, config: dict, stages: list, status: str, error: str | None = None):
    """manifest.json listing every other file in ``out_dir`` with its hash."""
    out_dir = Path(out_dir)
    files = {p.name: sha256(p) for p in sorted(out_dir.iterdir())
             if p.is_file() and p.name != "manifest.json"}
    body = {"config": config, "stages": stages, "status": status, "error": error, "files": files}
    return write_json(out_dir / "manifest.json", body)


def svg_plot(path, series: dict, title: str = "", xlabel: str = "", ylabel: str = "",
             width: int = 640, height: int = 420):
    """Polyline plot of ``{label: (x, y)}``; non-finite points are dropped."""
    colors = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e"]
    m = 50
    pts = {k: (np.asarray(x, float), np.asarray(y, float)) for k, (x, y) in series.items()}
    pts = {k: (x[np.isfinite(x) & np.isfinite(y)], y[np.isfinite(x) & np.isfinite(y)]) for k, (x, y) in pts.items()}
    allx = np.concatenate([x for x, _ in pts.values()] or [np.zeros(1)])
    ally = np.concatenate([y for _, y in pts.values()] or [np.zeros(1)])
    x0, x1 = (float(allx.min()), float(allx.max())) if allx.size else (0.0, 1.0)
    y0, y1 = (float(ally.min()), float(ally.max())) if ally.size else (0.0, 1.0)
    x1 = x1 if x1 > x0 else x0 + 1.0
    y1 = y1 if y1 > y0 else y0 + 1.0

    def X(x):
        return m + (x - x0) / (x1 - x0) * (width - 2 * m)

    def Y(y):
        return height - m - (y - y0) / (y1 - y0) * (height - 2 * m)

    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}">',
           '<rect width="100%" height="100%" fill="white"/>',
           f'<rect x="{m}" y="{m}" width="{width - 2 * m}" height="{height - 2 * m}" fill="none" stroke="black"/>',
           f'<text x="{width / 2}" y="{m / 2}" text-anchor="middle" font-size="14">{title}</text>',
           f'<text x="{width / 2}" y="{height - 12}" text-anchor="middle" font-size="12">{xlabel}</text>',
           f'<text x="14" y="{height / 2}" font-size="12" transform="rotate(-90 14 {height / 2})" '
           f'text-anchor="middle">{ylabel}</text>',
           f'<text x="{m}" y="{height - m + 16}" font-size="10">{x0:.4g}</text>',
           f'<text x="{width - m}" y="{height - m + 16}" font-size="10" text-anchor="end">{x1:.4g}</text>',
           f'<text x="{m - 4}" y="{height - m}" font-size="10" text-anchor="end">{y0:.4g}</text>',
           f'<text x="{m - 4}" y="{m + 10}" font-size="10" text-anchor="end">{y1:.4g}</text>']
    for k, (label, (x, y)) in enumerate(pts.items()):
        c = colors[k % len(colors)]
        coords = " ".join(f"{X(a):.2f},{Y(b):.2f}" for a, b in zip(x, y))
        out.append(f'<polyline fill="none" stroke="{c}" stroke-width="1.5" points="{coords}"/>')
        out.append(f'<text x="{width - m - 4}" y="{m + 16 + 14 * k}" font-size="11" fill="{c}" '
                   f'text-anchor="end">{label}</text>')
    out.append("</svg>")
    Path(path).write_text("\n".join(out) + "\n")
    return Path(path)
