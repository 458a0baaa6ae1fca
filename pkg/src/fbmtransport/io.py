"""CSV and SVG output.  Floats are written with ``repr`` so they round-trip exactly."""
from __future__ import annotations

import csv
import math
from pathlib import Path

import numpy as np


def _num(v):
    if v is None:
        return ""
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return repr(float(v))


def _meta_lines(fh, meta):
    for k, v in meta.items():
        fh.write(f"# {k}={v}\n")


def _seed_text(seed):
    if seed is None:
        return "none"
    return f"{seed.master_seed}:{seed.stream_index}:{seed.substream}"


def write_transport_csv(path, tp):
    knots, values, slopes = tp.pieces
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["piece_index", "start_time", "end_time", "start_value", "slope"])
        for i in range(len(slopes)):
            w.writerow([i, _num(knots[i]), _num(knots[i + 1]), _num(values[i]), _num(slopes[i])])
    return Path(path)


def write_driver_csv(path, driver):
    p = driver.params
    meta = {
        "kind": driver.kind,
        "H": driver.H,
        "beta": p.beta if p else "",
        "a": p.a if p else "",
        "n": p.n if p else "",
        "seed": _seed_text(driver.seed),
    }
    with open(path, "w", newline="") as fh:
        _meta_lines(fh, meta)
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["t", "value"])
        for t, v in zip(driver.grid, driver.values):
            w.writerow([_num(t), _num(v)])
    return Path(path)


def read_driver_csv(path):
    """``(meta, grid, values)`` from a file written by :func:`write_driver_csv`."""
    meta, rows = {}, []
    with open(path) as fh:
        for line in fh:
            if line.startswith("#"):
                k, _, v = line[1:].strip().partition("=")
                meta[k] = v
            elif line.strip() and not line.startswith("t,"):
                rows.append([float(x) for x in line.split(",")])
    arr = np.array(rows).reshape(-1, 2)
    return meta, arr[:, 0], arr[:, 1]


def write_solution_csv(path, sol):
    with open(path, "w", newline="") as fh:
        _meta_lines(fh, {"provenance": sol.label,
                         **{k: v for k, v in sol.meta.items() if k != "seed"}})
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["t", "Y", "X"])
        ys = sol.y if sol.y is not None else [None] * len(sol.grid)
        xs = sol.x if sol.x is not None else [None] * len(sol.grid)
        for t, y, x in zip(sol.grid, ys, xs):
            w.writerow([_num(t), _num(y), _num(x)])
    return Path(path)


def write_rate_table_csv(path, table):
    with open(path, "w", newline="") as fh:
        _meta_lines(fh, {"slope": _num(table.slope), "intercept": _num(table.intercept),
                         "residual": _num(table.residual)})
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["n", "replicas", "mean_err", "median_err", "max_err"])
        for r in table.rows:
            w.writerow([r.n, r.replicas, _num(r.mean_err), _num(r.median_err), _num(r.max_err)])
    return Path(path)


def write_reports_csv(path, reports):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["name", "measured", "bound", "margin", "pass"])
        for r in reports:
            w.writerow([r.name, _num(r.measured), _num(r.bound), _num(r.margin), _num(r.passed)])
    return Path(path)


def write_rate_svg(path, table, width=480, height=360):
    """Log-log plot of mean and max sup errors against ``n`` with the fitted line."""
    ns = np.array(table.ns, dtype=float)
    series = {
        "mean": (np.array([r.mean_err for r in table.rows]), "#1f77b4"),
        "max": (np.array([r.max_err for r in table.rows]), "#d62728"),
    }
    vals = np.concatenate([v for v, _ in series.values()])
    vals = vals[vals > 0]
    pad = 50
    lx0, lx1 = math.log10(ns.min()), math.log10(ns.max())
    if lx1 == lx0:
        lx1 = lx0 + 1
    ly0 = math.log10(vals.min()) if vals.size else -1.0
    ly1 = math.log10(vals.max()) if vals.size else 0.0
    if ly1 - ly0 < 1e-9:
        ly0, ly1 = ly0 - 0.5, ly1 + 0.5

    def px(n):
        return pad + (math.log10(n) - lx0) / (lx1 - lx0) * (width - 2 * pad)

    def py(e):
        return height - pad - (math.log10(e) - ly0) / (ly1 - ly0) * (height - 2 * pad)

    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}">',
           f'<rect width="{width}" height="{height}" fill="white"/>',
           f'<line x1="{pad}" y1="{height - pad}" x2="{width - pad}" y2="{height - pad}" stroke="black"/>',
           f'<line x1="{pad}" y1="{pad}" x2="{pad}" y2="{height - pad}" stroke="black"/>',
           f'<text x="{width / 2}" y="{height - 12}" text-anchor="middle">n (log)</text>',
           f'<text x="14" y="{height / 2}" transform="rotate(-90 14 {height / 2})" '
           f'text-anchor="middle">sup error (log)</text>']
    for n in ns:
        out.append(f'<text x="{px(n):.2f}" y="{height - pad + 16}" text-anchor="middle" '
                   f'font-size="11">{int(n)}</text>')
    for label, (v, color) in series.items():
        pts = [(px(n), py(e)) for n, e in zip(ns, v) if e > 0]
        if len(pts) > 1:
            coords = " ".join(f"{x:.2f},{y:.2f}" for x, y in pts)
            out.append(f'<polyline points="{coords}" fill="none" stroke="{color}"/>')
        for x, y in pts:
            out.append(f'<circle cx="{x:.2f}" cy="{y:.2f}" r="3" fill="{color}"/>')
    if math.isfinite(table.slope):
        e0 = math.exp(table.intercept) * ns.min() ** table.slope
        e1 = math.exp(table.intercept) * ns.max() ** table.slope
        out.append(f'<line x1="{px(ns.min()):.2f}" y1="{py(e0):.2f}" x2="{px(ns.max()):.2f}" '
                   f'y2="{py(e1):.2f}" stroke="gray" stroke-dasharray="4,3"/>')
        out.append(f'<text x="{width - pad}" y="{pad - 10}" text-anchor="end" font-size="12">'
                   f'fitted slope {table.slope:.3f}</text>')
    out.append("</svg>")
    Path(path).write_text("\n".join(out) + "\n")
    return Path(path)
