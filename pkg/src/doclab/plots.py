"""Plot-ready CSVs and minimal static SVG charts.

Charts are written by hand with fixed number formatting so re-running an
experiment reproduces them byte for byte.
"""
from __future__ import annotations

import csv
import io
from pathlib import Path

from .doc import DocHistogram

_W, _H, _PAD = 480, 320, 40


def _sx(x, x0, x1):
    return _PAD + (x - x0) / (x1 - x0) * (_W - 2 * _PAD) if x1 > x0 else _W / 2


def _sy(y, y0, y1):
    return _H - _PAD - (y - y0) / (y1 - y0) * (_H - 2 * _PAD) if y1 > y0 else _H / 2


def _frame(title: str, xlabel: str, ylabel: str, x0, x1, y0, y1) -> list[str]:
    return [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{_W}" height="{_H}" viewBox="0 0 {_W} {_H}">',
        '<rect width="100%" height="100%" fill="white"/>',
        f'<text x="{_W / 2:.1f}" y="20" text-anchor="middle" font-size="14">{title}</text>',
        f'<line x1="{_PAD}" y1="{_H - _PAD}" x2="{_W - _PAD}" y2="{_H - _PAD}" stroke="black"/>',
        f'<line x1="{_PAD}" y1="{_PAD}" x2="{_PAD}" y2="{_H - _PAD}" stroke="black"/>',
        f'<text x="{_PAD}" y="{_H - _PAD + 15}" font-size="10" text-anchor="middle">{x0:g}</text>',
        f'<text x="{_W - _PAD}" y="{_H - _PAD + 15}" font-size="10" text-anchor="middle">{x1:g}</text>',
        f'<text x="{_PAD - 4}" y="{_H - _PAD}" font-size="10" text-anchor="end">{y0:.3g}</text>',
        f'<text x="{_PAD - 4}" y="{_PAD + 4}" font-size="10" text-anchor="end">{y1:.3g}</text>',
        f'<text x="{_W / 2:.1f}" y="{_H - 8}" font-size="11" text-anchor="middle">{xlabel}</text>',
        f'<text x="12" y="{_H / 2:.1f}" font-size="11" transform="rotate(-90 12 {_H / 2:.1f})" '
        f'text-anchor="middle">{ylabel}</text>',
    ]


def doc_svg(doc: DocHistogram, title: str = "density of classifiers") -> str:
    masses = doc.masses
    top = float(masses.max()) or 1.0
    out = _frame(title, "true error E", "normalised mass", 0.0, 1.0, 0.0, top)
    edges = doc.edges
    for i, m in enumerate(masses):
        x, x2 = _sx(edges[i], 0, 1), _sx(edges[i + 1], 0, 1)
        y = _sy(m, 0, top)
        out.append(f'<rect x="{x:.2f}" y="{y:.2f}" width="{x2 - x:.2f}" height="{_H - _PAD - y:.2f}" '
                   f'class="bar" fill="steelblue"/>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def boxplot_svg(rows: list[dict], title: str = "test error of zero-training-error solutions") -> str:
    ns = [r["n"] for r in rows]
    x0, x1 = (min(ns) - 1, max(ns) + 1) if ns else (0, 1)
    out = _frame(title, "training set size n", "test error", x0, x1, 0.0, 1.0)
    half = 0.3 * (_W - 2 * _PAD) / max(1, len(rows) + 1)
    for r in rows:
        x = _sx(r["n"], x0, x1)
        ys = {k: _sy(r[k], 0, 1) for k in ("min", "q1", "median", "q3", "max")}
        out.append(f'<line x1="{x:.2f}" y1="{ys["min"]:.2f}" x2="{x:.2f}" y2="{ys["max"]:.2f}" stroke="black"/>')
        out.append(f'<rect x="{x - half:.2f}" y="{ys["q3"]:.2f}" width="{2 * half:.2f}" '
                   f'height="{ys["q1"] - ys["q3"]:.2f}" fill="white" stroke="black"/>')
        out.append(f'<line x1="{x - half:.2f}" y1="{ys["median"]:.2f}" x2="{x + half:.2f}" '
                   f'y2="{ys["median"]:.2f}" stroke="red"/>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def comparison_svg(rows: list[dict], title: str = "mean test error: measured (red) vs predicted (blue)") -> str:
    ns = [r["n"] for r in rows]
    x0, x1 = (min(ns) - 1, max(ns) + 1) if ns else (0, 1)
    vals = [v for r in rows for v in (r["empirical_mean"], r["predicted_mean"]) if v is not None]
    y1 = max(vals + [0.5]) * 1.1
    out = _frame(title, "training set size n", "mean test error", x0, x1, 0.0, y1)
    for r in rows:
        x = _sx(r["n"], x0, x1)
        if r["predicted_mean"] is not None:
            y = _sy(r["predicted_mean"], 0, y1)
            out.append(f'<path d="M{x - 5:.2f},{y:.2f}H{x + 5:.2f}M{x:.2f},{y - 5:.2f}V{y + 5:.2f}" '
                       f'stroke="blue" stroke-width="1.5"/>')
        if r["empirical_mean"] is not None:
            y = _sy(r["empirical_mean"], 0, y1)
            out.append(f'<path d="M{x - 4:.2f},{y - 4:.2f}L{x + 4:.2f},{y + 4:.2f}M{x - 4:.2f},{y + 4:.2f}'
                       f'L{x + 4:.2f},{y - 4:.2f}" stroke="red" stroke-width="1.5"/>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def _rows_csv(rows: list[dict], columns: list[str]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for r in rows:
        w.writerow(["" if r[c] is None else (repr(r[c]) if isinstance(r[c], float) else r[c]) for c in columns])
    return buf.getvalue()


BOXPLOT_COLUMNS = ["n", "count", "min", "q1", "median", "q3", "max", "mean"]
COMPARISON_COLUMNS = ["n", "empirical_mean", "empirical_sigma", "predicted_mean", "predicted_sigma"]


def emit_plot_data(report: dict, doc: DocHistogram, out_dir) -> list[Path]:
    """Write the DOC, box-plot and measured-vs-predicted series as CSV and SVG."""
    out_dir = Path(out_dir)
    box = [r for r in report["per_n"] if r["count"] > 0]
    comp = [{"n": r["n"], "empirical_mean": r["mean"], "empirical_sigma": r["mean_sigma"],
             "predicted_mean": r["predicted_mean_error"], "predicted_sigma": r["predicted_sigma"]}
            for r in report["per_n"]]
    name = report["config"]["name"]
    files = {
        "doc_hist.csv": doc.to_csv(),
        "doc.svg": doc_svg(doc, f"{name}: density of classifiers"),
        "boxplot.csv": _rows_csv(box, BOXPLOT_COLUMNS),
        "boxplot.svg": boxplot_svg(box),
        "comparison.csv": _rows_csv(comp, COMPARISON_COLUMNS),
        "comparison.svg": comparison_svg(comp),
    }
    written = []
    for fname, text in files.items():
        path = out_dir / fname
        path.write_text(text)
        written.append(path)
    return written
