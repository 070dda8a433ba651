"""Minimal SVG convergence plot: relative gap (log10) against gradient queries."""

from __future__ import annotations

import logging
import math
from pathlib import Path
from xml.sax.saxutils import escape

import numpy as np

log = logging.getLogger(__name__)

MAX_POINTS = 4000
WIDTH, HEIGHT = 760, 480
LEFT, RIGHT, TOP, BOTTOM = 80, 180, 40, 60
COLORS = {"gd": "#1f77b4", "agd": "#d62728", "hb": "#2ca02c"}
LABELS = {"gd": "GD", "agd": "AGD", "hb": "Heavy-ball"}


def downsample(query, rel_gap, limit: int = MAX_POINTS):
    """Every ``ceil(n / limit)``-th record plus the final one."""
    n = len(query)
    if n <= limit:
        return np.asarray(query), np.asarray(rel_gap)
    step = math.ceil(n / limit)
    idx = np.arange(0, n, step)
    if idx[-1] != n - 1:
        idx = np.append(idx, n - 1)
    return np.asarray(query)[idx], np.asarray(rel_gap)[idx]


def render_svg(curves: dict, markers: dict, annotation: str = "") -> str:
    """``curves``: name -> (query, rel_gap); ``markers``: label -> query position."""
    series = {}
    for name, (q, r) in curves.items():
        q, r = downsample(q, r)
        with np.errstate(divide="ignore"):
            lg = np.log10(np.asarray(r, dtype=float))
        keep = np.isfinite(lg)
        if not keep.any():
            log.warning("trace %s has no finite positive gaps; skipped", name)
            continue
        series[name] = (np.asarray(q, dtype=float)[keep], lg[keep])

    xmax = max([float(q.max()) for q, _ in series.values()] + [float(v) for v in markers.values()] + [1.0])
    ymin = min([float(lg.min()) for _, lg in series.values()] + [-1.0])
    ymax = max([float(lg.max()) for _, lg in series.values()] + [0.0])
    ymin, ymax = math.floor(ymin), math.ceil(ymax)
    if ymax == ymin:
        ymax += 1
    pw, ph = WIDTH - LEFT - RIGHT, HEIGHT - TOP - BOTTOM

    def px(q):
        return LEFT + pw * q / xmax

    def py(lg):
        return TOP + ph * (ymax - lg) / (ymax - ymin)

    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}">',
        '<rect width="100%" height="100%" fill="white"/>',
        f'<rect x="{LEFT}" y="{TOP}" width="{pw}" height="{ph}" fill="none" stroke="black"/>',
    ]
    ystep = max(1, math.ceil((ymax - ymin) / 10))
    for e in range(int(ymin), int(ymax) + 1, ystep):
        y = py(e)
        out.append(f'<line x1="{LEFT - 4}" y1="{y:.2f}" x2="{LEFT}" y2="{y:.2f}" stroke="black"/>')
        out.append(f'<text x="{LEFT - 8}" y="{y + 4:.2f}" font-size="11" text-anchor="end">1e{e}</text>')
    for frac in np.linspace(0, 1, 6):
        x = LEFT + pw * frac
        out.append(f'<line x1="{x:.2f}" y1="{TOP + ph}" x2="{x:.2f}" y2="{TOP + ph + 4}" stroke="black"/>')
        out.append(f'<text x="{x:.2f}" y="{TOP + ph + 18}" font-size="11" text-anchor="middle">{xmax * frac:.4g}</text>')
    out.append(f'<text x="{LEFT + pw / 2}" y="{HEIGHT - 15}" font-size="13" text-anchor="middle">gradient queries</text>')
    out.append(
        f'<text x="18" y="{TOP + ph / 2}" font-size="13" text-anchor="middle" '
        f'transform="rotate(-90 18 {TOP + ph / 2})">relative gap</text>'
    )

    for label, q in markers.items():
        x = px(float(q))
        out.append(
            f'<line class="marker" x1="{x:.2f}" y1="{TOP}" x2="{x:.2f}" y2="{TOP + ph}" '
            f'stroke="gray" stroke-dasharray="5,4"/>'
        )
        out.append(f'<text x="{x + 3:.2f}" y="{TOP + 12}" font-size="10" fill="gray">{escape(label)}</text>')

    for name, (q, lg) in series.items():
        pts = " ".join(f"{px(a):.2f},{py(b):.2f}" for a, b in zip(q, lg))
        color = COLORS.get(name, "black")
        out.append(f'<polyline class="curve" data-method="{escape(name)}" fill="none" stroke="{color}" '
                   f'stroke-width="1.5" points="{pts}"/>')

    lx = WIDTH - RIGHT + 15
    for i, name in enumerate(series):
        y = TOP + 15 + 18 * i
        color = COLORS.get(name, "black")
        out.append(f'<line x1="{lx}" y1="{y}" x2="{lx + 20}" y2="{y}" stroke="{color}" stroke-width="2"/>')
        out.append(f'<text class="legend" x="{lx + 26}" y="{y + 4}" font-size="12">{escape(LABELS.get(name, name))}</text>')
    for i, line in enumerate(annotation.splitlines()):
        out.append(f'<text x="{lx}" y="{TOP + 90 + 14 * i}" font-size="10">{escape(line)}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def emit_plot(report, path: str | Path | None = None) -> Path:
    """Write the convergence SVG for a ``RunReport``; returns its path."""
    if not report.traces:
        raise ValueError("report has no traces to plot")
    curves = {}
    for method, tr in report.traces.items():
        if len(tr) == 0:
            log.warning("empty trace for %s; skipped", method.value)
            continue
        curves[method.value] = (tr.query, tr.rel_gap)
    markers = {
        f"Tt/2 = {report.audit['half_chain']}": report.audit["half_chain"],
        f"floor k = {report.audit['floor_kmin']}": report.audit["floor_kmin"],
    }
    p = report.params
    note = (f"T={p['T']} t={p['t']} dim={p['dim']}\nL={p['L']:.4g} mu={p['mu_claimed']:.4g}\n"
            f"eps={p['target_relgap']:.3g}" + ("\n(T, t override)" if p.get("override") else ""))
    if path is None:
        base = Path(report.summary_path).parent if report.summary_path else Path(".")
        path = base / "convergence.svg"
    path = Path(path)
    path.write_text(render_svg(curves, markers, note))
    return path
