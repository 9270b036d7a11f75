"""CSV, SVG and manifest writers for trial and sweep outputs."""

from __future__ import annotations

import csv
import hashlib
import io
import json
from datetime import datetime, timezone
from typing import Sequence
from xml.sax.saxutils import escape

from .evaluation import SweepCell, TrialResult

SWEEP_COLUMNS = ("case", "N", "K", "trials", "mean_sum_rate_se", "std_sum_rate_se",
                 "mean_throughput")
CASE_COLORS = {"I": "#1f77b4", "II": "#d62728", "III": "#2ca02c", "IV": "#9467bd"}


def _fmt(value) -> str:
    if isinstance(value, bool):
        return str(int(value))
    if isinstance(value, float):
        return format(value, ".9g")
    return str(value)


def _render(header: Sequence[str], rows: Sequence[Sequence]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\r\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([_fmt(v) for v in row])
    return buf.getvalue()


def trials_csv(results: Sequence[TrialResult]) -> str:
    n_users = max((len(r.per_user_sinr) for r in results), default=0)
    header = (["trial", "master_seed", "channel_case", "N", "K", "final_mse"]
              + [f"sinr_{i}" for i in range(n_users)]
              + ["sum_rate_se", "throughput", "iterations", "termination", "degenerate",
                 "transmit_power"])
    rows = [[r.trial, r.master_seed, r.channel_case, r.N, r.K, r.final_mse,
             *r.per_user_sinr, r.sum_rate_se, r.throughput, r.iterations, r.termination,
             r.degenerate, r.transmit_power] for r in results]
    return _render(header, rows)


def sweep_csv(cells: Sequence[SweepCell]) -> str:
    return _render(SWEEP_COLUMNS, [[getattr(c, k) for k in SWEEP_COLUMNS] for c in cells])


def sha256(text: str) -> str:
    return hashlib.sha256(text.encode("utf-8")).hexdigest()


def manifest(config: dict, command: str, outputs: dict[str, str], version: str,
             started: datetime, extra: dict | None = None) -> str:
    doc = {
        "tool": "hmimo-leo",
        "version": version,
        "command": command,
        "master_seed": config.get("master_seed"),
        "started": started.isoformat(),
        "finished": datetime.now(timezone.utc).isoformat(),
        "config": config,
        "outputs": {name: {"sha256": sha256(text)} for name, text in outputs.items()},
    }
    doc.update(extra or {})
    return json.dumps(doc, indent=2, sort_keys=True) + "\n"


def sweep_svg(cells: Sequence[SweepCell], manifest_name: str = "manifest.json",
              width: int = 640, height: int = 420) -> str:
    """Line chart of mean sum-rate against element count, one polyline per
    case, with +/- one standard deviation error bars."""
    left, right, top, bottom = 70, 130, 30, 55
    pw, ph = width - left - right, height - top - bottom
    cases = list(dict.fromkeys(c.case for c in cells))
    xs = sorted({c.N for c in cells})
    lows = [c.mean_sum_rate_se - c.std_sum_rate_se for c in cells]
    highs = [c.mean_sum_rate_se + c.std_sum_rate_se for c in cells]
    y0, y1 = min(0.0, min(lows, default=0.0)), max(highs, default=1.0)
    if y1 <= y0:
        y1 = y0 + 1.0
    x0, x1 = (xs[0], xs[-1]) if xs else (0, 1)
    if x1 == x0:
        x0, x1 = x0 - 1, x1 + 1

    def px(x):
        return left + (x - x0) / (x1 - x0) * pw

    def py(y):
        return top + ph - (y - y0) / (y1 - y0) * ph

    out = [
        '<?xml version="1.0" encoding="UTF-8"?>',
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}" font-family="sans-serif" font-size="12">',
        f'<metadata>manifest: {escape(manifest_name)}</metadata>',
        f'<rect x="0" y="0" width="{width}" height="{height}" fill="white"/>',
        f'<line x1="{left}" y1="{top + ph}" x2="{left + pw}" y2="{top + ph}" stroke="black"/>',
        f'<line x1="{left}" y1="{top}" x2="{left}" y2="{top + ph}" stroke="black"/>',
    ]
    for x in xs:
        out.append(f'<line x1="{px(x):.2f}" y1="{top + ph}" x2="{px(x):.2f}" '
                   f'y2="{top + ph + 5}" stroke="black"/>')
        out.append(f'<text x="{px(x):.2f}" y="{top + ph + 18}" text-anchor="middle">{x}</text>')
    for i in range(6):
        y = y0 + (y1 - y0) * i / 5
        out.append(f'<line x1="{left - 5}" y1="{py(y):.2f}" x2="{left}" y2="{py(y):.2f}" '
                   'stroke="black"/>')
        out.append(f'<text x="{left - 8}" y="{py(y) + 4:.2f}" text-anchor="end">{y:.3g}</text>')
    out.append(f'<text x="{left + pw / 2:.1f}" y="{height - 12}" text-anchor="middle">'
               'Number of elements (N = K)</text>')
    out.append(f'<text x="18" y="{top + ph / 2:.1f}" text-anchor="middle" '
               f'transform="rotate(-90 18 {top + ph / 2:.1f})">Sum-rate [bit/s/Hz]</text>')

    for j, case in enumerate(cases):
        color = CASE_COLORS.get(case, "#333333")
        pts = sorted((c for c in cells if c.case == case), key=lambda c: c.N)
        coords = " ".join(f"{px(c.N):.2f},{py(c.mean_sum_rate_se):.2f}" for c in pts)
        out.append(f'<polyline fill="none" stroke="{color}" stroke-width="2" '
                   f'points="{coords}"/>')
        for c in pts:
            x = px(c.N)
            lo = py(c.mean_sum_rate_se - c.std_sum_rate_se)
            hi = py(c.mean_sum_rate_se + c.std_sum_rate_se)
            out.append(f'<line x1="{x:.2f}" y1="{lo:.2f}" x2="{x:.2f}" y2="{hi:.2f}" '
                       f'stroke="{color}"/>')
            out.append(f'<circle cx="{x:.2f}" cy="{py(c.mean_sum_rate_se):.2f}" r="3" '
                       f'fill="{color}"/>')
        ly = top + 10 + 20 * j
        lx = left + pw + 15
        out.append(f'<line x1="{lx}" y1="{ly}" x2="{lx + 25}" y2="{ly}" stroke="{color}" '
                   'stroke-width="2"/>')
        out.append(f'<text x="{lx + 32}" y="{ly + 4}">Case {escape(case)}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"
