"""Minimal log-log SVG rendering of study summaries (no plotting dependency)."""

from __future__ import annotations

import math
from xml.sax.saxutils import escape

W, H = 440, 320
ML, MR, MT, MB = 60, 20, 36, 46


def _ticks(lo: float, hi: float):
    return [10.0**k for k in range(math.floor(lo), math.ceil(hi) + 1)]


def _panel(x0: float, ns, means, slope, intercept, label: str) -> list[str]:
    pts = [(n, v) for n, v in zip(ns, means) if v > 0 and math.isfinite(v)]
    if not pts:
        return []
    lx = [math.log10(n) for n, _ in pts]
    ly = [math.log10(v) for _, v in pts]
    xlo, xhi = min(lx) - 0.1, max(lx) + 0.1
    ylo, yhi = min(ly) - 0.3, max(ly) + 0.3

    def sx(v):
        return x0 + ML + (v - xlo) / (xhi - xlo) * (W - ML - MR)

    def sy(v):
        return MT + (yhi - v) / (yhi - ylo) * (H - MT - MB)

    out = [f'<rect x="{x0 + ML}" y="{MT}" width="{W - ML - MR}" height="{H - MT - MB}" fill="none" stroke="#444"/>']
    for t in _ticks(ylo, yhi):
        y = math.log10(t)
        if ylo <= y <= yhi:
            out.append(f'<text x="{x0 + ML - 6}" y="{sy(y) + 4:.1f}" font-size="10" text-anchor="end">1e{round(y)}</text>')
    for n, _ in pts:
        out.append(f'<text x="{sx(math.log10(n)):.1f}" y="{H - MB + 14}" font-size="10" text-anchor="middle">{n:g}</text>')
    poly = " ".join(f"{sx(a):.1f},{sy(b):.1f}" for a, b in zip(lx, ly))
    out.append(f'<polyline points="{poly}" fill="none" stroke="#1f77b4" stroke-width="1.5"/>')
    for a, b in zip(lx, ly):
        out.append(f'<circle cx="{sx(a):.1f}" cy="{sy(b):.1f}" r="3" fill="#1f77b4"/>')
    if math.isfinite(slope):
        # fitted line, and a slope -1/2 guide through the first point
        fa = intercept / math.log(10) + slope * lx[0]
        fb = intercept / math.log(10) + slope * lx[-1]
        out.append(f'<line x1="{sx(lx[0]):.1f}" y1="{sy(fa):.1f}" x2="{sx(lx[-1]):.1f}" y2="{sy(fb):.1f}" stroke="#d62728" stroke-dasharray="5,3"/>')
    ga = ly[0]
    gb = ly[0] - 0.5 * (lx[-1] - lx[0])
    out.append(f'<line x1="{sx(lx[0]):.1f}" y1="{sy(ga):.1f}" x2="{sx(lx[-1]):.1f}" y2="{sy(gb):.1f}" stroke="#888" stroke-dasharray="2,3"/>')
    out.append(f'<text x="{x0 + ML}" y="{MT - 8}" font-size="12">{escape(label)} (slope {slope:.3f})</text>')
    out.append(f'<text x="{x0 + W / 2 + 20}" y="{H - 8}" font-size="11" text-anchor="middle">N</text>')
    return out


def rate_plot(summary, rates, title: str = "") -> str:
    """Two log-log panels: mean value error and mean reference criticality versus N."""
    ns = [row["N"] for row in summary]
    body = []
    body += _panel(0, ns, [row["mean_value_err"] for row in summary], rates["value"]["slope"], rates["value"]["intercept"], "mean |v_N - v_ref|")
    body += _panel(W, ns, [row["mean_crit"] for row in summary], rates["criticality"]["slope"], rates["criticality"]["intercept"], "mean chi_ref(u_N)")
    head = f'<svg xmlns="http://www.w3.org/2000/svg" width="{2 * W}" height="{H + 20}" font-family="sans-serif">'
    caption = f'<text x="{W}" y="{H + 14}" font-size="12" text-anchor="middle">{escape(title)}</text>'
    return "\n".join([head, *body, caption, "</svg>"]) + "\n"
