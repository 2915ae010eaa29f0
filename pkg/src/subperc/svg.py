"""Minimal hand-written SVG for pattern scatters and Gilbert graphs."""
from __future__ import annotations

from pathlib import Path
from xml.sax.saxutils import escape

import numpy as np

from .point_processes import Window

STYLE = """
.pt { fill: #555; }
.hl { fill: #d62728; }
.edge { stroke: #999; stroke-width: 0.6; }
.edge.hl { stroke: #d62728; stroke-width: 1.0; }
.frame { fill: none; stroke: #000; stroke-width: 1; }
.bar { fill: #1f77b4; }
.bar.first { fill: #d62728; }
.inset { fill: #fff; fill-opacity: 0.85; stroke: #000; stroke-width: 0.5; }
text { font-family: sans-serif; font-size: 12px; }
"""


def _f(v: float) -> str:
    return f"{v:.3f}"


def render_svg(
    points,
    window: Window,
    edges=None,
    highlight=None,
    bars=None,
    title: str = "",
    width: int = 480,
    radius: float = 1.8,
) -> str:
    """SVG text for a point pattern, optionally with graph edges.

    ``highlight`` is a set or boolean mask of nodes to colour (edges
    between highlighted nodes are coloured too); ``bars`` draws an inset
    bar chart, e.g. the ten largest component fractions.
    """
    pts = np.asarray(points, dtype=float).reshape(-1, 2)
    margin = 10.0
    top = 24.0 if title else margin
    scale = (width - 2 * margin) / window.width
    height = top + window.height * scale + margin

    def X(x):
        return margin + (x - window.x_min) * scale

    def Y(y):
        return top + (window.y_max - y) * scale

    mask = np.zeros(len(pts), dtype=bool)
    if highlight is not None:
        h = np.asarray(highlight)
        if h.dtype == bool:
            mask = h
        else:
            mask[h.astype(int)] = True

    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{_f(height)}" '
        f'viewBox="0 0 {width} {_f(height)}">',
        f"<style>{STYLE}</style>",
    ]
    if title:
        out.append(f'<text x="{_f(margin)}" y="16">{escape(title)}</text>')
    out.append(
        f'<rect class="frame" x="{_f(margin)}" y="{_f(top)}" '
        f'width="{_f(window.width * scale)}" height="{_f(window.height * scale)}"/>'
    )
    if edges is not None:
        e = np.asarray(edges, dtype=int).reshape(-1, 2)
        out.append("<g>")
        for a, b in e.tolist():
            p, q = pts[a], pts[b]
            d = q - p
            if window.is_torus:
                span = np.array([window.width, window.height])
                if np.any(np.abs(d) > 0.5 * span):
                    continue  # wrapped edges are not drawn
            cls = "edge hl" if mask[a] and mask[b] else "edge"
            out.append(
                f'<line class="{cls}" x1="{_f(X(p[0]))}" y1="{_f(Y(p[1]))}" '
                f'x2="{_f(X(q[0]))}" y2="{_f(Y(q[1]))}"/>'
            )
        out.append("</g>")
    out.append("<g>")
    for k, (x, y) in enumerate(pts.tolist()):
        cls = "hl" if mask[k] else "pt"
        out.append(f'<circle class="{cls}" cx="{_f(X(x))}" cy="{_f(Y(y))}" r="{_f(radius)}"/>')
    out.append("</g>")
    if bars is not None:
        out.extend(_inset_bars(np.asarray(bars, dtype=float), margin + 8, top + 8))
    out.append("</svg>")
    return "\n".join(out) + "\n"


def _inset_bars(values, x0: float, y0: float, w: float = 130.0, h: float = 70.0):
    n = max(len(values), 1)
    bw = w / n
    out = [f'<rect class="inset" x="{_f(x0)}" y="{_f(y0)}" width="{_f(w)}" height="{_f(h)}"/>']
    for k, v in enumerate(values):
        bh = float(np.clip(v, 0.0, 1.0)) * (h - 4)
        cls = "bar first" if k == 0 else "bar"
        out.append(
            f'<rect class="{cls}" x="{_f(x0 + k * bw + 1)}" y="{_f(y0 + h - bh)}" '
            f'width="{_f(bw - 2)}" height="{_f(bh)}"/>'
        )
    return out


def write_svg(path, text: str) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text)
    return path
