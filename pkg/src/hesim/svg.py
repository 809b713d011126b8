"""Minimal deterministic SVG rendering of domains and interface paths."""

from __future__ import annotations

import numpy as np

from .lattice import LatticeDomain, embed


def _fmt(x: float) -> str:
    return "%.4f" % x


def _polyline(points, stroke, width, dash=None) -> str:
    pts = " ".join("%s,%s" % (_fmt(z.real), _fmt(-z.imag)) for z in points)
    d = f' stroke-dasharray="{dash}"' if dash else ""
    return (f'<polyline fill="none" stroke="{stroke}" stroke-width="{width}"'
            f'{d} points="{pts}" />')


def render_domain(domain: LatticeDomain, path=None, size: int = 640) -> str:
    """Boundary with the 1-arc solid bold and the 0-arc dashed."""
    cyc = [embed(v) for v in domain.boundary_cycle]
    xs = [z.real for z in cyc]
    ys = [z.imag for z in cyc]
    pad = 1.0
    x0, x1 = min(xs) - pad, max(xs) + pad
    y0, y1 = min(ys) - pad, max(ys) + pad
    w, h = x1 - x0, y1 - y0
    scale = size / max(w, h)

    plus = [embed(v) for v in domain.arc_plus]
    minus = [embed(v) for v in domain.arc_minus]
    # close the arcs through the split midpoints so they abut visually
    plus = [domain.v_start.position] + plus + [domain.v_end.position]
    minus = [domain.v_end.position] + minus + [domain.v_start.position]

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{int(w * scale)}" '
        f'height="{int(h * scale)}" viewBox="{_fmt(x0)} {_fmt(-y1)} '
        f'{_fmt(w)} {_fmt(h)}">',
        _polyline(plus, "#000000", 0.22),
        _polyline(minus, "#888888", 0.10, dash="0.3,0.2"),
    ]
    for m in (domain.v_start, domain.v_end):
        z = m.position
        parts.append(f'<circle cx="{_fmt(z.real)}" cy="{_fmt(-z.imag)}" '
                     f'r="0.25" fill="#cc3311" />')
    if path is not None and len(path):
        parts.append(_polyline(np.asarray(path, complex), "#1155cc", 0.12))
    parts.append("</svg>")
    return "\n".join(parts) + "\n"
