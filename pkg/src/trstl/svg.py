"""Deterministic standalone SVG of the regions and the PWL path.

Time along the path is shown as a blue-to-orange color ramp on the segments
and as timestamp labels next to the waypoints.
"""

from __future__ import annotations

from xml.sax.saxutils import escape

import numpy as np

from .geometry import PwlTrajectory

SIZE = 480.0
PAD = 24.0
_FILL = {"reach": ("#2e9e44", "#1d6b2d"), "avoid": ("#d0342c", "#8e1f19")}


def _fmt(x: float) -> str:
    s = f"{x:.2f}".rstrip("0").rstrip(".")
    return "0" if s == "-0" else s


def _ramp(u: float) -> str:
    a, b = np.array([0x1f, 0x5f, 0xbf]), np.array([0xf0, 0x8a, 0x24])
    r, g, bl = np.rint(a + (b - a) * u).astype(int)
    return f"#{r:02x}{g:02x}{bl:02x}"


def render_svg(workspace_lower, workspace_upper, regions, traj: PwlTrajectory | None):
    """Return ``(svg_text, warnings)``.

    ``regions`` is a list of ``(name, kind, vertices)``. Waypoints outside
    the workspace are drawn clamped to its border and reported in warnings.
    """
    lo, hi = np.asarray(workspace_lower, float)[:2], np.asarray(workspace_upper, float)[:2]
    span = hi - lo
    scale = (SIZE - 2 * PAD) / float(max(span))
    w = span[0] * scale + 2 * PAD
    h = span[1] * scale + 2 * PAD

    def xy(p):
        return PAD + (p[0] - lo[0]) * scale, h - PAD - (p[1] - lo[1]) * scale

    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{_fmt(w)}" height="{_fmt(h)}" '
           f'viewBox="0 0 {_fmt(w)} {_fmt(h)}" font-family="sans-serif" font-size="10">',
           f'<rect x="{_fmt(PAD)}" y="{_fmt(PAD)}" width="{_fmt(span[0] * scale)}" '
           f'height="{_fmt(span[1] * scale)}" fill="#ffffff" stroke="#444444"/>']
    for name, kind, verts in regions:
        fill, stroke = _FILL.get(kind, _FILL["reach"])
        pts = " ".join(f"{_fmt(a)},{_fmt(b)}" for a, b in (xy(v) for v in verts))
        out.append(f'<polygon points="{pts}" fill="{fill}" fill-opacity="0.35" stroke="{stroke}"/>')
        cx, cy = xy(np.mean(np.asarray(verts, float), axis=0))
        out.append(f'<text x="{_fmt(cx)}" y="{_fmt(cy)}" text-anchor="middle" '
                   f'fill="{stroke}">{escape(name)}</text>')
    warnings = []
    if traj is not None:
        pts = traj.points[:, :2]
        clamped = np.clip(pts, lo, hi)
        for k in np.nonzero(np.any(clamped != pts, axis=1))[0]:
            warnings.append(f"waypoint {int(k)} lies outside the workspace; drawn clamped")
        scr = [xy(p) for p in clamped]
        T = float(traj.times[-1]) or 1.0
        line = " ".join(f"{_fmt(a)},{_fmt(b)}" for a, b in scr)
        out.append(f'<polyline points="{line}" fill="none" stroke="#888888" stroke-width="1"/>')
        for k in range(len(scr) - 1):
            u = float(traj.times[k] + traj.times[k + 1]) / (2 * T)
            (x0, y0), (x1, y1) = scr[k], scr[k + 1]
            out.append(f'<line x1="{_fmt(x0)}" y1="{_fmt(y0)}" x2="{_fmt(x1)}" y2="{_fmt(y1)}" '
                       f'stroke="{_ramp(u)}" stroke-width="2.5"/>')
        for k, (x, y) in enumerate(scr):
            out.append(f'<circle cx="{_fmt(x)}" cy="{_fmt(y)}" r="3.5" fill="#222222"/>')
            out.append(f'<text x="{_fmt(x + 5)}" y="{_fmt(y - 5)}">t={_fmt(float(traj.times[k]))}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n", warnings
