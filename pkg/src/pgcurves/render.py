"""Deterministic SVG output for curves.

Coordinates are mapped to a fixed pixel box with y pointing up, and every
number is printed with a fixed number of decimals so that identical input
gives byte-identical files.
"""

from __future__ import annotations

from dataclasses import dataclass
from xml.sax.saxutils import escape

import numpy as np

from .curve import PGCurve


@dataclass
class RenderOptions:
    size: int = 600
    margin: float = 0.06
    stroke: float = 1.5
    color: str = "#1f3b73"
    vertex_radius: float = 3.5
    vertex_color: str = "#c0392b"
    markers: bool = True
    clip: float | None = None  # drop samples farther than this from the origin
    title: str | None = None

    def __post_init__(self):
        if self.size <= 0 or self.stroke <= 0 or self.vertex_radius < 0 or not 0 <= self.margin < 0.5:
            raise ValueError("render options must be positive")


def _fmt(v: float) -> str:
    s = f"{v:.3f}".rstrip("0").rstrip(".")
    return "0" if s in ("-0", "") else s


def _view(points, opts: RenderOptions):
    pts = points[np.isfinite(points)]
    if opts.clip is not None:
        pts = pts[np.abs(pts) <= opts.clip]
    if len(pts) == 0:
        raise ValueError("nothing to draw")
    lo_x, hi_x = pts.real.min(), pts.real.max()
    lo_y, hi_y = pts.imag.min(), pts.imag.max()
    span = max(hi_x - lo_x, hi_y - lo_y, 1e-12)
    scale = opts.size * (1 - 2 * opts.margin) / span
    cx, cy = 0.5 * (lo_x + hi_x), 0.5 * (lo_y + hi_y)

    def to_px(z):
        return opts.size / 2 + (z.real - cx) * scale, opts.size / 2 - (z.imag - cy) * scale

    return to_px


def _path_data(samples, closed, to_px, clip):
    parts = []
    pen_down = False
    for z in samples:
        if not np.isfinite(z) or (clip is not None and abs(z) > clip):
            pen_down = False
            continue
        x, y = to_px(z)
        parts.append(("L" if pen_down else "M") + _fmt(x) + " " + _fmt(y))
        pen_down = True
    if closed and all(np.isfinite(samples)) and clip is None:
        parts.append("Z")
    return " ".join(parts)


def curves_to_svg(curves, opts: RenderOptions | None = None) -> str:
    """One SVG containing every curve, in a common view box."""
    opts = opts or RenderOptions()
    curves = list(curves)
    if not curves or all(len(c.samples) == 0 for c in curves):
        raise ValueError("nothing to draw")
    to_px = _view(np.concatenate([c.samples for c in curves]), opts)
    s = opts.size
    out = [
        '<?xml version="1.0" encoding="UTF-8"?>',
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{s}" height="{s}" viewBox="0 0 {s} {s}">',
    ]
    if opts.title:
        out.append(f"<title>{escape(opts.title)}</title>")
    out.append(f'<rect x="0" y="0" width="{s}" height="{s}" fill="white"/>')
    for c in curves:
        d = _path_data(c.samples, c.closed, to_px, opts.clip)
        out.append(f'<path d="{d}" fill="none" stroke="{opts.color}" stroke-width="{_fmt(opts.stroke)}" '
                   'stroke-linejoin="round"/>')
    if opts.markers and opts.vertex_radius > 0:
        for c in curves:
            for z in c.vertex_points:
                if not np.isfinite(z) or (opts.clip is not None and abs(z) > opts.clip):
                    continue
                x, y = to_px(z)
                out.append(f'<circle cx="{_fmt(x)}" cy="{_fmt(y)}" r="{_fmt(opts.vertex_radius)}" '
                           f'fill="{opts.vertex_color}"/>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def curve_to_svg(curve: PGCurve, opts: RenderOptions | None = None) -> str:
    return curves_to_svg([curve], opts)


def write_svg(path, curves, opts: RenderOptions | None = None) -> None:
    if isinstance(curves, PGCurve):
        curves = [curves]
    with open(path, "w", newline="\n") as fh:
        fh.write(curves_to_svg(curves, opts))


def triskele_curve(rate: float = 2.0, samples: int = 1500, depth: float = 6.0) -> PGCurve:
    """Three logarithmic-spiral arms joining the cube roots of unity, rate ``rate`` at every eye.

    Arm k is the Möbius image z -> (a + b s z) / (1 + s z) of the spiral
    e^{A t} (A = 1 / (1 - i rate)), so both of its ends spiral with the given
    rate.  The complex scale s makes the two arms meeting at each eye
    interleave symmetrically.  This is an illustration built from the spiral
    closed form; it is not produced by the solver.
    """
    A = 1.0 / (1.0 - 1j * rate)
    eyes = np.exp(2j * np.pi * np.arange(3) / 3)
    a, b, a_prev = eyes[0], eyes[1], eyes[2]
    # of the two square roots this branch keeps the arms apart
    s = -np.sqrt(-(a_prev - a) / (b - a) * np.exp(-2j * np.pi * A))
    span = depth * (1 + rate * rate)
    t = np.linspace(-span, span, samples)
    base = np.exp(A * (t + 1j * np.pi))
    parts, verts = [], []
    for k in range(3):
        a, b = eyes[k], eyes[(k + 1) % 3]
        arm = (a + b * s * base) / (1 + s * base)
        verts.append(sum(len(p) for p in parts))
        parts.append(np.concatenate([[a], arm]))
    return PGCurve(np.concatenate(parts), np.array(verts), closed=True,
                   flags=[{"spiral": rate}] * 3, meta={"kind": "triskele", "rate": rate})
