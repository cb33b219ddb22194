"""Sampled curves with marked vertices, plus small geometry helpers."""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, field

import numpy as np
from scipy.interpolate import CubicSpline

from .mobius import Mobius


def _pt_json(z):
    if not np.isfinite(z):
        return "inf"
    return [float(z.real), float(z.imag)]


def _pt_from_json(v):
    if isinstance(v, str):
        return complex(np.inf, 0)
    return complex(v[0], v[1])


@dataclass
class PGCurve:
    """Polyline samples (complex, ``inf`` allowed) with vertex positions.

    For a closed curve the last sample connects back to the first; edge ``k``
    runs from vertex ``k`` to vertex ``k + 1`` (cyclically).
    """

    samples: np.ndarray
    vertices: np.ndarray
    closed: bool = True
    flags: list = field(default_factory=list)
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.samples = np.asarray(self.samples, dtype=complex)
        self.vertices = np.asarray(self.vertices, dtype=int)
        if len(self.vertices) > 1 and np.any(np.diff(self.vertices) <= 0):
            raise ValueError("vertex indices must be strictly increasing")
        if len(self.vertices) and (self.vertices[0] < 0 or self.vertices[-1] >= len(self.samples)):
            raise ValueError("vertex index out of range")

    @property
    def n(self) -> int:
        return len(self.vertices)

    @property
    def vertex_points(self) -> np.ndarray:
        return self.samples[self.vertices]

    def edge(self, k: int) -> np.ndarray:
        """Samples of edge k, both end vertices included."""
        v = self.vertices
        a = v[k % self.n]
        if self.closed and k % self.n == self.n - 1:
            return np.concatenate([self.samples[a:], self.samples[: v[0] + 1]])
        return self.samples[a : v[k % self.n + 1] + 1]

    def edges(self):
        m = self.n if self.closed else self.n - 1
        return [self.edge(k) for k in range(m)]

    def diameter(self) -> float:
        z = self.samples[np.isfinite(self.samples)]
        if len(z) > 1500:
            z = z[:: int(np.ceil(len(z) / 1500))]
        return float(np.max(np.abs(z[:, None] - z[None, :])))

    def rolled(self, k: int) -> "PGCurve":
        """Same closed curve with vertex k listed first (at sample 0)."""
        s = self.vertices[k % self.n]
        samples = np.roll(self.samples, -s)
        verts = np.sort((self.vertices - s) % len(self.samples))
        return PGCurve(samples, verts, self.closed, list(self.flags), dict(self.meta))

    def transformed(self, T: Mobius) -> "PGCurve":
        return PGCurve(T.map(self.samples), self.vertices.copy(), self.closed, list(self.flags), dict(self.meta))

    def reversed(self) -> "PGCurve":
        m = len(self.samples)
        if self.closed:
            samples = np.roll(self.samples[::-1], 1)
            verts = np.sort((-self.vertices) % m)
        else:
            samples = self.samples[::-1]
            verts = np.sort(m - 1 - self.vertices)
        return PGCurve(samples, verts, self.closed, list(self.flags), dict(self.meta))

    # -- io ----------------------------------------------------------------
    def to_json(self):
        d = {
            "samples": [_pt_json(z) for z in self.samples],
            "vertices": [int(i) for i in self.vertices],
            "closed": bool(self.closed),
            "flags": list(self.flags),
        }
        if self.meta:
            d["meta"] = self.meta
        return d

    @classmethod
    def from_json(cls, obj) -> "PGCurve":
        return cls(
            np.array([_pt_from_json(v) for v in obj["samples"]]),
            np.array(obj.get("vertices", []), dtype=int),
            bool(obj.get("closed", True)),
            list(obj.get("flags", [])),
            dict(obj.get("meta", {})),
        )

    def dumps(self) -> str:
        return json.dumps(self.to_json(), indent=1)

    @classmethod
    def load(cls, path) -> "PGCurve":
        with open(path) as fh:
            return cls.from_json(json.load(fh))

    def save(self, path) -> None:
        with open(path, "w") as fh:
            fh.write(self.dumps())

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["t", "re", "im"])
        m = len(self.samples)
        for i, z in enumerate(self.samples):
            t = i / max(m - 1, 1)
            w.writerow([f"{t:.12g}", f"{z.real:.17g}", f"{z.imag:.17g}"])
        return buf.getvalue()


# -- geometry ---------------------------------------------------------------
def arclength(z, closed=False) -> np.ndarray:
    z = np.asarray(z, dtype=complex)
    if closed:
        z = np.append(z, z[0])
    return np.concatenate(([0.0], np.cumsum(np.abs(np.diff(z)))))


def point_segment_distance(p, a, b):
    """Distance from points p (shape P) to segments [a, b] (shape S): array P x S."""
    p = np.asarray(p, dtype=complex)[:, None]
    a = np.asarray(a, dtype=complex)[None, :]
    b = np.asarray(b, dtype=complex)[None, :]
    d = b - a
    dd = np.abs(d) ** 2
    with np.errstate(divide="ignore", invalid="ignore"):
        t = np.where(dd > 0, ((p - a) * np.conj(d)).real / dd, 0.0)
    t = np.clip(t, 0.0, 1.0)
    return np.abs(p - (a + t * d))


def polyline_distance(p, poly, closed=True, chunk=512) -> np.ndarray:
    """Distance from each point in p to the polyline."""
    poly = np.asarray(poly, dtype=complex)
    a = poly
    b = np.roll(poly, -1) if closed else poly[1:]
    if not closed:
        a = poly[:-1]
    p = np.asarray(p, dtype=complex)
    out = np.empty(len(p))
    for i in range(0, len(p), chunk):
        out[i : i + chunk] = point_segment_distance(p[i : i + chunk], a, b).min(axis=1)
    return out


def hausdorff(c1, c2, closed=True) -> float:
    """Hausdorff distance between two polylines (point-to-segment, both ways)."""
    return float(max(polyline_distance(c1, c2, closed).max(), polyline_distance(c2, c1, closed).max()))


def sphere_points(z) -> np.ndarray:
    """Stereographic images on the unit sphere (rows x, y, h); inf is the north pole."""
    z = np.asarray(z, dtype=complex)
    out = np.empty((len(z), 3))
    fin = np.isfinite(z)
    r2 = np.abs(z[fin]) ** 2
    out[fin, 0] = 2 * z[fin].real / (1 + r2)
    out[fin, 1] = 2 * z[fin].imag / (1 + r2)
    out[fin, 2] = (r2 - 1) / (1 + r2)
    out[~fin] = (0.0, 0.0, 1.0)
    return out


def chordal_hausdorff(c1, c2, densify: int = 4) -> float:
    """Hausdorff distance of closed curves measured chordally on the sphere.

    Segments are densified in the plane before lifting so that long edges
    through large values are represented faithfully.
    """
    s1 = sphere_points(_densify(c1, densify))
    s2 = sphere_points(_densify(c2, densify))
    return float(max(_sphere_poly_dist(s1, s2).max(), _sphere_poly_dist(s2, s1).max()))


def _densify(z, k):
    z = np.asarray(z, dtype=complex)
    fin = np.isfinite(z)
    if k <= 1 or not np.all(fin):
        return z
    b = np.roll(z, -1)
    t = np.arange(k) / k
    return (z[:, None] + (b - z)[:, None] * t[None, :]).ravel()


def _sphere_poly_dist(p, q, chunk=256):
    a = q
    b = np.roll(q, -1, axis=0)
    d = b - a
    dd = np.einsum("ij,ij->i", d, d)
    out = np.empty(len(p))
    for i in range(0, len(p), chunk):
        pp = p[i : i + chunk, None, :]
        with np.errstate(divide="ignore", invalid="ignore"):
            t = np.where(dd > 0, np.einsum("pij,ij->pi", pp - a[None], d) / dd, 0.0)
        t = np.clip(t, 0, 1)
        proj = a[None] + t[..., None] * d[None]
        out[i : i + chunk] = np.sqrt(((pp - proj) ** 2).sum(-1)).min(axis=1)
    return out


def circumcircle(a, b, c):
    """(center, radius) of the circle through three points."""
    a, b, c = complex(a), complex(b), complex(c)
    d = 2 * (a.real * (b.imag - c.imag) + b.real * (c.imag - a.imag) + c.real * (a.imag - b.imag))
    if abs(d) < 1e-14 * max(abs(a), abs(b), abs(c), 1.0) ** 2:
        raise ValueError("collinear points")
    ux = (abs(a) ** 2 * (b.imag - c.imag) + abs(b) ** 2 * (c.imag - a.imag) + abs(c) ** 2 * (a.imag - b.imag)) / d
    uy = (abs(a) ** 2 * (c.real - b.real) + abs(b) ** 2 * (a.real - c.real) + abs(c) ** 2 * (b.real - a.real)) / d
    center = complex(ux, uy)
    return center, abs(a - center)


def turning_angle(u, v) -> float:
    """Angle in [0, pi] between two direction vectors."""
    return float(abs(np.angle(v / u)))


def spacing(m: int, cluster: float = 0.5) -> np.ndarray:
    """m + 1 parameters in [0, 1], a blend of uniform and cosine spacing."""
    u = np.linspace(0.0, 1.0, m + 1)
    return (1 - cluster) * u + cluster * 0.5 * (1 - np.cos(np.pi * u))


def resample_edge(z, m: int, cluster: float = 0.5) -> np.ndarray:
    """Resample an open polyline to m + 1 points by a chord-length cubic spline.

    The end points are kept exactly.
    """
    z = np.asarray(z, dtype=complex)
    keep = np.concatenate(([True], np.abs(np.diff(z)) > 0))
    z = z[keep] if keep.sum() >= 2 else z[[0, -1]]
    s = arclength(z)
    u = spacing(m, cluster) * s[-1]
    if len(z) >= 4:
        out = CubicSpline(s, z)(u)
    else:
        out = np.interp(u, s, z.real) + 1j * np.interp(u, s, z.imag)
    out[0], out[-1] = z[0], z[-1]
    return out


def curve_from_edges(edges, closed=True, **kw) -> PGCurve:
    """Join edges (each including both end vertices) into one PGCurve."""
    parts = [np.asarray(e, dtype=complex)[:-1] for e in edges]
    if not closed:
        parts[-1] = np.asarray(edges[-1], dtype=complex)
    verts = np.cumsum([0] + [len(p) for p in parts[:-1]])
    if not closed:
        verts = np.append(verts, sum(len(p) for p in parts) - 1)
    return PGCurve(np.concatenate(parts), verts, closed, **kw)


def resample_curve(curve: PGCurve, N: int, cluster: float = 0.5, min_per_edge: int = 8) -> PGCurve:
    """Closed curve resampled to about N points, spread by edge length, vertices kept."""
    edges = curve.edges()
    lengths = np.array([arclength(e)[-1] for e in edges])
    share = lengths / lengths.sum()
    counts = np.maximum(min_per_edge, np.round(share * N).astype(int))
    return curve_from_edges([resample_edge(e, int(c), cluster) for e, c in zip(edges, counts)],
                            closed=curve.closed, flags=list(curve.flags), meta=dict(curve.meta))
