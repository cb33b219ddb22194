"""Discrete conformal maps by the geodesic zipper.

A polyline z_0, z_1, ..., z_m is "zipped" onto the real line by a sequence of
elementary slit maps.  The first stage opens the segment [z_0, z_1]; stage k
removes the hyperbolic geodesic from 0 to the current image of z_k.  For an
open polyline the result maps the complement of the arc onto the upper
half-plane.  For a closed polyline a last stage unfolds the closing arc, and
the two complementary regions land in the upper (left side) and lower (right
side) half-planes at once, so both half-plane maps of a Jordan curve and its
conformal welding come out of a single pass.

Every stage has an explicit inverse, which is what makes ``invert`` exact up
to rounding.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .mobius import Mobius


class ConformalMapError(RuntimeError):
    pass


def _csqrt_h(v, c):
    """sqrt(v**2 + c**2), branch asymptotic to v; cut on the slit [0, ic]."""
    return v * np.sqrt(1.0 + (c / v) ** 2)


def _slit_stage(v, b, c):
    """Forward elementary map: straighten the geodesic through a, then remove it."""
    if np.isfinite(b):
        v = v / (1.0 - v / b)
    return _csqrt_h(v, c)


def _slit_stage_deriv(v, b, c):
    if np.isfinite(b):
        d1 = 1.0 / (1.0 - v / b) ** 2
        v = v / (1.0 - v / b)
    else:
        d1 = 1.0
    w = _csqrt_h(v, c)
    return w, d1 * v / w


def _slit_stage_real(x, b, c):
    """Forward stage for real boundary points (x != 0, x != b)."""
    if np.isfinite(b):
        with np.errstate(divide="ignore", invalid="ignore"):
            x = np.where(np.isinf(x), -b, x / (1.0 - x / b))
    return np.sign(x) * np.sqrt(x * x + c * c)


def _slit_stage_inv(w, b, c):
    v = w * np.sqrt(1.0 - (c / w) ** 2)
    v = v.real + 1j * np.abs(v.imag)
    if np.isfinite(b):
        v = v / (1.0 + v / b)
    return v


@dataclass
class Zipper:
    """Geodesic zipper for an open or closed polyline.

    ``stages`` holds one (b, c) pair per slit stage.  ``left``/``right`` are the
    real boundary images of the samples seen from the left and right side of
    the oriented polyline (after the closing stage for closed curves).
    """

    points: np.ndarray
    closed: bool
    z0: complex = 0j
    z1: complex = 0j
    stages: np.ndarray = field(default_factory=lambda: np.zeros((0, 2)))
    end: float = np.inf
    left: np.ndarray = field(default_factory=lambda: np.zeros(0))
    right: np.ndarray = field(default_factory=lambda: np.zeros(0))

    @classmethod
    def build(cls, points, closed: bool) -> "Zipper":
        z = np.asarray(points, dtype=complex)
        if closed and abs(z[0] - z[-1]) == 0:
            z = z[:-1]
        m = len(z) - 1
        if m < 2:
            raise ConformalMapError("need at least three boundary points")
        zp = cls(points=z, closed=closed, z0=z[0], z1=z[1])
        with np.errstate(divide="ignore", invalid="ignore"):
            cur = 1j * np.sqrt((z[2:] - z[1]) / (z[2:] - z[0]))
        cur = cur.real + 1j * np.abs(cur.imag)
        left = np.full(m + 1, np.nan)
        right = np.full(m + 1, np.nan)
        left[0] = right[0] = np.inf
        left[1] = right[1] = 0.0
        stages = np.empty((m - 1, 2))
        for k in range(2, m + 1):
            a = cur[0]
            if not a.imag > 0:
                if a.imag < -1e-8 * abs(a):
                    raise ConformalMapError(f"boundary point {k} left the half-plane; polyline not simple?")
                a = complex(a.real, 1e-300 + 1e-14 * abs(a))
            asq = abs(a) ** 2
            b = asq / a.real if a.real != 0 else np.inf
            c = asq / a.imag
            stages[k - 2] = (b, c)
            zipped = slice(0, k)
            left[zipped] = _slit_stage_real(left[zipped], b, c)
            right[zipped] = _slit_stage_real(right[zipped], b, c)
            # the previous tip sat at 0 and splits into -c (left) and +c (right)
            left[k - 1], right[k - 1] = -c, c
            cur = _slit_stage(cur[1:], b, c)
            cur = cur.real + 1j * np.abs(cur.imag)
            left[k] = right[k] = 0.0
        # the first point is a single prime end
        zp.stages = stages
        if closed:
            p = left[0]
            zp.end = p
            for arr in (left, right):
                with np.errstate(divide="ignore", invalid="ignore"):
                    t = arr / (1.0 - arr / p)
                arr[:] = -(t * t)
            left[0] = right[0] = np.inf
            # left side lands in the upper half-plane, right side in the lower;
            # on the zipped part both are negative reals
        else:
            zp.end = left[0]
        zp.left, zp.right = left, right
        return zp

    # -- forward ----------------------------------------------------------
    def _first(self, z):
        with np.errstate(divide="ignore", invalid="ignore"):
            u = (z - self.z1) / (z - self.z0)
        return 1j * np.sqrt(u)

    def forward(self, z, with_derivative: bool = False):
        """Map points off the polyline; returns complex images (and derivatives)."""
        z = np.atleast_1d(np.asarray(z, dtype=complex))
        if with_derivative:
            u = (z - self.z1) / (z - self.z0)
            w = 1j * np.sqrt(u)
            du = (self.z1 - self.z0) / (z - self.z0) ** 2
            d = -du / (2 * w)
            for b, c in self.stages:
                w, dk = _slit_stage_deriv(w, b, c)
                d = d * dk
            if self.closed:
                p = self.end
                d = d / (1.0 - w / p) ** 2
                t = w / (1.0 - w / p)
                d = d * (-2 * t)
                w = -(t * t)
            return w, d
        w = self._first(z)
        for b, c in self.stages:
            w = _slit_stage(w, b, c)
        if self.closed:
            t = w / (1.0 - w / self.end)
            w = -(t * t)
        return w

    # -- inverse ----------------------------------------------------------
    def inverse(self, w, side=None):
        """Inverse map.  For closed curves the half-plane of ``w`` picks the side;
        real ``w`` needs ``side`` = +1 (upper/left) or -1 (lower/right)."""
        w = np.atleast_1d(np.asarray(w, dtype=complex)).copy()
        if self.closed:
            if side is None:
                up = w.imag >= 0
            else:
                up = np.broadcast_to(np.asarray(side) > 0, w.shape)
            s = np.sqrt(-w)
            s = s.real + 1j * np.abs(s.imag)
            t = np.where(up, -s.real + 1j * s.imag, s.real + 1j * s.imag)
            # H lands in the second quadrant, L in the first
            t = np.where(up, np.where(t.real > 0, -t.real + 1j * t.imag, t), np.where(t.real < 0, -t.real + 1j * t.imag, t))
            w = t / (1.0 + t / self.end)
        else:
            w = w.real + 1j * np.abs(w.imag)
        for b, c in self.stages[::-1]:
            w = _slit_stage_inv(w, b, c)
        u = -(w * w)
        with np.errstate(divide="ignore", invalid="ignore"):
            z = (self.z1 - u * self.z0) / (1.0 - u)
        return z


def _signed_area(z) -> float:
    return 0.5 * float(np.sum((z.real * np.roll(z.imag, -1)) - (np.roll(z.real, -1) * z.imag)))


def winding_number(poly, p) -> int:
    d = np.asarray(poly, dtype=complex) - p
    if np.any(d == 0):
        return 0  # on the boundary
    ang = np.angle(np.roll(d, -1) / d)
    return int(np.rint(ang.sum() / (2 * np.pi)))


def segments_intersect(z) -> bool:
    """True if the closed polyline ``z`` has two non-adjacent crossing segments."""
    z = np.asarray(z, dtype=complex)
    n = len(z)
    a = z
    b = np.roll(z, -1)
    ax, ay, bx, by = a.real, a.imag, b.real, b.imag
    # bounding-box prefilter keeps this O(n^2) but cheap
    for i in range(n):
        j = np.arange(i + 2, n)
        if i == 0:
            j = j[j != n - 1]
        if len(j) == 0:
            continue
        d1 = _orient(ax[i], ay[i], bx[i], by[i], ax[j], ay[j])
        d2 = _orient(ax[i], ay[i], bx[i], by[i], bx[j], by[j])
        d3 = _orient(ax[j], ay[j], bx[j], by[j], ax[i], ay[i])
        d4 = _orient(ax[j], ay[j], bx[j], by[j], bx[i], by[i])
        if np.any((d1 * d2 < 0) & (d3 * d4 < 0)):
            return True
    return False


def _orient(ax, ay, bx, by, cx, cy):
    return (bx - ax) * (cy - ay) - (by - ay) * (cx - ax)


@dataclass
class DiscreteConformalMap:
    """Conformal map of the interior of a closed polyline onto the unit disc."""

    zipper: Zipper
    center: complex
    to_disc: Mobius
    N: int
    accuracy: float = np.nan

    def evaluate(self, z):
        w = self.zipper.forward(z)
        return self.to_disc.map(w)

    def invert(self, w):
        w = np.atleast_1d(np.asarray(w, dtype=complex))
        if np.any(np.abs(w) >= 1):
            raise ValueError("invert expects points of the open unit disc")
        h = self.to_disc.inverse.map(w)
        return self.zipper.inverse(h)

    def derivative(self, z):
        w, d = self.zipper.forward(z, with_derivative=True)
        return self.to_disc.deriv(w) * d

    def boundary_trace(self):
        """(boundary samples, unit-circle images) in boundary order."""
        x = self.zipper.left
        pts = self.zipper.points
        ang = np.empty(len(x))
        w = self.to_disc.map(x[1:].astype(complex))
        ang[1:] = np.angle(w)
        a_inf = self.to_disc(complex(np.inf))
        ang[0] = np.angle(complex(a_inf))
        return pts, np.exp(1j * np.unwrap(ang))


def disk_map(boundary, z0, N=None) -> DiscreteConformalMap:
    """Conformal map of the polyline's interior onto the disc with z0 -> 0, f'(z0) > 0."""
    z = np.asarray(boundary, dtype=complex)
    if abs(z[0] - z[-1]) == 0:
        z = z[:-1]
    if N is not None and N != len(z):
        z = resample_closed(z, N)
    if winding_number(z, z0) == 0:
        raise ValueError("z0 is not inside the boundary polyline")
    if segments_intersect(z):
        raise ValueError("boundary polyline is self-intersecting")
    if _signed_area(z) < 0:
        z = z[::-1]
    zp = Zipper.build(z, closed=True)
    w0, d0 = zp.forward(np.array([z0]), with_derivative=True)
    w0, d0 = w0[0], d0[0]
    if not w0.imag > 0:
        raise ConformalMapError("interior point did not land in the upper half-plane")
    # Cayley w -> (w - w0)/(w - conj w0), then rotate so f'(z0) > 0
    rot = np.exp(-1j * np.angle(d0 / (w0 - np.conj(w0))))
    T = Mobius(rot, -rot * w0, 1, -np.conj(w0))
    dm = DiscreteConformalMap(zipper=zp, center=complex(z0), to_disc=T, N=len(z))
    # segment midpoints are not zipped exactly; their distance from the circle
    # after mapping is a resolution estimate
    mids = 0.5 * (z + np.roll(z, -1))
    dm.accuracy = float(np.max(np.abs(1.0 - np.abs(dm.evaluate(mids)))))
    return dm


def resample_closed(z, N: int) -> np.ndarray:
    """Resample a closed polyline to N points evenly spaced in arclength."""
    z = np.asarray(z, dtype=complex)
    zz = np.append(z, z[0])
    s = np.concatenate(([0.0], np.cumsum(np.abs(np.diff(zz)))))
    t = np.linspace(0, s[-1], N, endpoint=False)
    return np.interp(t, s, zz.real) + 1j * np.interp(t, s, zz.imag)


@dataclass
class HalfPlaneMaps:
    """Both half-plane maps of a closed curve from one zipper pass.

    ``f_plus`` sends the region left of the curve to the upper half-plane and
    ``f_minus`` the region right of it to the lower half-plane.  ``x``/``y`` are
    the boundary images of ``points`` seen from the two sides; the first point
    goes to infinity on both sides.
    """

    zipper: Zipper
    points: np.ndarray
    vertices: np.ndarray
    x: np.ndarray
    y: np.ndarray

    def f_plus(self, z):
        w = self.zipper.forward(z)
        if np.any(w.imag < 0):
            raise ValueError("point is not in the left region")
        return w

    def f_minus(self, z):
        w = self.zipper.forward(z)
        if np.any(w.imag > 0):
            raise ValueError("point is not in the right region")
        return w

    def evaluate(self, z):
        """Whichever of the two maps applies at each point."""
        return self.zipper.forward(z)

    def inverse(self, w, side=None):
        return self.zipper.inverse(w, side)

    def side_of(self, z) -> np.ndarray:
        """+1 for points left of the curve, -1 for points right of it."""
        return np.where(self.zipper.forward(z).imag >= 0, 1, -1)


def half_plane_maps(curve, N: int | None = 1024, cluster: float = 0.5) -> HalfPlaneMaps:
    """Zip a closed PGCurve (finite samples) starting at its first vertex."""
    from .curve import resample_curve

    if not curve.closed:
        raise ValueError("half_plane_maps needs a closed curve")
    if not np.all(np.isfinite(curve.samples)):
        raise ValueError("move the curve off infinity by a Möbius map first")
    c = curve.rolled(0)
    if N is not None:
        c = resample_curve(c, N, cluster)
    if segments_intersect(c.samples):
        raise ValueError("curve is not simple")
    zp = Zipper.build(c.samples, closed=True)
    return HalfPlaneMaps(zipper=zp, points=c.samples, vertices=c.vertices, x=zp.left, y=zp.right)
