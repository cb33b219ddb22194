"""Closed-form geodesic pairs and logarithmic spirals.

G_theta(z) = (z + 1/z)/2 - i sin(theta) log z maps the right half-disc onto a
slit region; the preimage of the ray (B, inf) is one half of a C^1 geodesic
pair in the unit disc, the other half is its reflection z -> -conj(z).
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.spatial import cKDTree

from .curve import PGCurve, arclength
from .mobius import Mobius, from_point_pair_and_derivative
from .pwmobius import PiecewiseMobius


class InversionError(RuntimeError):
    pass


@dataclass(frozen=True)
class GeodesicPairParams:
    theta: float

    def __post_init__(self):
        if not -np.pi / 2 - 1e-15 <= self.theta <= np.pi / 2 + 1e-15:
            raise ValueError("theta must lie in [-pi/2, pi/2]")

    @property
    def c(self) -> float:
        return math.sin(self.theta)

    @property
    def A(self) -> float:
        return 0.5 * math.pi * math.sin(self.theta)

    @property
    def B(self) -> float:
        return math.cos(self.theta) + self.theta * math.sin(self.theta)

    @property
    def C(self) -> float:
        return -math.cos(self.theta) - (self.theta + math.pi) * math.sin(self.theta)

    @property
    def D(self) -> float:
        return self.A - (self.B - self.A)

    @property
    def shift(self) -> float:
        return 2 * math.pi * math.sin(self.theta)

    def as_dict(self):
        return {"theta": self.theta, "A": self.A, "B": self.B, "C": self.C, "D": self.D, "shift": self.shift}


@dataclass(frozen=True)
class SpiralParams:
    theta: float

    def __post_init__(self):
        if not abs(self.theta) < np.pi / 2:
            raise ValueError("spiral theta must lie in (-pi/2, pi/2)")

    @property
    def A_coef(self) -> complex:
        return 1.0 / (1.0 - 1j * math.tan(self.theta))

    @property
    def R(self) -> float:
        return math.tan(self.theta)

    @property
    def a(self) -> float:
        return math.exp(-2 * math.pi * math.tan(self.theta))


# -- G and friends -----------------------------------------------------------
def _arg_extended(theta, z):
    """Argument of z continued across the imaginary axis, cut along the reflected arc."""
    z = np.asarray(z, dtype=complex)
    ang = np.angle(z)
    left = z.real < 0
    if np.any(left):
        zl = z[left]
        upper = np.imag(G(theta, -np.conj(zl))) < 0  # reflected point lies above the arc
        a = ang[left]
        a = np.where(upper & (a < 0), a + 2 * np.pi, a)
        a = np.where(~upper & (a > 0), a - 2 * np.pi, a)
        ang = ang.copy()
        ang[left] = a
    return ang


def G(theta, z, mode="half"):
    """(z + 1/z)/2 - i c log z.  ``mode='extended'`` uses the reflected continuation."""
    z = np.asarray(z, dtype=complex)
    if np.any(z == 0):
        raise ValueError("G is singular at 0")
    c = math.sin(theta)
    if mode == "half":
        lg = np.log(z)
    elif mode == "extended":
        lg = np.log(np.abs(z)) + 1j * _arg_extended(theta, z)
    else:
        raise ValueError(f"unknown mode {mode!r}")
    out = 0.5 * (z + 1.0 / z) - 1j * c * lg
    return out if out.ndim else complex(out)


def G_prime(theta, z):
    z = np.asarray(z, dtype=complex)
    if np.any(z == 0):
        raise ValueError("G' is singular at 0")
    c = math.sin(theta)
    out = (z * z - 2j * c * z - 1) / (2 * z * z)
    return out if out.ndim else complex(out)


def G_second(theta, z):
    z = np.asarray(z, dtype=complex)
    c = math.sin(theta)
    out = (1j * c * z + 1) / z**3
    return out if out.ndim else complex(out)


def pre_schwarzian(theta, z):
    z = np.asarray(z, dtype=complex)
    a, b = cmath.exp(1j * theta), -cmath.exp(-1j * theta)
    out = -2.0 / z + 1.0 / (z - a) + 1.0 / (z - b)
    return out if out.ndim else complex(out)


def schwarzian_G(theta, z):
    """S_G = P' - P^2/2 with P the pre-Schwarzian above."""
    z = np.asarray(z, dtype=complex)
    a, b = cmath.exp(1j * theta), -cmath.exp(-1j * theta)
    P = -2.0 / z + 1.0 / (z - a) + 1.0 / (z - b)
    dP = 2.0 / z**2 - 1.0 / (z - a) ** 2 - 1.0 / (z - b) ** 2
    out = dP - 0.5 * P * P
    return out if out.ndim else complex(out)


def in_U(theta, w) -> bool:
    p = GeodesicPairParams(theta)
    w = complex(w)
    if w.imag > 0:
        return w.real > -p.A
    if w.imag < 0:
        return w.real > p.A
    return w.real > p.B


def in_half_disc(z, tol=1e-12) -> bool:
    return abs(z) < 1 + tol and z.real > -tol and z != 0


# -- inversion ---------------------------------------------------------------
def _newton(theta, w, z, mode, ref_arg=None, tol=1e-13, maxiter=80):
    c = math.sin(theta)
    for _ in range(maxiter):
        if z == 0:
            return None
        if mode == "half":
            lg = cmath.log(z)
        else:
            a = cmath.phase(z)
            a += 2 * math.pi * round((ref_arg - a) / (2 * math.pi))
            lg = complex(math.log(abs(z)), a)
            ref_arg = a
        g = 0.5 * (z + 1 / z) - 1j * c * lg
        dg = (z * z - 2j * c * z - 1) / (2 * z * z)
        if dg == 0:
            return None
        step = (g - w) / dg
        # damp steps that would leave the unit disc by far
        if abs(step) > 0.5 * abs(z) + 0.1:
            step *= (0.5 * abs(z) + 0.1) / abs(step)
        z = z - step
        if abs(step) < tol * max(abs(z), 1e-300):
            break
    return z


@lru_cache(maxsize=64)
def _seed_table(theta, mode):
    r = np.concatenate([np.geomspace(1e-3, 0.9, 60), 1 - np.geomspace(0.1, 1e-4, 20)])
    if mode == "half":
        a = np.linspace(-np.pi / 2, np.pi / 2, 121)[1:-1]
    else:
        a = np.linspace(-np.pi, np.pi, 241)[:-1]
    Z = (r[:, None] * np.exp(1j * a[None, :])).ravel()
    W = G(theta, Z, mode)
    ok = np.isfinite(W)
    Z, W = Z[ok], W[ok]
    return Z, cKDTree(np.column_stack([W.real, W.imag]))


def _valid(theta, z, w, mode, tol):
    if z is None or not np.isfinite(z):
        return False
    if abs(z) > 1 + 1e-9 or z == 0:
        return False
    if mode == "half" and z.real < -1e-9:
        return False
    res = abs(G(theta, np.array([z]), mode)[0] - w)
    return res <= tol * max(1.0, abs(w))


def G_inverse(theta, w, mode="half", side=None, tol=1e-12):
    """Solve G(z) = w by Newton from analytic and tabulated seeds.

    ``side`` (+1 above / -1 below) selects the slit side for ``w`` on (-inf, B]
    in extended mode.
    """
    ws = np.atleast_1d(np.asarray(w, dtype=complex))
    out = np.empty(ws.shape, dtype=complex)
    Z, tree = _seed_table(float(theta), mode)
    p = GeodesicPairParams(theta)
    for i, wi in enumerate(ws):
        if mode == "extended" and side is not None and wi.imag == 0 and wi.real <= p.B:
            wi = complex(wi.real, side * 1e-15 * max(1.0, abs(wi)))
        seeds = []
        if abs(wi) > 4:
            seeds.append(1 / (2 * wi))
        if abs(wi - p.B) < 0.5:
            seeds.extend(_near_B_seeds(theta, wi))
        _, idx = tree.query([wi.real, wi.imag], k=3)
        seeds.extend(Z[idx])
        best = None
        for s in seeds:
            zi = _newton(theta, wi, complex(s), mode, ref_arg=cmath.phase(s) if mode == "extended" else None)
            if _valid(theta, zi, wi, mode, tol):
                best = zi
                break
        if best is None:
            raise InversionError(f"Newton failed to invert G at w={wi}")
        out[i] = best
    return out if np.ndim(w) else complex(out[0])


def _near_B_seeds(theta, w):
    e = cmath.exp(1j * theta)
    cs = math.cos(theta)
    p = GeodesicPairParams(theta)
    if cs > 1e-6:
        s = cmath.sqrt(2 * (w - p.B) / cs)
        return [e * (1 - s), e * (1 + s)]
    # double critical point at e^{i theta}: G - B ~ -(z - e)^3 / 6
    rt = complex(-6 * (w - p.B)) ** (1 / 3)
    return [e + rt * cmath.exp(2j * math.pi * k / 3) for k in range(3)]


# -- tracing -----------------------------------------------------------------
def _trace_half(theta, dense=1500):
    """Dense continuation of the preimage of (B, inf), from e^{i theta} to 0."""
    p = GeodesicPairParams(theta)
    e = cmath.exp(1j * theta)
    us = np.geomspace(1e-10, 1e7, dense)
    zs = np.empty(dense, dtype=complex)
    z = None
    for k, u in enumerate(us):
        w = p.B + u
        if z is None:
            cands = [s for s in _near_B_seeds(theta, w)]
            good = [zz for zz in (_newton(theta, w, s, "half") for s in cands) if _valid(theta, zz, w, "half", 1e-11)]
            if not good:
                raise InversionError("could not start the trace at the critical point")
            z = min(good, key=lambda q: abs(q - e * (1 - 1e-9)) if abs(q) < 1 else 1e9)
        else:
            z = _newton(theta, w, z, "half")
            if not _valid(theta, z, w, "half", 1e-10):
                raise InversionError(f"continuation lost the curve at w={w}")
        zs[k] = z
    return np.concatenate([[e], zs, [0j]])


def _project(theta, zguess):
    """Move points onto the traced arc: solve G(z) = Re G(zguess) by Newton."""
    p = GeodesicPairParams(theta)
    out = np.empty_like(zguess)
    for i, z0 in enumerate(zguess):
        w = G(theta, np.array([z0]))[0].real
        if w <= p.B:
            out[i] = z0
            continue
        z = _newton(theta, w, complex(z0), "half")
        out[i] = z if _valid(theta, z, w, "half", 1e-10) and abs(z - z0) < 1e-2 else z0
    return out


def trace_arc(theta, samples: int) -> np.ndarray:
    """Samples of the first arc from e^{i theta} to 0, clustered toward both ends."""
    if samples < 2:
        raise ValueError("need at least two samples per arc")
    dense = _trace_half(theta)
    s = arclength(dense)
    t = 0.5 * (1 - np.cos(np.linspace(0, np.pi, samples)))
    target = t * s[-1]
    zi = np.interp(target, s, dense.real) + 1j * np.interp(target, s, dense.imag)
    zi[1:-1] = _project(theta, zi[1:-1])
    zi[0], zi[-1] = dense[0], 0j
    return zi


def trace_pair(theta, samples: int = 201) -> PGCurve:
    """The chord e^{i theta} -> 0 -> -e^{-i theta}, ``samples`` points per arc."""
    if samples < 3:
        raise ValueError("samples must be at least 3")
    g1 = trace_arc(theta, samples)
    g2 = -np.conj(g1)[::-1]
    pts = np.concatenate([g1, g2[1:]])
    m = len(pts)
    p = GeodesicPairParams(theta)
    return PGCurve(pts, np.array([0, samples - 1, m - 1]), closed=False, meta={"kind": "disc pair", **p.as_dict()})


def pair_welding(theta) -> PiecewiseMobius:
    """x on (B, inf), x + 2 pi sin(theta) on (-inf, C), closed by the C^1-at-B Möbius branch."""
    p = GeodesicPairParams(theta)
    if abs(abs(theta) - np.pi / 2) < 1e-12:
        raise ValueError("at |theta| = pi/2 the gap closes up (Jordan curve case); use GeodesicPairParams")
    shift = Mobius(1, p.shift, 0, 1)
    if abs(p.C - p.D) < 1e-15 and abs(p.B - 1) < 1e-15 and p.shift == 0:
        mid = Mobius.identity()
    else:
        mid = from_point_pair_and_derivative(p.B, p.C, p.B, p.D, 1.0)
    return PiecewiseMobius((p.C, p.B, np.inf), (mid, Mobius.identity(), shift))


# -- half-plane transport ------------------------------------------------------
def halfplane_tau(r, t) -> Mobius:
    zeta = r * cmath.exp(1j * t)
    k = -1j * cmath.exp(-1j * t)
    return Mobius(k, -k * zeta, 1, -zeta.conjugate())


def halfplane_pair(r, t, samples: int = 201) -> PGCurve:
    """Geodesic pair in the upper half-plane from 0 through r e^{it} to infinity."""
    if not (0 < t < np.pi) or not r > 0:
        raise ValueError("need r > 0 and 0 < t < pi")
    theta = t - np.pi / 2
    disc = trace_pair(theta, samples)
    tinv = halfplane_tau(r, t).inverse
    z = tinv.map(disc.samples)
    z[-1] = complex(np.inf, 0)
    z[0] = 0j
    z[samples - 1] = r * cmath.exp(1j * t)
    return PGCurve(z, disc.vertices, closed=False, meta={"kind": "half-plane pair", "r": r, "t": t})


# -- spirals -----------------------------------------------------------------
def spiral_point(theta, branch, t):
    """Point of S_theta (branch '+') or -S_theta (branch '-') at parameter t."""
    A = SpiralParams(theta).A_coef
    t = np.asarray(t, dtype=float)
    if branch in ("+", 1, "S"):
        out = np.exp(A * (t + 1j * np.pi))
    elif branch in ("-", -1, "-S"):
        out = np.exp(A * t)
    else:
        raise ValueError("branch must be '+' or '-'")
    return out if out.ndim else complex(out)


def spiral_welding(theta) -> PiecewiseMobius:
    a = SpiralParams(theta).a
    return PiecewiseMobius((0.0, np.inf), (Mobius.identity(), Mobius(a, 0, 0, 1)))


def spiral_pair_map(theta, z):
    """Half-plane map of the spiral pair: upper side to H, lower side to L."""
    A = SpiralParams(theta).A_coef
    z = np.asarray(z, dtype=complex)
    L = np.log(z) / A
    k = np.round(-L.imag / (2 * np.pi))
    return np.exp(L + 2j * np.pi * k)


def spiral_pair_curve(theta, turns: float = 3.0, samples: int = 801, scale_span=None) -> PGCurve:
    """Closed spiral pair S_theta + (-S_theta) through 0 and infinity, truncated."""
    R = SpiralParams(theta).R
    if scale_span is None:
        scale_span = 2 * np.pi * turns / max(abs(R), 1e-9) if R else 10.0
    t = np.linspace(-scale_span, scale_span, samples)
    # shifted by pi R so both arms end at the same radius, on opposite rays
    s_plus = spiral_point(theta, "+", t + np.pi * R)
    s_minus = spiral_point(theta, "-", t)
    pts = np.concatenate([[0j], s_minus, [complex(np.inf, 0)], s_plus[::-1]])
    return PGCurve(pts, np.array([0, samples + 1]), closed=True, meta={"kind": "spiral pair", "theta": theta})
