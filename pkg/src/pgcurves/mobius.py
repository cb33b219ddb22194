"""Möbius transformations of the Riemann sphere.

Points of the sphere are :class:`ExtComplex` values; the point at infinity is
carried by an explicit flag rather than by large floats.  Transformations are
stored as determinant-one coefficient quadruples in a canonical sign so that
two equal maps compare equal coefficient by coefficient.
"""

from __future__ import annotations

import cmath
from dataclasses import dataclass
from typing import Iterable, Union

import numpy as np

_REAL_TOL = 1e-12


@dataclass(frozen=True)
class ExtComplex:
    """A point of the Riemann sphere."""

    value: complex = 0j
    at_infinity: bool = False

    def __post_init__(self):
        if self.at_infinity:
            object.__setattr__(self, "value", 0j)
        else:
            v = complex(self.value)
            if not (np.isfinite(v.real) and np.isfinite(v.imag)):
                raise ValueError("use INF for the point at infinity")
            object.__setattr__(self, "value", v)

    @property
    def is_finite(self) -> bool:
        return not self.at_infinity

    def isclose(self, other, tol: float = 1e-12) -> bool:
        other = ext(other)
        if self.at_infinity or other.at_infinity:
            return self.at_infinity and other.at_infinity
        return abs(self.value - other.value) <= tol * max(1.0, abs(other.value))

    def chordal(self, other) -> float:
        """Chordal distance on the unit sphere (values in [0, 2])."""
        other = ext(other)
        if self.at_infinity and other.at_infinity:
            return 0.0
        if self.at_infinity:
            return 2.0 / np.sqrt(1.0 + abs(other.value) ** 2)
        if other.at_infinity:
            return 2.0 / np.sqrt(1.0 + abs(self.value) ** 2)
        z, w = self.value, other.value
        return 2.0 * abs(z - w) / np.sqrt((1 + abs(z) ** 2) * (1 + abs(w) ** 2))

    def __complex__(self) -> complex:
        if self.at_infinity:
            return complex(np.inf, 0.0)
        return self.value

    def __repr__(self) -> str:
        return "ExtComplex(inf)" if self.at_infinity else f"ExtComplex({self.value!r})"

    def to_json(self):
        return "inf" if self.at_infinity else [self.value.real, self.value.imag]

    @classmethod
    def from_json(cls, obj) -> "ExtComplex":
        if isinstance(obj, str):
            if obj.lower() in ("inf", "infinity"):
                return INF
            return cls(complex(obj.replace(" ", "")))
        if isinstance(obj, (int, float)):
            return cls(complex(obj)) if np.isfinite(obj) else INF
        re, im = obj
        return cls(complex(re, im))


INF = ExtComplex(0j, True)

PointLike = Union[ExtComplex, complex, float, int]


def ext(z: PointLike) -> ExtComplex:
    """Coerce a number (or ``inf``) to :class:`ExtComplex`."""
    if isinstance(z, ExtComplex):
        return z
    if isinstance(z, str):
        return ExtComplex.from_json(z)
    z = complex(z)
    if not (np.isfinite(z.real) and np.isfinite(z.imag)):
        return INF
    return ExtComplex(z)


def _canonical(a: complex, b: complex, c: complex, d: complex):
    det = a * d - b * c
    scale = max(abs(a), abs(b), abs(c), abs(d))
    if scale == 0 or abs(det) <= 1e-300 or abs(det) <= 1e-14 * scale * scale:
        raise ValueError("degenerate Möbius coefficients (ad - bc = 0)")
    s = cmath.sqrt(det)
    a, b, c, d = a / s, b / s, c / s, d / s
    # fix the sign of the first coefficient that is not negligibly small
    big = max(abs(a), abs(b), abs(c), abs(d))
    for x in (a, b, c, d):
        if abs(x) > 1e-14 * big:
            if x.real < 0 or (x.real == 0 and x.imag < 0):
                a, b, c, d = -a, -b, -c, -d
            break
    return a, b, c, d


@dataclass(frozen=True)
class Mobius:
    """z -> (a z + b) / (c z + d), normalized to ad - bc = 1.

    >>> Mobius(2, 1, 1, 1)(0)
    ExtComplex((1+0j))
    """

    a: complex = 1
    b: complex = 0
    c: complex = 0
    d: complex = 1

    def __post_init__(self):
        a, b, c, d = _canonical(complex(self.a), complex(self.b), complex(self.c), complex(self.d))
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "b", b)
        object.__setattr__(self, "c", c)
        object.__setattr__(self, "d", d)

    # -- constructors -----------------------------------------------------
    @classmethod
    def identity(cls) -> "Mobius":
        return cls(1, 0, 0, 1)

    @classmethod
    def from_matrix(cls, m) -> "Mobius":
        m = np.asarray(m, dtype=complex)
        return cls(m[0, 0], m[0, 1], m[1, 0], m[1, 1])

    @property
    def matrix(self) -> np.ndarray:
        return np.array([[self.a, self.b], [self.c, self.d]], dtype=complex)

    @property
    def coefficients(self):
        return (self.a, self.b, self.c, self.d)

    @property
    def is_real(self) -> bool:
        """All normalized coefficients are real (to rounding)."""
        return all(abs(x.imag) <= _REAL_TOL * max(1.0, abs(x)) for x in self.coefficients)

    # -- action -----------------------------------------------------------
    def __call__(self, z: PointLike) -> ExtComplex:
        return apply(self, z)

    def map(self, z) -> np.ndarray:
        """Vectorized action on finite points; poles map to complex infinity."""
        z = np.asarray(z, dtype=complex)
        num = self.a * z + self.b
        den = self.c * z + self.d
        with np.errstate(divide="ignore", invalid="ignore"):
            out = num / den
        out = np.where(den == 0, complex(np.inf, 0), out)
        return out

    def map_real(self, x) -> np.ndarray:
        """Action on real points for a real transformation (returns floats)."""
        x = np.asarray(x, dtype=float)
        if not self.is_real:
            # orientation-reversing maps of the line have purely imaginary normalized coefficients
            a, b, c, d = (v * 1j for v in self.coefficients) if all(
                abs(v.real) <= _REAL_TOL * max(1.0, abs(v)) for v in self.coefficients) else (None,) * 4
            if a is None:
                raise ValueError("map does not preserve the real line")
            a, b, c, d = a.real, b.real, c.real, d.real
        else:
            a, b, c, d = (v.real for v in self.coefficients)
        with np.errstate(divide="ignore", invalid="ignore"):
            out = np.where(np.isinf(x), a / c if c != 0 else np.inf, (a * x + b) / (c * x + d))
        return out

    def deriv(self, z) -> np.ndarray:
        z = np.asarray(z, dtype=complex)
        return 1.0 / (self.c * z + self.d) ** 2

    def __matmul__(self, other: "Mobius") -> "Mobius":
        return compose(self, other)

    @property
    def inverse(self) -> "Mobius":
        return invert(self)

    @property
    def pole(self) -> ExtComplex:
        return INF if self.c == 0 else ExtComplex(-self.d / self.c)

    def close_to(self, other: "Mobius", tol: float = 1e-12) -> bool:
        m1, m2 = self.matrix, other.matrix
        return bool(min(np.max(np.abs(m1 - m2)), np.max(np.abs(m1 + m2))) <= tol)

    def to_json(self):
        return [[x.real, x.imag] for x in self.coefficients]

    @classmethod
    def from_json(cls, obj) -> "Mobius":
        a, b, c, d = (complex(re, im) for re, im in obj)
        return cls(a, b, c, d)

    def __repr__(self) -> str:
        def f(x):
            return f"{x.real:.6g}" if x.imag == 0 else f"{x:.6g}"

        return f"Mobius(({f(self.a)} z + {f(self.b)}) / ({f(self.c)} z + {f(self.d)}))"


def apply(T: Mobius, z: PointLike) -> ExtComplex:
    z = ext(z)
    if z.at_infinity:
        return INF if T.c == 0 else ExtComplex(T.a / T.c)
    den = T.c * z.value + T.d
    if den == 0:
        return INF
    return ExtComplex((T.a * z.value + T.b) / den)


def derivative(T: Mobius, z: PointLike) -> complex:
    """T'(z) = 1 / (cz + d)^2 for finite z away from the pole."""
    z = ext(z)
    if z.at_infinity:
        raise ValueError("derivative at infinity is not defined in this chart")
    den = T.c * z.value + T.d
    if den == 0:
        raise ValueError("derivative requested at the pole of T")
    return 1.0 / den**2


def compose(T1: Mobius, T2: Mobius) -> Mobius:
    """T1 o T2."""
    return Mobius.from_matrix(T1.matrix @ T2.matrix)


def invert(T: Mobius) -> Mobius:
    return Mobius(T.d, -T.b, -T.c, T.a)


def _to_zero_one_inf(p: ExtComplex, q: ExtComplex, r: ExtComplex) -> np.ndarray:
    """Matrix of the map sending p, q, r to 0, 1, inf."""
    if p.at_infinity:
        return np.array([[0, q.value - r.value], [1, -r.value]], dtype=complex)
    if q.at_infinity:
        return np.array([[1, -p.value], [1, -r.value]], dtype=complex)
    if r.at_infinity:
        return np.array([[1, -p.value], [0, q.value - p.value]], dtype=complex)
    p, q, r = p.value, q.value, r.value
    return np.array([[q - r, -p * (q - r)], [q - p, -r * (q - p)]], dtype=complex)


def _distinct(pts: Iterable[ExtComplex]) -> bool:
    pts = list(pts)
    for i in range(len(pts)):
        for j in range(i + 1, len(pts)):
            if pts[i].isclose(pts[j], tol=1e-14):
                return False
    return True


def from_three_points(p, q, r, p2, q2, r2) -> Mobius:
    """The unique Möbius map with p -> p2, q -> q2, r -> r2."""
    src = [ext(p), ext(q), ext(r)]
    dst = [ext(p2), ext(q2), ext(r2)]
    if not _distinct(src) or not _distinct(dst):
        raise ValueError("three-point data must be pairwise distinct")
    S = _to_zero_one_inf(*src)
    R = _to_zero_one_inf(*dst)
    Rinv = np.array([[R[1, 1], -R[0, 1]], [-R[1, 0], R[0, 0]]])
    return Mobius.from_matrix(Rinv @ S)


def from_point_pair_and_derivative(a: float, b: float, alpha: float, beta: float, delta: float) -> Mobius:
    """The Möbius map with T(a)=alpha, T(b)=beta and T'(a)=delta.

    Built as S2^{-1} o S1 with S1(z) = k (z - a)/(z - b), k = delta (a - b)/(alpha - beta),
    and S2(z) = (z - alpha)/(z - beta).
    """
    if a == b or alpha == beta:
        raise ValueError("need a != b and alpha != beta")
    if not delta > 0:
        raise ValueError("derivative must be positive")
    k = delta * (a - b) / (alpha - beta)
    S1 = np.array([[k, -k * a], [1.0, -b]], dtype=complex)
    S2inv = np.array([[-beta, alpha], [-1.0, 1.0]], dtype=complex)
    return Mobius.from_matrix(S2inv @ S1)


def is_real_increasing(T: Mobius) -> bool:
    """True iff T preserves the upper half-plane (real representative, det > 0)."""
    return T.is_real


def real_affine(slope: float, shift: float) -> Mobius:
    """x -> slope * x + shift."""
    return Mobius(slope, shift, 0, 1)


def fixed_points(T: Mobius):
    """Fixed points of T on the sphere (one or two)."""
    a, b, c, d = T.coefficients
    if abs(c) < 1e-15:
        if abs(a - d) < 1e-15:
            return [INF]
        return [ext(b / (d - a)), INF]
    disc = cmath.sqrt((a - d) ** 2 + 4 * b * c)
    z1 = (a - d + disc) / (2 * c)
    z2 = (a - d - disc) / (2 * c)
    if abs(disc) < 1e-15:
        return [ext(z1)]
    return [ext(z1), ext(z2)]
