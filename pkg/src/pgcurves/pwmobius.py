"""Piecewise Möbius increasing homeomorphisms of the extended real line.

Breakpoints are kept sorted with ``np.inf`` (the point at infinity) last when
present.  Branch ``k`` acts on the arc from breakpoint ``k`` to breakpoint
``k + 1``; the last branch covers the arc that wraps through infinity.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .mobius import Mobius, from_point_pair_and_derivative, from_three_points, INF, ext


class ConstraintError(ValueError):
    """Breakpoint data violate the alternating product condition."""

    def __init__(self, message, product):
        super().__init__(message)
        self.product = product


class NotC1Error(ValueError):
    pass


def _bp_json(x):
    return "inf" if np.isinf(x) else float(x)


def _bp_from_json(v):
    if isinstance(v, str):
        return np.inf
    return float(v)


@dataclass(frozen=True)
class PiecewiseMobius:
    breakpoints: tuple
    branches: tuple

    def __post_init__(self):
        bp = [float(np.inf) if np.isinf(b) else float(b) for b in self.breakpoints]
        order = sorted(range(len(bp)), key=lambda i: bp[i])
        if order != list(range(len(bp))):
            raise ValueError("breakpoints must be listed in increasing order (inf last)")
        if len(set(bp)) != len(bp):
            raise ValueError("repeated breakpoint")
        br = tuple(self.branches)
        if len(br) != max(len(bp), 1):
            raise ValueError("need one branch per arc")
        for T in br:
            if not T.is_real:
                raise ValueError(f"branch {T} is not real-increasing")
        object.__setattr__(self, "breakpoints", tuple(bp))
        object.__setattr__(self, "branches", br)

    # -- structure ---------------------------------------------------------
    @property
    def has_infinity(self) -> bool:
        return len(self.breakpoints) > 0 and np.isinf(self.breakpoints[-1])

    @property
    def finite_breakpoints(self) -> np.ndarray:
        bp = np.array(self.breakpoints, dtype=float)
        return bp[np.isfinite(bp)]

    def arc_index(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        m = len(self.breakpoints)
        if m == 0:
            return np.zeros(x.shape, dtype=int)
        j = np.searchsorted(self.finite_breakpoints, x, side="right") - 1
        j = np.where(j < 0, m - 1, j)
        if self.has_infinity:
            # +inf approaches infinity from the arc just before it
            j = np.where(np.isposinf(x), m - 2, j)
            j = np.where(np.isneginf(x), m - 1, j)
        return j

    def neighbours(self, k):
        """(branch before, branch after) breakpoint k."""
        m = len(self.breakpoints)
        return self.branches[(k - 1) % m], self.branches[k]

    def index_of(self, xj) -> int:
        if np.isinf(xj):
            if self.has_infinity:
                return len(self.breakpoints) - 1
            raise KeyError("infinity is not a breakpoint")
        for k, b in enumerate(self.breakpoints):
            if np.isfinite(b) and abs(b - xj) <= 1e-10 * max(1.0, abs(b)):
                return k
        raise KeyError(f"{xj} is not a breakpoint")

    # -- evaluation --------------------------------------------------------
    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        j = self.arc_index(x)
        out = np.empty(x.shape, dtype=float)
        for k in np.unique(j):
            sel = j == k
            out[sel] = self.branches[k].map_real(np.where(np.isinf(x[sel]), np.inf, x[sel]))
        return out if out.ndim else float(out)

    def branch_at(self, x) -> Mobius:
        return self.branches[int(self.arc_index(x))]

    def breakpoint_values(self) -> np.ndarray:
        """w at each finite breakpoint, from whichever neighbouring branch is better conditioned there."""
        out = np.full(len(self.breakpoints), np.inf)
        for k, p in enumerate(self.breakpoints):
            if np.isinf(p):
                continue
            L, R = self.neighbours(k)
            out[k] = min((L, R), key=lambda T: _eval_condition(T, p)).map_real(p)
        return out

    def validate(self, grid: int = 2000, tol: float = 1e-8) -> None:
        """Raise unless the map is a continuous, cyclically increasing homeomorphism."""
        m = len(self.breakpoints)
        for k in range(m):
            L, R = self.neighbours(k)
            p = ext(self.breakpoints[k])
            if L(p).chordal(R(p)) > tol:
                raise ValueError(f"branches disagree at breakpoint {self.breakpoints[k]}")
        t = np.linspace(-np.pi / 2, np.pi / 2, grid + 2)[1:-1]
        x = np.tan(t)
        y = np.arctan(self(x))
        dy = np.diff(np.unwrap(2 * y)) / 2
        if np.sum(dy < -1e-12) > 1:
            raise ValueError("map is not increasing")

    # -- serialization -----------------------------------------------------
    def to_json(self):
        return {
            "breakpoints": [_bp_json(b) for b in self.breakpoints],
            "branches": [T.to_json() for T in self.branches],
        }

    @classmethod
    def from_json(cls, obj):
        if "x" in obj and "y" in obj:
            return NormalizedWelding.from_json(obj).to_piecewise()
        return cls(tuple(_bp_from_json(b) for b in obj["breakpoints"]), tuple(Mobius.from_json(T) for T in obj["branches"]))

    def conjugate(self, pre: Mobius, post: Mobius, known=None) -> "PiecewiseMobius":
        """post o self o pre, with breakpoints moved by pre^-1.

        ``known`` maps breakpoint indices to their exact new positions.
        """
        inv = pre.inverse
        m = len(self.breakpoints)
        if m == 0:
            return PiecewiseMobius((), (post @ self.branches[0] @ pre,))
        new_bp = [complex(inv(b)) for b in self.breakpoints]
        new_bp = [np.inf if np.isinf(b.real) else b.real for b in new_bp]
        for k, v in (known or {}).items():
            new_bp[k] = v
        order = np.argsort(new_bp, kind="stable")
        bps = [new_bp[i] for i in order]
        # arc k of the new map starts at new breakpoint k; its branch is the old
        # branch starting at the corresponding old breakpoint
        brs = [post @ self.branches[i] @ pre for i in order]
        return PiecewiseMobius(tuple(bps), tuple(brs))


def _eval_condition(T: Mobius, x: float) -> float:
    """Relative rounding amplification of (a x + b) / (c x + d)."""
    a, b, c, d = (v.real for v in T.coefficients)
    num, den = abs(a * x + b), abs(c * x + d)
    k_num = (abs(a * x) + abs(b)) / num if num > 0 else np.inf
    k_den = (abs(c * x) + abs(d)) / den if den > 0 else np.inf
    return k_num + k_den


def identity_welding(breakpoints=()) -> PiecewiseMobius:
    bp = tuple(sorted(breakpoints))
    return PiecewiseMobius(bp, tuple(Mobius.identity() for _ in range(max(len(bp), 1))))


# -- jumps ------------------------------------------------------------------
_PHI = Mobius(0, 1, -1, 1)  # 1/(1 - z), sends 1 to infinity


def _jump(L: Mobius, R: Mobius, p: float) -> float:
    if np.isinf(p):
        L, R, q = L @ _PHI, R @ _PHI, 1.0
    else:
        q = p
    v = L(q)
    if v.at_infinity or abs(L.c * q + L.d) < 1e-14:
        post = Mobius(0, -1, 1, 0)  # -1/w, increasing
        L, R = post @ L, post @ R
    dl = (1.0 / (L.c * q + L.d) ** 2).real
    dr = (1.0 / (R.c * q + R.d) ** 2).real
    return float(dr / dl)


def derivative_jump(w: PiecewiseMobius, xj) -> float:
    """w'(xj+)/w'(xj-), computed in charts where both sides are finite."""
    k = w.index_of(xj)
    L, R = w.neighbours(k)
    return _jump(L, R, w.breakpoints[k])


def spiral_rate_from_jump(w: PiecewiseMobius, xj) -> float:
    return float(np.log(derivative_jump(w, xj)) / (2 * np.pi))


def jumps(w: PiecewiseMobius) -> np.ndarray:
    return np.array([_jump(*w.neighbours(k), w.breakpoints[k]) for k in range(len(w.breakpoints))])


def is_C1(w: PiecewiseMobius, tol: float = 1e-9) -> bool:
    return bool(np.all(np.abs(jumps(w) - 1.0) <= tol))


# -- normalized form --------------------------------------------------------
def _check_monotone(x, y):
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.shape != y.shape or x.ndim != 1 or len(x) < 2:
        raise ValueError("x and y must be 1-d arrays of equal length >= 2")
    if np.any(np.diff(x) <= 0) or np.any(np.diff(y) <= 0):
        raise ValueError("breakpoints and images must be strictly increasing")
    return x, y


def _alternating_signs(n):
    # exponent of r_k, k = 0..n-2; the last ratio enters with +1
    return np.array([1 if (n - 2 - k) % 2 == 0 else -1 for k in range(n - 1)])


def check_product(x, y) -> float:
    """Alternating product of the slope ratios; data are constructible iff it is 1."""
    x, y = _check_monotone(x, y)
    r = np.diff(y) / np.diff(x)
    return float(np.exp(np.sum(_alternating_signs(len(x)) * np.log(r))))


def _branch_data(x, y):
    r = np.diff(y) / np.diff(x)
    d = np.empty(len(x))
    d[0] = 1.0
    for j in range(len(x) - 1):
        d[j + 1] = r[j] ** 2 / d[j]
    return d


@dataclass(frozen=True, eq=False)
class NormalizedWelding:
    """Identity left of 0, x - 1 + y_n right of 1, C^1 Möbius pieces between."""

    x: np.ndarray
    y: np.ndarray
    branches: tuple = field(default=(), compare=False)

    @property
    def shift(self) -> float:
        return float(self.y[-1] - 1.0)

    @property
    def n(self) -> int:
        return len(self.x)

    def to_piecewise(self) -> PiecewiseMobius:
        bp = tuple(self.x) + (np.inf,)
        ends = (Mobius(1, self.shift, 0, 1), Mobius.identity())
        return PiecewiseMobius(bp, tuple(self.branches) + ends)

    def __call__(self, x):
        return self.to_piecewise()(x)

    def to_json(self):
        d = self.to_piecewise().to_json()
        d.update({"x": [float(v) for v in self.x], "y": [float(v) for v in self.y], "shift": self.shift})
        return d

    @classmethod
    def from_json(cls, obj):
        return construct(obj["x"], obj["y"])

    def close_to(self, other: "NormalizedWelding", tol: float = 1e-10) -> bool:
        if self.n != other.n:
            return False
        return bool(np.max(np.abs(self.x - other.x)) <= tol and np.max(np.abs(self.y - other.y)) <= tol)


def construct(x, y, tol: float = 1e-9) -> NormalizedWelding:
    """The unique normalized C^1 piecewise Möbius map with w(x_j) = y_j."""
    x, y = _check_monotone(x, y)
    if x[0] != 0 or y[0] != 0 or x[-1] != 1:
        raise ValueError("normalized data need x_1 = y_1 = 0 and x_n = 1")
    P = check_product(x, y)
    if abs(P - 1.0) > tol:
        raise ConstraintError(f"product constraint violated: product = {P:.12g}", P)
    y = y.copy()
    # restore the constraint exactly through the last slope ratio
    y[-1] = y[-2] + (y[-1] - y[-2]) / P
    if np.any(np.diff(y) <= 0):
        raise ValueError("images must be strictly increasing")
    d = _branch_data(x, y)
    br = tuple(
        from_point_pair_and_derivative(x[j], x[j + 1], y[j], y[j + 1], d[j]) for j in range(len(x) - 1)
    )
    return NormalizedWelding(x=x, y=y, branches=br)


def solve_last_image(x, y_head) -> float:
    """y_n making the product condition hold, given x and y_1..y_{n-1}."""
    x = np.asarray(x, dtype=float)
    y_head = np.asarray(y_head, dtype=float)
    n = len(x)
    if len(y_head) != n - 1:
        raise ValueError("need n-1 leading images")
    if n == 2:
        return y_head[0] + (x[1] - x[0])
    r = np.diff(y_head) / np.diff(x[:-1])
    s = _alternating_signs(n)[:-1]
    last = float(np.exp(-np.sum(s * np.log(r))))
    return float(y_head[-1] + last * (x[-1] - x[-2]))


def _normalize_at(w: PiecewiseMobius, k: int):
    """Normalize with breakpoint k sent to infinity."""
    bp = w.breakpoints
    m = len(bp)
    p, nxt, prv = bp[k], bp[(k + 1) % m], bp[(k - 1) % m]
    sigma_pre = from_three_points(INF, 0, 1, ext(p), ext(nxt), ext(prv))
    v = w.conjugate(sigma_pre, Mobius.identity(), known={k: np.inf, (k + 1) % m: 0.0, (k - 1) % m: 1.0})
    # the branch on (-inf, 0) becomes the identity
    left = v.branches[-1]
    sigma_post = left.inverse
    u = v.conjugate(Mobius.identity(), sigma_post, known={m - 1: np.inf, 0: 0.0, m - 2: 1.0})
    xs = np.array(u.breakpoints[:-1], dtype=float)
    xs[0], xs[-1] = 0.0, 1.0
    ys = u.breakpoint_values()[:-1]
    ys[0] = 0.0
    d = _branch_data(xs, ys)
    br = tuple(
        from_point_pair_and_derivative(xs[j], xs[j + 1], ys[j], ys[j + 1], d[j]) for j in range(len(xs) - 1)
    )
    return NormalizedWelding(x=xs, y=ys, branches=br), sigma_pre, sigma_post


def normalize(w: PiecewiseMobius, tol: float = 1e-8, pivot=None):
    """Return (normalized form, sigma_pre, sigma_post) with sigma_post o w o sigma_pre = form."""
    m = len(w.breakpoints)
    if m < 2:
        raise ValueError("normalize needs at least two breakpoints")
    if not is_C1(w, tol):
        raise NotC1Error("normalize requires a C^1 map")
    if m == 2:
        # C^1 with two breakpoints forces a single Möbius map; send 0, 1 to the breakpoints
        a, b = w.breakpoints
        q = a - 1.0 if np.isinf(b) else b + 1.0
        sigma_pre = from_three_points(0, 1, INF, ext(a), ext(b), ext(q))
        sigma_post = (w.branches[0] @ sigma_pre).inverse
        nw = NormalizedWelding(x=np.array([0.0, 1.0]), y=np.array([0.0, 1.0]), branches=(Mobius.identity(),))
        return nw, sigma_pre, sigma_post
    if pivot is None:
        pivot = m - 1
    return _normalize_at(w, pivot)


def simplify(w: PiecewiseMobius, tol: float = 1e-9) -> PiecewiseMobius:
    """Drop breakpoints across which the branch does not change."""
    bp = list(w.breakpoints)
    br = list(w.branches)
    k = 0
    while k < len(bp):
        if br[k - 1].close_to(br[k], tol):
            # the branch before breakpoint k absorbs the arc after it
            if len(bp) == 1:
                return PiecewiseMobius((), (br[0],))
            del bp[k], br[k]
            k = 0
        else:
            k += 1
    return PiecewiseMobius(tuple(bp), tuple(br))


def equivalent(w1: PiecewiseMobius, w2: PiecewiseMobius, tol: float = 1e-8) -> bool:
    """True if w2 = s1 o w1 o s2 for real-increasing Möbius maps s1, s2."""
    for w in (w1, w2):
        if not is_C1(w, max(tol, 1e-9)):
            raise NotC1Error("equivalence is tested on C^1 maps")
    a, b = simplify(w1), simplify(w2)
    ma, mb = len(a.breakpoints), len(b.breakpoints)
    if ma != mb:
        return False
    if ma < 3:
        return True
    ref = normalize(a)[0]
    for k in range(mb):
        cand = _normalize_at(b, k)[0]
        if ref.close_to(cand, tol):
            return True
    return False


# -- quasisymmetry ---------------------------------------------------------
def qs_constant(w: PiecewiseMobius, samples: int = 200) -> float:
    """Largest sampled ratio (w(x+t)-w(x))/(w(x)-w(x-t)) or its reciprocal."""
    fb = w.finite_breakpoints
    span = max(1.0, float(np.max(np.abs(fb)))) if len(fb) else 1.0
    base = np.linspace(-4 * span, 4 * span, samples)
    near = (fb[:, None] + np.array([-1e-3, -1e-6, 0.0, 1e-6, 1e-3])[None, :] * span).ravel() if len(fb) else []
    far = np.array([-1e6, -1e3, 1e3, 1e6]) * span
    xs = np.unique(np.concatenate([base, near, far]))
    ts = np.logspace(-6, 6, samples)
    X, T = np.meshgrid(xs, ts)
    wx = w(X)
    num = w(X + T) - wx
    den = wx - w(X - T)
    with np.errstate(divide="ignore", invalid="ignore"):
        q = num / den
    q = q[np.isfinite(q) & (q > 0)]
    return float(max(q.max(), (1.0 / q).max()))


# -- two-piece maps near infinity -----------------------------------------
@dataclass(frozen=True)
class TwoPiece:
    """w(x) = a1 x + b1 for x > c1 and a2 x + b2 for x < c2 (undefined between)."""

    a1: float
    b1: float
    c1: float
    a2: float
    b2: float
    c2: float

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        return np.where(x > self.c1, self.a1 * x + self.b1, np.where(x < self.c2, self.a2 * x + self.b2, np.nan))

    @classmethod
    def from_piecewise(cls, w: PiecewiseMobius) -> "TwoPiece":
        if len(w.breakpoints) == 0 or not w.has_infinity:
            T = w.branches[0]
            if len(w.breakpoints) == 0 and abs(T.c) < 1e-14:
                a, b = (T.a / T.d).real, (T.b / T.d).real
                return cls(a, b, 0.0, a, b, 0.0)
            raise ValueError("map is not piecewise Möbius near infinity")
        L, R = w.neighbours(len(w.breakpoints) - 1)
        if abs(L.c) > 1e-12 or abs(R.c) > 1e-12:
            raise ValueError("branches adjacent to infinity must be affine")
        fb = w.finite_breakpoints
        c1, c2 = fb[-1], fb[0]
        a1, b1 = (L.a / L.d).real, (L.b / L.d).real
        a2, b2 = (R.a / R.d).real, (R.b / R.d).real
        return cls(a1, b1, c1, a2, b2, c2)


@dataclass(frozen=True)
class PairNormalization:
    kind: str  # "shift+1", "shift-1", "identity-gap" or "linear"
    form: TwoPiece
    phi: Mobius
    tau: Mobius

    @property
    def cutoff(self) -> float:
        return self.form.c2


def normalize_pair(w, tol: float = 1e-12) -> PairNormalization:
    """Conjugate a two-piece map near infinity by affine maps to its canonical form."""
    if isinstance(w, PiecewiseMobius):
        w = TwoPiece.from_piecewise(w)
    a = w.a1
    if abs(w.a1 - w.a2) > tol * max(1.0, abs(w.a1)):
        raise NotC1Error("slopes differ at infinity; this is a spiral vertex, not a C^1 pair")
    b1, b2, c1, c2 = w.b1, w.b2, w.c1, w.c2
    db = b2 - b1
    if abs(db) > tol * max(1.0, abs(b1), abs(b2)):
        s = abs(db)
        phi = Mobius(s / a, c1, 0, 1)
        tau = Mobius(1.0, -(a * c1 + b1), 0, s)
        if db > 0:
            cut = (c2 - c1) * a / db
            return PairNormalization("shift+1", TwoPiece(1.0, 0.0, 0.0, 1.0, 1.0, cut), phi, tau)
        cut = (c2 - c1) * a / (b1 - b2)
        return PairNormalization("shift-1", TwoPiece(1.0, 0.0, 0.0, 1.0, -1.0, cut), phi, tau)
    if c2 < c1 - tol * max(1.0, abs(c1)):
        phi = Mobius((c1 - c2) / 2, (c1 + c2) / 2, 0, 1)
        tau = Mobius(2.0 / (a * (c1 - c2)), -(c1 + c2 + 2 * b1 / a) / (c1 - c2), 0, 1)
        return PairNormalization("identity-gap", TwoPiece(1.0, 0.0, 1.0, 1.0, 0.0, -1.0), phi, tau)
    # linear on all of the line: a circle or line, not a geodesic pair
    phi = Mobius.identity()
    tau = Mobius(1.0, -b1, 0, a)
    return PairNormalization("linear", TwoPiece(1.0, 0.0, c1, 1.0, 0.0, c1), phi, tau)


def random_real_mobius(rng) -> Mobius:
    """A random real-increasing Möbius map (det normalized to one)."""
    while True:
        a, b, c, d = rng.normal(size=4)
        det = a * d - b * c
        if det > 0.05:
            return Mobius(a, b, c, d)
        if det < -0.05:
            return Mobius(-a, -b, c, d)
