"""Schwarzian derivatives: numerical evaluation, the rational pole model and its checks.

The numerical derivatives use the trapezoid rule on a circle around the
point (a discrete Cauchy integral), which converges geometrically in the
number of nodes as long as the circle stays inside the domain of analyticity.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .curve import PGCurve, polyline_distance


class SchwarzianError(ValueError):
    pass


# -- numerical derivatives ------------------------------------------------------
def cauchy_derivatives(f, z, h: float, nodes: int = 16, order: int = 3):
    """f and its first ``order`` derivatives at z from a circle of radius h.

    ``f`` must accept complex arrays.  ``z`` may be a scalar or an array; the
    result has shape (order + 1,) + shape(z).
    """
    z = np.asarray(z, dtype=complex)
    h = np.broadcast_to(np.asarray(h, dtype=float), z.shape)
    om = np.exp(2j * np.pi * np.arange(nodes) / nodes)
    pts = z[..., None] + h[..., None] * om
    vals = np.asarray(f(pts.ravel()), dtype=complex).reshape(pts.shape)
    out = []
    for k in range(order + 1):
        ck = (vals * om ** (-k)).mean(axis=-1)
        out.append(math.factorial(k) * ck / h**k)
    return np.array(out)


def schwarzian_from_derivatives(d1, d2, d3):
    with np.errstate(divide="ignore", invalid="ignore"):
        p = d2 / d1
        return d3 / d1 - 1.5 * p * p


def numerical_schwarzian(f, z, h: float = 1e-2, nodes: int = 16):
    """S_f(z) = f'''/f' - 3/2 (f''/f')^2 with derivatives from a circular stencil.

    h is the stencil radius; it must be smaller than the distance from z to any
    singularity of f (or boundary of its domain).  ``h`` may be an array
    matching ``z``.
    """
    z = np.asarray(z, dtype=complex)
    d = cauchy_derivatives(f, z, h, nodes)
    scale = np.maximum(np.abs(d[0]), 1.0)
    if np.any(np.abs(d[1]) * np.asarray(h) < 1e-13 * scale):
        raise SchwarzianError("derivative vanishes at the probe point")
    S = schwarzian_from_derivatives(d[1], d[2], d[3])
    return S if S.ndim else complex(S)


def verify_composition(g, h, z, step: float = 1e-2, nodes: int = 16) -> float:
    """|S_{g o h}(z) - S_g(h(z)) h'(z)^2 - S_h(z)|, every term computed numerically."""
    z = complex(z)
    dh = cauchy_derivatives(h, z, step, nodes)
    hz, h1 = dh[0], dh[1]
    gh = numerical_schwarzian(lambda u: g(h(u)), z, step, nodes)
    Sg = numerical_schwarzian(g, hz, step * abs(h1), nodes)
    Sh = schwarzian_from_derivatives(dh[1], dh[2], dh[3])
    return float(abs(gh - Sg * h1**2 - Sh))


# -- closed-form coefficients ---------------------------------------------------
def vertex_residue_prediction(theta: float, hprime) -> complex:
    """Residue of the Schwarzian at the junction of a geodesic pair: 4 i sin(theta) h'."""
    return 4j * math.sin(theta) * complex(hprime)


def vertex_residue_hyperbolic(s: float, t: float, rho: float) -> complex:
    """The same residue written with half-plane angles s, t and hyperbolic density rho."""
    return 4j * math.sin((t - s) / 2) * rho * complex(math.cos((t + s) / 2), -math.sin((t + s) / 2))


def spiral_pole_coefficient(R: float) -> complex:
    """Double-pole coefficient of the Schwarzian at a spiral point of rate R."""
    return complex(0.5 * R * R, R)


# -- rational model -------------------------------------------------------------
@dataclass
class RationalSchwarzian:
    """S(z) = sum lam_j / (z - p_j)^2 + c_j / (z - p_j) over the finite poles.

    A pole at infinity carries no term; it only relaxes the behaviour at
    infinity (see :func:`constraint_residuals`).
    """

    poles: list
    residues: np.ndarray
    quad: np.ndarray
    fit_residual: float = 0.0
    quad_stderr: np.ndarray | None = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.poles = [complex(p) for p in self.poles]
        self.residues = np.asarray(self.residues, dtype=complex)
        self.quad = np.asarray(self.quad, dtype=complex)

    @property
    def finite(self) -> np.ndarray:
        return np.array([np.isfinite(p) for p in self.poles])

    def __call__(self, z):
        z = np.asarray(z, dtype=complex)
        out = np.zeros(z.shape, dtype=complex)
        for p, c, lam in zip(self.poles, self.residues, self.quad):
            if np.isfinite(p):
                out += c / (z - p) + lam / (z - p) ** 2
        return out if out.ndim else complex(out)

    def as_dict(self):
        def cj(v):
            return [float(v.real), float(v.imag)]

        def pj(p):
            return "inf" if not np.isfinite(p) else cj(p)

        d = {
            "poles": [pj(p) for p in self.poles],
            "residues": [cj(c) for c in self.residues],
            "quad": [cj(c) for c in self.quad],
            "constraint_residuals": [None if r is None else cj(r) for r in constraint_residuals(self)],
            "fit_residual": float(self.fit_residual),
        }
        if self.quad_stderr is not None:
            d["quad_stderr"] = [float(s) for s in self.quad_stderr]
        d.update(self.meta)
        return d


def constraint_moments(poles, residues, quad):
    """Coefficients of z^-1, z^-2, z^-3 in the expansion of the model at infinity."""
    fin = np.array([np.isfinite(p) for p in poles])
    p = np.asarray([q for q, f in zip(poles, fin) if f], dtype=complex)
    c = np.asarray(residues, dtype=complex)[fin]
    lam = np.asarray(quad, dtype=complex)[fin]
    m1 = c.sum()
    m2 = (c * p).sum() + lam.sum()
    m3 = (c * p * p).sum() + 2 * (lam * p).sum()
    return m1, m2, m3


def constraint_residuals(rs: RationalSchwarzian):
    """The three moment sums; the last is None when infinity is one of the poles.

    With all double-pole terms zero these are sum c_j, sum c_j p_j and
    sum c_j p_j^2.  Double poles contribute their own terms to the second and
    third moments.
    """
    m1, m2, m3 = constraint_moments(rs.poles, rs.residues, rs.quad)
    if not all(rs.finite):
        return complex(m1), complex(m2), None
    return complex(m1), complex(m2), complex(m3)


def normalized_constraint_residuals(rs: RationalSchwarzian) -> list:
    """Moment sums about the pole centroid, each divided by its natural scale.

    The scale of the k-th sum is sum |c_j| |p_j - m|^k plus the matching
    double-pole terms, with m the centroid of the finite poles.
    """
    fin = rs.finite
    p = np.array(rs.poles)[fin]
    m = p.mean()
    q = p - m
    c = rs.residues[fin]
    lam = rs.quad[fin]
    sums = constraint_moments(list(q), c, lam)
    ac, al, aq = np.abs(c), np.abs(lam), np.abs(q)
    scales = [ac.sum(), (ac * aq).sum() + al.sum(), (ac * aq * aq).sum() + 2 * (al * aq).sum()]
    out = []
    for k, (r, sc) in enumerate(zip(sums, scales)):
        if k == 2 and not all(fin):
            out.append(None)
        else:
            out.append(float(abs(r) / sc) if sc > 0 else 0.0)
    return out


def fit_rational(z, S, poles, spiral_rates=None, quad: str = "free", weights=None,
                 constrained: bool = False) -> RationalSchwarzian:
    """Least-squares fit of the rational model to samples S(z).

    quad:
      ``"free"``   every finite pole gets a fitted double-pole coefficient;
      ``"preset"`` poles with a spiral rate in ``spiral_rates`` get the
                   coefficient of :func:`spiral_pole_coefficient`, the others
                   are simple poles;
      ``"zero"``   simple poles only.
    With ``constrained`` the moment sums are imposed exactly.

    Each equation is weighted by the squared distance to the nearest pole
    unless ``weights`` is given, so that all probes count about equally.
    """
    z = np.asarray(z, dtype=complex)
    S = np.asarray(S, dtype=complex)
    poles = [complex(p) for p in poles]
    n = len(poles)
    fin = [bool(np.isfinite(p)) for p in poles]
    rates = list(spiral_rates) if spiral_rates is not None else [None] * n
    if len(rates) != n:
        raise ValueError("one spiral rate (or None) per pole")
    if quad not in ("free", "preset", "zero"):
        raise ValueError("quad must be 'free', 'preset' or 'zero'")
    fp = np.array([p for p, f in zip(poles, fin) if f])
    if len(fp) == 0:
        raise SchwarzianError("no finite poles")
    dist = np.min(np.abs(z[:, None] - fp[None, :]), axis=1)
    if np.any(dist == 0):
        raise SchwarzianError("sample on a pole")
    w = dist**2 if weights is None else np.asarray(weights, dtype=float)

    lam_known = np.zeros(n, dtype=complex)
    cols, kinds = [], []  # kinds: ("c", j) or ("lam", j)
    for j, p in enumerate(poles):
        if not fin[j]:
            continue
        cols.append(1.0 / (z - p))
        kinds.append(("c", j))
        if quad == "free":
            cols.append(1.0 / (z - p) ** 2)
            kinds.append(("lam", j))
        elif quad == "preset" and rates[j] is not None:
            lam_known[j] = spiral_pole_coefficient(rates[j])
    target = S - sum(lam_known[j] / (z - poles[j]) ** 2 for j in range(n) if fin[j] and lam_known[j] != 0)
    A = np.column_stack(cols) * w[:, None]
    b = target * w
    colscale = np.linalg.norm(A, axis=0)
    colscale[colscale == 0] = 1.0
    A = A / colscale

    if constrained:
        C, d = _moment_system(poles, fin, kinds, lam_known, colscale)
        coef = _constrained_lstsq(A, b, C, d)
        stderr = None
    else:
        coef, *_ = np.linalg.lstsq(A, b, rcond=None)
        m, k = A.shape
        rss = float(np.sum(np.abs(A @ coef - b) ** 2))
        sigma2 = rss / max(m - k, 1)
        try:
            cov = np.linalg.inv(A.conj().T @ A) * sigma2
            stderr = np.sqrt(np.abs(np.diag(cov))) / colscale
        except np.linalg.LinAlgError:
            stderr = None
    coef = coef / colscale

    c = np.zeros(n, dtype=complex)
    lam = lam_known.copy()
    lam_err = np.zeros(n)
    for (kind, j), v, i in zip(kinds, coef, range(len(kinds))):
        if kind == "c":
            c[j] = v
        else:
            lam[j] = v
            if stderr is not None:
                lam_err[j] = stderr[i]
    model = RationalSchwarzian(poles, c, lam)
    # |S| d^2 is dimensionless, so this is scale invariant and meaningful when S = 0
    fit_res = float(np.max(np.abs(model(z) - S) * w))
    model.fit_residual = fit_res
    model.quad_stderr = lam_err if quad == "free" else None
    return model


def _moment_system(poles, fin, kinds, lam_known, colscale):
    """Linear constraints C coef = d expressing vanishing moments (in scaled unknowns)."""
    rows = 3 if all(fin) else 2
    C = np.zeros((rows, len(kinds)), dtype=complex)
    for i, (kind, j) in enumerate(kinds):
        p = poles[j]
        if kind == "c":
            C[:, i] = [1.0, p, p * p][:rows]
        else:
            C[:, i] = [0.0, 1.0, 2 * p][:rows]
    fpl = [(poles[j], lam_known[j]) for j in range(len(poles)) if fin[j]]
    d = -np.array([0.0, sum(l for _, l in fpl), sum(2 * l * p for p, l in fpl)][:rows], dtype=complex)
    return C / colscale[None, :], d


def _constrained_lstsq(A, b, C, d):
    """min |A x - b| subject to C x = d, by the null-space method."""
    x0, *_ = np.linalg.lstsq(C, d, rcond=None)
    _, s, vh = np.linalg.svd(C)
    rank = int(np.sum(s > 1e-12 * s.max())) if len(s) else 0
    Z = vh[rank:].conj().T
    if Z.shape[1] == 0:
        return x0
    y, *_ = np.linalg.lstsq(A @ Z, b - A @ x0, rcond=None)
    return x0 + Z @ y


def four_point_model(poles, C: complex = 1.0) -> RationalSchwarzian:
    """S = C / prod (z - p_j) for four finite poles, as residues c_j = C / prod_{k != j} (p_j - p_k)."""
    p = np.asarray(poles, dtype=complex)
    if len(p) != 4:
        raise ValueError("four poles required")
    c = np.array([C / np.prod([p[j] - p[k] for k in range(4) if k != j]) for j in range(4)])
    return RationalSchwarzian(list(p), c, np.zeros(4))


def four_point_constant(rs: RationalSchwarzian) -> complex:
    """Best C with rs ~ C / prod (z - p_j) (least squares over the residues)."""
    ref = four_point_model(rs.poles, 1.0).residues
    return complex(np.vdot(ref, rs.residues) / np.vdot(ref, ref))


# -- probing a curve ------------------------------------------------------------------
@dataclass
class ProbeSet:
    z: np.ndarray
    h: np.ndarray
    owner: np.ndarray  # vertex number for annular probes, -1 for far-field probes

    @property
    def near(self):
        return self.owner >= 0


def probe_points(curve: PGCurve, radii=(0.05, 0.1, 0.2), angles: int = 24, far=(4.0, 8.0, 16.0, 32.0),
                 far_angles: int = 8, clearance: float = 0.35, step_frac: float = 0.3) -> ProbeSet:
    """Annular probes around every finite vertex plus far-field probes.

    Probes closer to the curve than ``clearance`` times their annulus radius
    are dropped; the stencil radius is ``step_frac`` times the distance to the
    curve.
    """
    pts = curve.samples
    fin = np.isfinite(pts)
    poly = pts[fin]
    closed = curve.closed and bool(np.all(fin))
    V = curve.vertex_points
    Vf = V[np.isfinite(V)]
    zs, hs, owner = [], [], []
    ang = 2 * np.pi * (np.arange(angles) + 0.5) / angles
    for j, v in enumerate(V):
        if not np.isfinite(v):
            continue
        others = Vf[Vf != v]
        sep = float(np.min(np.abs(others - v))) if len(others) else curve.diameter()
        for r in radii:
            zz = v + r * sep * np.exp(1j * ang)
            dd = polyline_distance(zz, poly, closed=closed)
            ok = dd > clearance * r * sep
            zs.append(zz[ok])
            hs.append(step_frac * dd[ok])
            owner += [j] * int(ok.sum())
    if np.all(fin):
        center = poly.mean()
        diam = curve.diameter()
        fang = 2 * np.pi * (np.arange(far_angles) + 0.25) / far_angles
        for R in far:
            zz = center + R * diam * np.exp(1j * fang)
            dd = polyline_distance(zz, poly, closed=closed)
            zs.append(zz)
            hs.append(step_frac * dd)
            owner += [-1] * len(zz)
    return ProbeSet(np.concatenate(zs), np.concatenate(hs), np.array(owner, dtype=int))


def decay_exponent(z, S, center) -> float:
    """Slope of -log|S| against log|z - center|, after averaging |S| on each circle."""
    r = np.abs(np.asarray(z) - center)
    a = np.abs(np.asarray(S))
    ok = (a > 0) & np.isfinite(a)
    r, a = r[ok], a[ok]
    radii = np.unique(np.round(r, 9))
    if len(radii) < 2:
        return float("nan")
    lr = [np.log(rr) for rr in radii]
    la = [np.log(np.mean(a[np.abs(r - rr) <= 1e-8 * rr])) for rr in radii]
    return float(-np.polyfit(lr, la, 1)[0])


def sample_schwarzian(evaluators, probes: ProbeSet, nodes: int = 16):
    """S at every probe; probes whose derivative is not resolved come back as nan.

    ``evaluators`` is one callable for all probes, or a list indexed by
    vertex number with entry ``-1`` (the last one) used for far probes.
    """
    S = np.full(len(probes.z), np.nan + 0j)
    groups = np.unique(probes.owner)
    for g in groups:
        f = evaluators if callable(evaluators) else evaluators[g]
        sel = probes.owner == g
        d = cauchy_derivatives(f, probes.z[sel], probes.h[sel], nodes)
        scale = np.maximum(np.abs(d[0]), 1.0)
        good = np.abs(d[1]) * probes.h[sel] > 1e-9 * scale
        Sg = schwarzian_from_derivatives(d[1], d[2], d[3])
        Sg[~good] = np.nan
        S[sel] = Sg
    return S


def analyze_map(evaluators, curve: PGCurve, spiral_rates=None, quad: str = "free",
                probes: ProbeSet | None = None, nodes: int = 16) -> RationalSchwarzian:
    """Sample S_f for conformal evaluator(s) of the curve's complement and fit the model."""
    probes = probes or probe_points(curve)
    S = sample_schwarzian(evaluators, probes, nodes)
    good = np.isfinite(S)
    near = probes.near & good
    far = ~probes.near & good
    poles = list(curve.vertex_points)
    rs = fit_rational(probes.z[near], S[near], poles, spiral_rates, quad=quad)
    if far.any():
        center = curve.samples[np.isfinite(curve.samples)].mean()
        rs.meta["decay_exponent"] = decay_exponent(probes.z[far], S[far], center)
        rs.meta["far_field_max"] = float(np.max(np.abs(S[far])))
        rs.meta["far_field_model_max"] = float(np.max(np.abs(rs(probes.z[far]))))
    else:
        rs.meta["decay_exponent"] = None
    rs.meta["probe_count"] = int(near.sum())
    rs.meta["dropped_probes"] = int((~good).sum())
    rs.meta["normalized_constraint_residuals"] = normalized_constraint_residuals(rs)
    if len(poles) == 4 and all(np.isfinite(p) for p in poles):
        C = four_point_constant(rs)
        ref = four_point_model(poles, C)
        zn = probes.z[near]
        pz = zn[:: max(1, len(zn) // 10)][:10]
        rs.meta["four_point_constant"] = [float(C.real), float(C.imag)]
        rs.meta["four_point_mismatch"] = float(np.max(np.abs(ref(pz) - rs(pz))) /
                                               max(np.max(np.abs(rs(pz))), 1e-300))
    return rs


def analyze_curve(curve: PGCurve, config=None, spiral_rates=None, quad: str = "free",
                  resample: bool = True) -> RationalSchwarzian:
    """Rational Schwarzian model of a closed curve from zipper half-plane maps.

    One zipper is built per vertex, starting at that vertex, and used for the
    probes around it: the starting vertex goes to infinity, where its
    neighbourhood is best resolved.  The Schwarzian does not depend on that
    normalization.  When ``spiral_rates`` is not given the vertices are
    classified from the derivative jump of each zipper's welding at its
    starting vertex.  ``resample=False`` zips the samples as given (needed
    for geometrically sampled spirals).
    """
    from .confmap import half_plane_maps
    from .geodesic_solver import SolverConfig, SolverError, classify_jump, extract_welding

    config = config or SolverConfig()
    N = config.conformal_N if resample else None
    maps = [half_plane_maps(curve.rolled(k), N) for k in range(curve.n)]
    jumps = None
    sources = None
    if spiral_rates is None:
        jumps, spiral_rates, sources = [], [], []
        for k in range(curve.n):
            try:
                jmp = float(extract_welding(curve.rolled(k), config, maps[k]).jumps[0])
            except SolverError:
                # welding not resolved near this vertex: fall back to the geometry
                jumps.append(None)
                spiral_rates.append(_geometric_rate(curve, k))
                sources.append("geometry" if spiral_rates[-1] is not None else "unresolved")
                continue
            vc = classify_jump(jmp)
            jumps.append(jmp)
            spiral_rates.append(vc.rate if vc.kind == "spiral" else None)
            sources.append("welding")
    evaluators = [m.evaluate for m in maps] + [maps[0].evaluate]  # index -1 -> far field
    rs = analyze_map(evaluators, curve, spiral_rates, quad=quad)
    rs.meta["spiral_rates"] = [None if r is None else float(r) for r in spiral_rates]
    if jumps is not None:
        rs.meta["jumps"] = jumps
        rs.meta["classification_source"] = sources
    if quad == "free":
        rs.meta["quad_noise_floor"] = quad_noise_floor()
    return rs


def quad_noise_floor(jump_tol: float = 1e-2) -> float:
    """Smallest double-pole size that the welding classification could tell from zero.

    A vertex counts as C1 when its derivative jump is within ``jump_tol`` of 1,
    i.e. when its spiral rate is below log(1 + jump_tol) / (2 pi).  The
    matching double-pole coefficient is the noise floor for fitted ones.
    """
    return abs(spiral_pole_coefficient(math.log1p(jump_tol) / (2 * math.pi)))


def _geometric_rate(curve: PGCurve, k: int):
    """Spiral rate at vertex k measured on the edge that ends there, if it winds enough."""
    from .geodesic_solver import measure_spiral_rate

    eye = curve.vertex_points[k]
    try:
        return measure_spiral_rate(curve.edge(k - 1)[:-1], eye)
    except ValueError:
        return None
