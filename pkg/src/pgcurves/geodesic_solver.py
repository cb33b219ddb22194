"""Piecewise geodesic Jordan curves through prescribed vertices.

The solver relaxes a closed curve by repeatedly replacing two consecutive
edges with the C^1 geodesic pair joining their outer vertices through the
shared middle vertex, inside the complement of the rest of the curve.  The
rest of the curve is zipped to the upper half-plane with its two tips at 0
and infinity, where the pair has a closed form; the pair is pulled back
through the exact inverse of the zipper.

Weldings are extracted from the same zipper, fitted edge by edge with real
Möbius maps, and classified vertex by vertex.
"""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field, replace

import numpy as np
from scipy import optimize

from . import pwmobius as pw
from .confmap import ConformalMapError, HalfPlaneMaps, Zipper, half_plane_maps, segments_intersect, winding_number
from .curve import (
    PGCurve,
    arclength,
    chordal_hausdorff,
    circumcircle,
    curve_from_edges,
    hausdorff,
    resample_edge,
    sphere_points,
)
from .explicit_pairs import G, GeodesicPairParams, halfplane_pair, trace_pair
from .mobius import INF, Mobius, compose, ext, from_three_points

log = logging.getLogger(__name__)


class SolverError(RuntimeError):
    pass


@dataclass
class SolverConfig:
    edge_samples: int = 200
    max_sweeps: int = 50
    tol_move: float = 1e-4
    conformal_N: int = 1024
    damping: float | None = None  # None: 1 for n <= 4, 0.5 beyond
    pair_samples: int = 401
    log_residual: bool = False
    parallel: bool = False  # Jacobi sweeps over non-adjacent pairs; not deterministic across runs
    workers: int = 2

    def __post_init__(self):
        if self.edge_samples < 4 or self.max_sweeps < 1 or self.conformal_N < 16 or self.pair_samples < 8:
            raise ValueError("solver counts must be positive and not tiny")
        if not self.tol_move > 0:
            raise ValueError("tol_move must be positive")
        if self.damping is not None and not 0 < self.damping <= 1:
            raise ValueError("damping must lie in (0, 1]")

    def damping_for(self, n: int) -> float:
        if self.damping is not None:
            return self.damping
        return 1.0 if n <= 4 else 0.5

    @classmethod
    def from_dict(cls, d):
        known = {k: v for k, v in d.items() if k in cls.__dataclass_fields__}
        return cls(**known)


# -- initial curves --------------------------------------------------------
def _arc_points(a, b, c_other, m):
    """Arc from a to b on the circle through a, b, c_other avoiding c_other."""
    try:
        center, rad = circumcircle(a, b, c_other)
    except ValueError:
        return None
    ta, tb, tc = (np.angle(p - center) for p in (a, b, c_other))
    d = (tb - ta) % (2 * np.pi)
    dc = (tc - ta) % (2 * np.pi)
    if dc < d:
        d = d - 2 * np.pi  # go the other way round
    t = ta + d * np.linspace(0, 1, m + 1)
    out = center + rad * np.exp(1j * t)
    out[0], out[-1] = a, b
    return out


def initial_curve(vertices, edge_samples: int = 200, method: str = "arcs") -> PGCurve:
    """Closed starting curve through the vertices.

    ``arcs`` blends, on each edge, the arcs of the circles through the two
    neighbouring vertex triples; ``polygon`` joins the vertices by segments.
    """
    v = np.asarray([complex(z) for z in vertices])
    n = len(v)
    if n < 3:
        raise ValueError("need at least three vertices")
    if np.min(np.abs(v[:, None] - v[None, :]) + np.eye(n)) < 1e-12:
        raise ValueError("vertices must be distinct")
    u = np.linspace(0, 1, edge_samples + 1)
    straight = [v[k] + (v[(k + 1) % n] - v[k]) * u for k in range(n)]
    poly = curve_from_edges(straight, meta={"init": "polygon"})
    if method == "polygon":
        return poly
    edges = []
    for k in range(n):
        a, b = v[k], v[(k + 1) % n]
        p1 = _arc_points(a, b, v[(k - 1) % n], edge_samples)
        p2 = _arc_points(a, b, v[(k + 2) % n], edge_samples)
        if p1 is None or p2 is None:
            return poly
        edges.append((1 - u) * p1 + u * p2)
    c = curve_from_edges(edges, meta={"init": "arcs"})
    if segments_intersect(c.samples):
        return poly
    return c


# -- single update ---------------------------------------------------------
def _edges_of(curve: PGCurve):
    return [e.copy() for e in curve.edges()]


def _rest_polyline(edges, j, N):
    """Arc from vertex j+1 to vertex j-1 (through the other vertices), about N points."""
    n = len(edges)
    idx = [(j + 1 + i) % n for i in range(n - 2)]
    lengths = np.array([arclength(edges[k])[-1] for k in idx])
    counts = np.maximum(16, np.round(N * lengths / lengths.sum()).astype(int))
    parts = [resample_edge(edges[k], int(c))[:-1] for k, c in zip(idx, counts)]
    parts.append(edges[idx[-1]][-1:])
    return np.concatenate(parts)


@dataclass
class UpdateInfo:
    vertex: int
    theta: float
    displacement: float
    accepted: bool
    reason: str = ""


def geodesic_pair_in_complement(rest, a_mid, samples=401):
    """C^1 geodesic pair from rest[-1] through a_mid to rest[0], off the arc ``rest``.

    Returns (points, index of a_mid, theta).
    """
    F = Zipper.build(rest, closed=False)
    x0 = F.end
    wv = F.forward(np.array([a_mid]))[0]
    p = wv / (1 - wv / x0)  # tips at 0 and infinity
    r, t = abs(p), float(np.angle(p))
    if not (0 < t < np.pi):
        raise ConformalMapError("middle vertex did not land in the upper half-plane")
    theta = t - np.pi / 2
    pair = halfplane_pair(r, t, samples)
    sig = pair.samples
    mid = int(pair.vertices[1])
    with np.errstate(divide="ignore", invalid="ignore"):
        u = np.where(np.isfinite(sig), sig / (1 + sig / x0), x0)
    u = u.astype(complex)
    u[0] = 0j
    z = F.inverse(u[1:-1])
    pts = np.concatenate([[rest[-1]], z, [rest[0]]])
    pts[mid] = a_mid
    return pts, mid, theta


def _pair_edges(curve: PGCurve, j: int, config: SolverConfig, damping: float):
    """New (edge j-1, edge j) for the geodesic pair through vertex j, or a rejection."""
    n = curve.n
    edges = _edges_of(curve)
    rest = _rest_polyline(edges, j, config.conformal_N)
    vj = curve.vertex_points[j]
    try:
        pts, mid, theta = geodesic_pair_in_complement(rest, vj, config.pair_samples)
    except (ConformalMapError, FloatingPointError, ValueError) as exc:
        return None, UpdateInfo(j, np.nan, 0.0, False, f"conformal map failed: {exc}")
    if abs(abs(theta) - np.pi / 2) < 1e-12:
        return None, UpdateInfo(j, theta, 0.0, False, "degenerate pair angle")
    m = config.edge_samples
    e_prev_new = resample_edge(pts[: mid + 1], m)
    e_next_new = resample_edge(pts[mid:], m)
    e_prev_old = resample_edge(edges[(j - 1) % n], m)
    e_next_old = resample_edge(edges[j], m)
    if damping < 1:
        e_prev_new = e_prev_old + damping * (e_prev_new - e_prev_old)
        e_next_new = e_next_old + damping * (e_next_new - e_next_old)
    if not (np.all(np.isfinite(e_prev_new)) and np.all(np.isfinite(e_next_new))):
        return None, UpdateInfo(j, theta, 0.0, False, "non-finite samples")
    disp = max(hausdorff(e_prev_old, e_prev_new, closed=False), hausdorff(e_next_old, e_next_new, closed=False))
    return (e_prev_new, e_next_new), UpdateInfo(j, theta, disp, True)


def _splice(curve: PGCurve, updates: dict) -> PGCurve:
    edges = _edges_of(curve)
    n = curve.n
    for j, (ep, en) in updates.items():
        edges[(j - 1) % n] = ep
        edges[j] = en
    return curve_from_edges(edges, flags=list(curve.flags), meta=dict(curve.meta))


def update_edge_pair(curve: PGCurve, j: int, config: SolverConfig | None = None, damping: float = 1.0):
    """Replace edges j-1 and j by the geodesic pair through vertex j.

    Returns (new curve, UpdateInfo).  A rejected update returns the input curve.
    """
    config = config or SolverConfig()
    n = curve.n
    if n < 3:
        raise ValueError("need at least three vertices")
    j = j % n
    pair, info = _pair_edges(curve, j, config, damping)
    if pair is None:
        return curve, info
    new = _splice(curve, {j: pair})
    if segments_intersect(new.samples):
        return curve, replace(info, accepted=False, reason="splice self-intersects")
    return new, info


def _jacobi_sweep(curve: PGCurve, config: SolverConfig, damping: float):
    """Update non-adjacent pairs from a common snapshot, colour class by colour class."""
    from concurrent.futures import ThreadPoolExecutor

    n = curve.n
    # vertex j touches edges j-1 and j, so vertices two apart never share an edge
    classes = [list(range(0, n - 1 if n % 2 else n, 2)), list(range(1, n, 2))]
    if n % 2:
        classes.append([n - 1])
    infos = []
    with ThreadPoolExecutor(max_workers=max(1, config.workers)) as pool:
        for cls in classes:
            results = list(pool.map(lambda j: _pair_edges(curve, j, config, damping), cls))
            ups = {info.vertex: pair for pair, info in results if pair is not None}
            cand = _splice(curve, ups) if ups else curve
            if ups and segments_intersect(cand.samples):
                results = [(p, replace(i, accepted=False, reason="splice self-intersects")) for p, i in results]
            else:
                curve = cand
            infos += [i for _, i in results]
    return curve, infos


# -- relaxation ------------------------------------------------------------
@dataclass
class SolveResult:
    curve: PGCurve
    converged: bool
    sweeps: int
    log: list = field(default_factory=list)

    def log_csv(self) -> str:
        rows = ["sweep,max_displacement,max_welding_residual"]
        for r in self.log:
            rows.append(f"{r['sweep']},{r['max_displacement']:.6e},{r['max_welding_residual']:.6e}")
        return "\n".join(rows) + "\n"


def solve_through_vertices(vertices, config: SolverConfig | None = None, initial: PGCurve | None = None) -> SolveResult:
    """Gauss-Seidel geodesic-pair relaxation through the given vertices."""
    config = config or SolverConfig()
    v = [complex(ext(z).value) if not ext(z).at_infinity else None for z in vertices]
    if any(z is None for z in v):
        raise ValueError("vertices must be finite; move infinity away with a Möbius map")
    curve = initial if initial is not None else initial_curve(v, config.edge_samples)
    n = curve.n
    # normalise every edge to the configured sample count
    curve = curve_from_edges([resample_edge(e, config.edge_samples) for e in curve.edges()], meta=dict(curve.meta))
    if segments_intersect(curve.samples):
        raise SolverError("initial curve is not simple")
    diam = curve.diameter()
    damp = config.damping_for(n)
    if config.parallel:
        log.warning("parallel sweeps enabled: results may differ between runs within tolerance")
    history = []
    best, best_disp = curve, np.inf
    converged = False
    sweep = 0
    for sweep in range(1, config.max_sweeps + 1):
        disp = 0.0
        rejected = 0
        if config.parallel:
            curve, infos = _jacobi_sweep(curve, config, damp)
        else:
            infos = []
            for j in range(n):
                curve, info = update_edge_pair(curve, j, config, damp)
                infos.append(info)
        for info in infos:
            if info.accepted:
                disp = max(disp, info.displacement)
            else:
                rejected += 1
                log.info("sweep %d vertex %d rejected: %s", sweep, info.vertex, info.reason)
        res = extract_welding(curve, config).residual if config.log_residual else np.nan
        history.append({"sweep": sweep, "max_displacement": disp / diam, "max_welding_residual": res, "rejected": rejected})
        log.debug("sweep %d displacement %.3e", sweep, disp / diam)
        if rejected == n:
            break
        if disp / diam < best_disp:
            best, best_disp = curve, disp / diam
        if rejected == 0 and disp < config.tol_move * diam:
            converged = True
            best = curve
            break
    out = best
    out.meta = dict(out.meta, converged=converged, sweeps=sweep)
    out.flags = ["C1"] * n
    return SolveResult(out, converged, sweep, history)


# -- welding extraction ----------------------------------------------------
@dataclass
class WeldingFit:
    welding: pw.PiecewiseMobius
    residual: float  # largest spread of the log dilation over the edges
    edge_residuals: np.ndarray
    x_vertices: np.ndarray  # left-side images of the vertices (vertex 0 at infinity)
    y_vertices: np.ndarray
    jumps: np.ndarray  # per vertex, in vertex order
    normalized: pw.NormalizedWelding | None
    maps: HalfPlaneMaps

    @property
    def product(self) -> float:
        if self.normalized is None:
            return np.nan
        return pw.check_product(self.normalized.x, self.normalized.y)


def _trim(m: int, frac: float = 0.04, least: int = 3) -> slice:
    """Interior slice that drops samples closest to the two end vertices."""
    t = max(least, int(round(frac * m)))
    if m - 2 * t < 5:
        t = max(0, (m - 5) // 2)
    return slice(t, m - t)


def _fit_edge(x, y, ends):
    """Real Möbius y = T(x) through the two end-vertex images, scale by least squares.

    ``ends`` is (x_a, x_b, y_a, y_b).  In the charts P: x_a -> 0, x_b -> inf
    and Q: y_a -> 0, y_b -> inf the branch is a dilation u -> lam u, and
    log lam is the mean of log Q(y) - log P(x) over the samples.  The spread
    of that log ratio is returned as the fit residual: it does not depend on
    where the edge sits on the line or on how much of it the zipper squeezed.
    """
    xa, xb, ya, yb = ends
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    # samples crushed together (deep inside spirals) carry no information
    keep = np.isfinite(x) & np.isfinite(y)
    keep[1:] &= (np.diff(x) != 0) & (np.diff(y) != 0)

    def apart(u, e):
        return True if not np.isfinite(e) else np.abs(u - e) > 1e-9 * np.maximum(np.abs(u), abs(e))

    keep &= apart(x, xa) & apart(x, xb) & apart(y, ya) & apart(y, yb)
    x, y = x[keep], y[keep]
    if len(x) < 3:
        raise SolverError("edge images are not resolved")
    m = len(x) // 2
    try:
        P = from_three_points(ext(xa), ext(xb), ext(x[m]), 0, INF, 1)
        Q = from_three_points(ext(ya), ext(yb), ext(y[m]), 0, INF, 1)
    except ValueError as exc:
        raise SolverError("edge images are not resolved") from exc
    with np.errstate(divide="ignore", invalid="ignore"):
        r = np.log(np.real(Q.map(y)) / np.real(P.map(x)))
    r = r[np.isfinite(r)]
    if len(r) < 3:
        raise SolverError("edge images are not resolved")
    log_lam = float(np.mean(r))
    try:
        T = compose(Q.inverse, compose(Mobius(np.exp(log_lam), 0, 0, 1), P))
    except ValueError as exc:
        # happens when a corner sits at the vertex sent to infinity: the edge
        # images crowd far out on the line and no double-precision
        # coefficients represent the branch
        raise SolverError("edge welding branch is too ill-conditioned to represent") from exc
    return T, float(np.max(np.abs(r - log_lam)))


def _chart_scale(x):
    fx = x[np.isfinite(x)]
    return float(np.median(np.abs(fx))) or 1.0


def normalized_from_vertex_images(xv, yv, slope_left: float) -> pw.NormalizedWelding:
    """Normalized coordinates from vertex images (vertex 0 at infinity on both sides).

    ``slope_left`` is the welding's derivative just left of vertex 1, which
    fixes the remaining scale of the image side.
    """
    xs = np.asarray(xv[1:], dtype=float)
    ys = np.asarray(yv[1:], dtype=float)
    y0 = yv[0]
    # pre-map: 0 -> x_1, 1 -> x_{n-1}, infinity -> infinity
    sx = (xs - xs[0]) / (xs[-1] - xs[0])
    if np.isfinite(y0):
        # post-map: y0 -> inf, y1 -> 0, increasing; it has slope lam (y0 - y1)^-1 ... at y1
        u = (ys - ys[0]) / (y0 - ys)
        du = 1.0 / (y0 - ys[0])
    else:
        u = ys - ys[0]
        du = 1.0
    # slope of post o w o pre at 0 from the left is lam * du * slope_left * (x_{n-1} - x_1)
    lam = 1.0 / (du * slope_left * (xs[-1] - xs[0]))
    sy = lam * u
    sx[0], sy[0], sx[-1] = 0.0, 0.0, 1.0
    d = pw._branch_data(sx, sy)
    br = tuple(pw.from_point_pair_and_derivative(sx[k], sx[k + 1], sy[k], sy[k + 1], d[k]) for k in range(len(sx) - 1))
    return pw.NormalizedWelding(x=sx, y=sy, branches=br)


def extract_welding(curve: PGCurve, config: SolverConfig | None = None, maps: HalfPlaneMaps | None = None) -> WeldingFit:
    """Welding of a closed curve, fitted edge by edge with real Möbius maps."""
    config = config or SolverConfig()
    hp = maps or half_plane_maps(curve, config.conformal_N)
    x, y, vi = hp.x, hp.y, hp.vertices
    n = len(vi)
    M = len(x)
    branches_by_edge = []
    res = np.zeros(n)
    for k in range(n):
        a = vi[k]
        b = vi[k + 1] if k + 1 < n else M
        idx = np.arange(a + 1, b)  # interior samples of edge k
        if k == 0:
            idx = idx[idx > 0]
        idx = idx[_trim(len(idx))]  # the zipper is least accurate right at the vertices
        xe, ye = x[idx], y[idx]
        if len(xe) < 5:
            raise SolverError("too few samples on an edge for a welding fit")
        T, res[k] = _fit_edge(xe, ye, (x[a], x[b % M], y[a], y[b % M]))
        branches_by_edge.append(T)
    xv = x[vi].astype(float)
    yv = y[vi].astype(float)
    xv[0] = np.inf
    yv[0] = np.inf
    # breakpoints sorted: x(v1) < ... < x(v_{n-1}) < inf; arc k starts at vertex k+1
    bps = tuple(xv[1:]) + (np.inf,)
    brs = tuple(branches_by_edge[1:]) + (branches_by_edge[0],)
    wf = pw.PiecewiseMobius(bps, brs)
    jumps_bp = pw.jumps(wf)  # order: v1..v_{n-1}, v0
    jumps_v = np.concatenate([[jumps_bp[-1]], jumps_bp[:-1]])
    normalized = None
    if n >= 3:
        L = branches_by_edge[0]
        slope_left = float(np.real(L.deriv(xv[1])))
        try:
            normalized = normalized_from_vertex_images(xv, yv, slope_left)
        except (ValueError, ZeroDivisionError):
            normalized = None
    return WeldingFit(wf, float(res.max()), res, xv, yv, jumps_v, normalized, hp)


def is_geodesic_edge(curve: PGCurve, j: int, tol: float = 1e-3, fit: WeldingFit | None = None) -> bool:
    fit = fit or extract_welding(curve)
    return bool(fit.edge_residuals[j % curve.n] < tol)


@dataclass(frozen=True)
class VertexClass:
    kind: str  # "C1" or "spiral"
    rate: float = 0.0
    jump: float = 1.0

    def as_flag(self):
        return "C1" if self.kind == "C1" else {"spiral": self.rate}


def classify_jump(jump: float, tol: float = 1e-2) -> VertexClass:
    if abs(jump - 1.0) <= tol:
        return VertexClass("C1", 0.0, jump)
    return VertexClass("spiral", float(np.log(jump) / (2 * np.pi)), jump)


def classify_vertex(curve: PGCurve, j: int, tol: float = 1e-2, fit: WeldingFit | None = None) -> VertexClass:
    fit = fit or extract_welding(curve)
    return classify_jump(float(fit.jumps[j % curve.n]), tol)


# -- welding of a chord in the disc ---------------------------------------------
@dataclass
class ChordWelding:
    """Welding of the chord e^{i theta} -> 0 -> -e^{-i theta} measured numerically.

    ``lower``/``upper`` are the normalized boundary images of the chord
    samples seen from the component below/above it (same sample order as the
    chord).  ``B`` is the image of e^{i theta}, ``C``/``D`` the images of
    -e^{-i theta} from below/above, and ``shift`` the offset upper - lower
    along the second arc.
    """

    theta: float
    chord: np.ndarray
    split: int
    lower: np.ndarray
    upper: np.ndarray
    B: float
    C: float
    D: float
    shift: np.ndarray
    first_arc_gap: float

    def as_dict(self):
        return {
            "theta": self.theta, "B": self.B, "C": self.C, "D": self.D,
            "shift_mean": float(np.mean(self.shift)), "shift_spread": float(np.ptp(self.shift)),
            "first_arc_gap": self.first_arc_gap,
        }


def _circle_arc(a0, a1, m):
    t = 0.5 * (1 - np.cos(np.linspace(0.0, np.pi, m)))
    return np.exp(1j * (a0 + (a1 - a0) * t))


def chord_welding(theta: float, N: int = 1024, anchors=(0.3, 0.7)) -> ChordWelding:
    """Zip both components of the disc minus the geodesic-pair chord and compare sides.

    Each component is zipped from the junction 0, which therefore goes to
    infinity.  The remaining real gauge of each side is fixed by sending two
    interior points of the first arc to their closed-form images under G;
    everything else (B, C, D, the shift and the agreement along the first
    arc) is measured.
    """
    if not abs(theta) < np.pi / 2:
        raise ValueError("theta must lie in (-pi/2, pi/2)")
    ns = max(16, N // 4)
    ch = trace_pair(theta, ns + 1).samples
    g1, g2 = ch[: ns + 1], ch[ns:]  # e -> 0, 0 -> f
    e, f = g1[0], g2[-1]
    ae, af = float(np.angle(e)), float(np.angle(f))
    # each component counterclockwise, starting at 0
    low_arc = _circle_arc(af, ae + 2 * np.pi if ae < af else ae, N // 2)
    up_arc = _circle_arc(ae, af if af > ae else af + 2 * np.pi, N // 2)
    lower_bd = np.concatenate([g2, low_arc[1:-1], g1[:-1]])
    upper_bd = np.concatenate([g1[::-1], up_arc[1:-1], g2[::-1][:-1]])
    # chord sample k sits at these boundary positions
    m = len(ch)
    k_all = np.arange(m)
    lower_pos = np.where(k_all >= ns, k_all - ns, len(lower_bd) - ns + k_all)
    lower_pos[ns] = 0
    upper_pos = np.where(k_all <= ns, ns - k_all, len(upper_bd) - (k_all - ns))
    upper_pos[ns] = 0
    ia = [int(round(a * ns)) for a in anchors]
    targets = [float(np.real(G(theta, ch[i]))) for i in ia]
    images = []
    for bd, pos in ((lower_bd, lower_pos), (upper_bd, upper_pos)):
        zp = Zipper.build(bd, closed=True)
        x = zp.left
        M = from_three_points(ext(x[pos[ia[0]]]), ext(x[pos[ia[1]]]), INF, targets[0], targets[1], INF)
        with np.errstate(divide="ignore", invalid="ignore"):
            y = np.real(M.map(x[pos]))
        y[ns] = np.inf
        images.append(y)
    lo, up = images
    inner1 = slice(ns // 8, ns - ns // 8)
    inner2 = slice(ns + ns // 8, m - ns // 8)
    gap = float(np.max(np.abs(up[inner1] - lo[inner1]) / np.maximum(1.0, np.abs(lo[inner1]))))
    return ChordWelding(theta, ch, ns, lo, up, float(0.5 * (lo[0] + up[0])), float(lo[-1]), float(up[-1]),
                        up[inner2] - lo[inner2], gap)


# -- four-vertex checks ----------------------------------------------------
def check_modulus(w: pw.NormalizedWelding) -> float:
    if w.n != 3:
        raise ValueError("modulus check needs four vertices (three finite breakpoints)")
    return float(abs(w.x[1] - w.y[1] / w.y[2]))


def vertex_normalizer(vertices) -> tuple[Mobius, complex]:
    """Möbius N with N(v0, v2, v3) = (0, 1, inf); returns (N, N(v1))."""
    v = [ext(z) for z in vertices]
    N = from_three_points(v[0], v[2], v[3], ext(0), ext(1), INF)
    return N, complex(N(v[1]))


@dataclass
class AutomorphismReport:
    zeta: complex
    distances: np.ndarray  # relative chordal Hausdorff distances for tau_1, tau_2, tau_3
    preserves: list  # True where the map keeps the left region on the left
    expected: list = field(default_factory=lambda: [False, False, True])

    @property
    def pattern_ok(self) -> bool:
        return list(self.preserves) == list(self.expected)

    def as_dict(self):
        return {
            "zeta": [self.zeta.real, self.zeta.imag],
            "hausdorff_relative": [float(d) for d in self.distances],
            "preserves_left_region": [bool(p) for p in self.preserves],
            "expected": self.expected,
            "pattern_ok": self.pattern_ok,
        }


def _chordal_diameter(z):
    s = sphere_points(z[:: max(1, len(z) // 800)])
    return float(np.max(np.linalg.norm(s[:, None, :] - s[None, :, :], axis=-1)))


def check_automorphisms(curve: PGCurve, maps: HalfPlaneMaps | None = None) -> AutomorphismReport:
    """Distances from the curve to its images under the three vertex-permuting Möbius maps.

    The maps z -> zeta/z, z -> (z - zeta)/(z - 1) and their composition act in the
    frame where the vertices are 0, zeta, 1, inf; here they are conjugated back to
    the curve's own frame.
    """
    if curve.n != 4:
        raise ValueError("automorphism check needs exactly four vertices")
    N, zeta = vertex_normalizer(curve.vertex_points)
    t1 = Mobius(0, zeta, 1, 0)
    t2 = Mobius(1, -zeta, 1, -1)
    taus = [t1, t2, t1 @ t2]
    Ninv = N.inverse
    z = curve.samples
    diam = _chordal_diameter(z)
    hp = maps or half_plane_maps(curve, 1024)
    # a point well inside the left region
    q = hp.inverse(np.array([1j * _chart_scale(hp.x)]))[0]
    side_q = hp.side_of(np.array([q]))[0]
    dists, keeps = [], []
    for T in taus:
        Tp = Ninv @ T @ N
        dists.append(chordal_hausdorff(z, Tp.map(z)) / diam)
        tq = complex(Tp(q))
        keeps.append(bool(hp.side_of(np.array([tq]))[0] == side_q))
    return AutomorphismReport(zeta, np.array(dists), keeps)


# -- spirals ---------------------------------------------------------------
def measure_spiral_rate(points, eye=0j, extrapolate: bool = True) -> float:
    """Spiral rate 2 pi / log(|a - eye| / |b - eye|) over pairs one turn apart.

    Pairs are formed along the unwrapped argument; the estimate closest to the
    eye is returned (linearly extrapolated in the radius when requested).
    """
    z = np.asarray(points, dtype=complex) - eye
    z = z[np.isfinite(z) & (z != 0)]
    r = np.abs(z)
    order = np.argsort(r)
    z, r = z[order], r[order]
    phi = np.unwrap(np.angle(z))
    span = abs(phi[-1] - phi[0])
    if span < 4 * np.pi - 1e-9:
        raise ValueError("samples wind less than two full turns around the eye")
    lr = np.log(r)
    sgn = 1.0 if phi[-1] > phi[0] else -1.0
    # for each sample, the point one full turn further out
    target = phi + sgn * 2 * np.pi
    ok = (target * sgn) <= (phi[-1] * sgn)
    phis = phi * sgn
    lr_t = np.interp(target[ok] * sgn, phis, lr)
    # rate: d(phi)/d(log r) with the sign convention of the argument growing with r
    rates = sgn * 2 * np.pi / (lr_t - lr[ok])
    if not extrapolate or len(rates) < 8:
        return float(rates[0])
    k = max(8, len(rates) // 4)
    coef = np.polyfit(r[ok][:k], rates[:k], 1)
    return float(np.polyval(coef, 0.0))


# -- inverse problem: curve from welding -----------------------------------
@dataclass
class WeldingInversion:
    curve: PGCurve | None
    converged: bool
    target: tuple
    achieved: tuple
    evaluations: int
    message: str = ""


def _moved_curve(curve: PGCurve, k: int, new_point: complex) -> PGCurve:
    """Warm start: drag vertex k to a new place, deforming its two edges linearly."""
    edges = _edges_of(curve)
    n = len(edges)
    d = new_point - curve.vertex_points[k]
    e_in, e_out = edges[(k - 1) % n], edges[k]
    s_in = arclength(e_in)
    s_out = arclength(e_out)
    edges[(k - 1) % n] = e_in + d * s_in / s_in[-1]
    edges[k] = e_out + d * (1 - s_out / s_out[-1])
    return curve_from_edges(edges, meta=dict(curve.meta))


def curve_from_welding(target: pw.NormalizedWelding | pw.PiecewiseMobius, config: SolverConfig | None = None,
                       anchor: complex = 0.5 + 2.0j, zeta0: complex = 0.5 - 0.6j, max_evals: int = 40,
                       tol: float = 1e-3, product_tol: float = 1e-3) -> WeldingInversion:
    """Find four vertices 0, zeta, 1, anchor whose geodesic curve has the target welding.

    Targets whose product constraint is off by more than ``product_tol`` are
    rejected up front; weldings measured from curves carry errors of a few
    1e-4 there, so the default admits them.
    """
    config = config or SolverConfig()
    if isinstance(target, pw.PiecewiseMobius):
        if len(target.breakpoints) < 3:
            target_nw = None
        else:
            target_nw = pw.normalize(target)[0]
    else:
        target_nw = target
    if target_nw is None or target_nw.n <= 2 or (target_nw.n == 2):
        # identity welding: a circle through any three points
        res = solve_through_vertices([1, 1j, -1], config)
        return WeldingInversion(res.curve, res.converged, (), (), 1, "identity welding gives a circle")
    P = pw.check_product(target_nw.x, target_nw.y)
    if abs(P - 1) > product_tol:
        raise pw.ConstraintError(f"target violates the product constraint: product = {P:.12g}", P)
    if target_nw.n != 3:
        raise NotImplementedError("curve_from_welding handles four-vertex weldings")
    goal = np.array([target_nw.x[1], target_nw.y[1]])
    state = {"curve": None, "evals": 0, "best": (np.inf, None, None)}

    def coords(zeta):
        verts = [0j, zeta, 1 + 0j, anchor]
        init = None
        if state["curve"] is not None:
            init = _moved_curve(state["curve"], 1, zeta)
            if segments_intersect(init.samples):
                init = None
        res = solve_through_vertices(verts, config, initial=init)
        state["curve"] = res.curve
        fit = extract_welding(res.curve, config)
        nw = fit.normalized
        return res.curve, np.array([nw.x[1], nw.y[1]])

    def fun(p):
        state["evals"] += 1
        zeta = complex(p[0], p[1])
        if zeta.imag >= -1e-3:
            return np.array([1e3, 1e3]) * (1 + abs(zeta.imag))
        try:
            crv, c = coords(zeta)
        except (SolverError, ConformalMapError, ValueError) as exc:
            log.info("evaluation at %s failed: %s", zeta, exc)
            return np.array([1e3, 1e3])
        err = c - goal
        if np.max(np.abs(err)) < state["best"][0]:
            state["best"] = (float(np.max(np.abs(err))), crv, c)
        return err

    sol = optimize.root(fun, [zeta0.real, zeta0.imag], method="hybr",
                        options={"maxfev": max_evals, "eps": 1e-3, "xtol": 1e-7})
    err, crv, c = state["best"]
    ok = err < tol
    ach = tuple(float(v) for v in c) if c is not None else ()
    return WeldingInversion(crv, bool(ok), tuple(goal), ach, state["evals"], sol.message)
