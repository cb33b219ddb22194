import numpy as np
import pytest

from pgcurves import explicit_pairs as ep
from pgcurves import geodesic_solver as gs
from pgcurves import pwmobius as pw
from pgcurves.curve import PGCurve, circumcircle, curve_from_edges
from pgcurves.mobius import Mobius

from conftest import GENERIC_FOUR


def circle_curve(angles, m=200):
    a = list(angles) + [angles[0] + 2 * np.pi]
    return curve_from_edges([np.exp(1j * np.linspace(a[k], a[k + 1], m + 1)) for k in range(len(angles))])


def ellipse_curve(m=800):
    t = 2 * np.pi * np.arange(m) / m
    return PGCurve(2 * np.cos(t) + 1j * np.sin(t), np.arange(4) * m // 4)


def circle_distance(curve, a, b, c):
    center, rad = circumcircle(a, b, c)
    return np.max(np.abs(np.abs(curve.samples - center) - rad)) / curve.diameter()


# -- config and initial curves ---------------------------------------------------
def test_config_validation():
    with pytest.raises(ValueError):
        gs.SolverConfig(tol_move=0)
    with pytest.raises(ValueError):
        gs.SolverConfig(damping=1.5)
    with pytest.raises(ValueError):
        gs.SolverConfig(edge_samples=2)
    assert gs.SolverConfig().damping_for(4) == 1.0
    assert gs.SolverConfig().damping_for(6) == 0.5
    assert gs.SolverConfig(damping=0.3).damping_for(3) == 0.3
    cfg = gs.SolverConfig.from_dict({"edge_samples": 50, "unknown": 1})
    assert cfg.edge_samples == 50


def test_initial_curve_passes_through_vertices():
    c = gs.initial_curve(GENERIC_FOUR, 50)
    assert c.n == 4 and c.closed
    assert np.allclose(c.vertex_points, GENERIC_FOUR)
    p = gs.initial_curve(GENERIC_FOUR, 50, method="polygon")
    assert np.allclose(p.vertex_points, GENERIC_FOUR)
    with pytest.raises(ValueError):
        gs.initial_curve([0, 1], 10)
    with pytest.raises(ValueError):
        gs.initial_curve([0, 1, 1], 10)


# -- single updates ----------------------------------------------------------------
def test_circle_is_fixed_by_update():
    c = circle_curve([0, 1.0, 2.5, 4.0])
    for j in range(4):
        new, info = gs.update_edge_pair(c, j)
        assert info.accepted
        assert np.max(np.abs(np.abs(new.samples) - 1)) < 1e-4
        assert np.allclose(new.vertex_points, c.vertex_points, atol=0)


def test_triangle_bends_toward_circle():
    w = np.exp(2j * np.pi * np.arange(3) / 3)
    cur = gs.initial_curve(w, 100, method="polygon")

    def mid_dist(cv):
        return np.array([abs(abs(e[len(e) // 2]) - 1) for e in cv.edges()])

    before = mid_dist(cur)
    for j in range(3):
        cur, info = gs.update_edge_pair(cur, j)
        assert info.accepted
    assert np.all(mid_dist(cur) < before)


def test_reflection_symmetric_corner_gives_zero_angle():
    # reflection in the circle fixes the rest of the curve and swaps the two
    # sides of the pair, which forces the neighbours onto a diameter
    c = circle_curve([0, 1.0, 2.5, 4.0])
    for j in range(4):
        _, info = gs.update_edge_pair(c, j)
        assert abs(info.theta) < 1e-3


def test_update_needs_three_vertices():
    c = PGCurve(np.array([0, 1, 1j]), np.array([0, 1]))
    with pytest.raises(ValueError):
        gs.update_edge_pair(c, 0)


# -- relaxation ----------------------------------------------------------------------
def test_three_points_give_circle():
    res = gs.solve_through_vertices([0, 1, 1j])
    assert res.converged and res.sweeps <= 50
    assert circle_distance(res.curve, 0, 1, 1j) < 1e-3
    assert np.allclose(res.curve.vertex_points, [0, 1, 1j], atol=0)


def test_roots_of_unity_give_circle():
    res = gs.solve_through_vertices([1, 1j, -1, -1j])
    assert res.converged
    assert np.max(np.abs(np.abs(res.curve.samples) - 1)) < 1e-3


def test_solver_log_and_flags(four_vertex_solution):
    res = four_vertex_solution
    assert res.converged
    assert len(res.log) == res.sweeps
    assert res.curve.flags == ["C1"] * 4
    assert res.log_csv().startswith("sweep,max_displacement,max_welding_residual\n")
    assert np.allclose(res.curve.vertex_points, GENERIC_FOUR, atol=0)


def test_solver_rejects_infinite_vertex():
    with pytest.raises(ValueError):
        gs.solve_through_vertices([0, 1, np.inf])


def test_fixed_point_consistency(four_vertex_solution):
    c = four_vertex_solution.curve
    cfg = gs.SolverConfig()
    for j in range(c.n):
        _, info = gs.update_edge_pair(c, j, cfg)
        assert info.accepted
        assert info.displacement < 2 * cfg.tol_move * c.diameter()


# -- welding extraction ----------------------------------------------------------------
def test_circle_welding_trivial():
    fit = gs.extract_welding(circle_curve([0, 1.0, 2.5, 4.0]))
    assert fit.residual < 1e-3
    assert np.allclose(fit.jumps, 1, atol=1e-3)
    nw = fit.normalized
    # identity welding: the normalized images agree with the breakpoints
    assert np.allclose(nw.x, nw.y, atol=1e-3)


def test_three_point_solution_welding_is_identity():
    res = gs.solve_through_vertices([0, 1, 1j])
    fit = gs.extract_welding(res.curve)
    assert fit.residual < 1e-3
    assert np.allclose(fit.jumps, 1, atol=1e-3)
    nw = fit.normalized
    assert np.allclose(nw.x, nw.y, atol=1e-3)


def test_ellipse_residual_much_larger():
    circ = gs.extract_welding(circle_curve([0, 1.0, 2.5, 4.0])).residual
    ell = gs.extract_welding(ellipse_curve()).residual
    assert ell > 10 * circ


def test_solver_welding_is_c1_with_product_one(four_vertex_solution):
    fit = gs.extract_welding(four_vertex_solution.curve)
    assert fit.residual < 1e-3
    assert np.allclose(fit.jumps, 1, atol=1e-2)
    assert abs(fit.product - 1) < 1e-3


def test_is_geodesic_edge():
    c = circle_curve([0, 1.0, 2.5, 4.0])
    assert all(gs.is_geodesic_edge(c, j) for j in range(4))
    pent = gs.initial_curve([0, 1, 1.3 + 0.8j, 0.5 + 1.4j, -0.3 + 0.8j], 100, method="polygon")
    fit = gs.extract_welding(pent)
    assert not any(gs.is_geodesic_edge(pent, j, fit=fit) for j in range(5))


def test_solver_edges_geodesic(four_vertex_solution):
    c = four_vertex_solution.curve
    fit = gs.extract_welding(c)
    assert all(gs.is_geodesic_edge(c, j, fit=fit) for j in range(4))
    assert all(gs.classify_vertex(c, j, fit=fit).kind == "C1" for j in range(4))


def test_corner_at_infinity_is_reported():
    square = gs.initial_curve([0, 1, 1 + 1j, 1j], 100, method="polygon")
    with pytest.raises(gs.SolverError):
        gs.extract_welding(square)


# -- classification ---------------------------------------------------------------------
def test_classify_jump_dichotomy():
    assert gs.classify_jump(1.0).kind == "C1"
    assert gs.classify_jump(1.005).kind == "C1"
    v = gs.classify_jump(np.exp(2 * np.pi * 0.7))
    assert v.kind == "spiral" and v.rate == pytest.approx(0.7)
    for j in np.geomspace(1e-3, 1e3, 25):
        assert gs.classify_jump(j).kind in ("C1", "spiral")
    assert gs.classify_jump(1.0).as_flag() == "C1"
    assert v.as_flag() == {"spiral": v.rate}


def test_spiral_welding_classification():
    for theta in (np.pi / 6, -np.pi / 4):
        w = ep.spiral_welding(theta)
        v = gs.classify_jump(pw.derivative_jump(w, 0.0))
        assert v.kind == "spiral"
        assert v.rate == pytest.approx(np.tan(theta), abs=1e-12)


# -- spiral rate measurement -----------------------------------------------------------
@pytest.mark.parametrize("theta", [np.pi / 4, -np.pi / 4, 0.3])
def test_measure_spiral_rate(theta):
    span = 12 * np.pi / abs(np.tan(theta)) / np.cos(theta) ** 2
    t = np.linspace(-span, 0, 6000)
    pts = ep.spiral_point(theta, "-", t)
    rate = gs.measure_spiral_rate(pts)
    assert rate == pytest.approx(np.tan(theta), abs=1e-6)


def test_measure_spiral_rate_off_origin():
    # three turns, so the innermost radius stays far above rounding of the offset
    theta = np.pi / 4
    t = np.linspace(-6 * np.pi / np.cos(theta) ** 2, 0, 4000)
    eye = 0.3 - 2j
    pts = ep.spiral_point(theta, "+", t) + eye
    assert gs.measure_spiral_rate(pts, eye=eye) == pytest.approx(1.0, abs=1e-6)


def test_measure_spiral_rate_sign():
    t = np.linspace(-60, 0, 4000)
    assert gs.measure_spiral_rate(ep.spiral_point(-0.5, "+", t)) < 0
    assert gs.measure_spiral_rate(ep.spiral_point(0.5, "+", t)) > 0


# -- chord welding ---------------------------------------------------------------------------
def test_chord_welding_theta_pi_6():
    theta = np.pi / 6
    cw = gs.chord_welding(theta, N=1024)
    p = ep.GeodesicPairParams(theta)
    assert cw.B == pytest.approx(p.B, abs=1e-3)
    assert cw.C == pytest.approx(p.C, abs=1e-3)
    assert cw.D == pytest.approx(p.D, abs=1e-3)
    assert np.max(np.abs(cw.shift - p.shift)) < 1e-3
    assert cw.first_arc_gap < 1e-3
    d = cw.as_dict()
    assert set(d) >= {"B", "C", "D", "shift_mean"}


def test_chord_welding_range():
    with pytest.raises(ValueError):
        gs.chord_welding(np.pi / 2)


# -- four vertex checks ----------------------------------------------------------------------------
def test_check_modulus_examples():
    nw = pw.NormalizedWelding(x=np.array([0, 0.4, 1.0]), y=np.array([0, 0.8, 2.0]),
                              branches=(Mobius.identity(),) * 2)
    assert gs.check_modulus(nw) == pytest.approx(0.0, abs=1e-15)
    nw2 = pw.NormalizedWelding(x=np.array([0, 0.4, 1.0]), y=np.array([0, 0.808, 2.0]),
                               branches=(Mobius.identity(),) * 2)
    assert gs.check_modulus(nw2) == pytest.approx(0.01 * 0.4, rel=1e-9)
    bad = pw.NormalizedWelding(x=np.array([0, 1.0]), y=np.array([0, 1.0]), branches=(Mobius.identity(),))
    with pytest.raises(ValueError):
        gs.check_modulus(bad)


def test_solver_modulus(four_vertex_solution):
    fit = gs.extract_welding(four_vertex_solution.curve)
    assert gs.check_modulus(fit.normalized) < 1e-4


def test_circle_automorphisms():
    c = circle_curve([0, np.pi / 2, np.pi, 3 * np.pi / 2])
    rep = gs.check_automorphisms(c)
    assert np.all(rep.distances < 1e-6)
    assert rep.pattern_ok


def test_solver_automorphisms(four_vertex_solution):
    rep = gs.check_automorphisms(four_vertex_solution.curve)
    assert np.all(rep.distances < 1e-3)
    assert rep.pattern_ok
    assert rep.as_dict()["pattern_ok"]


def test_asymmetric_curve_fails_automorphisms():
    c = gs.initial_curve(GENERIC_FOUR, 200)
    rep = gs.check_automorphisms(c)
    assert np.max(rep.distances) > 1e-2


def test_automorphisms_need_four_vertices():
    with pytest.raises(ValueError):
        gs.check_automorphisms(circle_curve([0, 2, 4]))


def test_vertex_normalizer():
    N, zeta = gs.vertex_normalizer(GENERIC_FOUR)
    assert complex(N(GENERIC_FOUR[0])) == pytest.approx(0, abs=1e-14)
    assert complex(N(GENERIC_FOUR[2])) == pytest.approx(1, abs=1e-14)
    assert N(GENERIC_FOUR[3]).at_infinity
    assert complex(N(GENERIC_FOUR[1])) == pytest.approx(zeta)


# -- inverse problem ------------------------------------------------------------------------------------
def test_curve_from_identity_welding_is_circle():
    out = gs.curve_from_welding(pw.identity_welding(), gs.SolverConfig(edge_samples=80, conformal_N=512))
    assert out.converged
    assert circle_distance(out.curve, 1, 1j, -1) < 1e-3


def test_curve_from_welding_rejects_bad_product():
    nw = pw.NormalizedWelding(x=np.array([0, 0.4, 1.0]), y=np.array([0, 0.9, 2.5]),
                              branches=(Mobius.identity(),) * 3)
    with pytest.raises(pw.ConstraintError):
        gs.curve_from_welding(nw)


@pytest.mark.slow
def test_curve_from_welding_round_trip(four_vertex_solution):
    target = gs.extract_welding(four_vertex_solution.curve).normalized
    out = gs.curve_from_welding(target, gs.SolverConfig())
    assert out.converged
    assert np.max(np.abs(np.array(out.achieved) - np.array(out.target))) < 1e-3
