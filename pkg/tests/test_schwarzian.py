import numpy as np
import pytest

from pgcurves import explicit_pairs as ep
from pgcurves import schwarzian as sz
from pgcurves.curve import curve_from_edges
from pgcurves.geodesic_solver import solve_through_vertices
from pgcurves.mobius import Mobius
from pgcurves.pwmobius import random_real_mobius


def circle_curve(angles, m=200):
    a = list(angles) + [angles[0] + 2 * np.pi]
    return curve_from_edges([np.exp(1j * np.linspace(a[k], a[k + 1], m + 1)) for k in range(len(angles))])


# -- numerical Schwarzian ----------------------------------------------------------------------------
def test_square_map():
    assert sz.numerical_schwarzian(lambda z: z**2, 1.0, h=0.1) == pytest.approx(-1.5, abs=1e-10)
    z = np.array([0.5 + 0.5j, -2.0, 3j])
    S = sz.numerical_schwarzian(lambda u: u**2, z, h=0.05)
    assert np.allclose(S, -1.5 / z**2, atol=1e-10)


def test_mobius_has_zero_schwarzian():
    T = Mobius(2 + 1j, -1, 0.5, 3)
    z = np.array([0.2, 1 + 1j, -0.7j])
    S = sz.numerical_schwarzian(T.map, z, h=0.05)
    assert np.max(np.abs(S)) < 1e-8


@pytest.mark.parametrize("theta", [0.0, np.pi / 6, -1.0])
def test_matches_closed_form_of_G(theta):
    z = 0.3 + 0.3j
    S = sz.numerical_schwarzian(lambda u: ep.G(theta, u), z, h=0.05, nodes=32)
    assert S == pytest.approx(ep.schwarzian_G(theta, z), abs=1e-6)


def test_array_step():
    z = np.array([1.0, 2.0])
    S = sz.numerical_schwarzian(lambda u: u**2, z, h=np.array([0.1, 0.2]))
    assert np.allclose(S, -1.5 / z**2, atol=1e-10)


def test_vanishing_derivative_raises():
    with pytest.raises(sz.SchwarzianError):
        sz.numerical_schwarzian(lambda z: np.ones_like(z), 0.5)


def test_invariant_under_post_composition(rng):
    f = lambda z: np.exp(z) + 0.3 * z
    z = 0.2 + 0.1j
    base = sz.numerical_schwarzian(f, z, h=0.05)
    for _ in range(5):
        T = random_real_mobius(rng)
        # keep the image away from the pole of T
        if abs(T.c * f(np.array([z]))[0] + T.d) < 0.5:
            continue
        S = sz.numerical_schwarzian(lambda u: T.map(f(u)), z, h=0.02, nodes=32)
        assert S == pytest.approx(base, abs=1e-6 * max(1, abs(base)))


def test_cauchy_derivatives_shape():
    d = sz.cauchy_derivatives(np.exp, np.array([0.0, 1.0]), 0.1)
    assert d.shape == (4, 2)
    assert np.allclose(d, np.exp([0.0, 1.0])[None, :], atol=1e-12)


# -- composition rule -------------------------------------------------------------------------------------
def test_composition_with_mobius_outer():
    g = Mobius(1, 2, -1, 1).map
    h = lambda z: z + 0.2 * z**3
    z = 0.3 + 0.2j
    S_gh = sz.numerical_schwarzian(lambda u: g(h(u)), z, h=0.02)
    S_h = sz.numerical_schwarzian(h, z, h=0.02)
    assert abs(S_gh - S_h) < 1e-7
    assert sz.verify_composition(g, h, z) < 1e-7


def test_composition_with_mobius_inner():
    g = lambda z: z + 0.2 * z**3
    h = Mobius(1, 0.5, 0.2, 1).map
    assert sz.verify_composition(g, h, 0.1 + 0.3j) < 1e-7


def test_composition_square_chain():
    sq = lambda z: z**2
    assert sz.verify_composition(sq, sq, 1.0 + 0.5j) < 1e-6


# -- closed-form coefficients ----------------------------------------------------------------------------------
def test_vertex_residue_prediction():
    assert sz.vertex_residue_prediction(0.0, 1.0) == 0
    assert sz.vertex_residue_prediction(np.pi / 2, 1.0) == pytest.approx(4j)
    assert sz.vertex_residue_prediction(np.pi / 6, 2 - 1j) == pytest.approx(2j * (2 - 1j))


def test_hyperbolic_residue_form():
    # s, t half-plane angles with t - s = 2 theta; rho e^{-i(t+s)/2} plays the role of h'
    s, t, rho = 0.3, 1.4, 0.7
    theta = (t - s) / 2
    hp = rho * np.exp(-0.5j * (t + s))
    assert sz.vertex_residue_hyperbolic(s, t, rho) == pytest.approx(sz.vertex_residue_prediction(theta, hp))


def test_spiral_pole_coefficient():
    assert sz.spiral_pole_coefficient(0.0) == 0
    assert sz.spiral_pole_coefficient(1.0) == pytest.approx(0.5 + 1j)
    assert sz.spiral_pole_coefficient(2.0) == pytest.approx(2 + 2j)
    th = 0.7
    assert sz.spiral_pole_coefficient(np.tan(th)) == pytest.approx(1j * np.tan(th) + 0.5 * np.tan(th) ** 2)


# -- rational model -------------------------------------------------------------------------------------------
def null_space_residues(poles, rng):
    p = np.asarray(poles, dtype=complex)
    V = np.vstack([np.ones_like(p), p, p * p])
    _, _, vh = np.linalg.svd(V)
    N = vh[3:].conj().T
    return N @ (rng.normal(size=N.shape[1]) + 1j * rng.normal(size=N.shape[1]))


def annulus_probes(poles, radii=(0.05, 0.1, 0.2), k=16):
    p = np.asarray(poles, dtype=complex)
    sep = np.min(np.abs(p[:, None] - p[None, :]) + np.eye(len(p)) * 1e9)
    ang = 2 * np.pi * (np.arange(k) + 0.5) / k
    return np.concatenate([q + r * sep * np.exp(1j * ang) for q in p for r in radii])


def test_fit_exact_synthetic(rng):
    poles = [0, 1j, 1, 2 - 0.5j, -1 + 1j]
    c = null_space_residues(poles, rng)
    truth = sz.RationalSchwarzian(poles, c, np.zeros(5))
    z = annulus_probes(poles)
    rs = sz.fit_rational(z, truth(z), poles, quad="zero")
    assert np.max(np.abs(rs.residues - c)) < 1e-10 * max(1, np.max(np.abs(c)))
    assert max(abs(r) for r in sz.constraint_residuals(rs)) < 1e-10 * np.max(np.abs(c))
    free = sz.fit_rational(z, truth(z), poles, quad="free")
    assert np.max(np.abs(free.quad)) < 1e-10 * np.max(np.abs(c))


def test_fit_residual_scales_with_noise(rng):
    poles = [0, 1j, 1, 2 - 0.5j]
    truth = sz.four_point_model(poles, 1.0)
    z = annulus_probes(poles)
    S = truth(z)
    noise = rng.normal(size=len(z)) + 1j * rng.normal(size=len(z))
    res = []
    for amp in (1e-6, 1e-4, 1e-2):
        rs = sz.fit_rational(z, S + amp * noise * np.abs(S), poles, quad="zero")
        res.append(rs.fit_residual)
    assert res[0] < res[1] < res[2]
    assert 30 < res[1] / res[0] < 300 and 30 < res[2] / res[1] < 300


def test_three_consistent_poles_give_zero():
    poles = [0, 1, 1j]
    z = annulus_probes(poles)
    rs = sz.fit_rational(z, np.zeros(len(z)), poles, quad="zero", constrained=True)
    assert np.max(np.abs(rs.residues)) < 1e-14
    assert abs(rs(0.3 + 0.4j)) < 1e-14


def test_four_point_structure(rng):
    poles = [0, 1j, 1, 2]
    truth = sz.four_point_model(poles, 0.7 - 0.2j)
    assert max(abs(r) for r in sz.constraint_residuals(truth)) < 1e-12
    z = annulus_probes(poles)
    rs = sz.fit_rational(z, truth(z), poles, quad="zero")
    C = sz.four_point_constant(rs)
    assert C == pytest.approx(0.7 - 0.2j, abs=1e-10)
    probes = 3 + rng.normal(size=10) + 1j * rng.normal(size=10)
    expected = C / np.prod([probes - p for p in poles], axis=0)
    assert np.max(np.abs(rs(probes) - expected)) < 1e-10 * np.max(np.abs(expected))


def test_constraint_residuals_examples():
    zero = sz.RationalSchwarzian([0, 1, 1j], np.zeros(3), np.zeros(3))
    assert sz.constraint_residuals(zero) == (0, 0, 0)
    m = sz.four_point_model([0, 1j, 1, 2], 1.0)
    eps = 1e-3
    pert = sz.RationalSchwarzian(m.poles, m.residues + np.array([eps, 0, 0, 0]), m.quad)
    assert sz.constraint_residuals(pert)[0] == pytest.approx(eps, abs=1e-12)
    with_inf = sz.RationalSchwarzian([0, 1, np.inf], np.array([1.0, -1.0, 0]), np.zeros(3))
    r = sz.constraint_residuals(with_inf)
    assert r[2] is None and r[0] == 0 and r[1] == -1
    assert sz.normalized_constraint_residuals(with_inf)[2] is None


def test_fit_argument_errors():
    with pytest.raises(ValueError):
        sz.fit_rational([1j], [0], [0, 1], quad="bogus")
    with pytest.raises(ValueError):
        sz.fit_rational([1j], [0], [0, 1], spiral_rates=[None])
    with pytest.raises(sz.SchwarzianError):
        sz.fit_rational([0j], [0], [0, 1])
    with pytest.raises(ValueError):
        sz.four_point_model([0, 1, 2])


def test_preset_spiral_coefficient():
    poles = [0, 1, 1j]
    lam = sz.spiral_pole_coefficient(0.8)
    truth = sz.RationalSchwarzian(poles, np.zeros(3), np.array([lam, 0, 0]))
    z = annulus_probes(poles)
    rs = sz.fit_rational(z, truth(z), poles, spiral_rates=[0.8, None, None], quad="preset")
    assert rs.quad[0] == lam
    assert np.max(np.abs(rs.residues)) < 1e-10


def test_residue_of_explicit_pair():
    # the pair's map has residue 4 i sin(theta) at the junction
    theta = np.pi / 5
    poles = [0, np.exp(1j * theta), -np.exp(-1j * theta)]
    r = 0.1
    z = np.concatenate([p + rr * np.exp(2j * np.pi * (np.arange(24) + 0.5) / 24) for p in poles for rr in (r, 2 * r)])
    rs = sz.fit_rational(z, ep.schwarzian_G(theta, z), poles, quad="free")
    assert rs.residues[0] == pytest.approx(sz.vertex_residue_prediction(theta, 1.0), abs=1e-5)


def test_as_dict_layout():
    d = sz.four_point_model([0, 1j, 1, 2]).as_dict()
    assert set(d) >= {"poles", "residues", "quad", "constraint_residuals", "fit_residual"}


def test_decay_exponent():
    z = np.concatenate([R * np.exp(1j * np.linspace(0, 6, 8)) for R in (10, 20, 40)])
    assert sz.decay_exponent(z, 3 / z**4, 0) == pytest.approx(4.0, abs=1e-9)
    assert np.isnan(sz.decay_exponent(z[:1], z[:1], 0))


def test_quad_noise_floor():
    f = sz.quad_noise_floor()
    assert 1e-3 < f < 2e-3


# -- curves -------------------------------------------------------------------------------------------------------
def test_analyze_circle():
    rs = sz.analyze_curve(circle_curve([0, 1.5, 3.0, 4.5]))
    assert rs.fit_residual < 1e-4
    assert np.max(np.abs(rs.residues)) < 1e-4
    assert np.max(np.abs(rs.quad)) < rs.meta["quad_noise_floor"]


def test_analyze_three_vertex_solution():
    res = solve_through_vertices([0, 1, 1j])
    rs = sz.analyze_curve(res.curve)
    assert np.max(np.abs(rs.residues)) < 1e-3


def test_probe_points_avoid_curve():
    c = circle_curve([0, 1.5, 3.0, 4.5])
    ps = sz.probe_points(c)
    assert np.all(np.abs(np.abs(ps.z) - 1) > 0)
    assert np.all(ps.h > 0)
    assert ps.near.sum() > 0 and (~ps.near).sum() == 32


def test_analyze_four_vertex_solution(four_vertex_solution):
    rs = sz.analyze_curve(four_vertex_solution.curve)
    assert np.max(np.abs(rs.quad)) < rs.meta["quad_noise_floor"]
    assert max(r for r in rs.meta["normalized_constraint_residuals"] if r is not None) < 1e-3
    assert rs.meta["decay_exponent"] >= 3.8
    assert rs.meta["four_point_mismatch"] < 1e-2
    assert all(j is not None and abs(j - 1) < 1e-2 for j in rs.meta["jumps"])
