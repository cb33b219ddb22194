import cmath

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from pgcurves.mobius import (INF, ExtComplex, Mobius, apply, compose, derivative, ext, fixed_points,
                             from_point_pair_and_derivative, from_three_points, invert, is_real_increasing,
                             real_affine)

finite = st.floats(-50, 50, allow_nan=False)


def close(T: Mobius, a, b, c, d, tol=1e-12):
    return T.close_to(Mobius(a, b, c, d), tol)


# -- points ----------------------------------------------------------------
def test_single_infinity():
    assert ext(complex(np.inf, 0)) == INF
    assert ext(complex(np.inf, np.inf)) == INF
    assert ext("inf") == INF
    assert ExtComplex(5, at_infinity=True) == INF
    assert INF.to_json() == "inf"


def test_finite_values_reject_nonfinite():
    with pytest.raises(ValueError):
        ExtComplex(complex(np.nan, 0))


def test_chordal_distance():
    assert ext(0).chordal(INF) == pytest.approx(2.0)
    assert ext(1).chordal(-1) == pytest.approx(2.0)
    assert INF.chordal(INF) == 0.0


# -- apply / derivative ----------------------------------------------------
def test_apply_examples():
    assert apply(Mobius.identity(), 3 + 4j) == ext(3 + 4j)
    assert apply(Mobius(0, 1, 1, 0), 0) == INF
    assert apply(Mobius(0, 1, 1, 0), INF) == ext(0)
    assert apply(Mobius(2, 1, 1, 1), 0).isclose(1)
    assert apply(Mobius(2, 1, 1, 1), INF).isclose(2)
    assert apply(Mobius(2, 1, 1, 1), -1) == INF


def test_derivative_examples():
    T = Mobius(2, 1, 1, 1)
    assert derivative(T, 0) == pytest.approx(1)
    assert derivative(T, 1) == pytest.approx(0.25)
    lhs = derivative(T, 0) * derivative(T, 1)
    rhs = ((complex(T(1)) - complex(T(0))) / 1) ** 2
    assert lhs == pytest.approx(rhs)
    assert derivative(Mobius(2, 0, 0, 1), 7 - 3j) == pytest.approx(2)
    assert derivative(Mobius.identity(), 1j) == pytest.approx(1)


def test_derivative_at_pole_raises():
    with pytest.raises(ValueError):
        derivative(Mobius(2, 1, 1, 1), -1)


# -- group operations ------------------------------------------------------
def test_compose_and_invert_examples():
    inv = Mobius(0, 1, 1, 0)
    assert compose(inv, inv).close_to(Mobius.identity())
    assert invert(Mobius(2, 0, 0, 1)).close_to(Mobius(0.5, 0, 0, 1))
    assert compose(Mobius(1, 1, 0, 1), Mobius(1, -1, 0, 1)).close_to(Mobius.identity())


def test_determinant_normalized_and_canonical_sign():
    T = Mobius(4, 2, 2, 2)
    assert T.a * T.d - T.b * T.c == pytest.approx(1)
    assert Mobius(-4, -2, -2, -2).coefficients == T.coefficients
    with pytest.raises(ValueError):
        Mobius(1, 2, 2, 4)


def test_json_roundtrip():
    T = Mobius(1 + 2j, 3, -1j, 2)
    assert Mobius.from_json(T.to_json()).close_to(T)


# -- constructors ----------------------------------------------------------
def test_three_point_examples():
    assert from_three_points(0, 1, INF, 0, 1, INF).close_to(Mobius.identity())
    assert from_three_points(0, 1, INF, 0, 2, INF).close_to(Mobius(2, 0, 0, 1))
    assert from_three_points(0, INF, 1, INF, 0, 1).close_to(Mobius(0, 1, 1, 0))
    with pytest.raises(ValueError):
        from_three_points(0, 0, 1, 0, 1, 2)


def test_point_pair_derivative_examples():
    assert close(from_point_pair_and_derivative(0, 0.5, 0, 1, 1), 1, 0, -1, 1)
    assert close(from_point_pair_and_derivative(0.5, 1, 1, 2, 4), 3, -1, 1, 0)
    assert from_point_pair_and_derivative(0, 1, 0, 1, 1).close_to(Mobius.identity())
    with pytest.raises(ValueError):
        from_point_pair_and_derivative(0, 0, 0, 1, 1)
    with pytest.raises(ValueError):
        from_point_pair_and_derivative(0, 1, 0, 1, -1)


def test_real_increasing_examples():
    assert is_real_increasing(Mobius(1, 1, 0, 1))
    assert not is_real_increasing(Mobius(-1, 0, 0, 1))
    assert is_real_increasing(Mobius(2, 1, 1, 1))
    assert is_real_increasing(real_affine(3, -2))


def test_fixed_points():
    fp = fixed_points(Mobius(2, 0, 0, 1))
    assert any(p.isclose(0) for p in fp) and any(p == INF for p in fp)
    fp = fixed_points(Mobius(0, 1, 1, 0))
    assert sorted(complex(p).real for p in fp) == pytest.approx([-1, 1])


# -- properties ------------------------------------------------------------
def _random_real_increasing(rng):
    while True:
        a, b, c, d = rng.normal(size=4)
        if a * d - b * c > 0.05:
            return Mobius(a, b, c, d)


def test_pair_identity_random_cases():
    """T'(a) T'(b) = ((T(b) - T(a)) / (b - a))^2 on 10^4 random cases.

    The difference quotient is evaluated in extended precision: for close a, b
    a double-precision quotient loses digits to cancellation on its own.  Points
    within 1e-3 of the pole are skipped, where 1/(cz + d)^2 itself carries a
    relative rounding error of order 2 eps |d| / |cz + d|.
    """
    mpmath = pytest.importorskip("mpmath")
    mpmath.mp.dps = 40
    rng = np.random.default_rng(7)
    worst = 0.0
    cases = 0
    while cases < 10_000:
        T = _random_real_increasing(rng)
        a, b = rng.normal(scale=3, size=2)
        if a == b or min(abs(T.c * a + T.d), abs(T.c * b + T.d)) < 1e-3:
            continue
        cases += 1
        A, B, C, D = (mpmath.mpf(v.real) for v in T.coefficients)
        ma, mb = mpmath.mpf(a), mpmath.mpf(b)
        q = ((A * mb + B) / (C * mb + D) - (A * ma + B) / (C * ma + D)) / (mb - ma)
        rhs = float(q * q)
        lhs = (derivative(T, a) * derivative(T, b)).real
        worst = max(worst, abs(lhs - rhs) / abs(rhs))
    assert worst < 1e-12


def test_pair_identity_double_precision():
    T = Mobius(2, 1, 1, 1)
    for a, b in [(0, 1), (-0.5, 3), (2, 7)]:
        lhs = derivative(T, a) * derivative(T, b)
        rhs = ((complex(T(b)) - complex(T(a))) / (b - a)) ** 2
        assert abs(lhs - rhs) <= 1e-14 * abs(rhs)


@settings(max_examples=200, deadline=None)
@given(finite, finite, finite, finite, finite, finite)
def test_inverse_roundtrip(a, b, c, x, y, d):
    if abs(a * d - b * c) < 1e-3:
        return
    T = Mobius(a, b, c, d)
    z = complex(x, y)
    w = T(z)
    back = invert(T)(w)
    if w.at_infinity:
        assert back.isclose(z, 1e-10)
    else:
        assert back.chordal(z) < 1e-10


@settings(max_examples=200, deadline=None)
@given(st.lists(st.complex_numbers(max_magnitude=20, allow_nan=False, allow_infinity=False), min_size=6, max_size=6))
def test_three_point_roundtrip(pts):
    src, dst = pts[:3], pts[3:]
    for grp in (src, dst):
        if min(abs(grp[0] - grp[1]), abs(grp[1] - grp[2]), abs(grp[0] - grp[2])) < 1e-2:
            return
    T = from_three_points(*src, *dst)
    for s, t in zip(src, dst):
        assert T(s).chordal(t) < 1e-12 * max(1, abs(t))


def test_point_pair_conditions_random():
    rng = np.random.default_rng(11)
    worst = 0.0
    for _ in range(20_000):
        a, alpha = rng.uniform(-5, 5, size=2)
        gap, dgap = rng.uniform(0.05, 5, size=2)
        delta = rng.uniform(0.1, 10)
        b, beta = a + gap, alpha + dgap
        T = from_point_pair_and_derivative(a, b, alpha, beta, delta)
        if np.linalg.cond(T.matrix) > 1e3:
            continue  # errors grow like cond * eps; covered with a scaled tolerance below
        worst = max(worst, abs(complex(T(a)) - alpha) / max(1, abs(alpha)),
                    abs(complex(T(b)) - beta) / max(1, abs(beta)), abs(derivative(T, a) - delta) / delta)
        assert T.is_real
    assert worst < 1e-12


@settings(max_examples=300, deadline=None)
@given(st.floats(-5, 5), st.floats(0.01, 5), st.floats(-5, 5), st.floats(0.01, 5), st.floats(0.01, 10))
def test_point_pair_conditions(a, gap, alpha, dgap, delta):
    b, beta = a + gap, alpha + dgap
    T = from_point_pair_and_derivative(a, b, alpha, beta, delta)
    # a badly conditioned coefficient matrix loses digits in proportion
    tol = 1e-15 * max(1e3, np.linalg.cond(T.matrix))
    assert abs(complex(T(a)) - alpha) <= tol * max(1, abs(alpha))
    assert abs(complex(T(b)) - beta) <= tol * max(1, abs(beta))
    assert abs(derivative(T, a) - delta) <= tol * delta
    assert T.is_real
    assert from_point_pair_and_derivative(a, b, alpha, beta, delta).coefficients == T.coefficients


def test_compose_matches_sequential_application():
    rng = np.random.default_rng(3)
    for _ in range(200):
        T1 = Mobius(*(rng.normal(size=4) + 1j * rng.normal(size=4)))
        T2 = Mobius(*(rng.normal(size=4) + 1j * rng.normal(size=4)))
        z = complex(*rng.normal(size=2))
        assert compose(T1, T2)(z).chordal(T1(T2(z))) < 1e-12
        assert (T1 @ T2)(INF).chordal(T1(T2(INF))) < 1e-12


def test_map_handles_poles():
    T = Mobius(0, 1, 1, 0)
    out = T.map(np.array([0, 2]))
    assert np.isinf(out[0]) and out[1] == pytest.approx(0.5)
    assert cmath.isclose(Mobius(2, 1, 1, 1).map_real(np.array([np.inf]))[0], 2)
