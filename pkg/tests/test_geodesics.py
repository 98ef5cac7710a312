import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.integrate import solve_ivp

from geolab import geometry as G
from geolab.geodesics import (CutLocusError, distance, distance_derivatives, distance_hessian_fd,
                              comparison_profile, hessian_comparison_check, laplacian_of_distance,
                              loop_bounds_table, loop_injectivity_bound, shoot_geodesic)

FLAT = G.WarpedMetric(G.flat())
HYP = G.WarpedMetric(G.hyperbolic())
EX = G.WarpedMetric(G.example())


def hyperbolic_distance(p, q, windings=3):
    """Fermi coordinates on H^2 around a closed geodesic of length 2 pi."""
    (x1, t1), (x2, t2) = p, q
    best = math.inf
    for w in range(-windings, windings + 1):
        c = (math.cosh(x1) * math.cosh(x2) * math.cosh(t2 - t1 + 2 * math.pi * w)
             - math.sinh(x1) * math.sinh(x2))
        best = min(best, math.acosh(max(c, 1.0)))
    return best


# --- shooting ----------------------------------------------------------------


def test_flat_straight_line():
    g = shoot_geodesic(FLAT, (0, 0), 0.0, 3.0)
    assert g.endpoint == pytest.approx((3.0, 0.0), abs=1e-12)


def test_flat_fiber_half_wrap():
    g = shoot_geodesic(FLAT, (0, 0), math.pi / 2, math.pi)
    assert g.endpoint == pytest.approx((0.0, math.pi), abs=1e-12)


def _ode_oracle(warp, start, angle, length):
    def rhs(s, y):
        x, th, xp, tp = y
        f, f1 = warp(x), warp.d1(x)
        return [xp, tp, 0.5 * f1 * tp * tp, -f1 / f * xp * tp]

    f0 = warp(start[0])
    y0 = [start[0], start[1], math.cos(angle), math.sin(angle) / math.sqrt(f0)]
    sol = solve_ivp(rhs, (0, length), y0, method="DOP853", rtol=1e-13, atol=1e-13)
    return sol.y[:2, -1]


def test_hyperbolic_clairaut_and_endpoint_vs_ode_oracle():
    g = shoot_geodesic(HYP, (0, 0), math.pi / 2, 0.5)
    assert g.clairaut == pytest.approx(1.0)
    assert g.clairaut_drift(HYP) <= 1e-7
    assert g.speed_error(HYP) <= 1e-8
    np.testing.assert_allclose(g.endpoint, _ode_oracle(HYP.warp, (0, 0), math.pi / 2, 0.5),
                               atol=1e-9)


def test_rk4_fourth_order_under_step_halving():
    ref = _ode_oracle(EX.warp, (2.0, 0.0), 0.9, 4.0)
    errs = [np.abs(np.array(shoot_geodesic(EX, (2.0, 0.0), 0.9, 4.0, step=h).endpoint) - ref).max()
            for h in (0.2, 0.1)]
    assert errs[0] / errs[1] > 12


@settings(max_examples=20, deadline=None)
@given(st.floats(-4, 4), st.floats(-math.pi, math.pi), st.floats(0.5, 3.0))
def test_unit_speed_and_clairaut_invariants(x0, angle, length):
    g = shoot_geodesic(EX, (x0, 0.0), angle, length)
    assert g.speed_error(EX) <= 1e-8
    assert g.clairaut_drift(EX) <= 1e-7


def test_partial_flag_when_leaving_domain():
    m = G.WarpedMetric(G.flat(), L=2.0)
    assert shoot_geodesic(m, (0, 0), 0.0, 5.0).partial


# --- distance ----------------------------------------------------------------


def test_flat_distance_axial():
    assert distance(FLAT, (0, 0), (3, 0)).value == pytest.approx(3.0, abs=1e-8)


def test_flat_distance_antipodal_two_minimizers():
    d = distance(FLAT, (0, 0), (0, math.pi))
    assert d.value == pytest.approx(math.pi, abs=1e-8)
    assert d.near_cut and d.minimizer_count == 2


def test_flat_distance_unrolling_formula():
    d = distance(FLAT, (0, 0), (3, math.pi))
    assert d.value == pytest.approx(math.sqrt(9 + math.pi**2), abs=1e-8)


def test_distance_zero_iff_same_point():
    assert distance(EX, (2.0, 1.0), (2.0, 1.0)).value == pytest.approx(0.0, abs=1e-12)
    assert distance(EX, (2.0, 1.0), (2.0, 1.01)).value > 0


@settings(max_examples=25, deadline=None)
@given(st.floats(-3, 3), st.floats(-math.pi, math.pi), st.floats(-3, 3), st.floats(-math.pi, math.pi))
def test_hyperbolic_distance_matches_closed_form(x1, t1, x2, t2):
    d = distance(HYP, (x1, t1), (x2, t2), step=5e-3)
    assert d.value == pytest.approx(hyperbolic_distance((x1, t1), (x2, t2)), abs=1e-6)


points = st.tuples(st.floats(-6, 6), st.floats(-math.pi, math.pi))


@settings(max_examples=30, deadline=None)
@given(points, points)
def test_distance_symmetric(p, q):
    assert distance(EX, p, q).value == pytest.approx(distance(EX, q, p).value, abs=1e-6)


@settings(max_examples=30, deadline=None)
@given(points, points, points)
def test_triangle_inequality(p, q, r):
    assert distance(EX, p, r).value <= distance(EX, p, q).value + distance(EX, q, r).value + 1e-6


def test_distance_derivatives_match_finite_differences():
    y, z = (2.0, 0.3), (4.0, -0.2)
    d, grad, hess = distance_derivatives(EX, y, z, step=2e-3)
    gfd, hfd = distance_hessian_fd(EX, y, z, h=1e-2, step=2e-3)
    np.testing.assert_allclose(grad, gfd, atol=1e-6)
    np.testing.assert_allclose(hess, hfd, atol=1e-4)
    # unit gradient
    assert grad @ EX.inverse(y) @ grad == pytest.approx(1.0, abs=1e-9)


def test_hyperbolic_laplacian_of_distance_is_coth():
    rep = laplacian_of_distance(HYP, None, (0.0, 0.0), (1.0, 0.0), step=2e-3)
    assert rep.rho == pytest.approx(1.0, abs=1e-9)
    assert rep.laplacian == pytest.approx(1 / math.tanh(1.0), rel=1e-6)
    assert rep.within


def test_laplacian_rejects_cut_locus():
    with pytest.raises(CutLocusError):
        laplacian_of_distance(FLAT, None, (0.0, 0.0), (0.0, math.pi))


# --- loops and injectivity bound ----------------------------------------------


def test_flat_loop_bound_is_pi():
    assert loop_injectivity_bound(FLAT, (0.7, 0.0)).bound == pytest.approx(math.pi, abs=1e-8)


def test_example_loop_bound_at_five():
    assert loop_injectivity_bound(EX, (5.0, 0.0)).bound <= 0.75


def test_example_loop_bound_decays():
    rows = loop_bounds_table(EX, [3.0, 5.0, 8.0, 10.0, 12.0])
    b = [r["bound"] for r in rows]
    assert all(v1 < v0 for v0, v1 in zip(b, b[1:]))
    for r in rows:
        assert r["bound"] <= 1.2 * math.pi * math.sqrt(EX.warp(r["x"]))


# --- comparison profile ---------------------------------------------------------


@pytest.mark.parametrize("rho", [math.pi / 8, math.pi / 6, math.pi / 4])
def test_comparison_quadrature_matches_closed_form(rho):
    rep = hessian_comparison_check(1.0, rho)
    assert rep.profile_quadrature == pytest.approx(rep.profile_value, abs=1e-8)
    assert rep.profile_value >= rep.lower_bound
    assert rep.holds()


def test_comparison_gauss_legendre_path():
    rep = hessian_comparison_check(1.0, math.pi / 6, quadrature_n=16)
    assert rep.profile_quadrature == pytest.approx(math.sqrt(3), abs=1e-12)


def test_comparison_boundary_equality():
    assert comparison_profile(1.0, math.pi / 4) == pytest.approx(1.0, abs=1e-14)
    rep = hessian_comparison_check(1.0, math.pi / 4)
    assert rep.profile_value == pytest.approx(rep.lower_bound, abs=1e-14)


@settings(max_examples=50)
@given(st.floats(0.1, 100.0), st.floats(1e-3, 1.0))
def test_comparison_profile_dominates_lower_bound(k0, frac):
    rho = frac * math.pi / (4 * math.sqrt(k0))
    assert comparison_profile(k0, rho) >= math.pi / (4 * rho) * (1 - 1e-12)


def test_comparison_rejects_out_of_range():
    with pytest.raises(ValueError):
        hessian_comparison_check(1.0, 1.0)
    with pytest.raises(ValueError):
        hessian_comparison_check(-1.0, 0.1)
