import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from geolab import geometry as G
from geolab.cutoff import CutoffProfile, eta, eta_scalar, smoothstep

EX = G.WarpedMetric(G.example())


# --- cutoff ----------------------------------------------------------------


@given(st.floats(-0.5, 0.5))
def test_eta_plateau(s):
    assert eta(s) == 1.0


@given(st.floats(1.0, 50.0))
def test_eta_vanishes_outside_unit_interval(s):
    assert eta(s) == 0.0 and eta(-s) == 0.0
    assert eta(s, 1) == 0.0 and eta(s, 2) == 0.0


@given(st.floats(-1.5, 1.5))
def test_eta_even_and_bounded(s):
    assert eta(s) == pytest.approx(eta(-s), abs=1e-15)
    assert 0.0 <= eta(s) <= 1.0


def test_eta_derivatives_match_finite_differences():
    s = np.linspace(0.55, 0.95, 9)
    h = 1e-5
    fd1 = (eta(s + h) - eta(s - h)) / (2 * h)
    fd2 = (eta(s + h) - 2 * eta(s) + eta(s - h)) / h**2
    np.testing.assert_allclose(eta(s, 1), fd1, rtol=1e-6, atol=1e-9)
    np.testing.assert_allclose(eta(s, 2), fd2, rtol=1e-4, atol=1e-6)


def test_eta_scalar_agrees_with_vector_path():
    for s in (-0.9, -0.7, 0.3, 0.6, 0.8, 1.2):
        v = eta_scalar(s)
        assert v[0] == pytest.approx(float(eta(s)), abs=1e-15)
        assert v[1] == pytest.approx(float(eta(s, 1)), rel=1e-12, abs=1e-15)
        assert v[2] == pytest.approx(float(eta(s, 2)), rel=1e-12, abs=1e-15)


def test_smoothstep_endpoints():
    assert smoothstep(0.0) == 0.0 and smoothstep(1.0) == 1.0
    assert smoothstep(0.5) == pytest.approx(0.5)


def test_cutoff_profile_phi_is_square():
    c = CutoffProfile()
    s = np.linspace(-1, 1, 11)
    np.testing.assert_allclose(c.phi(s), eta(s) ** 2)
    assert np.isfinite(c.eta_prime_sq_sup())


# --- example manifold algebra ----------------------------------------------


@pytest.mark.parametrize("x", [1.5, 2.0, 5.0])
def test_example_closed_form(x):
    b = G.curvature_bundle(EX, x)
    assert b.christoffel[0, 1, 1] == pytest.approx(x**-3, abs=1e-9)
    assert b.christoffel[1, 0, 1] == pytest.approx(-1 / x, abs=1e-9)
    assert b.rm_norm_sq == pytest.approx(8 / x**4, abs=1e-9)
    assert b.gauss == pytest.approx(-2 / x**2, abs=1e-12)


@pytest.mark.parametrize("x", [1.5, 2.0, 5.0])
def test_example_finite_difference_cross_path(x):
    a, b = G.curvature_bundle(EX, x), G.curvature_bundle_fd(EX, x)
    np.testing.assert_allclose(b.christoffel, a.christoffel, atol=1e-5)
    assert b.rm_norm_sq == pytest.approx(a.rm_norm_sq, abs=1e-5)


@pytest.mark.parametrize("x", [1.5, 2.0, 5.0])
def test_r1212_sign_convention(x):
    # R_1212 = K det g = -2/x^4 on the example manifold
    assert G.curvature_bundle(EX, x).r1212 == pytest.approx(-2 / x**4, rel=1e-12)


def test_example_warp_capped_and_positive():
    xs = np.linspace(-3, 3, 601)
    f = np.array([EX.warp(x) for x in xs])
    assert np.all(f > 0)
    big = np.abs(xs) >= 1
    np.testing.assert_allclose(f[big], xs[big] ** -2, rtol=1e-15)


def test_curvature_bound_example():
    assert G.curvature_bound(EX) == pytest.approx(35.2208, rel=1e-5)


def test_hyperbolic_constant_curvature():
    m = G.WarpedMetric(G.hyperbolic())
    for x in (-3.0, 0.0, 1.7):
        b = G.curvature_bundle(m, x)
        assert b.gauss == pytest.approx(-1.0, abs=1e-12)
        assert b.rm_norm_sq == pytest.approx(2.0, abs=1e-11)


def test_flat_is_flat():
    b = G.curvature_bundle(G.WarpedMetric(G.flat()), 0.3)
    assert b.rm_norm_sq == 0.0 and np.all(b.christoffel == 0)


def test_custom_profile_derivatives():
    w = G.custom(lambda x: math.cosh(x) ** 2, "cosh2")
    h = G.hyperbolic()
    for x in (-1.0, 0.4, 2.0):
        assert w.d1(x) == pytest.approx(h.d1(x), rel=1e-9)
        assert w.d2(x) == pytest.approx(h.d2(x), rel=1e-8)


def test_profile_by_name_rejects_unknown():
    with pytest.raises(G.GeometryError):
        G.profile_by_name("sphere")


def test_curvature_table_schema():
    rows = G.curvature_table(EX, [2.0])
    assert list(rows[0]) == ["x", "gamma_1_22", "gamma_2_12", "K", "rm_norm_sq"]
    assert rows[0]["rm_norm_sq"] == pytest.approx(0.5)


def test_brioschi_formula_on_warped_metric():
    for x in (1.5, 3.0):
        f, f1, f2 = EX.warp.all(x)
        K = G.orthogonal_gauss_curvature(1.0, f, 0.0, 0.0, f1, 0.0, Ethth=0.0, Gxx=f2)
        assert K == pytest.approx(-2 / x**2, rel=1e-12)


# --- equivalence and gauges --------------------------------------------------


@settings(max_examples=25, deadline=None)
@given(st.floats(0.2, 5.0))
def test_equivalence_of_scaled_metric(lam):
    gt = G.DiagonalMetricField.scaled(EX, lambda x: lam, lambda x: 0.0)
    rep = G.metric_equivalence(EX, gt, [(1.0, 0.0), (3.0, 1.0), (-2.0, 2.0)])
    assert rep.c1 == pytest.approx(lam) and rep.c2 == pytest.approx(lam)
    assert rep.holds()


def test_gauge_transform_round_trip():
    gm = G.gauge_transform(EX, x_range=(-3, 3))
    x = np.linspace(-3, 3, 13)
    np.testing.assert_allclose(gm.x_of_w(gm.w_of_x(x)), x, atol=1e-9)
    f = np.array([EX.warp(v) for v in x])
    np.testing.assert_allclose(gm.f_of_x(x), f, rtol=1e-9)


def test_gauge_transform_hyperbolic_is_gudermannian():
    m = G.WarpedMetric(G.hyperbolic())
    gm = G.gauge_transform(m, x_range=(-4, 4))
    x = np.linspace(-4, 4, 9)
    np.testing.assert_allclose(gm.w_of_x(x), 2 * np.arctan(np.tanh(x / 2)), atol=1e-9)
