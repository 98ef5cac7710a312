import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from geolab import geometry as G
from geolab.conformal import (ConformalFactor, RescaledMetric, conformal_christoffel,
                              conformal_curvature, decay_check, rescaled_gauss_direct,
                              riemann_tensor, rm_norm_sq)
from geolab.mollify import SmoothedDistance

EX = G.WarpedMetric(G.example())
HYP = G.WarpedMetric(G.hyperbolic())


def _synthetic(base):
    # psi = 0.1 x^2 + 0.3 sin(th) + 0.05 x cos(th)
    return ConformalFactor.synthetic(
        base,
        lambda x, t: 0.1 * x * x + 0.3 * math.sin(t) + 0.05 * x * math.cos(t),
        lambda x, t: (0.2 * x + 0.05 * math.cos(t), 0.3 * math.cos(t) - 0.05 * x * math.sin(t)),
        lambda x, t: ((0.2, -0.05 * math.sin(t)),
                      (-0.05 * math.sin(t), -0.3 * math.sin(t) - 0.05 * x * math.cos(t))))


def _laplacian_closed_form(base, x, t):
    f, f1, _ = base.warp.all(x)
    pxx, px = 0.2, 0.2 * x + 0.05 * math.cos(t)
    ptt = -0.3 * math.sin(t) - 0.05 * x * math.cos(t)
    return pxx + f1 / (2 * f) * px + ptt / f


def test_surface_norm_convention():
    for x in (1.5, 3.0):
        p = (x, 0.2)
        R = riemann_tensor(EX, p)
        K = G.curvature_bundle(EX, x).gauss
        assert rm_norm_sq(R, EX.inverse(p)) == pytest.approx(2 * K * K, rel=1e-12)


@settings(max_examples=30, deadline=None)
@given(st.floats(-6, 6), st.floats(-math.pi, math.pi))
def test_transformation_law_matches_direct_curvature(x, t):
    fac = _synthetic(EX)
    p = (x, t)
    law = conformal_curvature(EX, fac, p).gauss
    direct = rescaled_gauss_direct(EX, fac, p)
    assert law == pytest.approx(direct, rel=1e-9, abs=1e-12)


@pytest.mark.parametrize("p", [(1.5, 0.3), (-2.0, 2.0), (4.0, -1.0)])
def test_gauss_formula_closed_form(p):
    fac = _synthetic(EX)
    K = G.curvature_bundle(EX, p[0]).gauss
    psi = fac(p)
    ref = math.exp(-psi) * (K - 0.5 * _laplacian_closed_form(EX, *p))
    assert conformal_curvature(EX, fac, p).gauss == pytest.approx(ref, rel=1e-12)


@pytest.mark.parametrize("c", [-1.0, 0.0, 2.5])
def test_constant_factor_scales_curvature(c):
    fac = ConformalFactor.constant(c)
    p = (0.4, 1.0)
    cc = conformal_curvature(HYP, fac, p)
    assert cc.gauss == pytest.approx(-math.exp(-c), rel=1e-12)
    assert cc.rm_norm == pytest.approx(math.sqrt(2) * math.exp(-c), rel=1e-12)
    assert cc.ratio == pytest.approx(math.sqrt(2), rel=1e-12)


def test_conformal_christoffel_constant_factor_unchanged():
    p = (2.0, 0.0)
    gam = conformal_christoffel(EX, ConformalFactor.constant(3.0), p)
    np.testing.assert_allclose(gam, G.curvature_bundle(EX, 2.0).christoffel, atol=1e-15)


def test_rescaled_metric_and_fiber_length():
    hm = RescaledMetric(EX, ConformalFactor.constant(2.0))
    p = (3.0, 0.0)
    np.testing.assert_allclose(hm.matrix(p), math.e**2 * EX.matrix(p))
    np.testing.assert_allclose(hm.inverse(p) @ hm.matrix(p), np.eye(2), atol=1e-14)
    assert hm.fiber_length(3.0) == pytest.approx(math.e * EX.fiber_length(3.0))


def test_no_overflow_for_large_factor():
    cc = conformal_curvature(EX, ConformalFactor.constant(700.0), (3.0, 0.0))
    assert math.isfinite(cc.rm_norm) and cc.rm_norm > 0


# --- smoothed-distance factor -------------------------------------------------------


@pytest.fixture(scope="module")
def sd():
    return SmoothedDistance(EX)


def test_smoothed_factor_law_vs_direct(sd):
    fac = ConformalFactor.from_smoothed(sd.with_truncation(8.0))
    for p in [(6.0, 0.4), (-9.0, 1.5)]:
        jet = fac.jet(p)
        law = conformal_curvature(EX, fac, p, jet).gauss
        assert law == pytest.approx(rescaled_gauss_direct(EX, fac, p, jet), rel=1e-9)


def test_smoothed_factor_scale(sd):
    s8 = sd.with_truncation(8.0)
    fac = ConformalFactor.from_smoothed(s8)
    p = (9.0, 0.2)
    assert fac(p) == pytest.approx(4 * math.sqrt(sd.k0) * s8.evaluate(p).rhobar_a)


def test_fiber_grows_under_rescaling(sd):
    rep = decay_check(EX, [8.0], [(9.0, 0.0)], sd, fiber_x=[9.0])
    fb = rep.fiber[0]
    assert fb["rescaled"] > 1e6 * fb["base"]
    assert rep.rows[0]["ratio"] == pytest.approx(rep.rows[0]["rm_norm_rescaled"]
                                                 * math.exp(rep.rows[0]["psi"]))


def test_decay_check_rejects_small_a(sd):
    with pytest.raises(ValueError):
        decay_check(EX, [0.5], [(3.0, 0.0)], sd)
