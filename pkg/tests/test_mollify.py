import math

import numpy as np
import pytest

from geolab import geometry as G
from geolab.geodesics import distance
from geolab.mollify import (DistanceTable, GreenWuKernel, SmoothedDistance, derivative_bound_report,
                            green_wu_convolve, green_wu_report, norms, sample_points,
                            smoothed_distance)

EX = G.WarpedMetric(G.example())
FLAT = G.WarpedMetric(G.flat())


@pytest.fixture(scope="module")
def sd():
    return SmoothedDistance(EX, a=1.0)


# --- distance table ------------------------------------------------------------


def test_distance_table_matches_shooting():
    tab = DistanceTable(EX)
    for x, th in [(3.1, 0.4), (-5.3, 2.0), (7.7, -1.1)]:
        ref = distance(EX, (0.0, 0.0), (x, th)).value
        assert tab(np.array([x]), np.array([th]))[0] == pytest.approx(ref, abs=2e-3)


def test_distance_table_even_in_theta():
    tab = DistanceTable(EX)
    x = np.array([2.3, 2.3])
    v = tab(x, np.array([0.7, -0.7]))
    assert v[0] == v[1]


# --- smoothed distance -----------------------------------------------------------


def test_k1_and_a_min(sd):
    assert sd.k1 == pytest.approx(math.pi / (4 * math.sqrt(35.2208)), rel=1e-5)
    assert sd.a_min == 1.0


def test_truncation_below_a_min_rejected():
    with pytest.raises(ValueError):
        SmoothedDistance(G.WarpedMetric(G.flat(100.0)), k0=1e-4, a=0.5)


@pytest.mark.parametrize("y", [(3.0, 0.5), (-6.0, 1.0), (9.0, -2.0)])
def test_sandwich(sd, y):
    v = sd.evaluate(y)
    assert v.rho - sd.k1 - 1e-3 <= v.rhobar <= v.rho + sd.k1 + 1e-3


def test_truncation_exactly_zero_near_base_point(sd):
    s8 = sd.with_truncation(8.0)
    v = s8.evaluate((2.0, 0.3))
    assert v.rhobar <= 4.0
    assert v.rhobar_a == 0.0
    assert np.all(v.grad_a == 0.0) and np.all(v.hess_a == 0.0)


def test_truncation_identity_far_out(sd):
    v = sd.with_truncation(2.0).evaluate((6.0, 0.2))
    assert v.rhobar_a == v.rhobar
    np.testing.assert_array_equal(v.grad_a, v.grad)


def test_with_truncation_shares_cache(sd):
    sd.evaluate((4.0, 0.1))
    n = len(sd.cache)
    sd.with_truncation(16.0).evaluate((4.0, 0.1))
    assert len(sd.cache) == n


def test_analytic_derivatives_match_frozen_lattice_fd(sd):
    y = (4.0, 0.3)
    a = sd.evaluate(y, method="analytic")
    f = sd.evaluate(y, method="fd")
    assert a.rhobar == pytest.approx(f.rhobar, abs=1e-6)  # lattice built with a margin
    np.testing.assert_allclose(a.grad, f.grad, atol=1e-4)
    np.testing.assert_allclose(a.hess, f.hess, atol=1e-3)


def test_gradient_unit_away_from_cut_locus(sd):
    y = (5.0, 0.2)
    v = sd.evaluate(y)
    g, _ = norms(EX, y, v.grad, v.hess)
    assert g == pytest.approx(1.0, abs=1e-2)


def test_smoothed_distance_pair(sd):
    rb, ra = smoothed_distance(sd, (3.0, 0.5))
    assert ra == rb  # a = 1 leaves rhobar > 1 untouched


def test_lattice_rejects_boundary(sd):
    with pytest.raises(ValueError):
        sd.lattice((EX.L - 0.05, 0.0))


def test_derivative_report_rows(sd):
    rep = derivative_bound_report(sd, [(3.0, 0.5), (5.0, 0.2)])
    rows = rep.rows()
    assert list(rows[0]) == ["rho", "grad_norm", "hess_norm", "method"]
    assert {r["method"] for r in rows} == {"rhobar_a"}
    assert np.all(np.isfinite(rep.hess_norms))


# --- sample points ----------------------------------------------------------------


def test_sample_points_seeded_and_in_range():
    a = sample_points(EX, 50, 3)
    b = sample_points(EX, 50, 3)
    c = sample_points(EX, 50, 4)
    assert a == b and a != c
    xs = np.array(a)
    assert np.all(np.abs(xs[:, 0]) <= 12) and np.all(np.abs(xs[:, 1]) <= math.pi)


# --- Green-Wu convolution ---------------------------------------------------------


def test_green_wu_normalisation():
    k = GreenWuKernel()
    assert k.normalisation_error < 1e-3
    val = green_wu_convolve(lambda x, th: np.full(np.shape(x), 2.5), (3.0, 0.0), 0.1, EX, k)
    assert val == pytest.approx(2.5, rel=1e-13)


def test_green_wu_reproduces_linear_on_flat():
    # radial kernel on a flat chart: affine functions are reproduced
    val = green_wu_convolve(lambda x, th: 3 * x - th, (2.0, 0.5), 0.3, FLAT)
    assert val == pytest.approx(3 * 2.0 - 0.5, abs=1e-12)


def test_green_wu_rejects_bad_eps():
    with pytest.raises(ValueError):
        green_wu_convolve(lambda x, th: x, (0.0, 0.0), 0.0, EX)


def test_green_wu_second_derivative_growth(sd):
    rep = green_wu_report(EX, sd.table, [2.0, 4.0, 8.0])
    h = rep.hess_norms
    assert h[1] / h[0] >= 2 and h[2] / h[1] >= 2
    assert list({r["method"] for r in rep.rows()}) == ["green_wu"]
