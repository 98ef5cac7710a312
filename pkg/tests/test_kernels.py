import os
import subprocess
import sys

import numpy as np
import pytest

from geolab import geometry as G
from geolab import kernels
from geolab.geodesics import kernel_spec

py = kernels.backend("python")
try:
    cy = kernels.backend("cython")
except ImportError:  # pragma: no cover - extension not built
    cy = None

needs_ext = pytest.mark.skipif(cy is None, reason="compiled extension not built")

METRICS = [G.WarpedMetric(G.flat()), G.WarpedMetric(G.hyperbolic()), G.WarpedMetric(G.example())]


def _close(a, b, tol=1e-12):
    a = a if isinstance(a, tuple) else (a,)
    b = b if isinstance(b, tuple) else (b,)
    assert len(a) == len(b)
    for u, v in zip(a, b):
        u, v = np.asarray(u, float), np.asarray(v, float)
        np.testing.assert_array_equal(np.isfinite(u), np.isfinite(v))
        fin = np.isfinite(u)
        np.testing.assert_allclose(u[fin], v[fin], rtol=tol, atol=tol)


@needs_ext
@pytest.mark.parametrize("m", METRICS, ids=lambda m: m.warp.name)
def test_warp_eval_parity(m):
    spec = kernel_spec(m)
    for x in (-7.0, -0.8, 0.0, 0.3, 2.5, 11.0):
        _close(py.warp_eval(*spec, x), cy.warp_eval(*spec, x))


@needs_ext
@pytest.mark.parametrize("m", METRICS, ids=lambda m: m.warp.name)
def test_geodesic_path_parity(m):
    spec = kernel_spec(m)
    _close(py.geodesic_path(*spec, 1.5, 0.2, 0.7, 3.0, 0.01, m.L),
           cy.geodesic_path(*spec, 1.5, 0.2, 0.7, 3.0, 0.01, m.L))


@needs_ext
@pytest.mark.parametrize("m", METRICS, ids=lambda m: m.warp.name)
def test_shoot_and_class_distance_parity(m):
    spec = kernel_spec(m)
    _close(py.shoot(*spec, 2.0, 0.6, 0.8, 0.01, m.L, 10.0),
           cy.shoot(*spec, 2.0, 0.6, 0.8, 0.01, m.L, 10.0))
    for Theta in (0.0, 1e-12, 0.5, 3.0):
        _close(py.class_distance(*spec, 2.0, 3.5, Theta, 0.01, m.L, 12.0, 12),
               cy.class_distance(*spec, 2.0, 3.5, Theta, 0.01, m.L, 12.0, 12))


@needs_ext
def test_ball_distances_parity():
    m = METRICS[2]
    spec = kernel_spec(m)
    xs = np.linspace(2.0, 2.6, 8)
    dth = np.linspace(-0.4, 0.4, 8)
    _close(py.ball_distances(*spec, 2.2, xs, dth, 0.02, m.L, 1.0, 0.0, 12),
           cy.ball_distances(*spec, 2.2, xs, dth, 0.02, m.L, 1.0, 0.0, 12))


def test_status_codes_shared():
    assert (kernels.OK, kernels.EXIT, kernels.MAXLEN, kernels.NOROOT) == (0, 1, 2, 3)
    assert py.OK == kernels.OK


def test_pure_python_fallback_selected_by_environment():
    env = dict(os.environ, GEOLAB_PURE_PYTHON="1")
    out = subprocess.run([sys.executable, "-c", "from geolab import kernels; print(kernels.BACKEND)"],
                         env=env, capture_output=True, text=True, check=True)
    assert out.stdout.strip() == "python"


@needs_ext
def test_compiled_backend_is_default():
    env = {k: v for k, v in os.environ.items() if k != "GEOLAB_PURE_PYTHON"}
    out = subprocess.run([sys.executable, "-c", "from geolab import kernels; print(kernels.BACKEND)"],
                         env=env, capture_output=True, text=True, check=True)
    assert out.stdout.strip() == "cython"
