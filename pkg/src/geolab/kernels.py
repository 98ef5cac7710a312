"""Backend selection for the geodesic kernels.

The compiled extension is used when importable; set ``GEOLAB_PURE_PYTHON=1``
to force the pure-Python fallback.
"""
import os

from . import _kernels_py

if os.environ.get("GEOLAB_PURE_PYTHON", "") not in ("", "0"):
    _impl = _kernels_py
else:
    try:
        from . import _kernels as _impl
    except ImportError:  # extension not built
        _impl = _kernels_py

BACKEND = _impl.BACKEND
OK, EXIT, MAXLEN, NOROOT = 0, 1, 2, 3

warp_eval = _impl.warp_eval
geodesic_path = _impl.geodesic_path
shoot = _impl.shoot
class_distance = _impl.class_distance
ball_distances = _impl.ball_distances


def backend(name: str):
    """Module implementing the kernels for ``name`` in {'python', 'cython'}."""
    if name == "python":
        return _kernels_py
    from . import _kernels
    return _kernels
