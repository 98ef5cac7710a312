"""Compiled vs pure-Python geodesic kernels.

    python benchmarks/bench_kernels.py [--repeat N]

Times the three hot paths (single shot, one winding-class distance solve,
a batch of ball distances) on the example manifold and checks that both
backends agree to roundoff.
"""
import argparse
import math
import time

import numpy as np

from geolab import geometry as G
from geolab.geodesics import kernel_spec
from geolab.kernels import backend


def _cases(spec, L):
    xs = np.linspace(2.0, 3.0, 32)
    return {
        "geodesic_path": lambda k: k.geodesic_path(*spec, 2.0, 0.0, 0.7, 10.0, 0.01, L),
        "shoot": lambda k: k.shoot(*spec, 2.0, 0.7, 1.0, 0.01, L, 10.0),
        "class_distance": lambda k: k.class_distance(*spec, 2.0, 5.0, 1.0, 0.01, L, 10.0, 24),
        "ball_distances": lambda k: k.ball_distances(*spec, 2.0, xs, np.full_like(xs, 0.5),
                                                     0.02, L, 3.0, 0.0, 12),
    }


def _time(fn, repeat):
    best = math.inf
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        best = min(best, time.perf_counter() - t0)
    return best, out


def _max_dev(a, b) -> float:
    a = a if isinstance(a, tuple) else (a,)
    b = b if isinstance(b, tuple) else (b,)
    dev = 0.0
    for u, v in zip(a, b):
        u, v = np.asarray(u, float), np.asarray(v, float)
        fin = np.isfinite(u) & np.isfinite(v)
        if not np.array_equal(np.isfinite(u), np.isfinite(v)):
            return math.inf
        dev = max(dev, float(np.max(np.abs(u[fin] - v[fin]), initial=0.0)))
    return dev


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args(argv)
    m = G.WarpedMetric(G.example())
    spec = kernel_spec(m)
    py = backend("python")
    try:
        cy = backend("cython")
    except ImportError:
        print("compiled extension not built; run `pip install -e . --no-build-isolation`")
        return 1
    print(f"{'kernel':<16}{'python [s]':>12}{'cython [s]':>12}{'speedup':>10}{'max dev':>11}")
    for name, fn in _cases(spec, m.L).items():
        tp, op = _time(lambda: fn(py), max(1, args.repeat // 5))
        tc, oc = _time(lambda: fn(cy), args.repeat)
        print(f"{name:<16}{tp:>12.4g}{tc:>12.4g}{tp / tc:>10.1f}{_max_dev(op, oc):>11.2g}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
