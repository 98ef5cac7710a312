"""Warped-product cylinder metrics g = dx^2 + f(x) dtheta^2 and their curvature.

Index convention: 0 <-> x, 1 <-> theta.  Curvature sign convention:
R(X, Y)Z = nabla_X nabla_Y Z - nabla_Y nabla_X Z - nabla_[X,Y] Z with
R_1212 = K det(g), so the Gauss curvature is K = R_1212 / det(g).
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy import linalg
from scipy.integrate import solve_ivp

from .cutoff import eta, eta_scalar

# kernel codes shared with geolab._kernels
CODE_CONST, CODE_COSH2, CODE_EXAMPLE, CODE_TABLE = 0, 1, 2, 3


class GeometryError(ValueError):
    """Raised for points outside the domain where the metric is defined."""


class GaugeError(ValueError):
    """Raised when a coordinate map is not monotone."""


def _central_diff(fn, x, h, order):
    # 6th-order central stencils
    if order == 1:
        c = (-1 / 60, 3 / 20, -3 / 4, 0.0, 3 / 4, -3 / 20, 1 / 60)
        return sum(ci * fn(x + (k - 3) * h) for k, ci in enumerate(c) if ci) / h
    c = (1 / 90, -3 / 20, 3 / 2, -49 / 18, 3 / 2, -3 / 20, 1 / 90)
    return sum(ci * fn(x + (k - 3) * h) for k, ci in enumerate(c)) / h**2


@dataclass
class WarpFunction:
    """Warp profile f with first and second derivatives.

    ``code``/``params`` identify the profile for the compiled kernels; user
    profiles are tabulated (``CODE_TABLE``) on demand.
    """

    name: str
    eval: Callable[[float], float]
    d1: Callable[[float], float]
    d2: Callable[[float], float]
    code: int = CODE_TABLE
    params: tuple = ()
    _tables: dict = field(default_factory=dict, repr=False, compare=False)

    def __call__(self, x):
        return self.eval(x)

    def all(self, x):
        return self.eval(x), self.d1(x), self.d2(x)

    def kernel_spec(self, L: float = 20.0, n: int = 8001):
        """(code, params, table) triple consumed by :mod:`geolab.kernels`."""
        p = np.zeros(4)
        p[: len(self.params)] = self.params
        if self.code != CODE_TABLE:
            return self.code, p, np.zeros((1, 3))
        key = (float(L), int(n))
        if key not in self._tables:
            xs = np.linspace(-L - 1.0, L + 1.0, n)
            tab = np.empty((n, 3))
            for i, xv in enumerate(xs):
                tab[i] = self.all(float(xv))
            if np.any(tab[:, 0] <= 0):
                raise GeometryError(f"warp {self.name!r} is not positive on [-{L}, {L}]")
            self._tables[key] = tab
        p[0], p[1] = -L - 1.0, (2 * L + 2.0) / (n - 1)
        return CODE_TABLE, p, self._tables[key]


def flat(scale: float = 1.0) -> WarpFunction:
    s = float(scale)
    if s <= 0:
        raise GeometryError("flat warp needs a positive scale")
    return WarpFunction(f"flat({s:g})", lambda x: s, lambda x: 0.0, lambda x: 0.0,
                        code=CODE_CONST, params=(s,))


def hyperbolic(scale: float = 1.0) -> WarpFunction:
    """f = scale * cosh(x)^2, constant curvature -1."""
    s = float(scale)
    return WarpFunction(
        f"hyperbolic({s:g})",
        lambda x: s * math.cosh(x) ** 2,
        lambda x: s * math.sinh(2 * x),
        lambda x: 2 * s * math.cosh(2 * x),
        code=CODE_COSH2, params=(s,))


def _example_all(x):
    e0, e1, e2 = eta_scalar(x)
    q = x * x + e0
    q1 = 2 * x + e1
    q2 = 2 + e2
    return 1.0 / q, -q1 / q**2, -q2 / q**2 + 2 * q1 * q1 / q**3


def example() -> WarpFunction:
    """f = 1/(x^2 + eta(x)): smooth, positive, and exactly |x|^-2 for |x| >= 1."""
    return WarpFunction(
        "example",
        lambda x: _example_all(x)[0],
        lambda x: _example_all(x)[1],
        lambda x: _example_all(x)[2],
        code=CODE_EXAMPLE)


def custom(fn: Callable[[float], float], name: str = "custom", h: float = 1e-3) -> WarpFunction:
    """User profile; derivatives by 6th-order central differences."""
    return WarpFunction(name, fn, lambda x: _central_diff(fn, x, h, 1),
                        lambda x: _central_diff(fn, x, h, 2))


PROFILES = {"flat": flat, "hyperbolic": hyperbolic, "example": example}


def profile_by_name(name: str, **params) -> WarpFunction:
    try:
        return PROFILES[name](**params)
    except KeyError:
        raise GeometryError(f"unknown warp profile {name!r}; choose from {sorted(PROFILES)}") from None


@dataclass
class WarpedMetric:
    warp: WarpFunction
    L: float = 20.0

    def components(self, x):
        f = self.warp(x)
        if not f > 0:
            raise GeometryError(f"warp {self.warp.name!r} is not positive at x={x}")
        return 1.0, f

    def matrix(self, p):
        _, f = self.components(p[0])
        return np.diag([1.0, f])

    def inverse(self, p):
        _, f = self.components(p[0])
        return np.diag([1.0, 1.0 / f])

    def fiber_length(self, x):
        return 2 * math.pi * math.sqrt(self.warp(x))


@dataclass
class CurvatureBundle:
    christoffel: np.ndarray  # [k, i, j] = Gamma^k_ij
    r1212: float
    ricci: np.ndarray
    gauss: float
    rm_norm_sq: float
    k0_estimate: float
    metric: np.ndarray

    @property
    def rm_norm(self):
        return math.sqrt(self.rm_norm_sq)


def _bundle_from_derivs(f, f1, f2, k0_prev=0.0):
    if not f > 0:
        raise GeometryError(f"non-positive warp value {f}")
    gam = np.zeros((2, 2, 2))
    gam[0, 1, 1] = -0.5 * f1
    gam[1, 0, 1] = gam[1, 1, 0] = 0.5 * f1 / f
    # K = -(sqrt f)''/sqrt f
    K = -(0.5 * f2 / f - 0.25 * f1 * f1 / (f * f))
    g = np.diag([1.0, f])
    r1212 = K * f
    rm_sq = 2.0 * (1.0 * (1.0 / f) * r1212) ** 2
    return CurvatureBundle(gam, r1212, K * g, K, rm_sq, max(k0_prev, math.sqrt(rm_sq)), g)


def curvature_bundle(metric: WarpedMetric, x: float, k0_prev: float = 0.0) -> CurvatureBundle:
    f, f1, f2 = metric.warp.all(x)
    return _bundle_from_derivs(f, f1, f2, k0_prev)


def curvature_bundle_fd(metric: WarpedMetric, x: float, step: float = 1e-3) -> CurvatureBundle:
    """Same bundle with f', f'' from second-order central differences of f."""
    fn = metric.warp.eval
    f = fn(x)
    f1 = (fn(x + step) - fn(x - step)) / (2 * step)
    f2 = (fn(x + step) - 2 * f + fn(x - step)) / step**2
    return _bundle_from_derivs(f, f1, f2)


def gauss_curvature(warp: WarpFunction, x):
    f, f1, f2 = warp.all(x)
    return -(0.5 * f2 / f - 0.25 * f1 * f1 / (f * f))


def curvature_bound(metric: WarpedMetric, xs=None) -> float:
    """sup |Rm| = sqrt(2)|K| over sampled x (default: dense grid on [-L, L])."""
    if xs is None:
        xs = np.linspace(-metric.L, metric.L, 40001)
    k0 = 0.0
    for xv in xs:
        k0 = max(k0, math.sqrt(2.0) * abs(gauss_curvature(metric.warp, float(xv))))
    return k0


def curvature_table(metric: WarpedMetric, xs) -> list[dict]:
    rows = []
    for xv in xs:
        b = curvature_bundle(metric, float(xv))
        rows.append({"x": float(xv), "gamma_1_22": b.christoffel[0, 1, 1],
                     "gamma_2_12": b.christoffel[1, 0, 1], "K": b.gauss,
                     "rm_norm_sq": b.rm_norm_sq})
    return rows


def orthogonal_gauss_curvature(E, G, Ex, Eth, Gx, Gth, Exx=None, Ethth=None, Gxx=None,
                               Gthth=None, Ex_th=None, Gx_th=None):
    """Gauss curvature of E dx^2 + G dtheta^2 from component derivatives.

    K = -1/(2 sqrt(EG)) [ d_x(G_x / sqrt(EG)) + d_th(E_th / sqrt(EG)) ]
    expanded with the product rule (Brioschi form for orthogonal charts).
    """
    W = math.sqrt(E * G)
    Wx = (Ex * G + E * Gx) / (2 * W)
    Wth = (Eth * G + E * Gth) / (2 * W)
    t1 = (Gxx * W - Gx * Wx) / W**2
    t2 = (Ethth * W - Eth * Wth) / W**2
    return -(t1 + t2) / (2 * W)


@dataclass
class DiagonalMetricField:
    """Metric a(x, th) dx^2 + b(x, th) dth^2 on the chart of a base metric."""

    a: Callable
    b: Callable
    a_x: Callable | None = None
    b_x: Callable | None = None

    def matrix(self, p):
        return np.diag([self.a(p[0], p[1]), self.b(p[0], p[1])])

    def christoffel(self, p):
        """Gamma^k_ij for theta-independent components (uses a_x, b_x)."""
        x, th = p
        a, b = self.a(x, th), self.b(x, th)
        ax, bx = self.a_x(x, th), self.b_x(x, th)
        gam = np.zeros((2, 2, 2))
        gam[0, 0, 0] = ax / (2 * a)
        gam[0, 1, 1] = -bx / (2 * a)
        gam[1, 0, 1] = gam[1, 1, 0] = bx / (2 * b)
        return gam

    @classmethod
    def scaled(cls, metric: WarpedMetric, lam: Callable, lam_x: Callable):
        """lam(x) * metric, theta-independent."""
        w = metric.warp
        return cls(lambda x, th: lam(x), lambda x, th: lam(x) * w(x),
                   lambda x, th: lam_x(x), lambda x, th: lam_x(x) * w(x) + lam(x) * w.d1(x))


@dataclass
class EquivalenceReport:
    c1: float
    c2: float
    where_attained: tuple

    def holds(self, tol: float = 0.0) -> bool:
        return 0 < self.c1 <= self.c2 + tol


def metric_equivalence(g0, gt, samples: Sequence) -> EquivalenceReport:
    """Smallest/largest eigenvalue of gt relative to g0 over the samples."""
    samples = list(samples)
    if not samples:
        raise ValueError("metric_equivalence needs at least one sample point")
    c1, c2 = math.inf, -math.inf
    p1 = p2 = None
    for p in samples:
        lam = linalg.eigh(np.asarray(gt.matrix(p), float), np.asarray(g0.matrix(p), float),
                          eigvals_only=True)
        if lam[0] < c1:
            c1, p1 = float(lam[0]), tuple(p)
        if lam[-1] > c2:
            c2, p2 = float(lam[-1]), tuple(p)
    return EquivalenceReport(c1, c2, (p1, p2))


@dataclass
class GaugeMap:
    """Conformal chart w(x) of dx^2 + f dth^2 = e^{2u(w)} (dw^2 + dth^2)."""

    x_range: tuple
    w_range: tuple
    w_of_x: Callable
    x_of_w: Callable
    u_of_w: Callable
    du_dw: Callable

    def f_of_x(self, x):
        return np.exp(2.0 * self.u_of_w(self.w_of_x(x)))


def _check_monotone(vals, what):
    d = np.diff(np.asarray(vals, float))
    if not (np.all(d > 0) or np.all(d < 0)):
        raise GaugeError(f"{what} is not strictly monotone")


def gauge_transform(metric: WarpedMetric, direction: str = "warped->conformal",
                    x_range=None, x_ref: float | None = None, w_ref: float = 0.0,
                    u=None, w_range=None, rtol: float = 1e-12) -> GaugeMap:
    """Coordinate change between warped and conformal gauges.

    warped->conformal: w(x) = int dx / sqrt(f), u(w) = 1/2 log f(x(w)).
    conformal->warped: given ``u`` (callable with ``u.deriv`` or a pair
    (u, du)) on ``w_range``, x(w) = int e^u dw and f(x) = e^{2u(w(x))}.
    """
    opts = dict(method="DOP853", rtol=rtol, atol=rtol, dense_output=True)
    if direction == "warped->conformal":
        lo, hi = x_range if x_range is not None else (-metric.L, metric.L)
        if x_ref is None:
            x_ref = 0.0 if lo <= 0.0 <= hi else lo
        warp = metric.warp
        for xv in np.linspace(lo, hi, 257):
            if not warp(float(xv)) > 0:
                raise GeometryError(f"warp not positive at x={xv}")
        rhs = lambda x, w: [1.0 / math.sqrt(warp(x))]
        segs = []
        if x_ref < hi:
            segs.append(solve_ivp(rhs, (x_ref, hi), [w_ref], **opts))
        if x_ref > lo:
            segs.append(solve_ivp(rhs, (x_ref, lo), [w_ref], **opts))

        def w_of_x(x):
            x = np.asarray(x, float)
            out = np.empty_like(x)
            for s in segs:
                a, b = sorted((s.t[0], s.t[-1]))
                m = (x >= a) & (x <= b)
                if np.any(m):
                    out[m] = s.sol(x[m])[0]
            return out if out.ndim else float(out)

        w_lo, w_hi = float(w_of_x(lo)), float(w_of_x(hi))
        inv_rhs = lambda w, x: [math.sqrt(warp(x[0]))]
        w_ref_ = w_ref
        isegs = []
        if w_ref_ < w_hi:
            isegs.append(solve_ivp(inv_rhs, (w_ref_, w_hi), [x_ref], **opts))
        if w_ref_ > w_lo:
            isegs.append(solve_ivp(inv_rhs, (w_ref_, w_lo), [x_ref], **opts))

        def x_of_w(w):
            w = np.asarray(w, float)
            out = np.empty_like(w)
            for s in isegs:
                a, b = sorted((s.t[0], s.t[-1]))
                m = (w >= a) & (w <= b)
                if np.any(m):
                    out[m] = s.sol(w[m])[0]
            return out if out.ndim else float(out)

        def u_of_w(w):
            xs = np.atleast_1d(x_of_w(w))
            out = np.array([0.5 * math.log(warp(float(v))) for v in xs])
            return out if np.ndim(w) else float(out[0])

        def du_dw(w):
            # du/dw = (f'/(2f)) dx/dw = f' / (2 sqrt f)
            xs = np.atleast_1d(x_of_w(w))
            out = np.array([warp.d1(float(v)) / (2 * math.sqrt(warp(float(v)))) for v in xs])
            return out if np.ndim(w) else float(out[0])

        return GaugeMap((lo, hi), (w_lo, w_hi), w_of_x, x_of_w, u_of_w, du_dw)

    if direction == "conformal->warped":
        if u is None or w_range is None:
            raise ValueError("conformal->warped needs u and w_range")
        ufun, dufun = u if isinstance(u, tuple) else (u, getattr(u, "deriv", None))
        lo, hi = w_range
        ws = np.linspace(lo, hi, 4097)
        xs_check = np.concatenate([[0.0], np.cumsum(np.exp(ufun(ws[1:])) * np.diff(ws))])
        _check_monotone(xs_check, "coordinate map x(w)")
        w_ref_ = lo if w_ref is None else w_ref
        sol = solve_ivp(lambda w, x: [math.exp(float(ufun(w)))], (lo, hi), [0.0], **opts)
        x_of_w = lambda w: sol.sol(np.asarray(w, float))[0]
        x_lo, x_hi = 0.0, float(sol.y[0, -1])
        isol = solve_ivp(lambda x, w: [math.exp(-float(ufun(w[0])))], (x_lo, x_hi), [lo], **opts)
        w_of_x = lambda x: isol.sol(np.asarray(x, float))[0]
        return GaugeMap((x_lo, x_hi), (lo, hi), w_of_x, x_of_w, ufun, dufun)

    raise ValueError(f"unknown gauge direction {direction!r}")


__all__ = [
    "WarpFunction", "WarpedMetric", "CurvatureBundle", "EquivalenceReport", "GaugeMap",
    "DiagonalMetricField", "GeometryError", "GaugeError", "flat", "hyperbolic", "example",
    "custom", "profile_by_name", "curvature_bundle", "curvature_bundle_fd", "curvature_bound",
    "curvature_table", "gauss_curvature", "metric_equivalence", "gauge_transform",
    "orthogonal_gauss_curvature", "eta",
]
