"""Geodesics, distances, loop bounds and Hessian comparison on warped cylinders.

Geodesics of ``dx^2 + f(x) dth^2`` are integrated together with the two
normal Jacobi fields ``A`` (A(0)=1, A'(0)=0) and ``B`` (B(0)=0, B'(0)=1).
At the far end of a minimising geodesic of length ``rho`` from ``y`` to
``z`` the ratio ``A(rho)/B(rho)`` is the Hessian of ``rho(., z)`` at ``y``
in the direction normal to the geodesic.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate

from . import kernels
from .geometry import DiagonalMetricField, GeometryError, WarpedMetric, curvature_bundle

TWO_PI = 2.0 * math.pi
NEAR_CUT_RTOL = 1e-4


class ConvergenceError(RuntimeError):
    """Shooting failed to bracket or converge."""


class CutLocusError(ValueError):
    """A query point sits (numerically) on the cut locus."""


def kernel_spec(metric: WarpedMetric):
    return metric.warp.kernel_spec(L=metric.L)


@dataclass
class Geodesic:
    start: tuple
    direction: float
    samples: np.ndarray  # columns: s, x, th, x', th', A, B
    clairaut: float
    partial: bool = False

    @property
    def endpoint(self):
        return float(self.samples[-1, 1]), float(self.samples[-1, 2])

    def speed_error(self, metric: WarpedMetric) -> float:
        s = self.samples
        f = np.array([metric.warp(x) for x in s[:, 1]])
        return float(np.max(np.abs(s[:, 3] ** 2 + f * s[:, 4] ** 2 - 1.0)))

    def clairaut_drift(self, metric: WarpedMetric) -> float:
        s = self.samples
        f = np.array([metric.warp(x) for x in s[:, 1]])
        return float(np.max(np.abs(f * s[:, 4] - self.clairaut)))


def shoot_geodesic(metric: WarpedMetric, start, angle: float, length: float,
                   step: float = 2.5e-3) -> Geodesic:
    """Unit-speed geodesic from ``start`` at angle ``angle`` against d/dx."""
    if step <= 0:
        raise ValueError("step must be positive")
    x0, th0 = map(float, start)
    f0 = metric.warp(x0)
    if not f0 > 0:
        raise GeometryError(f"warp not positive at x={x0}")
    samples, status = kernels.geodesic_path(*kernel_spec(metric), x0, th0, float(angle),
                                            float(length), float(step), float(metric.L))
    return Geodesic((x0, th0), float(angle), np.asarray(samples),
                    math.sqrt(f0) * math.sin(angle), partial=status != kernels.OK)


@dataclass
class DistanceResult:
    value: float
    winding: int
    minimizer_count: int
    near_cut: bool
    alpha: float = 0.0
    sign: float = 1.0
    jacobi_ratio: float = 0.0
    candidates: dict = field(default_factory=dict)


def _upper_bound(metric, xp, xq, Theta):
    return abs(xq - xp) + min(math.sqrt(metric.warp(xp)), math.sqrt(metric.warp(xq))) * abs(Theta)


def distance(metric: WarpedMetric, p, q, windings: int = 2, step: float = 1e-2,
             nscan: int = 24) -> DistanceResult:
    """Riemannian distance between ``p`` and ``q`` by shooting per winding class."""
    (xp, thp), (xq, thq) = map(lambda v: tuple(map(float, v)), (p, q))
    for xv in (xp, xq):
        if abs(xv) > metric.L:
            raise GeometryError(f"point x={xv} outside the working domain |x| <= {metric.L}")
    spec = kernel_spec(metric)
    dth = math.remainder(thq - thp, TWO_PI)
    shift = round((thq - thp - dth) / TWO_PI)
    cands = {}
    for w in range(-windings, windings + 1):
        Theta = dth + TWO_PI * w
        smax = 1.01 * _upper_bound(metric, xp, xq, Theta) + 4 * step
        r = kernels.class_distance(*spec, xp, xq, abs(Theta), step, metric.L, smax, nscan)
        if r[4] == kernels.OK:
            cands[w + shift] = (r[0], r[1], math.copysign(1.0, Theta) if Theta else 1.0, r[3])
    if not cands:
        raise ConvergenceError(f"no winding class between {p} and {q} converged "
                               f"(windings={windings}, nscan={nscan}, step={step})")
    best = min(cands, key=lambda k: cands[k][0])
    val, alpha, sgn, ratio = cands[best]
    scale = max(val, 1e-12)
    count = sum(1 for v in cands.values() if abs(v[0] - val) <= NEAR_CUT_RTOL * scale)
    return DistanceResult(val, best, count, count >= 2 and val > 0, alpha, sgn, ratio,
                          {k: v[0] for k, v in cands.items()})


def distance_derivatives(metric: WarpedMetric, y, z, **kw):
    """(rho, dρ, ∇²ρ) of ``y -> rho(y, z)`` at ``y`` as covariant arrays.

    Uses the Jacobi ratio of the minimising geodesic from y to z.
    """
    d = distance(metric, y, z, **kw)
    sf = math.sqrt(metric.warp(float(y[0])))
    ca, sa = math.cos(d.alpha), math.sin(d.alpha)
    grad = -np.array([ca, d.sign * sf * sa])
    nrm = np.array([-sa, d.sign * sf * ca])
    return d, grad, d.jacobi_ratio * np.outer(nrm, nrm)


def _d1_weights():
    return np.array([1.0, -8.0, 0.0, 8.0, -1.0]) / 12.0


def distance_hessian_fd(metric: WarpedMetric, y, z, h: float = 1e-2, **kw):
    """Covariant Hessian of ``rho(., z)`` at ``y`` by 5-point finite differences."""
    y = np.asarray(y, float)
    offs = np.arange(-2, 3)

    def rho(dx, dth):
        return distance(metric, (y[0] + dx, y[1] + dth), z, **kw).value

    c1 = _d1_weights()
    c2 = np.array([-1.0, 16.0, -30.0, 16.0, -1.0]) / 12.0
    gx = sum(c * rho(o * h, 0.0) for c, o in zip(c1, offs) if c) / h
    gt = sum(c * rho(0.0, o * h) for c, o in zip(c1, offs) if c) / h
    r0 = rho(0.0, 0.0)
    hxx = sum(c * (rho(o * h, 0.0) if o else r0) for c, o in zip(c2, offs)) / h**2
    htt = sum(c * (rho(0.0, o * h) if o else r0) for c, o in zip(c2, offs)) / h**2
    hxt = sum(ci * cj * rho(oi * h, oj * h) for ci, oi in zip(c1, offs) for cj, oj in zip(c1, offs)
              if ci and cj) / h**2
    grad = np.array([gx, gt])
    gam = curvature_bundle(metric, float(y[0])).christoffel
    hess = np.array([[hxx, hxt], [hxt, htt]]) - np.einsum("kij,k->ij", gam, grad)
    return grad, hess


@dataclass
class LoopBound:
    x: float
    bound: float
    loop_length: float
    alpha: float
    found: bool


def loop_injectivity_bound(metric: WarpedMetric, p, step: float = 1e-2, nscan: int = 24,
                           max_length: float | None = None) -> LoopBound:
    """Half the length of the shortest winding-one geodesic loop at ``p``."""
    xp = float(p[0])
    if max_length is None:
        max_length = 1.01 * metric.fiber_length(xp) + 4 * step
    r = kernels.class_distance(*kernel_spec(metric), xp, xp, TWO_PI, step, metric.L,
                               max_length, nscan)
    if r[4] != kernels.OK:
        return LoopBound(xp, math.inf, math.inf, math.nan, False)
    return LoopBound(xp, 0.5 * r[0], r[0], r[1], True)


def loop_bounds_table(metric: WarpedMetric, xs, **kw) -> list[dict]:
    return [{"x": float(x), "bound": loop_injectivity_bound(metric, (x, 0.0), **kw).bound}
            for x in xs]


@dataclass
class ComparisonReport:
    rho: float
    k0: float
    profile_value: float
    profile_quadrature: float
    lower_bound: float
    hessian_orthogonal: float | None = None

    def holds(self, rtol: float = 1e-12) -> bool:
        return self.profile_value >= self.lower_bound * (1 - rtol)


def comparison_profile(k0: float, rho):
    """sqrt(k0) sin(2 sqrt(k0) rho) / (2 sin^2(sqrt(k0) rho)) = sqrt(k0)/tan(sqrt(k0) rho)."""
    s = math.sqrt(k0)
    return s * np.sin(2 * s * rho) / (2 * np.sin(s * rho) ** 2)


def hessian_comparison_check(k0: float, rho: float, quadrature_n: int | None = None,
                             measured: float | None = None) -> ComparisonReport:
    """Index-form comparison value at radius ``rho`` for curvature bound ``k0``.

    The quadrature path integrates |f'|^2 - k0 f^2 over [0, rho] with
    f(s) = sin(sqrt(k0) s)/sin(sqrt(k0) rho): Gauss-Legendre with
    ``quadrature_n`` nodes if given, adaptive quad otherwise.
    """
    if k0 <= 0:
        raise ValueError("k0 must be positive")
    rmax = math.pi / (4 * math.sqrt(k0))
    if not 0 < rho <= rmax * (1 + 1e-14):
        raise ValueError(f"rho={rho} outside (0, pi/(4 sqrt(k0))] = (0, {rmax}]")
    s = math.sqrt(k0)
    den = math.sin(s * rho) ** 2

    def integrand(t):
        return (k0 * np.cos(s * t) ** 2 - k0 * np.sin(s * t) ** 2) / den

    if quadrature_n:
        nodes, wts = np.polynomial.legendre.leggauss(int(quadrature_n))
        quad = 0.5 * rho * float(np.dot(wts, integrand(0.5 * rho * (nodes + 1))))
    else:
        quad = integrate.quad(integrand, 0.0, rho, epsabs=1e-14, epsrel=1e-13)[0]
    return ComparisonReport(rho, k0, float(comparison_profile(k0, rho)), quad,
                            math.pi / (4 * rho), measured)


@dataclass
class LaplacianReport:
    laplacian: float
    correction: float
    rho: float
    lower: float
    upper: float

    @property
    def within(self) -> bool:
        return self.lower <= self.laplacian <= self.upper


def laplacian_of_distance(g0: WarpedMetric, gt: DiagonalMetricField | None, p0, q, t: float = 0.0,
                          C: float = 1.0, **kw) -> LaplacianReport:
    """Laplacian of ``rho(p0, .)`` at ``q`` under g(t), via the g(0) Hessian.

    Delta_t rho = g^{ij}(t) (nabla^0_ij rho - (Gamma(t) - Gamma(0))^k_ij d_k rho);
    the bound window is -C sqrt(t) <= Delta_t rho <= C (1 + 1/rho).
    """
    d, grad, hess = distance_derivatives(g0, q, p0, **kw)
    if d.near_cut:
        raise CutLocusError(f"{q} is near the cut locus of {p0}")
    if d.value <= 0:
        raise ValueError("q coincides with p0")
    gam0 = curvature_bundle(g0, float(q[0])).christoffel
    if gt is None:
        ginv, dgam = g0.inverse(q), np.zeros((2, 2, 2))
    else:
        ginv = np.linalg.inv(gt.matrix(q))
        dgam = gt.christoffel(q) - gam0
    corr = -float(np.einsum("ij,kij,k->", ginv, dgam, grad))
    lap = float(np.einsum("ij,ij->", ginv, hess)) + corr
    return LaplacianReport(lap, corr, d.value, -C * math.sqrt(max(t, 0.0)), C * (1 + 1 / d.value))
