"""Distance smoothing: integral-averaged distance and Riemannian convolution.

``SmoothedDistance`` averages rho(p0, .) over metric balls of radius
k1 = pi / (4 sqrt(k0)) with the cutoff eta as weight,

    rhobar(y) = int rho(p0, z) eta(rho(y, z)/k1) dz / int eta(rho(y, z)/k1) dz,

and truncates it to rhobar_a = rhobar (1 - eta(rhobar / a)).  Derivatives
are obtained by differentiating under the integral sign, with the gradient
and Hessian of rho(., z) supplied by the Jacobi fields of the shooting
kernel; a finite-difference path is kept as a cross-check.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate, stats

from . import kernels
from .cutoff import eta
from .geodesics import TWO_PI, distance, kernel_spec, loop_injectivity_bound
from .geometry import WarpedMetric, curvature_bound, curvature_bundle

log = logging.getLogger(__name__)

DEN_FLOOR = 1e-12


class IntegrationError(RuntimeError):
    """Quadrature produced a vanishing normaliser."""


# ---------------------------------------------------------------------------
# rho(p0, .) lookup table


class DistanceTable:
    """Bilinear table of rho(p0, z) over (x_z, |th_z - th_0|), built row by row."""

    def __init__(self, metric: WarpedMetric, p0=(0.0, 0.0), hx: float = 0.04,
                 ntheta: int = 33, step: float = 0.02, nscan: int = 24):
        self.metric = metric
        self.p0 = (float(p0[0]), float(p0[1]))
        self.hx = hx
        self.dth = np.linspace(0.0, math.pi, ntheta)
        self.step = step
        self.nscan = nscan
        self._rows: dict[int, np.ndarray] = {}
        self._spec = kernel_spec(metric)

    def _row(self, i: int) -> np.ndarray:
        row = self._rows.get(i)
        if row is None:
            m, x0 = self.metric, self.p0[0]
            xq = i * self.hx
            row = np.empty(len(self.dth))
            sq = min(math.sqrt(m.warp(x0)), math.sqrt(m.warp(xq)))
            for j, th in enumerate(self.dth):
                best = math.inf
                for Th in (th, TWO_PI - th):
                    smax = 1.01 * (abs(xq - x0) + sq * Th) + 4 * self.step
                    r = kernels.class_distance(*self._spec, x0, xq, Th, self.step, m.L, smax,
                                               self.nscan)
                    if r[4] == kernels.OK:
                        best = min(best, r[0])
                row[j] = best
            self._rows[i] = row
        return row

    def __call__(self, x, th):
        x = np.asarray(x, float)
        d = np.abs(np.remainder(np.asarray(th, float) - self.p0[1] + math.pi, TWO_PI) - math.pi)
        t = x / self.hx
        i = np.floor(t).astype(int)
        fx = t - i
        tj = d / self.dth[1]
        j = np.minimum(np.floor(tj).astype(int), len(self.dth) - 2)
        fj = tj - j
        out = np.empty(x.shape)
        for ii in np.unique(i):
            m = i == ii
            r0, r1 = self._row(int(ii)), self._row(int(ii) + 1)
            jj, ft = j[m], fj[m]
            lo = r0[jj] * (1 - ft) + r0[jj + 1] * ft
            hi = r1[jj] * (1 - ft) + r1[jj + 1] * ft
            out[m] = lo * (1 - fx[m]) + hi * fx[m]
        return out


# ---------------------------------------------------------------------------
# integral-averaged distance


@dataclass
class SmoothedValue:
    y: tuple
    rho: float  # rho(p0, y)
    rhobar: float
    rhobar_a: float
    grad: np.ndarray
    hess: np.ndarray
    grad_a: np.ndarray
    hess_a: np.ndarray
    nodes: int


@dataclass
class SmoothedDistance:
    metric: WarpedMetric
    base_point: tuple = (0.0, 0.0)
    k0: float | None = None
    a: float | None = None
    n: int = 64
    step: float | None = None
    nscan: int = 12
    table: DistanceTable | None = None
    cache: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.k0 is None:
            self.k0 = curvature_bound(self.metric)
        self.k1 = math.pi / (4 * math.sqrt(self.k0))
        if self.step is None:
            self.step = self.k1 / 32
        if self.table is None:
            self.table = DistanceTable(self.metric, self.base_point)
        if self.a is not None and self.a < self.a_min:
            raise ValueError(f"a={self.a} below max(1, 3 pi/(4 sqrt k0)) = {self.a_min}")

    @property
    def a_min(self) -> float:
        return max(1.0, 3 * self.k1)

    def lattice(self, y, margin: float = 0.0):
        """Midpoint nodes and weights covering B(y, k1 + margin)."""
        m, r = self.metric, self.k1 + margin
        xy, thy = float(y[0]), float(y[1])
        if abs(xy) + r > m.L:
            raise ValueError(f"y={y} closer than {r:.3g} to the domain boundary")
        hx = 2 * self.k1 / self.n
        i0, i1 = math.floor((xy - r) / hx), math.ceil((xy + r) / hx)
        xs = (np.arange(i0, i1) + 0.5) * hx
        fs = [m.warp(float(v)) for v in np.linspace(xy - r, xy + r, 65)]
        fmin, fmax = min(fs), max(fs)
        W = min(math.pi, 1.0001 * r / math.sqrt(fmin))
        # roughly square cells in the metric
        nth = max(8, math.ceil(2 * W * math.sqrt(fmax) / hx))
        ht = 2 * W / nth
        ths = thy - W + (np.arange(nth) + 0.5) * ht
        X, T = np.meshgrid(xs, ths, indexing="ij")
        sf = np.sqrt(np.array([m.warp(float(v)) for v in xs]))
        wts = np.broadcast_to((sf * hx * ht)[:, None], X.shape)
        return X.ravel(), T.ravel(), np.ascontiguousarray(wts).ravel(), fmin

    def _ball(self, y, X, T, fmin):
        return kernels.ball_distances(*kernel_spec(self.metric), float(y[0]), X,
                                      T - float(y[1]), self.step, self.metric.L, self.k1,
                                      fmin, self.nscan)

    def _integrals(self, y, lattice=None, derivs=True):
        X, T, wts, fmin = lattice if lattice is not None else self.lattice(y)
        rho, alpha, ratio, sgn = self._ball(y, X, T, fmin)
        inside = np.isfinite(rho)
        X, T, wts = X[inside], T[inside], wts[inside]
        rho, alpha, ratio, sgn = rho[inside], alpha[inside], ratio[inside], sgn[inside]
        s = rho / self.k1
        e0, e1, e2 = eta(s, 0), eta(s, 1), eta(s, 2)
        r0 = self.table(X, T)
        den = float(np.dot(e0, wts))
        if den < DEN_FLOOR:
            raise IntegrationError(f"vanishing normaliser at y={y}")
        rb = float(np.dot(r0 * e0, wts)) / den
        if not derivs:
            return rb, None, None, int(inside.sum())
        sf = math.sqrt(self.metric.warp(float(y[0])))
        ca, sa = np.cos(alpha), np.sin(alpha)
        g = np.stack([-ca, -sgn * sf * sa], axis=1)  # d_y rho(y, z)
        nv = np.stack([-sa, sgn * sf * ca], axis=1)
        gg = g[:, :, None] * g[:, None, :]
        hh = ratio[:, None, None] * nv[:, :, None] * nv[:, None, :]
        k1 = self.k1
        w1 = e1 / k1 * wts
        dD = np.einsum("n,ni->i", w1, g)
        dN = np.einsum("n,ni->i", w1 * r0, g)
        d2 = (e2 / k1**2 * wts)[:, None, None] * gg + w1[:, None, None] * hh
        d2D = d2.sum(axis=0)
        d2N = np.einsum("n,nij->ij", r0, d2)
        grad = (dN - rb * dD) / den
        hess = (d2N - rb * d2D - np.outer(grad, dD) - np.outer(dD, grad)) / den
        return rb, grad, hess, int(inside.sum())

    def truncate(self, rb, grad=None, hess=None):
        """rhobar_a and its derivatives from rhobar by the chain rule."""
        if self.a is None:
            return rb, grad, hess
        a = self.a
        e0, e1, e2 = (float(eta(rb / a, k)) for k in range(3))
        val = rb * (1 - e0)
        if grad is None:
            return val, None, None
        c1 = 1 - e0 - rb * e1 / a
        c2 = -2 * e1 / a - rb * e2 / a**2
        return val, c1 * grad, c1 * hess + c2 * np.outer(grad, grad)

    def raw(self, y, derivs: bool = True, method: str = "analytic"):
        """Cached (rho(p0, y), rhobar, grad, hess, nodes), independent of ``a``."""
        key = (round(float(y[0]), 14), round(float(y[1]), 14), derivs, method)
        hit = self.cache.get(key)
        if hit is None:
            if method == "analytic":
                rb, g, H, nodes = self._integrals(y, derivs=derivs)
            elif method == "fd":
                rb, g, H, nodes = self._fd(y)
            else:
                raise ValueError(f"unknown derivative method {method!r}")
            rho = distance(self.metric, self.base_point, y).value
            hit = self.cache[key] = (rho, rb, g, H, nodes)
        return hit

    def evaluate(self, y, derivs: bool = True, method: str = "analytic") -> SmoothedValue:
        rho, rb, g, H, nodes = self.raw(y, derivs, method)
        ra, ga, Ha = self.truncate(rb, g, H)
        return SmoothedValue(tuple(map(float, y)), rho, rb, ra, g, H, ga, Ha, nodes)

    def with_truncation(self, a: float) -> "SmoothedDistance":
        """Same smoothing (shared table and cache) with truncation scale ``a``."""
        return SmoothedDistance(self.metric, self.base_point, self.k0, a, self.n, self.step,
                                self.nscan, self.table, self.cache)

    def _fd(self, y, h: float | None = None):
        """Covariant central differences of rhobar on a lattice frozen at y."""
        h = 1e-2 * self.k1 if h is None else h
        lat = self.lattice(y, margin=2 * h)
        x0, t0 = float(y[0]), float(y[1])
        f = {}
        for i in (-1, 0, 1):
            for j in (-1, 0, 1):
                f[i, j] = self._integrals((x0 + i * h, t0 + j * h), lattice=lat, derivs=False)[0]
        gx = (f[1, 0] - f[-1, 0]) / (2 * h)
        gt = (f[0, 1] - f[0, -1]) / (2 * h)
        hxx = (f[1, 0] - 2 * f[0, 0] + f[-1, 0]) / h**2
        htt = (f[0, 1] - 2 * f[0, 0] + f[0, -1]) / h**2
        hxt = (f[1, 1] - f[1, -1] - f[-1, 1] + f[-1, -1]) / (4 * h**2)
        grad = np.array([gx, gt])
        gam = curvature_bundle(self.metric, x0).christoffel
        hess = np.array([[hxx, hxt], [hxt, htt]]) - np.einsum("kij,k->ij", gam, grad)
        return f[0, 0], grad, hess, 0


def smoothed_distance(sd: SmoothedDistance, y) -> tuple[float, float]:
    """(rhobar(y), rhobar_a(y))."""
    v = sd.evaluate(y, derivs=False)
    return v.rhobar, v.rhobar_a


def norms(metric: WarpedMetric, y, grad, hess) -> tuple[float, float]:
    """|grad|_h and |hess|_h for covariant arrays at y in a diagonal chart."""
    f = metric.warp(float(y[0]))
    gn = math.sqrt(grad[0] ** 2 + grad[1] ** 2 / f)
    hn = math.sqrt(hess[0, 0] ** 2 + 2 * hess[0, 1] ** 2 / f + hess[1, 1] ** 2 / f**2)
    return gn, hn


def sample_points(metric: WarpedMetric, n: int, seed: int, x_range=(-12.0, 12.0)):
    """Seeded scrambled-Halton points in x_range x [-pi, pi)."""
    u = stats.qmc.Halton(d=2, scramble=True, seed=seed).random(n)
    x = x_range[0] + (x_range[1] - x_range[0]) * u[:, 0]
    th = -math.pi + TWO_PI * u[:, 1]
    return [(float(a), float(b)) for a, b in zip(x, th)]


# ---------------------------------------------------------------------------
# Riemannian convolution


def _psi_profile(s):
    return eta(s, 0)


class GreenWuKernel:
    """Polar tangent-space quadrature for f_eps(p) = eps^-2 int fn(exp_p v) psi(|v|/eps) dv."""

    def __init__(self, nr: int = 48, nphi: int = 64):
        self.nr, self.nphi = nr, nphi
        r = (np.arange(nr) + 0.5) / nr
        self.phi = TWO_PI * np.arange(nphi) / nphi
        self.r = r
        # normalise the discrete rule so that int psi(|v|) dv = 1 exactly
        self.c = 1.0 / (TWO_PI * float(np.sum(_psi_profile(r) * r)) / nr)
        exact = 2 * math.pi * integrate.quad(lambda s: float(_psi_profile(s)) * s, 0, 1)[0]
        self.normalisation_error = abs(self.c * exact - 1.0)

    def geodesic_polar(self, metric: WarpedMetric, p, eps: float):
        """Arrays (r, phi, x, th, A, B) on the polar grid of radius eps at p."""
        x0, t0 = float(p[0]), float(p[1])
        if abs(x0) + eps > metric.L:
            raise ValueError(f"eps={eps} exceeds the working-domain margin at x={x0}")
        spec = kernel_spec(metric)
        h = eps / (2 * self.nr)
        out = np.empty((self.nphi, self.nr, 4))
        for k, ph in enumerate(self.phi):
            path, status = kernels.geodesic_path(*spec, x0, t0, float(ph), eps, h, metric.L)
            if status != kernels.OK:
                raise ValueError(f"geodesic from {p} left the working domain")
            path = np.asarray(path)[1 : 2 * self.nr : 2]
            out[k] = path[:, [1, 2, 5, 6]]
        return out

    def convolve(self, fn, metric: WarpedMetric, p, eps: float) -> float:
        if eps <= 0:
            raise ValueError("eps must be positive")
        pts = self.geodesic_polar(metric, p, eps)
        vals = fn(pts[..., 0], pts[..., 1])
        w = self.c * _psi_profile(self.r) * self.r / self.nr * (TWO_PI / self.nphi)
        return float(np.sum(vals * w[None, :]))

    def derivative_bounds(self, fn, metric: WarpedMetric, p, eps: float) -> tuple[float, float]:
        """Kernel-side bounds on first and second derivatives of f_eps at p.

        eps^-2 int |fn(q)| |d_p psi(rho(p,q)/eps)| dq and the same with the
        covariant Hessian of the kernel; dq = B(r) dr dphi in geodesic polar
        coordinates, Hess_p rho = A/B normal to the radial geodesic.
        """
        pts = self.geodesic_polar(metric, p, eps)
        vals = np.abs(fn(pts[..., 0], pts[..., 1]))
        A, B = pts[..., 2], pts[..., 3]
        s = self.r
        p1 = self.c * eta(s, 1) / eps
        p2 = self.c * eta(s, 2) / eps**2
        d1 = np.abs(p1)[None, :] * np.ones_like(A)
        d2 = np.sqrt(p2[None, :] ** 2 + (p1[None, :] * A / B) ** 2)
        dq = B * (eps / self.nr) * (TWO_PI / self.nphi)
        return (float(np.sum(vals * d1 * dq)) / eps**2, float(np.sum(vals * d2 * dq)) / eps**2)


def green_wu_convolve(fn, p, eps: float, metric: WarpedMetric, kernel: GreenWuKernel | None = None):
    """Riemannian convolution of the scalar field ``fn(x, th)`` at ``p``."""
    return (kernel or GreenWuKernel()).convolve(fn, metric, p, eps)


# ---------------------------------------------------------------------------
# reports


def _slope(x, y) -> float:
    x, y = np.asarray(x, float), np.asarray(y, float)
    if len(x) < 2 or np.ptp(x) == 0:
        return 0.0
    return float(np.polyfit(x, y, 1)[0])


@dataclass
class DerivativeBoundReport:
    samples: list
    rho: np.ndarray
    grad_norms: np.ndarray
    hess_norms: np.ndarray
    method: str
    skipped: list = field(default_factory=list)

    @property
    def trend_slope(self) -> float:
        return _slope(self.rho, self.hess_norms)

    @property
    def grad_slope(self) -> float:
        return _slope(self.rho, self.grad_norms)

    def rows(self) -> list[dict]:
        return [{"rho": float(r), "grad_norm": float(g), "hess_norm": float(h),
                 "method": self.method}
                for r, g, h in zip(self.rho, self.grad_norms, self.hess_norms)]


def derivative_bound_report(sd: SmoothedDistance, samples, h: WarpedMetric | None = None,
                            method: str = "analytic") -> DerivativeBoundReport:
    """|grad rhobar_a|_h and |Hess rhobar_a|_h at the samples."""
    h = h or sd.metric
    rho, gn, hn, used, skipped = [], [], [], [], []
    for y in samples:
        try:
            v = sd.evaluate(y, method=method)
        except ValueError as exc:
            log.warning("skipping sample %s: %s", y, exc)
            skipped.append(tuple(y))
            continue
        g, H = norms(h, y, v.grad_a, v.hess_a)
        rho.append(v.rho)
        gn.append(g)
        hn.append(H)
        used.append(tuple(y))
    return DerivativeBoundReport(used, np.array(rho), np.array(gn), np.array(hn),
                                 "rhobar_a", skipped)


def green_wu_report(metric: WarpedMetric, fn, xs, rho_fn=None,
                    kernel: GreenWuKernel | None = None) -> DerivativeBoundReport:
    """Kernel-side derivative bounds of the convolution with eps = loop bound / 2."""
    kernel = kernel or GreenWuKernel()
    rho, gn, hn, pts = [], [], [], []
    for x in xs:
        p = (float(x), 0.0)
        eps = 0.5 * loop_injectivity_bound(metric, p).bound
        g, H = kernel.derivative_bounds(fn, metric, p, eps)
        rho.append(float(rho_fn(p)) if rho_fn else float(x))
        gn.append(g)
        hn.append(H)
        pts.append(p)
    return DerivativeBoundReport(pts, np.array(rho), np.array(gn), np.array(hn), "green_wu")
