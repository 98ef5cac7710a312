"""Conformal rescaling h^a = e^psi h of a warped cylinder metric.

Curvature of the rescaled metric is assembled from the base curvature and
the first and second covariant derivatives of psi (full four-index
transformation law); an independent path evaluates the Gauss curvature of
the rescaled components e^psi, e^psi f directly (orthogonal-chart formula).

Norms follow the convention |Rm|^2 = 2 K^2 on surfaces, i.e. half the full
contraction R_abcd R^abcd.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .geometry import WarpedMetric, curvature_bundle, orthogonal_gauss_curvature
from .mollify import SmoothedDistance


@dataclass
class FactorJet:
    psi: float
    grad: np.ndarray  # covariant d psi
    hess: np.ndarray  # covariant Hessian w.r.t. the base metric


@dataclass
class ConformalFactor:
    """psi with its first two covariant derivatives at any point."""

    jet: Callable[[tuple], FactorJet]
    a: float | None = None
    name: str = "psi"
    source: SmoothedDistance | None = field(default=None, repr=False)

    def __call__(self, p) -> float:
        return self.jet(p).psi

    @classmethod
    def from_smoothed(cls, sd: SmoothedDistance, scale: float | None = None) -> "ConformalFactor":
        """psi_a = 4 sqrt(k0) rhobar_a."""
        c = 4 * math.sqrt(sd.k0) if scale is None else scale

        def jet(p):
            v = sd.evaluate(p)
            return FactorJet(c * v.rhobar_a, c * v.grad_a, c * v.hess_a)

        return cls(jet, sd.a, f"4sqrt(k0)*rhobar_a(a={sd.a})", sd)

    @classmethod
    def synthetic(cls, base: WarpedMetric, psi, dpsi, d2psi, name: str = "synthetic"):
        """From callables psi(x, th), partials (psi_x, psi_th), and
        second partials ((psi_xx, psi_xth), (psi_xth, psi_thth))."""

        def jet(p):
            x, th = float(p[0]), float(p[1])
            g = np.asarray(dpsi(x, th), float)
            d2 = np.asarray(d2psi(x, th), float)
            gam = curvature_bundle(base, x).christoffel
            return FactorJet(float(psi(x, th)), g, d2 - np.einsum("kij,k->ij", gam, g))

        return cls(jet, None, name)

    @classmethod
    def constant(cls, c: float) -> "ConformalFactor":
        return cls(lambda p: FactorJet(float(c), np.zeros(2), np.zeros((2, 2))), None, f"const({c})")


@dataclass
class RescaledMetric:
    base: WarpedMetric
    factor: ConformalFactor
    role: str = "target"

    def matrix(self, p):
        return math.exp(self.factor(p)) * self.base.matrix(p)

    def inverse(self, p):
        return math.exp(-self.factor(p)) * self.base.inverse(p)

    def fiber_length(self, x: float, n: int = 8) -> float:
        """Length of the fiber circle {x} x S^1 under the rescaled metric."""
        ths = 2 * math.pi * (np.arange(n) + 0.5) / n
        sf = math.sqrt(self.base.warp(x))
        return float(np.mean([math.exp(0.5 * self.factor((x, t))) for t in ths])) * 2 * math.pi * sf


def conformal_christoffel(base: WarpedMetric, factor: ConformalFactor, p, jet: FactorJet | None = None):
    """Gamma-bar^k_ij = Gamma^k_ij + (d^k_i psi_j + d^k_j psi_i - g^kl g_ij psi_l)/2."""
    jet = jet or factor.jet(p)
    gam = curvature_bundle(base, float(p[0])).christoffel
    g, ginv = base.matrix(p), base.inverse(p)
    d = np.eye(2)
    dp = jet.grad
    corr = (np.einsum("ki,j->kij", d, dp) + np.einsum("kj,i->kij", d, dp)
            - np.einsum("kl,ij,l->kij", ginv, g, dp))
    return gam + 0.5 * corr


def riemann_tensor(metric: WarpedMetric, p) -> np.ndarray:
    """R_abcd = K (h_ac h_bd - h_ad h_bc), so that R_1212 = K det h."""
    h = metric.matrix(p)
    K = curvature_bundle(metric, float(p[0])).gauss
    return K * (np.einsum("ac,bd->abcd", h, h) - np.einsum("ad,bc->abcd", h, h))


def rm_norm_sq(R: np.ndarray, hinv: np.ndarray) -> float:
    """Half the full contraction, so that surfaces give 2 K^2."""
    return 0.5 * float(np.einsum("abcd,ai,bj,ck,dl,ijkl->", R, hinv, hinv, hinv, hinv, R))


@dataclass
class ConformalCurvature:
    R: np.ndarray
    r1212: float
    gauss: float
    rm_norm: float  # w.r.t. the rescaled metric
    psi: float

    @property
    def ratio(self) -> float:
        """|Rm^a|_{h^a} e^psi."""
        return self.rm_norm * math.exp(self.psi)


def conformal_curvature(base: WarpedMetric, factor: ConformalFactor, p,
                        jet: FactorJet | None = None) -> ConformalCurvature:
    """Rescaled Riemann tensor from the four-index transformation law."""
    jet = jet or factor.jet(p)
    h = base.matrix(p)
    hinv = base.inverse(p)
    ps, dp, H = jet.psi, jet.grad, jet.hess
    grad_sq = float(dp @ hinv @ dp)
    S = 2 * H - np.outer(dp, dp)
    corr = (grad_sq * (np.einsum("ad,bc->abcd", h, h) - np.einsum("ac,bd->abcd", h, h))
            + np.einsum("ad,bc->abcd", S, h) + np.einsum("bc,ad->abcd", S, h)
            - np.einsum("bd,ac->abcd", S, h) - np.einsum("ac,bd->abcd", S, h))
    e = math.exp(ps)
    R = e * riemann_tensor(base, p) + 0.25 * e * corr
    det = e * e * float(np.linalg.det(h))
    K = R[0, 1, 0, 1] / det
    # |Rm|^2 is homogeneous of degree -2 in the metric scale: avoid overflow
    norm = math.sqrt(rm_norm_sq(R / e, hinv)) / e
    return ConformalCurvature(R, float(R[0, 1, 0, 1]), float(K), norm, ps)


def rescaled_gauss_direct(base: WarpedMetric, factor: ConformalFactor, p,
                          jet: FactorJet | None = None) -> float:
    """Gauss curvature of e^psi dx^2 + e^psi f dth^2 from its components.

    Partial derivatives of psi are recovered from the covariant jet
    (d_ij psi = H_ij + Gamma^k_ij psi_k); component derivatives follow by the
    product rule and feed the orthogonal-chart formula.
    """
    jet = jet or factor.jet(p)
    x = float(p[0])
    f, f1, f2 = base.warp.all(x)
    gam = curvature_bundle(base, x).christoffel
    px, pt = jet.grad
    d2 = jet.hess + np.einsum("kij,k->ij", gam, jet.grad)
    pxx, ptt = d2[0, 0], d2[1, 1]
    # work with e^-psi scaled components; K scales back by e^-psi
    E, Ex, Eth, Ethth = 1.0, px, pt, ptt + pt * pt
    G = f
    Gx = px * f + f1
    Gth = pt * f
    Gxx = (pxx + px * px) * f + 2 * px * f1 + f2
    K_scaled = orthogonal_gauss_curvature(E, G, Ex, Eth, Gx, Gth, Ethth=Ethth, Gxx=Gxx)
    return K_scaled * math.exp(-jet.psi)


@dataclass
class DecayReport:
    rows: list
    max_ratio: dict
    spread: float
    fiber: list

    @property
    def uniform(self) -> bool:
        return self.spread <= 2.0


def decay_check(base: WarpedMetric, a_values, samples, sd: SmoothedDistance | None = None,
                fiber_x=None) -> DecayReport:
    """|Rm^a|_{h^a} e^psi_a at the samples for each truncation scale a."""
    sd = sd or SmoothedDistance(base)
    rows, max_ratio, fiber = [], {}, []
    for a in a_values:
        if a < sd.a_min:
            raise ValueError(f"a={a} below max(1, 3 pi/(4 sqrt k0)) = {sd.a_min:.4g}")
        fac = ConformalFactor.from_smoothed(sd.with_truncation(a))
        for p in samples:
            cc = conformal_curvature(base, fac, p)
            rows.append({"a": float(a), "x": float(p[0]), "psi": cc.psi,
                         "rm_norm_rescaled": cc.rm_norm, "ratio": cc.ratio})
        max_ratio[float(a)] = max(r["ratio"] for r in rows if r["a"] == a)
        for x in fiber_x or ():
            hm = RescaledMetric(base, fac)
            fiber.append({"a": float(a), "x": float(x), "base": base.fiber_length(x),
                          "rescaled": hm.fiber_length(x)})
    vals = list(max_ratio.values())
    spread = max(vals) / min(vals) if min(vals) > 0 else math.inf
    return DecayReport(rows, max_ratio, spread, fiber)
