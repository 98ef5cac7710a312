"""Pushforward/pullback metrics along equivariant maps and the uniqueness experiment.

For a monotone map X(s) the pushforward of a ds^2 + b dth^2 to the target
chart y is g^_yy(y) = a(s)/X_s(s)^2, g^_thth(y) = b(s) at s = X^{-1}(y); the
pullback of the target metric is h-bar = A(X) X_s^2 ds^2 + B(X) dth^2.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.interpolate import CubicSpline, PchipInterpolator

from .harmonic import (DiagonalTarget, DiffeomorphismError, DomainGrid, EquivariantMap,
                       harmonic_flow_run, identity_map, perturbed_map, tension)
from .ricci import FlowState


@dataclass
class PushforwardMetric:
    y: np.ndarray
    g_yy: np.ndarray
    g_thth: np.ndarray

    def is_positive(self) -> bool:
        return bool(np.all(self.g_yy > 0) and np.all(self.g_thth > 0))


def pushforward_metric(m: EquivariantMap, domain, y=None) -> PushforwardMetric:
    """F_* g on target nodes ``y`` (default: the map's grid, restricted to the image)."""
    if not m.is_monotone():
        raise DiffeomorphismError("pushforward needs a strictly monotone map")
    dom = domain if isinstance(domain, DomainGrid) else DomainGrid.from_state(domain)
    if y is None:
        y = m.s[(m.s >= m.X[0]) & (m.s <= m.X[-1])]
    y = np.asarray(y, float)
    s_of_y = PchipInterpolator(m.X, m.s)(y)
    Xsp = CubicSpline(m.s, m.X)
    a = CubicSpline(dom.s, dom.a)(s_of_y)
    b = CubicSpline(dom.s, dom.b)(s_of_y)
    return PushforwardMetric(y, a / Xsp(s_of_y, 1) ** 2, b)


def pullback_metric(m: EquivariantMap, target: DiagonalTarget):
    """(h-bar_ss, h-bar_thth) = (A(X) X_s^2, B(X)) on the map's grid."""
    Xs = CubicSpline(m.s, m.X)(m.s, 1)
    return target.A(m.X) * Xs**2, target.B(m.X)


def pullback_of_pushforward(m: EquivariantMap, pf: PushforwardMetric):
    """F^* of a pushforward, back on the domain grid (round-trip check)."""
    Xs = CubicSpline(m.s, m.X)(m.s, 1)
    gyy = CubicSpline(pf.y, pf.g_yy)(m.X)
    gtt = CubicSpline(pf.y, pf.g_thth)(m.X)
    return gyy * Xs**2, gtt


@dataclass
class PullbackReport:
    times: list
    sqrt_t_norm: list
    c1: list
    c2: list
    slack: float = 0.2
    floor: float = 1e-8  # roundoff level of the second difference of the grid itself

    @property
    def equivalence_ok(self) -> bool:
        return all(0.5 <= a and b <= 2.0 for a, b in zip(self.c1, self.c2))

    @property
    def nonincreasing(self) -> bool:
        v = self.sqrt_t_norm
        return all(v[i + 1] <= (1 + self.slack) * v[i] + self.floor for i in range(len(v) - 1))


def pullback_evolution_check(traj, target: DiagonalTarget, times, margin: int = 3) -> PullbackReport:
    """sqrt(t) |d_t h-bar|_{g(t)} and the equivalence of g(t) and h-bar(t).

    d_t h-bar follows from d_t X = tau: d_t(A X_s^2) = A' tau X_s^2 + 2 A X_s tau_s,
    d_t B = B' tau.
    """
    out = PullbackReport([], [], [], [])
    for t in times:
        m, st = traj.at(t)
        dom = DomainGrid.from_state(st)
        tau = tension(m.X, dom, target)
        Xs = CubicSpline(m.s, m.X)(m.s, 1)
        tau_s = np.gradient(tau, dom.ds, edge_order=2)
        A, dA, B, dB = target.A(m.X), target.dA(m.X), target.B(m.X), target.dB(m.X)
        dss = dA * tau * Xs**2 + 2 * A * Xs * tau_s
        dtt = dB * tau
        nrm = np.sqrt((dss / dom.a) ** 2 + (dtt / dom.b) ** 2)[margin:-margin]
        hss, htt = pullback_metric(m, target)
        r = np.concatenate([hss / dom.a, htt / dom.b])
        out.times.append(float(t))
        out.sqrt_t_norm.append(float(math.sqrt(t) * nrm.max()))
        out.c1.append(float(r.min()))
        out.c2.append(float(r.max()))
    return out


def metric_difference(u1: np.ndarray, u2: np.ndarray) -> float:
    """sup |1 - e^{2(u2 - u1)}|: relative difference of conformal metrics."""
    return float(np.max(np.abs(1 - np.exp(2 * (u2 - u1)))))


def pushforward_difference(p1: PushforwardMetric, p2: PushforwardMetric,
                           target: DiagonalTarget, margin: int = 3) -> float:
    """sup over common nodes of |g^ - g^~|_h."""
    y = np.intersect1d(p1.y, p2.y)[margin:-margin]
    i1, i2 = np.searchsorted(p1.y, y), np.searchsorted(p2.y, y)
    dyy = (p1.g_yy[i1] - p2.g_yy[i2]) / target.A(y)
    dtt = (p1.g_thth[i1] - p2.g_thth[i2]) / target.B(y)
    return float(np.max(np.sqrt(dyy**2 + dtt**2)))


@dataclass
class UniquenessReport:
    rows: list = field(default_factory=list)
    final: dict = field(default_factory=dict)

    def refinement_ratios(self, key: str) -> list:
        grids = sorted(self.final)
        return [self.final[g0][key] / self.final[g1][key] if self.final[g1][key] > 0 else math.inf
                for g0, g1 in zip(grids, grids[1:])]

    def to_json(self) -> str:
        return json.dumps({"rows": self.rows, "final": {str(k): v for k, v in self.final.items()}})


def uniqueness_experiment(state_factory, grids, t_end: float = 0.05, checkpoints=None,
                          initial_map: str = "identity", map_params: dict | None = None) -> UniquenessReport:
    """Two solver routes from identical initial data at each grid size.

    Route 1: explicit Ricci flow + harmonic map flow (Heun, CFL step).
    Route 2: implicit Ricci flow + forward-Euler harmonic map flow.
    D_metric compares the two Ricci solutions; D_pushforward compares their
    DeTurck pushforwards through the respective harmonic maps (target g(0)).
    """
    rep = UniquenessReport()
    cps = sorted(set([float(c) for c in (checkpoints or []) if 0 < c < t_end] + [float(t_end)]))
    for n in grids:
        s1: FlowState = state_factory(n)
        s2: FlowState = state_factory(n)
        if s1.s.shape != s2.s.shape or not (np.array_equal(s1.s, s2.s) and np.array_equal(s1.u, s2.u)):
            raise ValueError("routes must share identical initial data g(0)")
        tg = DiagonalTarget.from_state(s1)
        mk = (lambda s: identity_map(s)) if initial_map == "identity" else \
            (lambda s: perturbed_map(s, **(map_params or {})))
        r1 = harmonic_flow_run(s1, tg, mk(s1.s), t_end, cps, scheme="explicit")
        r2 = harmonic_flow_run(s2, tg, mk(s2.s), t_end, cps, scheme="implicit")
        for t in [0.0] + cps:
            m1, d1 = r1.at(t)
            m2, d2 = r2.at(t)
            Dm = metric_difference(d1.u, d2.u)
            Dp = pushforward_difference(pushforward_metric(m1, d1), pushforward_metric(m2, d2), tg)
            rep.rows.append({"t": float(t), "D_metric": Dm, "D_pushforward": Dp, "grid": int(n)})
        rep.final[int(n)] = {"D_metric": rep.rows[-1]["D_metric"],
                             "D_pushforward": rep.rows[-1]["D_pushforward"]}
    return rep
