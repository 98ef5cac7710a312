"""Theta-equivariant harmonic map heat flow coupled to Ricci flow.

Maps F(s, th) = (X(s, t), th) from (M, a ds^2 + b dth^2) to a diagonal target
(N, A(X) dX^2 + B(X) dth^2).  The tension field has a single component

    tau = (X_ss - a_s/(2a) X_s + A'/(2A) X_s^2)/a + (b_s/(2a) X_s - B'/(2A))/b,

and d_t X = tau with X pinned at both ends.  Covariant derivatives of dF
(second fundamental form and its derivative) are assembled with einsum from
the domain and target Christoffel symbols; theta-derivatives of all
component fields vanish by equivariance.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.interpolate import CubicSpline

from ..geometry import WarpedMetric, gauss_curvature as warp_gauss
from .ricci import FlowState, cfl_limit, gauss_curvature, heun_step, implicit_step, ricci_rhs


class DiffeomorphismError(RuntimeError):
    """The map lost strict monotonicity."""


@dataclass
class DiagonalTarget:
    A: Callable
    dA: Callable
    B: Callable
    dB: Callable
    gauss: Callable
    name: str = "target"

    @classmethod
    def from_warp(cls, metric: WarpedMetric) -> "DiagonalTarget":
        w = metric.warp
        vec = lambda fn: (lambda X: np.vectorize(fn, otypes=[float])(X))
        return cls(lambda X: np.ones_like(np.asarray(X, float)),
                   lambda X: np.zeros_like(np.asarray(X, float)),
                   vec(w.eval), vec(w.d1), vec(lambda x: warp_gauss(w, x)), w.name)

    @classmethod
    def from_conformal(cls, u: Callable, du: Callable, d2u: Callable,
                       name: str = "conformal") -> "DiagonalTarget":
        """A = B = e^{2u(X)}, K = -e^{-2u} u''."""
        E = lambda X: np.exp(2 * u(X))
        dE = lambda X: 2 * du(X) * np.exp(2 * u(X))
        return cls(E, dE, E, dE, lambda X: -np.exp(-2 * u(X)) * d2u(X), name)

    @classmethod
    def from_state(cls, st: FlowState, name: str = "g(0)") -> "DiagonalTarget":
        """The conformal metric of a flow state, spline-interpolated."""
        sp = CubicSpline(st.s, st.u)
        return cls.from_conformal(sp, sp.derivative(1), sp.derivative(2), name)

    def christoffel(self, X) -> np.ndarray:
        """Gamma~^c_ab at X, shape (n, 2, 2, 2); index 0 = X, 1 = theta."""
        A, dA, B, dB = self.A(X), self.dA(X), self.B(X), self.dB(X)
        G = np.zeros((len(X), 2, 2, 2))
        G[:, 0, 0, 0] = dA / (2 * A)
        G[:, 0, 1, 1] = -dB / (2 * A)
        G[:, 1, 0, 1] = G[:, 1, 1, 0] = dB / (2 * B)
        return G


@dataclass
class DomainGrid:
    """a ds^2 + b dth^2 sampled on a uniform s grid."""

    s: np.ndarray
    a: np.ndarray
    b: np.ndarray
    a_s: np.ndarray
    b_s: np.ndarray

    @classmethod
    def from_state(cls, st: FlowState) -> "DomainGrid":
        a = np.exp(2 * st.u)
        us = np.gradient(st.u, st.dx, edge_order=2)
        return cls(st.s, a, a.copy(), 2 * us * a, 2 * us * a)

    @classmethod
    def from_u(cls, s, u) -> "DomainGrid":
        return cls.from_state(FlowState(0.0, np.asarray(s), np.asarray(u)))

    @property
    def ds(self) -> float:
        return float(self.s[1] - self.s[0])

    def christoffel(self) -> np.ndarray:
        G = np.zeros((len(self.s), 2, 2, 2))
        G[:, 0, 0, 0] = self.a_s / (2 * self.a)
        G[:, 0, 1, 1] = -self.b_s / (2 * self.a)
        G[:, 1, 0, 1] = G[:, 1, 1, 0] = self.b_s / (2 * self.b)
        return G

    def inverse(self) -> np.ndarray:
        gi = np.zeros((len(self.s), 2, 2))
        gi[:, 0, 0], gi[:, 1, 1] = 1 / self.a, 1 / self.b
        return gi

    def laplacian(self, E: np.ndarray) -> np.ndarray:
        """(1/sqrt(ab)) d_s (sqrt(ab)/a d_s E) at interior nodes (flux form)."""
        vol = np.sqrt(self.a * self.b)
        c = vol / self.a
        ch = 0.5 * (c[1:] + c[:-1])
        flux = ch * np.diff(E) / self.ds
        return np.diff(flux) / self.ds / vol[1:-1]


@dataclass
class EquivariantMap:
    s: np.ndarray
    X: np.ndarray
    t: float = 0.0
    K1: float | None = None
    K2: float | None = None

    def is_monotone(self) -> bool:
        return bool(np.all(np.diff(self.X) > 0))

    def to_dict(self) -> dict:
        return {"t": self.t, "grid": self.s.tolist(), "X": self.X.tolist(),
                "K1": self.K1, "K2": self.K2}


def identity_map(s) -> EquivariantMap:
    s = np.asarray(s, float)
    return EquivariantMap(s, s.copy())


def perturbed_map(s, eps: float = 0.02, k: float = 10.0, width: float = 4.0) -> EquivariantMap:
    """X = s + eps sin(k s) exp(-(s/width)^2): monotone when eps k < 1."""
    s = np.asarray(s, float)
    X = s + eps * np.sin(k * s) * np.exp(-(s / width) ** 2)
    X[0], X[-1] = s[0], s[-1]
    m = EquivariantMap(s, X)
    if not m.is_monotone():
        raise DiffeomorphismError("perturbed initial map is not monotone")
    return m


# ---------------------------------------------------------------------------
# covariant jets


def _xs(X: np.ndarray, ds: float):
    Xs = np.gradient(X, ds, edge_order=2)
    Xss = np.empty_like(X)
    Xss[1:-1] = (X[2:] - 2 * X[1:-1] + X[:-2]) / ds**2
    Xss[0] = (2 * X[0] - 5 * X[1] + 4 * X[2] - X[3]) / ds**2
    Xss[-1] = (2 * X[-1] - 5 * X[-2] + 4 * X[-3] - X[-4]) / ds**2
    return Xs, Xss


@dataclass
class MapJet:
    dF: np.ndarray  # (n, 2, 2) [gamma, i]
    H: np.ndarray  # (n, 2, 2, 2) [gamma, i, j]
    T3: np.ndarray  # (n, 2, 2, 2, 2) [gamma, k, i, j]
    energy: np.ndarray  # |dF|^2
    hess_sq: np.ndarray
    third_sq: np.ndarray
    tau: np.ndarray


def map_jet(X: np.ndarray, dom: DomainGrid, target: DiagonalTarget) -> MapJet:
    n, ds = len(X), dom.ds
    Xs, Xss = _xs(X, ds)
    dF = np.zeros((n, 2, 2))
    dF[:, 0, 0] = Xs
    dF[:, 1, 1] = 1.0
    ddF = np.zeros((n, 2, 2, 2))  # [gamma, i, j] = d_i dF^gamma_j
    ddF[:, 0, 0, 0] = Xss
    G = dom.christoffel()
    Gt = target.christoffel(X)
    H = (ddF - np.einsum("nkij,ngk->ngij", G, dF)
         + np.einsum("ngab,nai,nbj->ngij", Gt, dF, dF))
    dH = np.zeros((n, 2, 2, 2, 2))  # [gamma, k, i, j] = d_k H^gamma_ij
    dH[:, :, 0] = np.gradient(H, ds, axis=0, edge_order=2)
    T3 = (dH - np.einsum("nlki,nglj->ngkij", G, H) - np.einsum("nlkj,ngil->ngkij", G, H)
          + np.einsum("ngab,nak,nbij->ngkij", Gt, dF, H))
    gi = dom.inverse()
    hm = np.zeros((n, 2, 2))
    hm[:, 0, 0], hm[:, 1, 1] = target.A(X), target.B(X)
    energy = np.einsum("nij,ngi,nhj,ngh->n", gi, dF, dF, hm)
    hess_sq = np.einsum("nik,njl,ngij,nhkl,ngh->n", gi, gi, H, H, hm)
    third_sq = np.einsum("nkp,niq,njr,ngkij,nhpqr,ngh->n", gi, gi, gi, T3, T3, hm)
    tau = np.einsum("nij,ngij->ng", gi, H)[:, 0]
    return MapJet(dF, H, T3, energy, hess_sq, third_sq, tau)


def tension(X: np.ndarray, dom: DomainGrid, target: DiagonalTarget) -> np.ndarray:
    """d_t X at interior nodes (zero at the pinned ends)."""
    ds = dom.ds
    Xs = (X[2:] - X[:-2]) / (2 * ds)
    Xss = (X[2:] - 2 * X[1:-1] + X[:-2]) / ds**2
    a, b, a_s, b_s = (v[1:-1] for v in (dom.a, dom.b, dom.a_s, dom.b_s))
    Y = X[1:-1]
    A, dA, dB = target.A(Y), target.dA(Y), target.dB(Y)
    out = np.zeros_like(X)
    out[1:-1] = ((Xss - a_s / (2 * a) * Xs + dA / (2 * A) * Xs**2) / a
                 + (b_s / (2 * a) * Xs - dB / (2 * A)) / b)
    return out


def energy_density(X: np.ndarray, dom: DomainGrid, target: DiagonalTarget) -> np.ndarray:
    """|dF|^2 = X_s^2 A(X)/a + B(X)/b."""
    Xs = np.gradient(X, dom.ds, edge_order=2)
    return Xs**2 * target.A(X) / dom.a + target.B(X) / dom.b


# ---------------------------------------------------------------------------
# runs


def existence_time(k0: float, K1: float | None = None, n: int = 2, T: float = math.inf) -> float:
    """T1 = min(log 2 / (2 k0 K1^2), T); K1^2 = n for an identity start."""
    k1sq = n if K1 is None else K1 * K1
    return min(math.log(2) / (2 * k0 * k1sq), T)


@dataclass
class GradientReport:
    sup: float
    T1: float | None


def map_gradient_sup(m: EquivariantMap, domain, target: DiagonalTarget, k0: float | None = None,
                     T: float = math.inf) -> GradientReport:
    dom = domain if isinstance(domain, DomainGrid) else DomainGrid.from_state(domain)
    sup = float(np.sqrt(energy_density(m.X, dom, target).max()))
    return GradientReport(sup, None if k0 is None else existence_time(k0, m.K1 or sup, T=T))


@dataclass
class MapTrajectory:
    maps: list
    domains: list
    scheme: str
    steps: int = 0
    aborted: bool = False
    reason: str = ""
    series: dict = field(default_factory=dict)
    grad_sup_running: float = 0.0
    sup_rm_running: float = 0.0

    def at(self, t: float):
        for m, d in zip(self.maps, self.domains):
            if abs(m.t - t) <= 1e-12 * max(1.0, abs(t)):
                return m, d
        raise KeyError(f"no checkpoint at t={t}")

    def to_json(self) -> str:
        return json.dumps({"scheme": self.scheme, "steps": self.steps, "aborted": self.aborted,
                           "reason": self.reason, "series": self.series,
                           "grad_sup_running": self.grad_sup_running,
                           "checkpoints": [{"map": m.to_dict(), "domain": d.to_dict()}
                                           for m, d in zip(self.maps, self.domains)]})


def harmonic_flow_run(domain: FlowState, target: DiagonalTarget, initial_map: EquivariantMap,
                      t_end: float, checkpoints=None, evolve_domain: bool = True,
                      scheme: str = "explicit", dt: float | None = None, cfl: float = 0.5,
                      blowup_factor: float = 10.0) -> MapTrajectory:
    """Co-evolve g(t) (Ricci flow) and X(t) (harmonic map flow) to ``t_end``.

    explicit: Heun on the coupled system with the CFL step re-evaluated;
    implicit: lagged backward Euler for u, forward Euler for X, fixed dt.
    """
    if scheme not in ("explicit", "implicit"):
        raise ValueError(f"unknown scheme {scheme!r}")
    if not initial_map.is_monotone():
        raise DiffeomorphismError("initial map is not monotone")
    if len(initial_map.X) != domain.nodes:
        raise ValueError("map and domain grids differ")
    ds = domain.dx
    u, X, t = domain.u.copy(), initial_map.X.copy(), domain.t
    dom0 = DomainGrid.from_state(domain)
    j0 = map_jet(X, dom0, target)
    K1 = float(np.sqrt(j0.energy.max()))
    K2 = float(np.sqrt(j0.hess_sq[2:-2].max()))
    traj = MapTrajectory([], [], scheme)
    series = {"t": [], "grad_sup": [], "hess_sup": [], "third_sup": [], "sup_rm": []}
    dt_fixed = dt if dt is not None else cfl_limit(u, ds, cfl)

    def record(tc):
        st = domain.copy(t=tc, u=u.copy())
        dom = DomainGrid.from_state(st)
        jet = map_jet(X, dom, target)
        traj.maps.append(EquivariantMap(domain.s, X.copy(), tc, K1, K2))
        traj.domains.append(st)
        series["t"].append(tc)
        series["grad_sup"].append(float(np.sqrt(jet.energy.max())))
        series["hess_sup"].append(float(np.sqrt(jet.hess_sq[2:-2].max())))
        series["third_sup"].append(float(np.sqrt(jet.third_sq[3:-3].max())))
        series["sup_rm"].append(float(math.sqrt(2) * np.abs(gauss_curvature(u, ds)).max()))

    def rhs(uu, XX):
        du = ricci_rhs(uu, ds) if evolve_domain else np.zeros_like(uu)
        return du, tension(XX, DomainGrid.from_u(domain.s, uu), target)

    record(t)
    traj.grad_sup_running = series["grad_sup"][0]
    traj.sup_rm_running = series["sup_rm"][0]
    cps = sorted(set([float(c) for c in (checkpoints or []) if t < c < t_end] + [float(t_end)]))
    for tc in cps:
        while t < tc - 1e-14:
            if scheme == "explicit":
                h = min(dt if dt is not None else cfl_limit(u, ds, cfl), tc - t)
                du1, dX1 = rhs(u, X)
                du2, dX2 = rhs(u + h * du1, X + h * dX1)
                u_new = u + 0.5 * h * (du1 + du2)
                X_new = X + 0.5 * h * (dX1 + dX2)
            else:
                h = min(dt_fixed, tc - t)
                X_new = X + h * tension(X, DomainGrid.from_u(domain.s, u), target)
                u_new = implicit_step(u, h, ds) if evolve_domain else u
            t += h
            traj.steps += 1
            if not np.all(np.diff(X_new) > 0):
                traj.aborted, traj.reason = True, f"map lost monotonicity at t={t:.6g}"
                raise DiffeomorphismError(traj.reason)
            u, X = u_new, X_new
            g = float(np.sqrt(energy_density(X, DomainGrid.from_u(domain.s, u), target).max()))
            traj.grad_sup_running = max(traj.grad_sup_running, g)
            traj.sup_rm_running = max(traj.sup_rm_running,
                                      float(math.sqrt(2) * np.abs(gauss_curvature(u, ds)).max()))
            if g > blowup_factor * K1:
                traj.aborted, traj.reason = True, f"|dF| = {g:.4g} > {blowup_factor} K1 at t={t:.6g}"
                break
        if traj.aborted:
            break
        t = tc
        record(tc)
    traj.series = series
    return traj


# ---------------------------------------------------------------------------
# Bochner identity


@dataclass
class BochnerResidual:
    t: float
    residual: np.ndarray
    lhs: np.ndarray
    quartic: np.ndarray
    inequality_ok: bool

    @property
    def sup(self) -> float:
        return float(np.max(np.abs(self.residual))) if self.residual.size else 0.0


def bochner_residual(traj: MapTrajectory, target: DiagonalTarget, t: float, delta: float,
                     k0: float | None = None, margin: int = 3) -> BochnerResidual:
    """LHS - RHS of d_t|dF|^2 = Delta|dF|^2 - 2|nabla dF|^2 + 4 K_N X_s^2 AB/(ab).

    The time derivative is the central difference over checkpoints t +- delta.
    """
    try:
        levels = [traj.at(t - delta), traj.at(t), traj.at(t + delta)]
    except KeyError as exc:
        raise ValueError(f"bochner_residual needs checkpoints at t-delta, t, t+delta: {exc}") from None
    E = []
    for m, st in levels:
        E.append(energy_density(m.X, DomainGrid.from_state(st), target))
    m, st = levels[1]
    dom = DomainGrid.from_state(st)
    jet = map_jet(m.X, dom, target)
    Xs = jet.dF[:, 0, 0]
    A, B = target.A(m.X), target.B(m.X)
    quartic = 4 * target.gauss(m.X) * Xs**2 * A * B / (dom.a * dom.b)
    lhs = (E[2] - E[0]) / (2 * delta)
    rhs = np.zeros_like(lhs)
    rhs[1:-1] = dom.laplacian(E[1])
    rhs += -2 * jet.hess_sq + quartic
    sl = slice(margin, len(lhs) - margin)
    res = (lhs - rhs)[sl]
    ok = True
    if k0 is not None:
        bound = (rhs - quartic + k0 * E[1] ** 2)[sl]
        ok = bool(np.all(lhs[sl] <= bound + np.abs(res) + 1e-12))
    return BochnerResidual(t, res, lhs[sl], quartic[sl], ok)
