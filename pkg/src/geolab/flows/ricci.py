"""Ricci flow of rotationally symmetric cylinders in conformal gauge.

g(t) = e^{2u(s,t)} (ds^2 + dth^2) evolves by d_t u = e^{-2u} u_ss, the surface
reduction of d_t g = -2 Ric = -2 K g with K = -e^{-2u} u_ss.  The truncated
domain s in [s_0, s_1] keeps Dirichlet data frozen at the initial values.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import linalg

from ..geometry import EquivalenceReport, WarpedMetric, gauge_transform


@dataclass
class FlowState:
    """Conformal exponent u on a uniform grid s (theta-symmetric)."""

    t: float
    s: np.ndarray
    u: np.ndarray
    x: np.ndarray | None = None  # warped-chart coordinate of each node, when known
    diagnostics: dict = field(default_factory=dict)

    @property
    def dx(self) -> float:
        return float(self.s[1] - self.s[0])

    @property
    def nodes(self) -> int:
        return len(self.s)

    def gauss(self) -> np.ndarray:
        """K at interior nodes."""
        return gauss_curvature(self.u, self.dx)

    def copy(self, **kw) -> "FlowState":
        d = dict(t=self.t, s=self.s, u=self.u.copy(), x=self.x, diagnostics=dict(self.diagnostics))
        d.update(kw)
        return FlowState(**d)

    def to_dict(self) -> dict:
        return {"t": self.t, "grid": self.s.tolist(), "u": self.u.tolist(),
                "diagnostics": self.diagnostics}


def d2(u: np.ndarray, ds: float) -> np.ndarray:
    """Second difference at interior nodes."""
    return (u[2:] - 2 * u[1:-1] + u[:-2]) / ds**2


def gauss_curvature(u: np.ndarray, ds: float) -> np.ndarray:
    return -np.exp(-2 * u[1:-1]) * d2(u, ds)


def curvature_gradient(u: np.ndarray, ds: float) -> np.ndarray:
    """|grad Rm|_g = sqrt(2) e^{-u} |K_s| at nodes 2..n-3."""
    K = gauss_curvature(u, ds)
    Ks = (K[2:] - K[:-2]) / (2 * ds)
    return math.sqrt(2) * np.exp(-u[2:-2]) * np.abs(Ks)


def ricci_rhs(u: np.ndarray, ds: float) -> np.ndarray:
    out = np.zeros_like(u)
    out[1:-1] = np.exp(-2 * u[1:-1]) * d2(u, ds)
    return out


def cfl_limit(u: np.ndarray, ds: float, cfl: float = 0.5) -> float:
    return cfl * ds**2 * float(np.exp(2 * u).min())


def heun_step(u: np.ndarray, dt: float, ds: float) -> np.ndarray:
    k1 = ricci_rhs(u, ds)
    k2 = ricci_rhs(u + dt * k1, ds)
    return u + 0.5 * dt * (k1 + k2)


def implicit_step(u: np.ndarray, dt: float, ds: float, tol: float = 1e-10,
                  maxiter: int = 100) -> np.ndarray:
    """Backward Euler with the coefficient e^{-2u} lagged; fixed-point iteration."""
    n = len(u)
    v = u.copy()
    r = dt / ds**2
    for _ in range(maxiter):
        c = np.exp(-2 * v[1:-1]) * r
        ab = np.zeros((3, n))
        ab[1, :] = 1.0
        ab[1, 1:-1] = 1 + 2 * c
        ab[0, 2:] = -c
        ab[2, :-2] = -c
        new = linalg.solve_banded((1, 1), ab, u)
        new[0], new[-1] = u[0], u[-1]
        if np.max(np.abs(new - v)) < tol:
            return new
        v = new
    raise RuntimeError(f"implicit fixed point did not reach {tol} in {maxiter} iterations")


# ---------------------------------------------------------------------------
# initial data


def conformal_state(s, u, x=None) -> FlowState:
    s = np.asarray(s, float)
    u = np.asarray(u, float)
    if len(s) < 16:
        raise ValueError("need at least 16 nodes")
    return FlowState(0.0, s, u, x)


def flat_state(nodes: int, L: float = 20.0) -> FlowState:
    s = np.linspace(-L, L, nodes)
    return conformal_state(s, np.zeros(nodes), s.copy())


def bump_state(nodes: int, L: float = 20.0, amplitude: float = 0.5, width: float = 2.0) -> FlowState:
    s = np.linspace(-L, L, nodes)
    return conformal_state(s, amplitude * np.exp(-(s / width) ** 2), s.copy())


def hyperbolic_state(nodes: int, L: float = 20.0) -> FlowState:
    """dx^2 + cosh^2 x dth^2 on |x| <= L: w = gd(x), u = -log cos w, K = -1."""
    wmax = 2 * math.atan(math.tanh(L / 2))
    w = np.linspace(-wmax, wmax, nodes)
    return conformal_state(w, -np.log(np.cos(w)), np.arcsinh(np.tan(w)))


def state_from_warp(metric: WarpedMetric, nodes: int, x_range=None) -> FlowState:
    """Conformal-gauge samples of dx^2 + f dth^2 on x_range (default [-L, L])."""
    lo, hi = x_range if x_range is not None else (-metric.L, metric.L)
    gm = gauge_transform(metric, x_range=(lo, hi))
    w = np.linspace(gm.w_range[0], gm.w_range[1], nodes)
    xs = np.asarray(gm.x_of_w(w), float)
    xs[0], xs[-1] = lo, hi
    u = np.array([0.5 * math.log(metric.warp(float(v))) for v in xs])
    return conformal_state(w, u, xs)


# ---------------------------------------------------------------------------
# runs


@dataclass
class FlowTrajectory:
    states: list
    scheme: str
    steps: int = 0
    rejected: int = 0
    aborted: bool = False
    reason: str = ""
    monitor: dict = field(default_factory=dict)

    @property
    def final(self) -> FlowState:
        return self.states[-1]

    def at(self, t: float) -> FlowState:
        for st in self.states:
            if abs(st.t - t) <= 1e-12 * max(1.0, abs(t)):
                return st
        raise KeyError(f"no checkpoint at t={t}")

    @property
    def shi_bounded(self) -> bool:
        v = [d for d in self.monitor.get("shi", []) if d is not None]
        return bool(v) and all(math.isfinite(x) for x in v)

    def to_json(self) -> str:
        return json.dumps({"scheme": self.scheme, "steps": self.steps, "rejected": self.rejected,
                           "aborted": self.aborted, "reason": self.reason,
                           "monitor": self.monitor,
                           "checkpoints": [s.to_dict() for s in self.states]})


def equivalence_vs_initial(u0: np.ndarray, u: np.ndarray, s=None, mask=None) -> EquivalenceReport:
    """c1, c2 with c1 g(0) <= g(t) <= c2 g(0): g(t)/g(0) = e^{2(u - u0)} (isotropic)."""
    r = np.exp(2 * (u - u0))
    idx = np.arange(len(u)) if mask is None else np.flatnonzero(mask)
    i1, i2 = idx[np.argmin(r[idx])], idx[np.argmax(r[idx])]
    where = (None if s is None else float(s[i1]), None if s is None else float(s[i2]))
    return EquivalenceReport(float(r[i1]), float(r[i2]), where)


def _diagnose(st: FlowState, u0: np.ndarray, mask=None):
    K = st.gauss()
    grad = curvature_gradient(st.u, st.dx)
    st.diagnostics = {
        "sup_rm": float(math.sqrt(2) * np.max(np.abs(K))),
        "shi": float(math.sqrt(st.t) * grad.max()) if st.t > 0 else 0.0,
        "c1": None, "c2": None,
    }
    eq = equivalence_vs_initial(u0, st.u, st.s, mask)
    st.diagnostics["c1"], st.diagnostics["c2"] = eq.c1, eq.c2


def ricci_flow_run(initial: FlowState, t_end: float, scheme: str = "explicit", checkpoints=None,
                   dt: float | None = None, k0: float | None = None, T: float | None = None,
                   cfl: float = 0.5, mask=None) -> FlowTrajectory:
    """Integrate to ``t_end`` recording states at ``checkpoints`` (always t_end).

    explicit: Heun with dt <= cfl ds^2 min e^{2u} re-evaluated each step;
    an oversized user ``dt`` is halved until it satisfies the bound.
    implicit: lagged backward Euler with fixed ``dt`` (default cfl ds^2 min e^{2u0}).
    A curvature monitor aborts once sup|Rm| exceeds ``k0``.
    """
    if scheme not in ("explicit", "implicit"):
        raise ValueError(f"unknown scheme {scheme!r}")
    if T is not None and t_end > T + 1e-15:
        raise ValueError(f"t_end={t_end} exceeds the configured T={T}")
    cps = sorted(set([float(c) for c in (checkpoints or []) if 0 < c < t_end] + [float(t_end)]))
    ds = initial.dx
    u0 = initial.u.copy()
    u = u0.copy()
    t = initial.t
    traj = FlowTrajectory([], scheme)
    st0 = initial.copy()
    _diagnose(st0, u0, mask)
    traj.states.append(st0)
    dt_fixed = dt if dt is not None else cfl_limit(u0, ds, cfl)
    shi = []
    for tc in cps:
        while t < tc - 1e-14:
            if scheme == "explicit":
                lim = cfl_limit(u, ds, cfl)
                h = dt_fixed if dt is not None else lim
                while h > lim * (1 + 1e-12):
                    h *= 0.5
                    traj.rejected += 1
                h = min(h, tc - t)
                new = heun_step(u, h, ds)
            else:
                h = min(dt_fixed, tc - t)
                new = implicit_step(u, h, ds)
            if not np.all(np.isfinite(new)):
                traj.aborted, traj.reason = True, f"non-finite state at t={t + h:.6g}"
                break
            if k0 is not None:
                sup = math.sqrt(2) * float(np.max(np.abs(gauss_curvature(new, ds))))
                if sup > k0:
                    traj.aborted = True
                    traj.reason = f"sup|Rm|={sup:.6g} exceeds k0={k0:.6g} at t={t + h:.6g}"
                    break
            u, t = new, t + h
            traj.steps += 1
        if traj.aborted:
            break
        st = initial.copy(t=tc if abs(t - tc) < 1e-12 else t, u=u.copy())
        _diagnose(st, u0, mask)
        traj.states.append(st)
        shi.append(st.diagnostics["shi"])
    if traj.aborted and traj.states[-1].t < t:
        st = initial.copy(t=t, u=u.copy())
        _diagnose(st, u0, mask)
        traj.states.append(st)
    traj.monitor = {"shi": shi, "sup_rm": [s.diagnostics["sup_rm"] for s in traj.states]}
    return traj
