"""Smooth even cutoff eta with plateau 1 on |s| <= 1/2 and support in [-1, 1].

The transition is the classical smoothstep built from ``exp(-1/t)``::

    a(t) = exp(-1/t) for t > 0, else 0
    S(t) = a(t) / (a(t) + a(1 - t))
    eta(s) = S(2 (1 - |s|))

so eta and all its derivatives vanish identically on |s| >= 1 and eta == 1
on |s| <= 1/2.  ``phi = eta**2`` is the squared cutoff used in localisation
arguments.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np


def _a(t):
    t = np.asarray(t, dtype=float)
    out = np.zeros_like(t)
    pos = t > 0
    out[pos] = np.exp(-1.0 / t[pos])
    return out


def _a_derivs(t):
    """a, a', a'' of the exp(-1/t) transition."""
    t = np.asarray(t, dtype=float)
    a0 = _a(t)
    a1 = np.zeros_like(t)
    a2 = np.zeros_like(t)
    pos = t > 0
    tp = t[pos]
    a1[pos] = a0[pos] / tp**2
    a2[pos] = a0[pos] * (1.0 / tp**4 - 2.0 / tp**3)
    return a0, a1, a2


def smoothstep(t, order: int = 0):
    """S(t) or its first/second derivative; S = 0 for t <= 0, 1 for t >= 1."""
    t = np.clip(np.asarray(t, dtype=float), -1.0, 2.0)
    p0, p1, p2 = _a_derivs(t)
    q0, q1, q2 = _a_derivs(1.0 - t)
    # d/dt a(1-t) = -a'(1-t)
    q1 = -q1
    den = p0 + q0
    s0 = p0 / den
    if order == 0:
        return s0
    # S = p/(p+q); S' = (p' q - p q') / den^2
    num1 = p1 * q0 - p0 * q1
    s1 = num1 / den**2
    if order == 1:
        return s1
    num1p = p2 * q0 - p0 * q2
    den1 = p1 + q1
    s2 = num1p / den**2 - 2.0 * num1 * den1 / den**3
    if order == 2:
        return s2
    raise ValueError(f"order must be 0, 1 or 2, got {order}")


def eta(s, order: int = 0):
    """Cutoff eta(s) and its derivatives (order 0, 1, 2). Vectorised."""
    s = np.asarray(s, dtype=float)
    u = 2.0 * (1.0 - np.abs(s))
    if order == 0:
        out = smoothstep(u, 0)
    elif order == 1:
        out = -2.0 * np.sign(s) * smoothstep(u, 1)
    elif order == 2:
        out = 4.0 * smoothstep(u, 2)
    else:
        raise ValueError(f"order must be 0, 1 or 2, got {order}")
    # exact plateaus
    out = np.where(np.abs(s) <= 0.5, 1.0 if order == 0 else 0.0, out)
    out = np.where(np.abs(s) >= 1.0, 0.0, out)
    return out if out.ndim else float(out)


def eta_scalar(s: float) -> tuple[float, float, float]:
    """Fast scalar (eta, eta', eta'') for inner loops."""
    r = abs(s)
    if r <= 0.5:
        return 1.0, 0.0, 0.0
    if r >= 1.0:
        return 0.0, 0.0, 0.0
    u = 2.0 * (1.0 - r)
    v = 1.0 - u
    p0 = math.exp(-1.0 / u)
    p1 = p0 / u**2
    p2 = p0 * (1.0 / u**4 - 2.0 / u**3)
    q0 = math.exp(-1.0 / v)
    q1 = -q0 / v**2
    q2 = q0 * (1.0 / v**4 - 2.0 / v**3)
    den = p0 + q0
    num1 = p1 * q0 - p0 * q1
    s0 = p0 / den
    s1 = num1 / den**2
    s2 = (p2 * q0 - p0 * q2) / den**2 - 2.0 * num1 * (p1 + q1) / den**3
    sg = 1.0 if s > 0 else -1.0
    return s0, -2.0 * sg * s1, 4.0 * s2


@dataclass(frozen=True)
class CutoffProfile:
    """eta, its derivatives, and phi = eta^2."""

    name: str = "exp-smoothstep"

    def __call__(self, s, order: int = 0):
        return eta(s, order)

    def phi(self, s, order: int = 0):
        e0 = eta(s, 0)
        if order == 0:
            return e0 * e0
        e1 = eta(s, 1)
        if order == 1:
            return 2.0 * e0 * e1
        if order == 2:
            return 2.0 * (e1 * e1 + e0 * eta(s, 2))
        raise ValueError(f"order must be 0, 1 or 2, got {order}")

    def phi_ratio_sup(self, n: int = 200001) -> float:
        """sup of phi'^2/phi over the support, by dense sampling."""
        s = np.linspace(0.5, 1.0, n)[1:-1]
        p = self.phi(s)
        mask = p > 1e-300
        return float(np.max(self.phi(s[mask], 1) ** 2 / p[mask]))

    def eta_prime_sq_sup(self, n: int = 200001) -> float:
        s = np.linspace(0.5, 1.0, n)
        return float(np.max(eta(s, 1) ** 2))


def cutoff_eval(profile: CutoffProfile, s, order: int = 0):
    if order not in (0, 1, 2):
        raise ValueError(f"order must be 0, 1 or 2, got {order}")
    return profile(s, order)
