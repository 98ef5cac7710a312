"""Pure-Python geodesic kernels; reference and fallback for ``_kernels.pyx``.

State vector along a unit-speed geodesic of dx^2 + f(x) dth^2:
(x, th, x', th', A, A', B, B') where A, B are the scalar Jacobi fields
A(0)=1, A'(0)=0 and B(0)=0, B'(0)=1, i.e. A'' = -K A, B'' = -K B.
"""
import math

import numpy as np

OK, EXIT, MAXLEN, NOROOT = 0, 1, 2, 3
BACKEND = "python"


def _eta(s):
    r = abs(s)
    if r <= 0.5:
        return 1.0, 0.0, 0.0
    if r >= 1.0:
        return 0.0, 0.0, 0.0
    u = 2.0 * (1.0 - r)
    v = 1.0 - u
    p0 = math.exp(-1.0 / u)
    p1 = p0 / (u * u)
    p2 = p0 * (1.0 / u**4 - 2.0 / u**3)
    q0 = math.exp(-1.0 / v)
    q1 = -q0 / (v * v)
    q2 = q0 * (1.0 / v**4 - 2.0 / v**3)
    den = p0 + q0
    num1 = p1 * q0 - p0 * q1
    s1 = num1 / (den * den)
    s2 = (p2 * q0 - p0 * q2) / (den * den) - 2.0 * num1 * (p1 + q1) / den**3
    sg = 1.0 if s > 0 else -1.0
    return p0 / den, -2.0 * sg * s1, 4.0 * s2


def warp_eval(code, params, table, x):
    if code == 0:
        return params[0], 0.0, 0.0
    if code == 1:
        c = math.cosh(x)
        return params[0] * c * c, params[0] * math.sinh(2 * x), 2 * params[0] * math.cosh(2 * x)
    if code == 2:
        e0, e1, e2 = _eta(x)
        q = x * x + e0
        q1 = 2 * x + e1
        q2 = 2 + e2
        return 1.0 / q, -q1 / (q * q), -q2 / (q * q) + 2 * q1 * q1 / (q * q * q)
    # quintic Hermite interpolation of tabulated (f, f', f'')
    x0, dx = params[0], params[1]
    n = table.shape[0]
    t = (x - x0) / dx
    i = int(math.floor(t))
    if i < 0:
        i = 0
    elif i > n - 2:
        i = n - 2
    t -= i
    y0, d0, s0 = table[i, 0], table[i, 1] * dx, table[i, 2] * dx * dx
    y1, d1, s1 = table[i + 1, 0], table[i + 1, 1] * dx, table[i + 1, 2] * dx * dx
    t2 = t * t
    t3 = t2 * t
    t4 = t3 * t
    t5 = t4 * t
    h0 = 1 - 10 * t3 + 15 * t4 - 6 * t5
    h1 = t - 6 * t3 + 8 * t4 - 3 * t5
    h2 = 0.5 * (t2 - 3 * t3 + 3 * t4 - t5)
    h3 = 0.5 * (t3 - 2 * t4 + t5)
    h4 = -4 * t3 + 7 * t4 - 3 * t5
    h5 = 10 * t3 - 15 * t4 + 6 * t5
    g0 = -30 * t2 + 60 * t3 - 30 * t4
    g1 = 1 - 18 * t2 + 32 * t3 - 15 * t4
    g2 = 0.5 * (2 * t - 9 * t2 + 12 * t3 - 5 * t4)
    g3 = 0.5 * (3 * t2 - 8 * t3 + 5 * t4)
    g4 = -12 * t2 + 28 * t3 - 15 * t4
    g5 = 30 * t2 - 60 * t3 + 30 * t4
    k0 = -60 * t + 180 * t2 - 120 * t3
    k1 = -36 * t + 96 * t2 - 60 * t3
    k2 = 0.5 * (2 - 18 * t + 36 * t2 - 20 * t3)
    k3 = 0.5 * (6 * t - 24 * t2 + 20 * t3)
    k4 = -24 * t + 84 * t2 - 60 * t3
    k5 = 60 * t - 180 * t2 + 120 * t3
    f = y0 * h0 + d0 * h1 + s0 * h2 + s1 * h3 + d1 * h4 + y1 * h5
    f1 = (y0 * g0 + d0 * g1 + s0 * g2 + s1 * g3 + d1 * g4 + y1 * g5) / dx
    f2 = (y0 * k0 + d0 * k1 + s0 * k2 + s1 * k3 + d1 * k4 + y1 * k5) / (dx * dx)
    return f, f1, f2


def _rhs(code, params, table, y):
    f, f1, f2 = warp_eval(code, params, table, y[0])
    K = -(0.5 * f2 / f - 0.25 * f1 * f1 / (f * f))
    vx, vt = y[2], y[3]
    return (vx, vt, 0.5 * f1 * vt * vt, -(f1 / f) * vx * vt,
            y[5], -K * y[4], y[7], -K * y[6])


def _rk4(code, params, table, y, h):
    k1 = _rhs(code, params, table, y)
    y2 = [y[i] + 0.5 * h * k1[i] for i in range(8)]
    k2 = _rhs(code, params, table, y2)
    y3 = [y[i] + 0.5 * h * k2[i] for i in range(8)]
    k3 = _rhs(code, params, table, y3)
    y4 = [y[i] + h * k3[i] for i in range(8)]
    k4 = _rhs(code, params, table, y4)
    return [y[i] + h / 6.0 * (k1[i] + 2 * k2[i] + 2 * k3[i] + k4[i]) for i in range(8)]


def _start(code, params, table, x0, th0, alpha):
    f = warp_eval(code, params, table, x0)[0]
    return [x0, th0, math.cos(alpha), math.sin(alpha) / math.sqrt(f), 1.0, 0.0, 0.0, 1.0]


def geodesic_path(code, params, table, x0, th0, alpha, length, step, L):
    """Samples (s, x, th, x', th', A, B) every ``step`` up to ``length``."""
    y = _start(code, params, table, x0, th0, alpha)
    n = int(math.ceil(length / step - 1e-12))
    out = np.empty((n + 1, 7))
    out[0] = (0.0, y[0], y[1], y[2], y[3], y[4], y[6])
    s = 0.0
    status = OK
    for i in range(1, n + 1):
        h = min(step, length - s)
        y = _rk4(code, params, table, y, h)
        s += h
        out[i] = (s, y[0], y[1], y[2], y[3], y[4], y[6])
        if abs(y[0]) > L:
            return out[: i + 1], EXIT
    return out, status


def shoot(code, params, table, x0, alpha, Theta, step, L, smax):
    """Integrate from (x0, 0) until th = Theta (>0).

    Returns (x_end, s_end, status, A, B, x', th').
    """
    y = _start(code, params, table, x0, 0.0, alpha)
    s = 0.0
    while True:
        h = min(step, smax - s)
        if h <= 0:
            return y[0], s, MAXLEN, y[4], y[6], y[2], y[3]
        yn = _rk4(code, params, table, y, h)
        if yn[1] >= Theta:
            # partial step to hit th = Theta; Newton on the step length
            d = h * (Theta - y[1]) / (yn[1] - y[1])
            for _ in range(4):
                yd = _rk4(code, params, table, y, d)
                d -= (yd[1] - Theta) / yd[3]
            yd = _rk4(code, params, table, y, d)
            return yd[0], s + d, OK, yd[4], yd[6], yd[2], yd[3]
        y = yn
        s += h
        if abs(y[0]) > L:
            return y[0], s, EXIT, y[4], y[6], y[2], y[3]


def _meridian(code, params, table, xp, xq, step):
    length = abs(xq - xp)
    alpha = 0.0 if xq >= xp else math.pi
    if length == 0.0:
        return 0.0, alpha, 1, math.inf, OK
    y = _start(code, params, table, xp, 0.0, alpha)
    s = 0.0
    while s < length:
        h = min(step, length - s)
        y = _rk4(code, params, table, y, h)
        s += h
    return length, alpha, 1, y[4] / y[6], OK


def class_distance(code, params, table, xp, xq, Theta, step, L, smax, nscan):
    """Shortest geodesic from (xp, 0) to (xq, Theta) with th increasing.

    Returns (length, alpha, nroots, A/B at the far end, status). The Jacobi
    ratio A(rho)/B(rho) is the Hessian of the distance to the far endpoint,
    evaluated at the start point, in the direction normal to the geodesic.
    """
    if Theta <= 1e-9:  # meridian length exact to O(f Theta^2)
        return _meridian(code, params, table, xp, xq, step)
    alphas = [0.0]
    fs = [2.0 * L + 1.0]
    for k in range(nscan):
        a = 0.5 * math.pi * (1.0 - math.cos(math.pi * (k + 0.5) / nscan))
        r = shoot(code, params, table, xp, a, Theta, step, L, smax)
        alphas.append(a)
        fs.append(r[0] - xq)
    alphas.append(math.pi)
    fs.append(-(2.0 * L + 1.0))
    best = (math.inf, 0.0, 0, 0.0, NOROOT)
    nroots = 0
    for k in range(len(alphas) - 1):
        fa, fb = fs[k], fs[k + 1]
        if fa == 0.0 or (fa > 0) != (fb > 0):
            a, b = alphas[k], alphas[k + 1]
            side = 0
            for _ in range(200):
                if fa == 0.0:
                    b = a
                    break
                c = b - fb * (b - a) / (fb - fa)
                if not (min(a, b) < c < max(a, b)):
                    c = 0.5 * (a + b)
                fc = shoot(code, params, table, xp, c, Theta, step, L, smax)[0] - xq
                if (fc > 0) == (fb > 0):
                    b, fb = c, fc
                    if side == -1:
                        fa *= 0.5
                    side = -1
                else:
                    a, fa = c, fc
                    if side == 1:
                        fb *= 0.5
                    side = 1
                if abs(b - a) < 1e-15 or fc == 0.0:
                    break
            root = b if abs(fb) < abs(fa) else a
            r = shoot(code, params, table, xp, root, Theta, step, L, smax)
            if r[2] == OK and abs(r[0] - xq) < 1e-7:
                nroots += 1
                if r[1] < best[0]:
                    best = (r[1], root, 0, r[3] / r[4], OK)
    return best[0], best[1], nroots, best[3], best[4]


def ball_distances(code, params, table, xy, xz, dth, step, L, cutoff, fmin, nscan):
    """Distances from (xy, 0) to nodes (xz[i], dth[i]) shorter than ``cutoff``.

    Returns arrays (rho, alpha, ratio, sign). Nodes provably farther than
    ``cutoff`` get rho = inf. ``sign`` is +1/-1 for the th-direction of the
    minimiser as seen from the start point.
    """
    n = len(xz)
    rho = np.full(n, np.inf)
    alpha = np.zeros(n)
    ratio = np.zeros(n)
    sgn = np.zeros(n)
    twopi = 2.0 * math.pi
    for i in range(n):
        d = math.fmod(abs(dth[i]), twopi)
        s0 = 1.0 if dth[i] >= 0 else -1.0
        if d > math.pi:
            d = twopi - d
            s0 = -s0
        dx = xz[i] - xy
        for Th, sg in ((d, s0), (twopi - d, -s0)):
            lb = math.sqrt(dx * dx + fmin * Th * Th)
            if lb >= cutoff or lb >= rho[i]:
                continue
            r = class_distance(code, params, table, xy, xz[i], Th, step, L, 1.01 * cutoff, nscan)
            if r[4] == OK and r[0] < rho[i]:
                rho[i], alpha[i], ratio[i], sgn[i] = r[0], r[1], r[3], sg
        if rho[i] >= cutoff:
            rho[i] = math.inf
    return rho, alpha, ratio, sgn
