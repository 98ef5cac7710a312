# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled geodesic kernels. Mirrors geolab._kernels_py exactly."""
from libc.math cimport cos, sin, sqrt, exp, fabs, floor, fmod, cosh, sinh, ceil, INFINITY, M_PI
import numpy as np
cimport numpy as cnp

cnp.import_array()

BACKEND = "cython"
DEF OK = 0
DEF EXIT = 1
DEF MAXLEN = 2
DEF NOROOT = 3

cdef struct Warp:
    int code
    double p0
    double p1
    const double* tab
    int n


cdef struct Shot:
    double x
    double s
    int status
    double A
    double B
    double vx
    double vt


cdef inline void _eta(double s, double* e) noexcept nogil:
    cdef double r = fabs(s), u, v, p0, p1, p2, q0, q1, q2, den, num1, sg
    if r <= 0.5:
        e[0] = 1.0; e[1] = 0.0; e[2] = 0.0
        return
    if r >= 1.0:
        e[0] = 0.0; e[1] = 0.0; e[2] = 0.0
        return
    u = 2.0 * (1.0 - r)
    v = 1.0 - u
    p0 = exp(-1.0 / u)
    p1 = p0 / (u * u)
    p2 = p0 * (1.0 / (u * u * u * u) - 2.0 / (u * u * u))
    q0 = exp(-1.0 / v)
    q1 = -q0 / (v * v)
    q2 = q0 * (1.0 / (v * v * v * v) - 2.0 / (v * v * v))
    den = p0 + q0
    num1 = p1 * q0 - p0 * q1
    sg = 1.0 if s > 0 else -1.0
    e[0] = p0 / den
    e[1] = -2.0 * sg * num1 / (den * den)
    e[2] = 4.0 * ((p2 * q0 - p0 * q2) / (den * den) - 2.0 * num1 * (p1 + q1) / (den * den * den))


cdef inline void _warp(const Warp* w, double x, double* out) noexcept nogil:
    cdef double c, e[3], q, q1, q2, t, t2, t3, t4, t5, dx
    cdef double y0, d0, s0, y1, d1, s1
    cdef int i
    if w.code == 0:
        out[0] = w.p0; out[1] = 0.0; out[2] = 0.0
    elif w.code == 1:
        c = cosh(x)
        out[0] = w.p0 * c * c; out[1] = w.p0 * sinh(2 * x); out[2] = 2 * w.p0 * cosh(2 * x)
    elif w.code == 2:
        _eta(x, e)
        q = x * x + e[0]
        q1 = 2 * x + e[1]
        q2 = 2 + e[2]
        out[0] = 1.0 / q
        out[1] = -q1 / (q * q)
        out[2] = -q2 / (q * q) + 2 * q1 * q1 / (q * q * q)
    else:
        dx = w.p1
        t = (x - w.p0) / dx
        i = <int>floor(t)
        if i < 0:
            i = 0
        elif i > w.n - 2:
            i = w.n - 2
        t -= i
        y0 = w.tab[3 * i]; d0 = w.tab[3 * i + 1] * dx; s0 = w.tab[3 * i + 2] * dx * dx
        y1 = w.tab[3 * i + 3]; d1 = w.tab[3 * i + 4] * dx; s1 = w.tab[3 * i + 5] * dx * dx
        t2 = t * t; t3 = t2 * t; t4 = t3 * t; t5 = t4 * t
        out[0] = (y0 * (1 - 10 * t3 + 15 * t4 - 6 * t5) + d0 * (t - 6 * t3 + 8 * t4 - 3 * t5)
                  + s0 * 0.5 * (t2 - 3 * t3 + 3 * t4 - t5) + s1 * 0.5 * (t3 - 2 * t4 + t5)
                  + d1 * (-4 * t3 + 7 * t4 - 3 * t5) + y1 * (10 * t3 - 15 * t4 + 6 * t5))
        out[1] = (y0 * (-30 * t2 + 60 * t3 - 30 * t4) + d0 * (1 - 18 * t2 + 32 * t3 - 15 * t4)
                  + s0 * 0.5 * (2 * t - 9 * t2 + 12 * t3 - 5 * t4) + s1 * 0.5 * (3 * t2 - 8 * t3 + 5 * t4)
                  + d1 * (-12 * t2 + 28 * t3 - 15 * t4) + y1 * (30 * t2 - 60 * t3 + 30 * t4)) / dx
        out[2] = (y0 * (-60 * t + 180 * t2 - 120 * t3) + d0 * (-36 * t + 96 * t2 - 60 * t3)
                  + s0 * 0.5 * (2 - 18 * t + 36 * t2 - 20 * t3) + s1 * 0.5 * (6 * t - 24 * t2 + 20 * t3)
                  + d1 * (-24 * t + 84 * t2 - 60 * t3) + y1 * (60 * t - 180 * t2 + 120 * t3)) / (dx * dx)


cdef inline void _rhs(const Warp* w, const double* y, double* k) noexcept nogil:
    cdef double fw[3], K
    _warp(w, y[0], fw)
    K = -(0.5 * fw[2] / fw[0] - 0.25 * fw[1] * fw[1] / (fw[0] * fw[0]))
    k[0] = y[2]
    k[1] = y[3]
    k[2] = 0.5 * fw[1] * y[3] * y[3]
    k[3] = -(fw[1] / fw[0]) * y[2] * y[3]
    k[4] = y[5]
    k[5] = -K * y[4]
    k[6] = y[7]
    k[7] = -K * y[6]


cdef inline void _rk4(const Warp* w, const double* y, double h, double* out) noexcept nogil:
    cdef double k1[8], k2[8], k3[8], k4[8], t[8]
    cdef int i
    _rhs(w, y, k1)
    for i in range(8):
        t[i] = y[i] + 0.5 * h * k1[i]
    _rhs(w, t, k2)
    for i in range(8):
        t[i] = y[i] + 0.5 * h * k2[i]
    _rhs(w, t, k3)
    for i in range(8):
        t[i] = y[i] + h * k3[i]
    _rhs(w, t, k4)
    for i in range(8):
        out[i] = y[i] + h / 6.0 * (k1[i] + 2 * k2[i] + 2 * k3[i] + k4[i])


cdef inline void _start(const Warp* w, double x0, double th0, double alpha, double* y) noexcept nogil:
    cdef double fw[3]
    _warp(w, x0, fw)
    y[0] = x0; y[1] = th0; y[2] = cos(alpha); y[3] = sin(alpha) / sqrt(fw[0])
    y[4] = 1.0; y[5] = 0.0; y[6] = 0.0; y[7] = 1.0


cdef Shot _shoot(const Warp* w, double x0, double alpha, double Theta, double step,
                 double L, double smax) noexcept nogil:
    cdef double y[8], yn[8], yd[8], s = 0.0, h, d
    cdef int i, it
    cdef Shot r
    _start(w, x0, 0.0, alpha, y)
    while True:
        h = step if step < smax - s else smax - s
        if h <= 0:
            r.x = y[0]; r.s = s; r.status = MAXLEN; r.A = y[4]; r.B = y[6]; r.vx = y[2]; r.vt = y[3]
            return r
        _rk4(w, y, h, yn)
        if yn[1] >= Theta:
            d = h * (Theta - y[1]) / (yn[1] - y[1])
            for it in range(4):
                _rk4(w, y, d, yd)
                d -= (yd[1] - Theta) / yd[3]
            _rk4(w, y, d, yd)
            r.x = yd[0]; r.s = s + d; r.status = OK; r.A = yd[4]; r.B = yd[6]; r.vx = yd[2]; r.vt = yd[3]
            return r
        for i in range(8):
            y[i] = yn[i]
        s += h
        if fabs(y[0]) > L:
            r.x = y[0]; r.s = s; r.status = EXIT; r.A = y[4]; r.B = y[6]; r.vx = y[2]; r.vt = y[3]
            return r


cdef void _meridian(const Warp* w, double xp, double xq, double step, double* res) noexcept nogil:
    cdef double length = fabs(xq - xp), alpha, s = 0.0, h, y[8], yn[8]
    cdef int i
    alpha = 0.0 if xq >= xp else M_PI
    res[0] = length; res[1] = alpha; res[2] = 1; res[4] = OK
    if length == 0.0:
        res[3] = INFINITY
        return
    _start(w, xp, 0.0, alpha, y)
    while s < length:
        h = step if step < length - s else length - s
        _rk4(w, y, h, yn)
        for i in range(8):
            y[i] = yn[i]
        s += h
    res[3] = y[4] / y[6]


cdef void _class_distance(const Warp* w, double xp, double xq, double Theta, double step,
                          double L, double smax, int nscan, double* res) noexcept nogil:
    # res = (length, alpha, nroots, ratio, status)
    cdef double a, b, c, fa, fb, fc, prev_a, prev_f, cur_a, cur_f, root
    cdef int k, it, side, nroots = 0
    cdef Shot r
    if Theta <= 1e-9:  # meridian length exact to O(f Theta^2)
        _meridian(w, xp, xq, step, res)
        return
    res[0] = INFINITY; res[1] = 0.0; res[2] = 0; res[3] = 0.0; res[4] = NOROOT
    prev_a = 0.0
    prev_f = 2.0 * L + 1.0
    for k in range(nscan + 1):
        if k < nscan:
            cur_a = 0.5 * M_PI * (1.0 - cos(M_PI * (k + 0.5) / nscan))
            cur_f = _shoot(w, xp, cur_a, Theta, step, L, smax).x - xq
        else:
            cur_a = M_PI
            cur_f = -(2.0 * L + 1.0)
        fa = prev_f
        fb = cur_f
        if fa == 0.0 or (fa > 0) != (fb > 0):
            a = prev_a
            b = cur_a
            side = 0
            for it in range(200):
                if fa == 0.0:
                    b = a
                    break
                c = b - fb * (b - a) / (fb - fa)
                if not (min(a, b) < c < max(a, b)):
                    c = 0.5 * (a + b)
                fc = _shoot(w, xp, c, Theta, step, L, smax).x - xq
                if (fc > 0) == (fb > 0):
                    b = c; fb = fc
                    if side == -1:
                        fa *= 0.5
                    side = -1
                else:
                    a = c; fa = fc
                    if side == 1:
                        fb *= 0.5
                    side = 1
                if fabs(b - a) < 1e-15 or fc == 0.0:
                    break
            root = b if fabs(fb) < fabs(fa) else a
            r = _shoot(w, xp, root, Theta, step, L, smax)
            if r.status == OK and fabs(r.x - xq) < 1e-7:
                nroots += 1
                if r.s < res[0]:
                    res[0] = r.s; res[1] = root; res[3] = r.A / r.B; res[4] = OK
        prev_a = cur_a
        prev_f = cur_f
    res[2] = nroots


cdef Warp _mkwarp(int code, const double[::1] params, const double[:, ::1] table):
    cdef Warp w
    w.code = code
    w.p0 = params[0]
    w.p1 = params[1]
    w.tab = &table[0, 0]
    w.n = table.shape[0]
    return w


def warp_eval(int code, double[::1] params, double[:, ::1] table, double x):
    cdef Warp w = _mkwarp(code, params, table)
    cdef double out[3]
    _warp(&w, x, out)
    return out[0], out[1], out[2]


def geodesic_path(int code, double[::1] params, double[:, ::1] table, double x0, double th0,
                  double alpha, double length, double step, double L):
    cdef Warp w = _mkwarp(code, params, table)
    cdef int n = <int>ceil(length / step - 1e-12), i, j, status = OK
    cdef double y[8], yn[8], s = 0.0, h
    out = np.empty((n + 1, 7))
    cdef double[:, ::1] o = out
    _start(&w, x0, th0, alpha, y)
    o[0, 0] = 0.0; o[0, 1] = y[0]; o[0, 2] = y[1]; o[0, 3] = y[2]; o[0, 4] = y[3]; o[0, 5] = y[4]; o[0, 6] = y[6]
    for i in range(1, n + 1):
        h = step if step < length - s else length - s
        _rk4(&w, y, h, yn)
        for j in range(8):
            y[j] = yn[j]
        s += h
        o[i, 0] = s; o[i, 1] = y[0]; o[i, 2] = y[1]; o[i, 3] = y[2]; o[i, 4] = y[3]; o[i, 5] = y[4]; o[i, 6] = y[6]
        if fabs(y[0]) > L:
            return out[: i + 1], EXIT
    return out, status


def shoot(int code, double[::1] params, double[:, ::1] table, double x0, double alpha,
          double Theta, double step, double L, double smax):
    cdef Warp w = _mkwarp(code, params, table)
    cdef Shot r = _shoot(&w, x0, alpha, Theta, step, L, smax)
    return r.x, r.s, r.status, r.A, r.B, r.vx, r.vt


def class_distance(int code, double[::1] params, double[:, ::1] table, double xp, double xq,
                   double Theta, double step, double L, double smax, int nscan):
    cdef Warp w = _mkwarp(code, params, table)
    cdef double res[5]
    with nogil:
        _class_distance(&w, xp, xq, Theta, step, L, smax, nscan, res)
    return res[0], res[1], <int>res[2], res[3], <int>res[4]


def ball_distances(int code, double[::1] params, double[:, ::1] table, double xy,
                   double[::1] xz, double[::1] dth, double step, double L, double cutoff,
                   double fmin, int nscan):
    cdef Warp w = _mkwarp(code, params, table)
    cdef Py_ssize_t n = xz.shape[0], i
    rho_a = np.full(n, np.inf)
    alpha_a = np.zeros(n)
    ratio_a = np.zeros(n)
    sgn_a = np.zeros(n)
    cdef double[::1] rho = rho_a, alpha = alpha_a, ratio = ratio_a, sgn = sgn_a
    cdef double twopi = 2.0 * M_PI, d, s0, dx, Th, sg, lb, res[5]
    cdef int c
    with nogil:
        for i in range(n):
            d = fmod(fabs(dth[i]), twopi)
            s0 = 1.0 if dth[i] >= 0 else -1.0
            if d > M_PI:
                d = twopi - d
                s0 = -s0
            dx = xz[i] - xy
            for c in range(2):
                if c == 0:
                    Th = d; sg = s0
                else:
                    Th = twopi - d; sg = -s0
                lb = sqrt(dx * dx + fmin * Th * Th)
                if lb >= cutoff or lb >= rho[i]:
                    continue
                _class_distance(&w, xy, xz[i], Th, step, L, 1.01 * cutoff, nscan, res)
                if <int>res[4] == OK and res[0] < rho[i]:
                    rho[i] = res[0]; alpha[i] = res[1]; ratio[i] = res[3]; sgn[i] = sg
            if rho[i] >= cutoff:
                rho[i] = INFINITY
    return rho_a, alpha_a, ratio_a, sgn_a
