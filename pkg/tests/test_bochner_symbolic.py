"""Symbolic derivation of the curvature coefficient in the Bochner identity.

For equivariant maps X(s) between diagonal metrics a ds^2 + b dth^2 (evolving
by Ricci flow) and A dX^2 + B dth^2, with e = |dF|^2:

    d_t e = Lap e - 2 |grad dF|^2 + c K_N X_s^2 A B / (a b)

holds identically with c = 4 (twice the sectional-curvature term 2 K_N |dF ^ dF|^2).
"""
import pytest

sp = pytest.importorskip("sympy")


def _bochner_defect():
    s, t, c = sp.symbols("s t c")
    a = sp.Function("a")(s, t)
    b = sp.Function("b")(s, t)
    X = sp.Function("X")(s, t)
    Y = sp.Symbol("Y")
    Af, Bf = sp.Function("A"), sp.Function("B")
    A, B = Af(X), Bf(X)
    dA = sp.diff(Af(Y), Y).subs(Y, X)
    dB = sp.diff(Bf(Y), Y).subs(Y, X)
    Xs = sp.diff(X, s)
    W = sp.sqrt(a * b)
    KM = -1 / (2 * W) * sp.diff(sp.diff(b, s) / W, s)
    tau = ((sp.diff(X, s, 2) - sp.diff(a, s) / (2 * a) * Xs + dA / (2 * A) * Xs**2) / a
           + (sp.diff(b, s) / (2 * a) * Xs - dB / (2 * A)) / b)
    e = Xs**2 * A / a + B / b
    # second fundamental form of F
    H_X_ss = sp.diff(X, s, 2) - sp.diff(a, s) / (2 * a) * Xs + dA / (2 * A) * Xs**2
    H_X_tt = sp.diff(b, s) / (2 * a) * Xs - dB / (2 * A)
    H_T_st = -sp.diff(b, s) / (2 * b) + dB / (2 * B) * Xs
    hess_sq = (H_X_ss**2 / a**2 + H_X_tt**2 / b**2) * A + 2 * H_T_st**2 / (a * b) * B
    lap = sp.diff(W / a * sp.diff(e, s), s) / W
    KN = (-1 / (2 * sp.sqrt(Af(Y) * Bf(Y)))
          * sp.diff(sp.diff(Bf(Y), Y) / sp.sqrt(Af(Y) * Bf(Y)), Y)).subs(Y, X)
    lhs = sp.diff(e, t).subs({sp.Derivative(a, t): -2 * KM * a,
                              sp.Derivative(b, t): -2 * KM * b,
                              sp.Derivative(X, t): tau}).doit()
    rhs = lap - 2 * hess_sq + c * KN * Xs**2 * A * B / (a * b)
    return sp.expand(lhs - rhs), c


def test_curvature_coefficient_is_four():
    defect, c = _bochner_defect()
    assert sp.solve(sp.simplify(defect), c) == [4]
    assert sp.simplify(defect.subs(c, 4)) == 0
