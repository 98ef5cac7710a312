import json
import math

import numpy as np
import pytest

from geolab import geometry as G
from geolab.flows import deturck as D
from geolab.flows import harmonic as H
from geolab.flows import ricci as R

EX = G.WarpedMetric(G.example())


# --- Ricci flow ----------------------------------------------------------------


@pytest.mark.parametrize("scheme", ["explicit", "implicit"])
def test_flat_is_fixed_point(scheme):
    st = R.flat_state(64)
    tr = R.ricci_flow_run(st, 0.3, scheme)
    assert np.all(tr.final.u == 0.0)


def _homothety_error(n, scheme="explicit", window=2.0, t=0.1):
    st = R.hyperbolic_state(n, 20.0)
    K = R.ricci_flow_run(st, t, scheme).final.gauss()
    mask = np.abs(st.x[1:-1]) <= window
    return float(np.max(np.abs(K[mask] * (1 + 2 * t) + 1)))


def test_hyperbolic_homothety():
    assert _homothety_error(1024) <= 1e-3


def test_hyperbolic_second_order_refinement():
    e1, e2 = _homothety_error(256), _homothety_error(512)
    assert e1 / e2 >= 3.5


def test_implicit_scheme_converges_to_homothety():
    assert _homothety_error(512, "implicit") <= 5e-3


def test_hyperbolic_initial_curvature():
    st = R.hyperbolic_state(512)
    np.testing.assert_allclose(st.gauss()[np.abs(st.x[1:-1]) <= 2], -1.0, atol=2e-3)


def test_state_from_warp_reproduces_example_curvature():
    st = R.state_from_warp(EX, 2048, (-3, 3))
    x = st.x[1:-1]
    sel = (np.abs(x) >= 1.2) & (np.abs(x) <= 2.8)
    np.testing.assert_allclose(st.gauss()[sel], -2 / x[sel] ** 2, rtol=1e-3)


def test_too_few_nodes_rejected():
    with pytest.raises(ValueError):
        R.flat_state(8)


def test_t_end_beyond_T_rejected():
    with pytest.raises(ValueError):
        R.ricci_flow_run(R.flat_state(32), 0.2, T=0.1)


def test_unknown_scheme_rejected():
    with pytest.raises(ValueError):
        R.ricci_flow_run(R.flat_state(32), 0.1, "rk45")


def test_oversized_step_halved_under_cfl():
    st = R.bump_state(128)
    tr = R.ricci_flow_run(st, 0.05, dt=10.0)
    assert tr.rejected > 0 and not tr.aborted
    assert np.all(np.isfinite(tr.final.u))


def test_curvature_monitor_aborts():
    st = R.bump_state(256, amplitude=1.0, width=0.5)
    tr = R.ricci_flow_run(st, 0.1, k0=1e-3)
    assert tr.aborted and "exceeds k0" in tr.reason
    assert tr.states[-1].t < 0.1


def test_explicit_and_implicit_agree():
    a = R.ricci_flow_run(R.bump_state(256), 0.05, "explicit").final.u
    b = R.ricci_flow_run(R.bump_state(256), 0.05, "implicit").final.u
    assert np.max(np.abs(a - b)) < 1e-3


def test_trajectory_json_and_checkpoints():
    tr = R.ricci_flow_run(R.bump_state(64), 0.04, checkpoints=[0.01, 0.02])
    doc = json.loads(tr.to_json())
    assert [c["t"] for c in doc["checkpoints"]] == [0.0, 0.01, 0.02, 0.04]
    assert tr.at(0.02).t == 0.02
    assert tr.shi_bounded
    for s in tr.states:
        assert 0 < s.diagnostics["c1"] <= s.diagnostics["c2"]


def test_equivalence_vs_initial():
    u0 = np.zeros(5)
    rep = R.equivalence_vs_initial(u0, np.log([1.0, 2.0, 1.5, 0.5, 1.0]) / 2)
    assert rep.c1 == pytest.approx(0.5) and rep.c2 == pytest.approx(2.0)


# --- harmonic map flow ------------------------------------------------------------


def test_existence_time():
    assert H.existence_time(1.0, n=2, T=1.0) == pytest.approx(math.log(2) / 4, abs=1e-12)
    assert H.existence_time(1.0, n=2, T=0.1) == 0.1


def test_identity_gradient_is_sqrt2_on_flat():
    st = R.flat_state(64)
    tg = H.DiagonalTarget.from_state(st)
    assert H.map_gradient_sup(H.identity_map(st.s), st, tg).sup == pytest.approx(math.sqrt(2))


def test_linear_map_energy_density_on_flat():
    st = R.flat_state(64)
    tg = H.DiagonalTarget.from_state(st)
    e = H.energy_density(2 * st.s, H.DomainGrid.from_state(st), tg)
    np.testing.assert_allclose(e, 5.0)


def test_identity_on_static_flat_is_fixed():
    st = R.flat_state(64)
    tg = H.DiagonalTarget.from_state(st)
    tr = H.harmonic_flow_run(st, tg, H.identity_map(st.s), 0.5, evolve_domain=False)
    np.testing.assert_allclose(tr.maps[-1].X, st.s, rtol=0, atol=1e-13)


def test_tension_vanishes_for_identity_onto_initial_metric():
    st = R.bump_state(256)
    tg = H.DiagonalTarget.from_state(st)
    tau = H.tension(st.s, H.DomainGrid.from_state(st), tg)
    assert np.max(np.abs(tau[2:-2])) < 1e-6


def _energy(X, st, tg):
    dom = H.DomainGrid.from_state(st)
    return float(np.sum(H.energy_density(X, dom, tg) * np.sqrt(dom.a * dom.b)) * dom.ds)


def test_energy_decreases_on_static_domain():
    st = R.bump_state(256)
    tg = H.DiagonalTarget.from_state(st)
    tr = H.harmonic_flow_run(st, tg, H.perturbed_map(st.s), 0.05, [0.01, 0.02],
                             evolve_domain=False)
    E = [_energy(m.X, st, tg) for m in tr.maps]
    assert all(b < a for a, b in zip(E, E[1:]))


def test_nonmonotone_initial_map_rejected():
    st = R.flat_state(64)
    tg = H.DiagonalTarget.from_state(st)
    X = st.s.copy()
    X[10], X[11] = X[11], X[10]
    with pytest.raises(H.DiffeomorphismError):
        H.harmonic_flow_run(st, tg, H.EquivariantMap(st.s, X), 0.01)


def test_gradient_bound_example_target():
    st = R.flat_state(512)
    tg = H.DiagonalTarget.from_warp(EX)
    T1 = H.existence_time(G.curvature_bound(EX))
    tr = H.harmonic_flow_run(st, tg, H.identity_map(st.s), T1)
    assert not tr.aborted
    assert tr.grad_sup_running <= 2 * math.sqrt(2)


def test_bochner_flat_identity_is_exact():
    st = R.flat_state(128)
    tg = H.DiagonalTarget.from_state(st)
    tr = H.harmonic_flow_run(st, tg, H.identity_map(st.s), 0.03, [0.01, 0.02])
    assert H.bochner_residual(tr, tg, 0.02, 0.01).sup <= 1e-12


def test_bochner_needs_three_levels():
    st = R.flat_state(64)
    tg = H.DiagonalTarget.from_state(st)
    tr = H.harmonic_flow_run(st, tg, H.identity_map(st.s), 0.01)
    with pytest.raises(ValueError):
        H.bochner_residual(tr, tg, 0.01, 0.005)


def _bochner_sup(n, t=0.02, delta=0.002):
    d = delta * 1024 / n  # dt and ds refined together
    st = R.bump_state(n)
    tg = H.DiagonalTarget.from_state(st)
    tr = H.harmonic_flow_run(st, tg, H.perturbed_map(st.s), t + d, [t - d, t])
    return H.bochner_residual(tr, tg, t, d, k0=1.0)


def test_bochner_residual_refines():
    a, b = _bochner_sup(1024), _bochner_sup(2048)
    assert a.sup / b.sup > 3
    assert b.inequality_ok


# --- pushforward / pullback / uniqueness --------------------------------------------


def test_pushforward_of_identity_is_domain_metric():
    st = R.bump_state(128)
    pf = D.pushforward_metric(H.identity_map(st.s), st)
    np.testing.assert_allclose(pf.g_yy, np.exp(2 * st.u), rtol=1e-12)
    np.testing.assert_allclose(pf.g_thth, np.exp(2 * st.u), rtol=1e-12)
    assert pf.is_positive()


def test_pushforward_of_linear_map_on_flat():
    st = R.flat_state(65, L=1.0)
    m = H.EquivariantMap(st.s, 2 * st.s)
    pf = D.pushforward_metric(m, st, y=np.linspace(-1.0, 1.0, 9))
    np.testing.assert_allclose(pf.g_yy, 0.25, rtol=1e-12)
    np.testing.assert_allclose(pf.g_thth, 1.0, rtol=1e-12)


def test_pushforward_rejects_nonmonotone():
    st = R.flat_state(64)
    X = st.s.copy()
    X[5] = X[7]
    with pytest.raises(H.DiffeomorphismError):
        D.pushforward_metric(H.EquivariantMap(st.s, X), st)


def test_pullback_of_pushforward_round_trip():
    st = R.bump_state(1024)
    m = H.perturbed_map(st.s)
    pf = D.pushforward_metric(m, st, y=st.s)
    gss, gtt = D.pullback_of_pushforward(m, pf)
    a = np.exp(2 * st.u)
    inner = slice(8, -8)
    np.testing.assert_allclose(gtt[inner], a[inner], rtol=1e-4)
    np.testing.assert_allclose(gss[inner], a[inner], rtol=1e-3)


def test_identity_pullback_static_flat():
    st = R.flat_state(64)
    tg = H.DiagonalTarget.from_state(st)
    tr = H.harmonic_flow_run(st, tg, H.identity_map(st.s), 0.04, [0.01, 0.02],
                             evolve_domain=False)
    rep = D.pullback_evolution_check(tr, tg, [0.01, 0.02, 0.04])
    assert rep.c1 == pytest.approx([1.0] * 3) and rep.c2 == pytest.approx([1.0] * 3)
    assert max(rep.sqrt_t_norm) < 1e-12


def test_pullback_equivalence_on_perturbed_run():
    st = R.bump_state(512)
    tg = H.DiagonalTarget.from_state(st)
    times = [0.01, 0.02, 0.04]
    tr = H.harmonic_flow_run(st, tg, H.perturbed_map(st.s), 0.05, times)
    rep = D.pullback_evolution_check(tr, tg, times)
    assert rep.equivalence_ok and rep.nonincreasing


def test_uniqueness_flat_exact():
    rep = D.uniqueness_experiment(lambda n: R.flat_state(n), [64, 128], 0.05)
    assert max(r["D_metric"] for r in rep.rows) <= 1e-12
    assert max(r["D_pushforward"] for r in rep.rows) <= 1e-12


def test_uniqueness_rejects_mismatched_initial_data():
    calls = iter([R.bump_state(64), R.bump_state(64, amplitude=0.4)])
    with pytest.raises(ValueError):
        D.uniqueness_experiment(lambda n: next(calls), [64], 0.01)


def test_uniqueness_bump_refines():
    rep = D.uniqueness_experiment(lambda n: R.bump_state(n), [256, 512], 0.05)
    assert rep.refinement_ratios("D_metric")[0] >= 3
    assert rep.refinement_ratios("D_pushforward")[0] >= 3
    assert json.loads(rep.to_json())["final"]["512"]["D_metric"] > 0
