"""Command-line entry point: ``geolab <command> [options]``.

Exit codes: 0 all assertions pass, 1 assertion or module failure,
2 configuration error, 3 output I/O error.
"""
from __future__ import annotations

import argparse
import logging
import math
import os
import sys
import time

import numpy as np

from . import geometry as G
from .config import COMMANDS, ConfigError, ExperimentConfig, parse_config
from .report import Plot, RunReport, emit_report

log = logging.getLogger("geolab")

EXIT_OK, EXIT_FAIL, EXIT_CONFIG, EXIT_IO = 0, 1, 2, 3


def _metric(cfg: ExperimentConfig) -> G.WarpedMetric:
    prof = cfg.profile
    params = {} if prof == "example" else {"scale": cfg["manifold.scale"]}
    return G.WarpedMetric(G.profile_by_name(prof, **params), L=cfg["grid.L"])


def _monotone_decreasing(v) -> bool:
    return all(b < a for a, b in zip(v, v[1:]))


# ---------------------------------------------------------------------------
# curvature


def _closed_form(prof: str, scale: float, x: float):
    """(gamma_1_22, gamma_2_12, rm_norm_sq) in closed form, or None."""
    if prof == "flat":
        return 0.0, 0.0, 0.0
    if prof == "hyperbolic":
        return -0.5 * scale * math.sinh(2 * x), math.tanh(x), 2.0
    if prof == "example" and abs(x) >= 1:
        return x**-3, -1.0 / x, 8.0 / x**4
    return None


def run_curvature(cfg: ExperimentConfig, rep: RunReport) -> None:
    m = _metric(cfg)
    xs = cfg["grid.x"]
    rows = G.curvature_table(m, xs)
    header = ["x", "gamma_1_22", "gamma_2_12", "K", "rm_norm_sq"]
    rep.table("curvature", header, rows)
    keys = ("gamma_1_22", "gamma_2_12", "rm_norm_sq")
    tol, tol_fd = cfg["tolerances.curvature"], cfg["tolerances.fd"]
    for r in rows:
        x = r["x"]
        ref = _closed_form(cfg.profile, cfg["manifold.scale"], x)
        if ref is not None:
            err = max(abs(r[k] - v) for k, v in zip(keys, ref))
            rep.check(f"closed_form(x={x:g})", err, tol, err <= tol)
        fd = G.curvature_bundle_fd(m, x)
        err = max(abs(fd.christoffel[0, 1, 1] - r["gamma_1_22"]),
                  abs(fd.christoffel[1, 0, 1] - r["gamma_2_12"]),
                  abs(fd.rm_norm_sq - r["rm_norm_sq"]))
        rep.check(f"finite_difference(x={x:g})", err, tol_fd, err <= tol_fd)
    if len(xs) > 1:
        rep.plots.append(Plot("curvature", "x", "|Rm|^2",
                              {"rm_norm_sq": (xs, [r["rm_norm_sq"] for r in rows])}))


# ---------------------------------------------------------------------------
# distance and loop bounds


def run_distance(cfg: ExperimentConfig, rep: RunReport) -> None:
    from .geodesics import distance, loop_bounds_table

    m = _metric(cfg)
    p, q = tuple(cfg["distance.p"]), tuple(cfg["distance.q"])
    w = cfg["distance.windings"]
    d = distance(m, p, q, windings=w)
    back = distance(m, q, p, windings=w)
    rep.table("distance", ["p_x", "p_theta", "q_x", "q_theta", "rho", "winding",
                           "minimizer_count", "near_cut"],
              [{"p_x": p[0], "p_theta": p[1], "q_x": q[0], "q_theta": q[1], "rho": d.value,
                "winding": d.winding, "minimizer_count": d.minimizer_count,
                "near_cut": d.near_cut}])
    asym = abs(d.value - back.value)
    rep.check("symmetry", asym, 1e-6, asym <= 1e-6)
    xs = cfg["distance.loop_x"]
    if xs:
        rows = loop_bounds_table(m, xs)
        rep.table("loops", ["x", "bound"], rows)
        b = [r["bound"] for r in rows]
        if len(b) > 1 and cfg.profile == "example":  # fibers shrink only there
            rep.check("loop_bound_decreasing", b, "strict", _monotone_decreasing(b))
        c = cfg["tolerances.loop"]
        for r in rows:
            cap = c * math.pi * math.sqrt(m.warp(r["x"]))
            rep.check(f"loop_bound(x={r['x']:g})", r["bound"], cap, r["bound"] <= cap)
        rep.plots.append(Plot("loops", "x", "loop bound", {"bound": (xs, b)}))


# ---------------------------------------------------------------------------
# smoothed distance vs Green-Wu


def run_mollify(cfg: ExperimentConfig, rep: RunReport) -> None:
    from .mollify import SmoothedDistance, derivative_bound_report, green_wu_report, sample_points

    m = _metric(cfg)
    sd = SmoothedDistance(m, a=cfg["mollify.a"], n=cfg["mollify.n"])
    lo, hi = cfg["mollify.rho_range"]
    pts = sample_points(m, 8 * cfg["mollify.samples"], cfg["run.seed"], (-hi, hi))
    pts = [p for p in pts if lo <= float(sd.table(np.array([p[0]]), np.array([p[1]]))[0]) <= hi]
    pts = sorted(pts[: cfg["mollify.samples"]])
    sm = derivative_bound_report(sd, pts)
    gw = green_wu_report(m, sd.table, cfg["mollify.green_wu_x"])
    header = ["rho", "grad_norm", "hess_norm", "method"]
    rep.table("mollify", header, sm.rows() + gw.rows())
    # sandwich and exact truncation on the evaluated samples
    slack = cfg["tolerances.sandwich"]
    gap, trunc = 0.0, 0.0
    for y in sm.samples:
        v = sd.evaluate(y)
        gap = max(gap, abs(v.rhobar - v.rho) - sd.k1)
        if v.rhobar <= sd.a / 2:
            trunc = max(trunc, abs(v.rhobar_a))
    rep.check("sandwich", gap, slack, gap <= slack)
    rep.check("truncation_exact", trunc, 0.0, trunc == 0.0)
    rep.check("rhobar_a_finite", float(np.max(sm.hess_norms)), "finite",
              bool(np.all(np.isfinite(sm.hess_norms)) and np.all(np.isfinite(sm.grad_norms))))
    tol = cfg["tolerances.slope"]
    rep.check("rhobar_a_hess_slope", sm.trend_slope, tol, abs(sm.trend_slope) <= tol)
    rep.check("rhobar_a_grad_slope", sm.grad_slope, tol, abs(sm.grad_slope) <= tol)
    growth = [float(b / a) for a, b in zip(gw.hess_norms, gw.hess_norms[1:])]
    rep.check("green_wu_growth", growth, cfg["tolerances.growth"],
              all(g >= cfg["tolerances.growth"] for g in growth))
    ratio = abs(gw.trend_slope) / max(abs(sm.trend_slope), 1e-300)
    rep.check("slope_ratio", ratio, cfg["tolerances.slope_ratio"],
              ratio >= cfg["tolerances.slope_ratio"])
    rep.plots.append(Plot("mollify", "x", "Hessian norm bound", {
        "green_wu": ([p[0] for p in gw.samples], list(gw.hess_norms)),
        "rhobar_a": ([abs(p[0]) for p in sm.samples], list(sm.hess_norms))}, logy=True))


# ---------------------------------------------------------------------------
# conformal rescaling


def run_rescale(cfg: ExperimentConfig, rep: RunReport) -> None:
    from .conformal import ConformalFactor, conformal_curvature, decay_check, rescaled_gauss_direct
    from .mollify import SmoothedDistance, sample_points

    m = _metric(cfg)
    sd = SmoothedDistance(m, n=cfg["mollify.n"])
    pts = sample_points(m, cfg["rescale.samples"], cfg["run.seed"])
    avals = cfg["rescale.a_values"]
    dr = decay_check(m, avals, pts, sd)
    rep.table("decay", ["a", "x", "psi", "rm_norm_rescaled", "ratio"], dr.rows)
    tol = cfg["tolerances.conformal"]
    worst = 0.0
    for a in avals:
        fac = ConformalFactor.from_smoothed(sd.with_truncation(a))
        for p in pts:
            jet = fac.jet(p)
            k_law = conformal_curvature(m, fac, p, jet).gauss
            k_dir = rescaled_gauss_direct(m, fac, p, jet)
            worst = max(worst, abs(k_law - k_dir) / max(abs(k_dir), 1e-300))
    rep.check("transformation_law_vs_direct", worst, tol, worst <= tol)
    rep.check("decay_uniform", dr.spread, cfg["tolerances.uniform"],
              dr.spread <= cfg["tolerances.uniform"])
    series = {}
    for a in avals:
        r = sorted((row["x"], row["ratio"]) for row in dr.rows if row["a"] == a)
        series[f"a={a:g}"] = ([v[0] for v in r], [v[1] for v in r])
    rep.plots.append(Plot("decay", "x", "|Rm^a| e^psi", series, logy=True))


# ---------------------------------------------------------------------------
# flows


def _flow_state(cfg: ExperimentConfig, nodes: int):
    from .flows import ricci as R

    prof, L = cfg.profile, cfg["grid.L"]
    if prof == "flat":
        return R.flat_state(nodes, L)
    if prof == "hyperbolic":
        return R.hyperbolic_state(nodes, L)
    if prof == "bump":
        return R.bump_state(nodes, L)
    return R.state_from_warp(_metric(cfg), nodes, tuple(cfg["flow.x_range"]))


def _hyperbolic_error(cfg: ExperimentConfig, nodes: int, t: float) -> float:
    from .flows import ricci as R

    st = _flow_state(cfg, nodes)
    tr = R.ricci_flow_run(st, t, cfg["flow.scheme"])
    K = tr.final.gauss()
    mask = np.abs(st.x[1:-1]) <= cfg["flow.window"]
    return float(np.max(np.abs(K[mask] * (1 + 2 * t) + 1)))


def run_flow(cfg: ExperimentConfig, rep: RunReport) -> None:
    from .flows import harmonic as H
    from .flows import ricci as R

    t_end = cfg["times.t_end"]
    st = _flow_state(cfg, cfg["grid.nodes"])
    tr = R.ricci_flow_run(st, t_end, cfg["flow.scheme"], cfg["times.checkpoints"],
                          T=cfg["times.T"])
    if tr.aborted:
        raise RuntimeError(tr.reason)
    rows = [{"t": s.t, **{k: s.diagnostics[k] for k in ("sup_rm", "shi", "c1", "c2")}}
            for s in tr.states]
    rep.table("flow", ["t", "sup_rm", "shi", "c1", "c2"], rows)
    rep.documents["trajectory"] = tr.to_json()
    rep.check("shi_bounded", tr.monitor["shi"], "finite", tr.shi_bounded)
    if cfg.profile == "hyperbolic":
        tol = cfg["tolerances.flow"]
        orders = cfg["flow.orders"]
        errs = [_hyperbolic_error(cfg, n, t_end) for n in orders]
        e = _hyperbolic_error(cfg, cfg["grid.nodes"], t_end)
        rep.check("homothety_K", e, tol, e <= tol)
        obs = [math.log2(a / b) for a, b in zip(errs, errs[1:])]
        rep.check("convergence_order", obs, cfg["tolerances.order"],
                  all(o >= cfg["tolerances.order"] for o in obs))
        rep.table("convergence", ["nodes", "error"],
                  [{"nodes": n, "error": v} for n, v in zip(orders, errs)])
    if cfg["flow.harmonic"]:
        T1_unit = H.existence_time(1.0, n=2, T=1.0)
        rep.check("T1(k0=1,n=2,T=1)", T1_unit, math.log(2) / 4,
                  abs(T1_unit - math.log(2) / 4) <= 1e-12)
        k0 = math.sqrt(2) * float(np.abs(st.gauss()).max())
        if cfg["flow.target"] == "initial":
            tg = H.DiagonalTarget.from_state(st)
        else:
            tm = G.WarpedMetric(G.profile_by_name(cfg["flow.target"]), L=cfg["grid.L"])
            tg = H.DiagonalTarget.from_warp(tm)
            k0 = max(k0, G.curvature_bound(tm))
        T1 = H.existence_time(k0, T=cfg["times.T"])
        mt = H.harmonic_flow_run(st, tg, H.identity_map(st.s), T1, [T1 / 4, T1 / 2])
        if mt.aborted:
            raise RuntimeError(mt.reason)
        rep.documents["harmonic"] = mt.to_json()
        K1 = H.map_gradient_sup(H.identity_map(st.s), st, tg).sup
        rep.check("gradient_bound_2K1", mt.grad_sup_running, 2 * K1, mt.grad_sup_running <= 2 * K1)
        rep.check("monitored_k0", mt.sup_rm_running, k0, mt.sup_rm_running <= k0)
        bound = 2 * math.sqrt(2)
        rep.check("gradient_bound(t<=T1)", mt.grad_sup_running, bound,
                  mt.grad_sup_running <= bound)
    rep.plots.append(Plot("flow", "t", "sup|Rm|",
                          {"sup_rm": ([r["t"] for r in rows], [r["sup_rm"] for r in rows])}))


def run_uniqueness(cfg: ExperimentConfig, rep: RunReport) -> None:
    from .flows import deturck as D
    from .flows import harmonic as H

    t_end = cfg["times.t_end"]
    grids = sorted(cfg["uniqueness.grids"])
    kind = cfg["uniqueness.initial_map"]
    ur = D.uniqueness_experiment(lambda n: _flow_state(cfg, n), grids, t_end,
                                 cfg["times.checkpoints"], initial_map=kind)
    rep.table("uniqueness", ["t", "D_metric", "D_pushforward", "grid"], ur.rows)
    rep.documents["uniqueness"] = ur.to_json()
    if cfg.profile == "flat":
        worst = max(max(r["D_metric"], r["D_pushforward"]) for r in ur.rows)
        rep.check("flat_D", worst, cfg["tolerances.flat"], worst <= cfg["tolerances.flat"])
    else:
        fin = ur.final[grids[-1]]["D_metric"]
        tol = cfg["tolerances.uniqueness"]
        rep.check("D_metric(finest)", fin, tol, fin <= tol)
        q = cfg["tolerances.refinement"]
        for key in ("D_metric", "D_pushforward"):
            r = ur.refinement_ratios(key)
            rep.check(f"{key}_refinement", r, q, all(v >= q for v in r))
    # pullback equivalence on the finest explicit run
    times = [t for t in cfg["uniqueness.pullback_times"] if t <= t_end]
    if times:
        st = _flow_state(cfg, grids[-1])
        tg = H.DiagonalTarget.from_state(st)
        m0 = H.identity_map(st.s) if kind == "identity" else H.perturbed_map(st.s)
        traj = H.harmonic_flow_run(st, tg, m0, t_end, times)
        pb = D.pullback_evolution_check(traj, tg, times)
        rep.table("pullback", ["t", "sqrt_t_norm", "c1", "c2"],
                  [{"t": t, "sqrt_t_norm": v, "c1": a, "c2": b}
                   for t, v, a, b in zip(pb.times, pb.sqrt_t_norm, pb.c1, pb.c2)])
        rep.check("pullback_equivalence", [min(pb.c1), max(pb.c2)], [0.5, 2.0], pb.equivalence_ok)
        pb.slack = cfg["tolerances.slack"]
        rep.check("sqrt_t_dt_hbar_nonincreasing", pb.sqrt_t_norm, pb.slack, pb.nonincreasing)
    series = {}
    for n in grids:
        r = [row for row in ur.rows if row["grid"] == n and row["t"] > 0]
        series[f"D_metric n={n}"] = ([v["t"] for v in r], [v["D_metric"] for v in r])
    rep.plots.append(Plot("uniqueness", "t", "D", series, logy=True))


# ---------------------------------------------------------------------------
# comparison profile


def run_comparison(cfg: ExperimentConfig, rep: RunReport) -> None:
    from .geodesics import hessian_comparison_check

    k0 = cfg["comparison.k0"]
    qn = cfg["comparison.quadrature_n"] or None
    rows = []
    tol = cfg["tolerances.quadrature"]
    edge = math.pi / (4 * math.sqrt(k0))
    for rho in cfg["comparison.rho"]:
        try:
            cr = hessian_comparison_check(k0, rho, qn)
        except ValueError as exc:
            raise ConfigError("comparison.rho", str(exc)) from None
        rows.append({"rho": rho, "profile_value": cr.profile_value,
                     "profile_quadrature": cr.profile_quadrature, "lower_bound": cr.lower_bound})
        err = abs(cr.profile_quadrature - cr.profile_value)
        rep.check(f"quadrature(rho={rho:.6g})", err, tol, err <= tol)
        rep.check(f"lower_bound(rho={rho:.6g})", cr.profile_value - cr.lower_bound, 0.0,
                  cr.profile_value >= cr.lower_bound * (1 - 1e-14))
        if abs(rho - edge) <= 1e-14 * edge:
            gap = abs(cr.profile_value - cr.lower_bound)
            rep.check("boundary_equality", gap, 1e-14, gap <= 1e-14)
    rep.table("comparison", ["rho", "profile_value", "profile_quadrature", "lower_bound"], rows)
    rs = [r["rho"] for r in rows]
    rep.plots.append(Plot("comparison", "rho", "Hessian comparison", {
        "profile": (rs, [r["profile_value"] for r in rows]),
        "pi/(4 rho)": (rs, [r["lower_bound"] for r in rows])}))


RUNNERS = {"curvature": run_curvature, "distance": run_distance, "mollify": run_mollify,
           "rescale": run_rescale, "flow": run_flow, "uniqueness": run_uniqueness,
           "comparison": run_comparison}


def run_command(cfg: ExperimentConfig) -> RunReport:
    """Dispatch to the owning module; deterministic given (config, seed)."""
    rep = RunReport(cfg.command, cfg.to_dict(), cfg.text)
    t0 = time.perf_counter()
    RUNNERS[cfg.command](cfg, rep)
    rep.wall_time = time.perf_counter() - t0
    return rep


# ---------------------------------------------------------------------------
# argument parsing

# flag dest -> config key
FLAG_KEYS = {
    "seed": "run.seed", "format": "run.format", "profile": "manifold.profile",
    "scale": "manifold.scale", "L": "grid.L", "nodes": "grid.nodes", "x": "grid.x",
    "t_end": "times.t_end", "T": "times.T", "checkpoints": "times.checkpoints",
    "p": "distance.p", "q": "distance.q", "samples": "mollify.samples", "a": "mollify.a",
    "a_values": "rescale.a_values", "scheme": "flow.scheme", "harmonic": "flow.harmonic",
    "grids": "uniqueness.grids", "initial_map": "uniqueness.initial_map",
    "k0": "comparison.k0", "rho": "comparison.rho",
}


def _global_flags(p: argparse.ArgumentParser, suppress: bool) -> None:
    d = argparse.SUPPRESS if suppress else None
    p.add_argument("--config", default=d, help="INI configuration file")
    p.add_argument("--out", default=d, help="output directory (GEOLAB_OUT overrides)")
    p.add_argument("--seed", default=d, help="seed for sample-point generation")
    p.add_argument("--format", default=d, help="csv, json, svg or all")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="geolab", description=__doc__.splitlines()[0])
    _global_flags(ap, suppress=False)
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", metavar="command")
    for name in COMMANDS:
        sp = sub.add_parser(name)
        _global_flags(sp, suppress=True)
        sp.add_argument("--manifold", "--profile", dest="profile", default=None)
        sp.add_argument("--scale", default=None)
        sp.add_argument("--L", dest="L", default=None)
        sp.add_argument("--nodes", default=None)
        sp.add_argument("--x", default=None, help="comma-separated x values")
        if name in ("flow", "uniqueness"):
            sp.add_argument("--t-end", dest="t_end", default=None)
            sp.add_argument("--T", dest="T", default=None)
            sp.add_argument("--checkpoints", default=None)
        if name == "distance":
            sp.add_argument("--p", default=None, help="x,theta")
            sp.add_argument("--q", default=None, help="x,theta")
        if name == "mollify":
            sp.add_argument("--samples", default=None)
            sp.add_argument("--a", default=None)
        if name == "rescale":
            sp.add_argument("--a-values", dest="a_values", default=None)
        if name == "flow":
            sp.add_argument("--scheme", default=None)
            sp.add_argument("--harmonic", action="store_const", const="true", default=None)
        if name == "uniqueness":
            sp.add_argument("--grids", default=None)
            sp.add_argument("--initial-map", dest="initial_map", default=None)
        if name == "comparison":
            sp.add_argument("--k0", default=None)
            sp.add_argument("--rho", default=None)
    return ap


def config_from_args(args: argparse.Namespace) -> ExperimentConfig:
    over = {"run.command": args.command}
    for dest, key in FLAG_KEYS.items():
        v = getattr(args, dest, None)
        if v is not None:
            over[key] = str(v)
    return parse_config(getattr(args, "config", None), over)


def _out_dir(args: argparse.Namespace, cfg: ExperimentConfig) -> str:
    return os.environ.get("GEOLAB_OUT") or getattr(args, "out", None) or cfg["run.output"]


def main(argv=None) -> int:
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:  # argparse usage errors are configuration errors
        return EXIT_OK if exc.code == 0 else EXIT_CONFIG
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if args.command is None:
        ap.print_usage(sys.stderr)
        return EXIT_CONFIG
    try:
        cfg = config_from_args(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        rep = run_command(cfg)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except Exception as exc:  # module failure
        print(f"{cfg.command} failed: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_FAIL
    out = _out_dir(args, cfg)
    try:
        emit_report(rep, out, cfg["run.format"])
    except OSError as exc:
        print(f"cannot write report to {out}: {exc}", file=sys.stderr)
        return EXIT_IO
    for a in rep.assertions:
        print(f"{'PASS' if a.passed else 'FAIL'}  {a.name}: measured={a.measured} "
              f"threshold={a.threshold}")
    print(f"{cfg.command}: {'PASS' if rep.passed else 'FAIL'} ({rep.wall_time:.2f} s) -> {out}")
    return EXIT_OK if rep.passed else EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())
