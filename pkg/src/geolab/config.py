"""Experiment configuration: INI sections with a fixed schema.

Every key has a type and a default; unknown sections or keys are rejected.
Command-line flags override file values.  The raw file text is kept so it
can be echoed into reports.
"""
from __future__ import annotations

import configparser
import math
from dataclasses import dataclass

COMMANDS = ("curvature", "distance", "mollify", "rescale", "flow", "uniqueness", "comparison")
FORMATS = ("all", "csv", "json", "svg")
PROFILES = ("flat", "hyperbolic", "example", "bump")
DEFAULT_PROFILE = {"flow": "hyperbolic", "uniqueness": "bump"}
DEFAULT_T_END = {"uniqueness": 0.05}


class ConfigError(ValueError):
    """Invalid configuration; ``key`` names the offending entry."""

    def __init__(self, key: str, msg: str):
        super().__init__(f"{key}: {msg}")
        self.key = key


def _floats(text: str) -> list:
    text = text.strip()
    return [float(v) for v in text.split(",")] if text else []


def _ints(text: str) -> list:
    return [int(v) for v in _floats(text)]


def _bool(text: str) -> bool:
    v = text.strip().lower()
    if v in ("1", "true", "yes", "on"):
        return True
    if v in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _fmt(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, (list, tuple)):
        return ",".join(_fmt(x) for x in v)
    if isinstance(v, float):
        return repr(v)
    return "" if v is None else str(v)


# section -> key -> (parser, default)
SCHEMA = {
    "run": {"command": (str, None), "seed": (int, 0), "output": (str, "geolab_out"),
            "format": (str, "all")},
    "manifold": {"profile": (str, None), "scale": (float, 1.0)},
    "grid": {"L": (float, 20.0), "nodes": (int, 1024), "x": (_floats, [1.5, 2.0, 5.0])},
    "times": {"t_end": (float, None), "checkpoints": (_floats, []), "T": (float, math.inf)},
    "tolerances": {"curvature": (float, 1e-9), "fd": (float, 1e-5), "sandwich": (float, 1e-3),
                   "slope": (float, 0.02), "growth": (float, 2.0), "slope_ratio": (float, 10.0),
                   "conformal": (float, 1e-5), "uniform": (float, 2.0), "flow": (float, 1e-3),
                   "order": (float, 1.8), "uniqueness": (float, 5e-4), "refinement": (float, 3.0),
                   "flat": (float, 1e-12), "slack": (float, 0.2), "loop": (float, 1.2),
                   "quadrature": (float, 1e-8)},
    "distance": {"p": (_floats, [0.0, 0.0]), "q": (_floats, [3.0, 0.0]), "windings": (int, 2),
                 "loop_x": (_floats, [3.0, 5.0, 8.0, 12.0])},
    "mollify": {"samples": (int, 6), "a": (float, 1.0), "n": (int, 64),
                "rho_range": (_floats, [3.0, 12.0]), "green_wu_x": (_floats, [2.0, 4.0, 8.0])},
    "rescale": {"a_values": (_floats, [8.0, 16.0]), "samples": (int, 50)},
    "flow": {"scheme": (str, "explicit"), "harmonic": (_bool, False), "target": (str, "example"),
             "x_range": (_floats, [-3.0, 3.0]), "window": (float, 2.0),
             "orders": (_ints, [256, 512, 1024])},
    "uniqueness": {"grids": (_ints, [256, 512, 1024]), "initial_map": (str, "identity"),
                   "pullback_times": (_floats, [0.01, 0.02, 0.04])},
    "comparison": {"k0": (float, 1.0), "rho": (_floats, [math.pi / 8, math.pi / 6, math.pi / 4]),
                   "quadrature_n": (int, 0)},
}


@dataclass
class ExperimentConfig:
    """Validated settings: ``values[section][key]``."""

    values: dict
    text: str = ""

    def __getitem__(self, dotted: str):
        sec, key = dotted.split(".")
        return self.values[sec][key]

    @property
    def command(self) -> str:
        return self.values["run"]["command"]

    @property
    def profile(self) -> str:
        return self.values["manifold"]["profile"]

    def to_dict(self) -> dict:
        return {sec: {k: (list(v) if isinstance(v, list) else v) for k, v in kv.items()}
                for sec, kv in self.values.items()}

    def to_ini(self) -> str:
        cp = configparser.ConfigParser(interpolation=None)
        cp.optionxform = str
        for sec, kv in self.values.items():
            cp[sec] = {k: _fmt(v) for k, v in kv.items()}
        lines = []
        for sec in cp.sections():
            lines.append(f"[{sec}]")
            lines += [f"{k} = {v}" for k, v in cp[sec].items()]
            lines.append("")
        return "\n".join(lines)


def _defaults() -> dict:
    return {sec: {k: (list(d) if isinstance(d, list) else d) for k, (_, d) in kv.items()}
            for sec, kv in SCHEMA.items()}


def _set(values: dict, sec: str, key: str, raw) -> None:
    if sec not in SCHEMA:
        raise ConfigError(sec, "unknown section")
    if key not in SCHEMA[sec]:
        raise ConfigError(f"{sec}.{key}", "unknown key")
    parser = SCHEMA[sec][key][0]
    if isinstance(raw, str):
        try:
            values[sec][key] = parser(raw)
        except ValueError as exc:
            raise ConfigError(f"{sec}.{key}", f"cannot parse {raw!r}: {exc}") from None
    else:
        values[sec][key] = raw


def parse_config(path: str | None = None, overrides: dict | None = None,
                 text: str | None = None) -> ExperimentConfig:
    """Defaults <- file (``path`` or ``text``) <- ``overrides`` {"sec.key": value}."""
    values = _defaults()
    if path is not None:
        try:
            with open(path, encoding="utf-8") as fh:
                text = fh.read()
        except OSError as exc:
            raise ConfigError("config", f"cannot read {path}: {exc}") from None
    if text:
        cp = configparser.ConfigParser(interpolation=None)
        cp.optionxform = str
        try:
            cp.read_string(text)
        except configparser.Error as exc:
            raise ConfigError("config", f"malformed file: {exc}") from None
        if cp.defaults():
            raise ConfigError("DEFAULT", "unknown section")
        for sec in cp.sections():
            for key, raw in cp.items(sec, raw=True):
                _set(values, sec, key, raw)
    for dotted, v in (overrides or {}).items():
        if v is None:
            continue
        sec, key = dotted.split(".")
        _set(values, sec, key, v)
    cfg = ExperimentConfig(values, text or "")
    validate(cfg)
    return cfg


def validate(cfg: ExperimentConfig) -> None:
    v = cfg.values
    cmd = v["run"]["command"]
    if cmd not in COMMANDS:
        raise ConfigError("run.command", f"must be one of {', '.join(COMMANDS)}")
    if v["run"]["format"] not in FORMATS:
        raise ConfigError("run.format", f"must be one of {', '.join(FORMATS)}")
    if v["manifold"]["profile"] is None:
        v["manifold"]["profile"] = DEFAULT_PROFILE.get(cmd, "example")
    prof = v["manifold"]["profile"]
    if prof not in PROFILES:
        raise ConfigError("manifold.profile", f"must be one of {', '.join(PROFILES)}")
    if prof == "bump" and cmd not in ("flow", "uniqueness"):
        raise ConfigError("manifold.profile", "bump is a flow-only initial state")
    if v["manifold"]["scale"] <= 0:
        raise ConfigError("manifold.scale", "must be > 0")
    if v["grid"]["nodes"] < 16:
        raise ConfigError("grid.nodes", f"must be >= 16, got {v['grid']['nodes']}")
    for key in ("uniqueness.grids", "flow.orders"):
        if any(g < 16 for g in cfg[key]):
            raise ConfigError(key, "every grid must have >= 16 nodes")
    if v["grid"]["L"] <= 0:
        raise ConfigError("grid.L", "must be > 0")
    t = v["times"]
    if t["t_end"] is None:
        t["t_end"] = DEFAULT_T_END.get(cmd, 0.1)
    if t["t_end"] <= 0:
        raise ConfigError("times.t_end", "must be > 0")
    if t["t_end"] > t["T"]:
        raise ConfigError("times.t_end", f"t_end={t['t_end']} exceeds T={t['T']}")
    for k, tol in v["tolerances"].items():
        if not tol > 0:
            raise ConfigError(f"tolerances.{k}", "must be > 0")
    if v["flow"]["scheme"] not in ("explicit", "implicit"):
        raise ConfigError("flow.scheme", "must be explicit or implicit")
    if v["flow"]["target"] not in ("initial", "flat", "hyperbolic", "example"):
        raise ConfigError("flow.target", "must be initial, flat, hyperbolic or example")
    if v["uniqueness"]["initial_map"] not in ("identity", "perturbed"):
        raise ConfigError("uniqueness.initial_map", "must be identity or perturbed")
    if len(v["distance"]["p"]) != 2 or len(v["distance"]["q"]) != 2:
        raise ConfigError("distance.p", "points are 'x,theta'")
    if len(v["flow"]["x_range"]) != 2 or len(v["mollify"]["rho_range"]) != 2:
        raise ConfigError("flow.x_range", "ranges are 'lo,hi'")
    if v["mollify"]["samples"] < 1 or v["rescale"]["samples"] < 1:
        raise ConfigError("mollify.samples", "must be >= 1")
