"""Run reports and their CSV / JSON / SVG emission.

CSV files carry only computed tables (no timings), so identical inputs give
byte-identical files.  The JSON summary holds the config echo, every
assertion with measured value and threshold, and the wall time.
"""
from __future__ import annotations

import csv
import io
import json
import math
import os
from dataclasses import dataclass, field


@dataclass
class Assertion:
    name: str
    measured: object
    threshold: object
    passed: bool

    def to_dict(self) -> dict:
        return {"name": self.name, "measured": _jsonable(self.measured),
                "threshold": _jsonable(self.threshold), "passed": bool(self.passed)}


@dataclass
class Plot:
    name: str
    xlabel: str
    ylabel: str
    series: dict  # label -> (xs, ys)
    logy: bool = False


@dataclass
class RunReport:
    command: str
    config: dict
    config_text: str = ""
    assertions: list = field(default_factory=list)
    tables: dict = field(default_factory=dict)  # name -> (header, rows)
    plots: list = field(default_factory=list)
    documents: dict = field(default_factory=dict)  # name -> JSON text
    wall_time: float = 0.0

    @property
    def passed(self) -> bool:
        return all(a.passed for a in self.assertions)

    def check(self, name: str, measured, threshold, passed) -> Assertion:
        a = Assertion(name, measured, threshold, bool(passed))
        self.assertions.append(a)
        return a

    def table(self, name: str, header: list, rows: list) -> None:
        self.tables[name] = (list(header), [[r[h] for h in header] for r in rows])

    def summary(self) -> dict:
        return {"header": {"command": self.command, "config": _jsonable(self.config),
                           "config_text": self.config_text},
                "passed": self.passed,
                "assertions": [a.to_dict() for a in self.assertions],
                "tables": sorted(self.tables),
                "wall_time": self.wall_time}


def _jsonable(v):
    if isinstance(v, dict):
        return {str(k): _jsonable(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_jsonable(x) for x in v]
    if hasattr(v, "item"):
        v = v.item()
    if isinstance(v, float) and not math.isfinite(v):
        return repr(v)
    return v


def _cell(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if hasattr(v, "item"):
        v = v.item()
    if isinstance(v, float):
        return repr(v)
    return str(v)


def csv_text(header: list, rows: list) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([_cell(v) for v in r])
    return buf.getvalue()


# ---------------------------------------------------------------------------
# SVG line plots (self-contained, no plotting library)

_COLORS = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b")


def _ticks(lo: float, hi: float, n: int = 5) -> list:
    if hi <= lo:
        return [lo]
    return [lo + (hi - lo) * i / (n - 1) for i in range(n)]


def svg_line_plot(plot: Plot, width: int = 640, height: int = 420) -> str:
    ml, mr, mt, mb = 70, 150, 30, 50
    pw, ph = width - ml - mr, height - mt - mb
    tf = (lambda y: math.log10(y)) if plot.logy else (lambda y: y)
    pts = {k: sorted((float(x), tf(float(y))) for x, y in zip(*v)
                     if math.isfinite(float(y)) and (not plot.logy or float(y) > 0))
           for k, v in plot.series.items()}
    allx = [p[0] for v in pts.values() for p in v] or [0.0, 1.0]
    ally = [p[1] for v in pts.values() for p in v] or [0.0, 1.0]
    x0, x1 = min(allx), max(allx)
    y0, y1 = min(ally), max(ally)
    if x1 == x0:
        x0, x1 = x0 - 0.5, x1 + 0.5
    if y1 == y0:
        y0, y1 = y0 - 0.5, y1 + 0.5
    sx = lambda x: ml + (x - x0) / (x1 - x0) * pw
    sy = lambda y: mt + ph - (y - y0) / (y1 - y0) * ph
    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
           f'viewBox="0 0 {width} {height}" font-family="sans-serif" font-size="11">',
           f'<title>{plot.name}</title>',
           f'<rect x="{ml}" y="{mt}" width="{pw}" height="{ph}" fill="none" stroke="#333"/>']
    for xt in _ticks(x0, x1):
        out.append(f'<text x="{sx(xt):.2f}" y="{mt + ph + 16}" text-anchor="middle">{xt:.3g}</text>')
    for yt in _ticks(y0, y1):
        lab = f"1e{yt:.2f}" if plot.logy else f"{yt:.3g}"
        out.append(f'<text x="{ml - 6}" y="{sy(yt) + 4:.2f}" text-anchor="end">{lab}</text>')
    out.append(f'<text x="{ml + pw / 2:.1f}" y="{height - 10}" text-anchor="middle">{plot.xlabel}</text>')
    ylab = f"log10 {plot.ylabel}" if plot.logy else plot.ylabel
    out.append(f'<text x="16" y="{mt + ph / 2:.1f}" text-anchor="middle" '
               f'transform="rotate(-90 16 {mt + ph / 2:.1f})">{ylab}</text>')
    for i, (label, v) in enumerate(pts.items()):
        c = _COLORS[i % len(_COLORS)]
        path = " ".join(f"{sx(x):.2f},{sy(y):.2f}" for x, y in v)
        out.append(f'<polyline class="series" data-label="{label}" fill="none" stroke="{c}" '
                   f'stroke-width="1.5" points="{path}"/>')
        for x, y in v:
            out.append(f'<circle cx="{sx(x):.2f}" cy="{sy(y):.2f}" r="2.5" fill="{c}"/>')
        ly = mt + 14 + 18 * i
        out.append(f'<line x1="{ml + pw + 10}" y1="{ly}" x2="{ml + pw + 30}" y2="{ly}" '
                   f'stroke="{c}" stroke-width="2"/>')
        out.append(f'<text x="{ml + pw + 34}" y="{ly + 4}">{label}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def emit_report(report: RunReport, out_dir: str, fmt: str = "all") -> list:
    """Write CSV tables, the JSON summary and SVG plots; returns written paths.

    OSError propagates (the CLI maps it to exit code 3).
    """
    os.makedirs(out_dir, exist_ok=True)
    written = []

    def put(name, text):
        path = os.path.join(out_dir, name)
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        written.append(path)

    if fmt in ("all", "csv"):
        for name, (header, rows) in report.tables.items():
            put(f"{name}.csv", csv_text(header, rows))
    if fmt in ("all", "json"):
        put("report.json", json.dumps(report.summary(), indent=2) + "\n")
        for name, text in report.documents.items():
            put(f"{name}.json", text)
    if fmt in ("all", "svg"):
        for plot in report.plots:
            put(f"{plot.name}.svg", svg_line_plot(plot))
    return written
