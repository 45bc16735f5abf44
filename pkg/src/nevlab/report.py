"""Run an experiment config and persist ``report.json``, ``rows.csv`` and plots."""

from __future__ import annotations

import csv
import io
import json
import math
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .catalog import build_map, parse_map_spec
from .config import ExperimentConfig, gamma_weight
from .errors import ConfigError
from .nevanlinna import chart_values, compute_rows, target_label
from .stochastic import TEST_FUNCTIONS, BmConfig, dynkin_check
from .surface import exhaustion_check
from .svg import line_plot
from . import verifier as V

ORDER = ("fmt", "smt", "smt-curvature", "defects", "calculus", "borel", "oracle", "chart")

BOREL_CURVES = {
    # name -> (callable, returns log h, r_min, r_max)
    "log": (lambda r: np.log(r), False, 1.01, 100.0),
    "linear": (lambda r: r, False, 0.5, 100.0),
    "double-exp": (lambda r: np.exp(r), True, 0.1, 30.0),
}


def _clean(x):
    """JSON-safe copy: numpy scalars to Python, NaN to null, infinities to strings."""
    if isinstance(x, dict):
        return {str(k): _clean(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_clean(v) for v in x]
    if isinstance(x, np.ndarray):
        return [_clean(v) for v in x.tolist()]
    if isinstance(x, (np.bool_, bool)):
        return bool(x)
    if isinstance(x, (np.integer,)):
        return int(x)
    if isinstance(x, (float, np.floating)):
        x = float(x)
        if math.isnan(x):
            return None
        if math.isinf(x):
            return "inf" if x > 0 else "-inf"
        return x
    return x


def dumps(obj) -> str:
    return json.dumps(_clean(obj), indent=2, sort_keys=True) + "\n"


@dataclass
class RunReport:
    config: dict
    surface: dict
    function: str
    rows: list
    verdicts: dict = field(default_factory=dict)
    oracle: dict = field(default_factory=dict)
    timings: dict = field(default_factory=dict)
    stats: dict = field(default_factory=dict)
    version: str = __version__

    @property
    def passed(self) -> bool:
        return all(v.get("passed", False) for v in self.verdicts.values())

    def to_json(self):
        return {"config": self.config, "surface": self.surface, "function": self.function,
                "rows": [r.to_json() for r in self.rows], "verdicts": self.verdicts,
                "oracle": self.oracle, "timings": self.timings, "statistics": self.stats,
                "version": self.version, "passed": self.passed}


def surface_summary(surface):
    info = surface.to_json()
    if surface.chart is not None:
        radii = sorted({0.5 * surface.domain_radius, 0.9 * surface.domain_radius}
                       | {x for x in (1.0, 10.0, 100.0) if x < surface.s_radius})
        rep = exhaustion_check(surface.chart, radii)
        info["classification"] = rep.classification
        info["exhaustion"] = rep.to_json()
    else:
        info["classification"] = "parabolic" if math.isinf(surface.s_radius) else "hyperbolic"
    return info


def run_experiment(cfg: ExperimentConfig, only=None) -> RunReport:
    """Execute the enabled checks in fixed order; ``only`` restricts to a subset."""
    checks = [c for c in ORDER if c in cfg.checks and (only is None or c in only)]
    if only is not None:
        checks = [c for c in ORDER if c in only]
    surface = cfg.build_surface()
    f = cfg.build_function()
    gamma = gamma_weight(cfg, surface)
    grid = cfg.grid()
    timings = {}
    t0 = time.perf_counter()
    rows = compute_rows(f, surface, cfg.targets, cfg.r0, grid, tol=cfg.tol, green=True)
    timings["rows"] = time.perf_counter() - t0
    rep = RunReport(cfg.to_json(), surface_summary(surface), f.describe(), rows)
    rep.stats = {"row_errors": sum(len(r.errors) for r in rows), "grid_points": len(grid),
                 "green_vs_ahlfors_max": max(abs(r.T_green - r.T_ahlfors) for r in rows)}
    for check in checks:
        t = time.perf_counter()
        if check == "fmt":
            res = [V.fmt_from_rows(rows, a, cfg.fmt_bound) for a in cfg.targets]
            rep.verdicts["fmt"] = {"passed": all(r.passed for r in res),
                                   "targets": [r.to_json() for r in res]}
        elif check == "smt":
            v = V.smt_from_rows(rows, cfg.targets, surface, gamma, cfg.delta,
                                budget=cfg.smt_budget, caps=tuple(cfg.smt_caps))
            rep.verdicts["smt"] = v.to_json()
        elif check == "smt-curvature":
            C = cfg.curvature_bound if cfg.curvature_bound is not None \
                else (surface.curvature_bound or 0.0)
            V.check_curvature_bound(surface, C)
            v = V.smt_from_rows(rows, cfg.targets, surface, gamma, cfg.delta, C,
                                budget=cfg.smt_budget, caps=tuple(cfg.smt_caps))
            rep.verdicts["smt-curvature"] = v.to_json()
        elif check == "defects":
            d = V.defect_relation_from_rows(rows, cfg.targets, surface, gamma,
                                            cfg.defect_tolerance)
            rep.verdicts["defects"] = d.to_json()
        elif check == "calculus":
            if cfg.calculus_k == "pullback":
                k = V.pullback_density_over_volume(f, surface)
            elif cfg.calculus_k in V.CALCULUS_DENSITIES:
                k = V.CALCULUS_DENSITIES[cfg.calculus_k]
            else:
                raise ConfigError(f"unknown density {cfg.calculus_k!r}", field="calculus_k")
            v = V.calculus_lemma_check(k, surface, gamma, cfg.calculus_delta, cfg.r0, grid,
                                       budget=cfg.lemma_budget)
            rep.verdicts["calculus"] = v.to_json()
        elif check == "borel":
            if cfg.borel_h not in BOREL_CURVES:
                raise ConfigError(f"unknown curve {cfg.borel_h!r}", field="borel_h")
            h, logv, lo, hi = BOREL_CURVES[cfg.borel_h]
            g = V.GammaWeight("constant-one")
            v = V.borel_growth_check(h, g, cfg.borel_delta, lo, hi, budget=cfg.lemma_budget,
                                     log_values=logv)
            rep.verdicts["borel"] = v.to_json()
        elif check == "oracle":
            if cfg.oracle_function not in TEST_FUNCTIONS:
                raise ConfigError(f"unknown test function {cfg.oracle_function!r}",
                                  field="oracle_function")
            r_exit = cfg.oracle_radius or min(1.0, 0.8 * surface.domain_radius)
            bm = BmConfig(cfg.oracle_paths, r_exit, surface, seed=cfg.seed)
            res = dynkin_check(TEST_FUNCTIONS[cfg.oracle_function], bm)
            rep.oracle = res.to_json()
            rep.verdicts["oracle"] = {"passed": res.passed, "mc_exit_z": res.mc_zscore,
                                      "analytic_gap": res.analytic_gap}
        elif check == "chart":
            rep.verdicts["chart"] = _chart_verdict(cfg, surface, rows)
        timings[check] = time.perf_counter() - t
    rep.timings = timings
    return rep


def _chart_verdict(cfg, surface, rows, tol=1e-6):
    if surface.chart is None or surface.chart.L_inv is None:
        raise ConfigError("chart check needs a chart surface with an inverse period map",
                          field="surface")
    cid, params = parse_map_spec(cfg.function)
    if cid != "composed":
        raise ConfigError("chart check needs a composed function", field="function")
    outer = params["outer"]
    h = build_map(outer[1:] if isinstance(outer, tuple) else str(outer))
    out, worst = [], 0.0
    for row in (rows[0], rows[len(rows) // 2], rows[-1]):
        cv = chart_values(h, surface.chart, cfg.targets, cfg.r0, row.r)
        d = {"r": row.r, "T": cv.T - row.T_ahlfors}
        for lab, tv in row.targets.items():
            d[f"m_{lab}"] = cv.m[lab] - tv.m
            d[f"N_{lab}"] = cv.N[lab] - tv.N
        worst = max([worst] + [abs(v) for k, v in d.items() if k != "r"])
        out.append(d)
    return {"passed": worst < tol, "max_difference": worst, "tolerance": tol, "radii": out}


def rows_csv(rows, targets) -> str:
    labels = [target_label(a) for a in targets]
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    head = ["r", "T_ahlfors", "T_green", "T_ricci"]
    for lab in labels:
        head += [f"m_{lab}", f"N_{lab}", f"Nbar_{lab}"]
    w.writerow(head)
    for row in rows:
        line = [row.r, row.T_ahlfors, row.T_green, row.T_ricci]
        for lab in labels:
            tv = row.targets[lab]
            line += [tv.m, tv.N, tv.Nbar]
        w.writerow([repr(float(x)) for x in line])
    return buf.getvalue()


def write_outputs(rep: RunReport, cfg: ExperimentConfig, out_dir) -> list:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = []
    (out / "report.json").write_text(dumps(rep.to_json()))
    (out / "rows.csv").write_text(rows_csv(rep.rows, cfg.targets))
    written += ["report.json", "rows.csv"]
    if cfg.plots:
        for name, text in plots(rep, cfg).items():
            (out / name).write_text(text)
            written.append(name)
    return written


def plots(rep: RunReport, cfg: ExperimentConfig) -> dict:
    r = [row.r for row in rep.rows]
    series = [("T", r, [row.T_ahlfors for row in rep.rows])]
    for lab in rep.rows[0].targets:
        series.append((f"m({lab})", r, [row.targets[lab].m for row in rep.rows]))
        series.append((f"N({lab})", r, [row.targets[lab].N for row in rep.rows]))
    out = {"characteristics.svg": line_plot(series, f"Nevanlinna functions of {rep.function}",
                                            "r", "value")}
    if "defects" in rep.verdicts:
        ds = rep.verdicts["defects"]["defects"]
        out["defect_ratios.svg"] = line_plot(
            [(f"Nbar/T ({d['target']})", d["radii"], d["ratio"]) for d in ds],
            "defect ratio curves", "r", "Nbar / T")
    for key in ("smt", "smt-curvature"):
        if key in rep.verdicts:
            v = rep.verdicts[key]
            out[f"{key}_slack.svg"] = line_plot([("slack", v["grid"], v["slack"])],
                                                f"{key} slack (rhs - lhs)", "r", "slack")
    return out


def load_report(path) -> dict:
    return json.loads(Path(path).read_text())

