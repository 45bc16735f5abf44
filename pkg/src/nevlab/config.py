"""Experiment configuration: a flat YAML mapping validated into :class:`ExperimentConfig`."""

from __future__ import annotations

import math
import os
from dataclasses import asdict, dataclass, field
from importlib import resources
from pathlib import Path
from typing import Optional

import numpy as np
import yaml

from .catalog import FUNCTIONS, SURFACE_SPECS, build_map, build_surface, parse_map_spec
from .errors import ConfigError, NevlabError
from .sphere import SpherePoint, spherical_distance

CHECKS = ("fmt", "smt", "smt-curvature", "defects", "calculus", "borel", "oracle", "chart")

# key -> (type coercion, default)
_FLOAT = "float"
_KEYS = {
    "surface": ("any", None),
    "function": ("str", None),
    "targets": ("list", None),
    "r0": (_FLOAT, None),
    "r_min": (_FLOAT, None),
    "r_max": (_FLOAT, None),
    "grid_points": ("int", None),
    "grid_ratio": (_FLOAT, None),
    "grid_spacing": ("str", "geometric"),
    "gamma": ("str", None),
    "delta": (_FLOAT, 0.1),
    "tol": (_FLOAT, 1e-8),
    "checks": ("list", ["fmt"]),
    "seed": ("int", 0),
    "out": ("str", "nevlab-out"),
    "fmt_bound": (_FLOAT, 1.0),
    "smt_budget": (_FLOAT, 2.0),
    "smt_caps": ("list", [10.0, 10.0]),
    "lemma_budget": (_FLOAT, 2.0),
    "defect_tolerance": (_FLOAT, 0.05),
    "curvature_bound": (_FLOAT, None),
    "calculus_k": ("str", "one"),
    "calculus_delta": (_FLOAT, 0.5),
    "borel_h": ("str", "log"),
    "borel_delta": (_FLOAT, 1.0),
    "oracle_paths": ("int", 10_000),
    "oracle_radius": (_FLOAT, None),
    "oracle_function": ("str", "abs2"),
    "plots": ("bool", True),
}


@dataclass
class ExperimentConfig:
    surface: object
    function: str
    targets: list
    r0: float
    r_min: float
    r_max: float
    grid_points: int
    grid_spacing: str = "geometric"
    gamma: str = "constant-one"
    delta: float = 0.1
    tol: float = 1e-8
    checks: list = field(default_factory=lambda: ["fmt"])
    seed: int = 0
    out: str = "nevlab-out"
    fmt_bound: float = 1.0
    smt_budget: float = 2.0
    smt_caps: list = field(default_factory=lambda: [10.0, 10.0])
    lemma_budget: float = 2.0
    defect_tolerance: float = 0.05
    curvature_bound: Optional[float] = None
    calculus_k: str = "one"
    calculus_delta: float = 0.5
    borel_h: str = "log"
    borel_delta: float = 1.0
    oracle_paths: int = 10_000
    oracle_radius: Optional[float] = None
    oracle_function: str = "abs2"
    plots: bool = True
    source: Optional[str] = None

    def grid(self) -> list:
        if self.grid_spacing == "geometric":
            return [float(x) for x in np.geomspace(self.r_min, self.r_max, self.grid_points)]
        return [float(x) for x in np.linspace(self.r_min, self.r_max, self.grid_points)]

    def build_surface(self):
        return build_surface(self.surface)

    def build_function(self):
        return build_map(self.function)

    def to_json(self):
        d = asdict(self)
        d.pop("source")
        d["targets"] = [SpherePoint.from_value(a).label() for a in self.targets]
        return d


def _coerce(key, kind, value):
    try:
        if kind == _FLOAT:
            if isinstance(value, bool):
                raise ValueError
            return float(value)
        if kind == "int":
            if isinstance(value, bool) or float(value) != int(float(value)):
                raise ValueError
            return int(float(value))
        if kind == "str":
            if isinstance(value, (dict, list)):
                raise ValueError
            return str(value)
        if kind == "bool":
            if not isinstance(value, bool):
                raise ValueError
            return value
        if kind == "list":
            if not isinstance(value, list):
                raise ValueError
            return list(value)
    except (TypeError, ValueError):
        raise ConfigError(f"{key}: expected {kind}, got {value!r}", field=key) from None
    return value


def bundled_example(name) -> Optional[Path]:
    """Path of a config shipped with the package, or ``None``."""
    base = resources.files("nevlab") / "examples"
    cand = base / Path(name).name
    if not cand.name.endswith(".cfg"):
        cand = base / (cand.name + ".cfg")
    return Path(str(cand)) if cand.is_file() else None


def resolve_path(path) -> Path:
    """Use ``path`` if it exists; ``examples/<name>.cfg`` falls back to the bundled copy."""
    p = Path(path)
    if p.is_file():
        return p
    if p.parent.name == "examples" or p.parent == Path("."):
        b = bundled_example(p.name)
        if b is not None:
            return b
    raise ConfigError(f"cannot read config {os.fspath(path)!r}", field="config")


def load_config(path, overrides=None) -> ExperimentConfig:
    p = resolve_path(path)
    try:
        raw = yaml.safe_load(p.read_text())
    except yaml.YAMLError as exc:
        raise ConfigError(f"{p}: not valid YAML ({exc})", field="config") from None
    if not isinstance(raw, dict):
        raise ConfigError(f"{p}: top level must be a mapping", field="config")
    raw.update({k: v for k, v in (overrides or {}).items() if v is not None})
    cfg = from_mapping(raw)
    cfg.source = str(p)
    return cfg


def from_mapping(raw: dict) -> ExperimentConfig:
    """Validate a mapping; every error names the offending key."""
    unknown = sorted(set(raw) - set(_KEYS))
    if unknown:
        raise ConfigError(f"unknown key {unknown[0]!r}", field=unknown[0])
    vals = {}
    for key, (kind, default) in _KEYS.items():
        if key in raw and raw[key] is not None:
            vals[key] = _coerce(key, kind, raw[key])
        else:
            vals[key] = default
    if vals["function"] is None:
        raise ConfigError("function is required", field="function")
    cat = FUNCTIONS.get(vals["function"])
    if cat is not None:
        vals["function"] = cat.spec
        for key, value in (("surface", cat.surface), ("targets", list(cat.targets)),
                           ("r0", cat.r0), ("r_min", cat.grid[0]), ("r_max", cat.grid[1]),
                           ("grid_points", cat.grid[2])):
            if vals[key] is None:
                vals[key] = value
    try:
        parse_map_spec(vals["function"])
    except NevlabError as exc:
        raise ConfigError(f"bad function spec: {exc}", field="function") from None
    for key in ("surface", "targets", "r0", "r_min", "r_max"):
        if vals[key] is None:
            raise ConfigError(f"{key} is required", field=key)
    if isinstance(vals["surface"], str) and vals["surface"] not in SURFACE_SPECS:
        raise ConfigError(f"unknown surface {vals['surface']!r}", field="surface")
    if vals["grid_spacing"] not in ("geometric", "linear"):
        raise ConfigError("grid_spacing must be geometric or linear", field="grid_spacing")
    if not vals["r0"] > 0:
        raise ConfigError("r0 must be positive", field="r0")
    if vals["r0"] >= vals["r_min"]:
        raise ConfigError("r0 must precede grid", field="r0")
    if vals["r_min"] >= vals["r_max"]:
        raise ConfigError("r_min must be below r_max", field="r_min")
    if vals["grid_points"] is None:
        ratio = vals.pop("grid_ratio") or 1.1
        if vals["grid_spacing"] != "geometric" or ratio <= 1:
            raise ConfigError("grid_ratio needs geometric spacing and a ratio above 1",
                              field="grid_ratio")
        vals["grid_points"] = int(math.ceil(math.log(vals["r_max"] / vals["r_min"])
                                            / math.log(ratio))) + 1
    else:
        vals.pop("grid_ratio")
    if vals["grid_points"] < 2:
        raise ConfigError("grid_points must be at least 2", field="grid_points")
    if not vals["delta"] > 0:
        raise ConfigError("delta must be positive", field="delta")
    if not vals["tol"] > 0:
        raise ConfigError("tol must be positive", field="tol")
    bad = [c for c in vals["checks"] if c not in CHECKS]
    if bad:
        raise ConfigError(f"unknown check {bad[0]!r}; choose from {', '.join(CHECKS)}",
                          field="checks")
    pts = []
    for a in vals["targets"]:
        try:
            pts.append(SpherePoint.from_value(a))
        except (NevlabError, ValueError, TypeError) as exc:
            raise ConfigError(f"bad target {a!r}: {exc}", field="targets") from None
    for i, p in enumerate(pts):
        for q in pts[i + 1:]:
            if spherical_distance(p, q) <= 1e-9:
                raise ConfigError(f"targets {p.label()} and {q.label()} are not distinct",
                                  field="targets")
    try:
        surface = build_surface(vals["surface"])
        f = build_map(vals["function"])
    except ConfigError:
        raise
    except NevlabError as exc:
        raise ConfigError(str(exc), field="function") from None
    limit = min(surface.domain_radius, f.domain_radius)
    if vals["r_max"] >= limit:
        raise ConfigError(f"r_max must stay below the usable radius {limit}", field="r_max")
    if vals["gamma"] is None:
        vals["gamma"] = "constant-one" if math.isinf(surface.s_radius) else "inverse-gap"
    return ExperimentConfig(**vals)


def gamma_weight(cfg: ExperimentConfig, surface):
    from .verifier import GammaWeight

    if cfg.gamma in ("constant-one", "inverse-gap"):
        return GammaWeight(cfg.gamma, surface.s_radius)
    return GammaWeight("custom", surface.s_radius, cfg.gamma)
