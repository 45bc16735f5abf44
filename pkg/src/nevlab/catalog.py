"""Named surfaces, maps and test cases, plus the map-spec mini language.

Map specs look like ``exp``, ``exp{k:2}``, ``rational{num:[1,0,0],den:[1]}``,
``moebius{a:2,b:1,c:1,d:3}`` or ``composed{outer:exp, chart:cayley-i}``;
values may nest.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field

import numpy as np

from . import sphere as S
from .errors import ConfigError, DomainError
from .surface import ChartPresentation, SurfaceModel, exhaustion_check

# -- map spec parser -----------------------------------------------------------

_TOKEN = re.compile(r"\s*(?:([{}\[\],:])|([^{}\[\],:\s]+))")


def _tokens(text):
    pos, out = 0, []
    text = text.strip()
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if not m or m.end() == pos:
            raise ConfigError(f"cannot parse map spec near {text[pos:]!r}", field="function")
        out.append(m.group(1) or m.group(2))
        pos = m.end()
        while pos < len(text) and text[pos].isspace():
            pos += 1
    return out


class _Parser:
    def __init__(self, text):
        self.toks = _tokens(text)
        self.i = 0

    def peek(self):
        return self.toks[self.i] if self.i < len(self.toks) else None

    def take(self, expected=None):
        tok = self.peek()
        if tok is None or (expected is not None and tok != expected):
            raise ConfigError(f"map spec: expected {expected or 'a value'}, got {tok!r}",
                              field="function")
        self.i += 1
        return tok

    def value(self):
        tok = self.peek()
        if tok == "[":
            self.take("[")
            items = []
            while self.peek() != "]":
                items.append(self.value())
                if self.peek() == ",":
                    self.take(",")
            self.take("]")
            return items
        word = self.take()
        if word in "{}[],:":
            raise ConfigError(f"map spec: unexpected {word!r}", field="function")
        if self.peek() == "{":
            return ("call", word, self.mapping())
        return _scalar(word)

    def mapping(self):
        self.take("{")
        out = {}
        while self.peek() != "}":
            key = self.take()
            self.take(":")
            out[key] = self.value()
            if self.peek() == ",":
                self.take(",")
        self.take("}")
        return out


def _scalar(word):
    try:
        return float(word)
    except ValueError:
        pass
    try:
        return S.parse_complex(word)
    except ValueError:
        return word


def parse_map_spec(text):
    """Parse a map spec into ``(catalog_id, params)``."""
    p = _Parser(str(text))
    v = p.value()
    if p.peek() is not None:
        raise ConfigError(f"map spec: trailing input {p.toks[p.i:]}", field="function")
    if isinstance(v, tuple):
        return v[1], v[2]
    if isinstance(v, str):
        return v, {}
    raise ConfigError(f"map spec must start with an identifier: {text!r}", field="function")


def build_map(spec) -> S.MeromorphicMap:
    """Map from a spec string, a parsed ``(id, params)`` pair or a catalog name."""
    if isinstance(spec, S.MeromorphicMap):
        return spec
    cid, params = parse_map_spec(spec) if isinstance(spec, str) else spec
    try:
        if cid == "rational":
            return S.rational(params["num"], params.get("den", [1]))
        if cid == "polynomial":
            return S.polynomial(params["coeffs"])
        if cid == "exp":
            return S.exponential(params.get("k", 1.0))
        if cid == "moebius":
            return S.moebius(params["a"], params["b"], params["c"], params["d"])
        if cid == "composed":
            outer = params["outer"]
            outer = build_map(outer[1:] if isinstance(outer, tuple) else str(outer))
            return S.composed(outer, str(params.get("chart", "identity")))
    except KeyError as exc:
        raise ConfigError(f"{cid}: missing parameter {exc.args[0]!r}", field="function") from None
    except DomainError as exc:
        raise ConfigError(f"{cid}: {exc}", field="function") from None
    if cid in FUNCTIONS and not params:
        return build_map(FUNCTIONS[cid].spec)
    raise ConfigError(f"unknown map id {cid!r}", field="function")


# -- surfaces ------------------------------------------------------------------------

def _one(w):
    return np.ones(np.shape(w))


def _zero(w):
    return np.zeros(np.shape(w))


def _poincare(w):
    return 4.0 / (1.0 - np.abs(w) ** 2) ** 2


def _poincare_ddbar(w):
    return 2.0 / (1.0 - np.abs(w) ** 2) ** 2


def _gaussian(w):
    return np.exp(np.abs(w) ** 2)


# expression ids usable in surface configs
LAMBDA_EXPRS = {
    "one": (_one, _zero),
    "poincare": (_poincare, _poincare_ddbar),
    "gaussian": (_gaussian, lambda w: np.ones(np.shape(w))),
}

FORM_EXPRS = {
    "one": lambda z: np.ones(np.shape(z), dtype=complex),
    "inv-square-shift": lambda z: (1 - z) ** -2,
}

PERIOD_EXPRS = {
    "identity": (lambda z: np.asarray(z, dtype=complex), lambda w: np.asarray(w, dtype=complex)),
    "moebius-period": (lambda z: z / (1 - z), lambda w: w / (1 + w)),
}


def chart_surface(name, phi_id, L_id, chart_radius, lambda_id="one", curvature_bound=None,
                  description="") -> SurfaceModel:
    """Surface from a chart presentation, classified by sampling its period map."""
    try:
        phi = FORM_EXPRS[phi_id]
        L = PERIOD_EXPRS[L_id] if L_id is not None else (None, None)
        lam, ddbar = LAMBDA_EXPRS[lambda_id]
    except KeyError as exc:
        raise ConfigError(f"unknown expression id {exc.args[0]!r}", field="surface") from None
    chart = ChartPresentation(name, phi, chart_radius, L[0], L[1])
    rep = exhaustion_check(chart, [1.0])
    domain = min(rep.boundary_infimum, rep.s_radius)
    if math.isfinite(chart_radius) and domain < rep.s_radius:
        # largest relatively compact disc; keep a clean value when it is
        # known in closed form through the inverse period map
        if chart.L_inv is not None:
            domain = _inverse_compact_radius(chart, domain)
    return SurfaceModel(name, "chart", rep.s_radius, lam, ddbar, curvature_bound, chart,
                        domain_radius=domain, description=description)


def _inverse_compact_radius(chart, estimate):
    """Refine the compact radius with the inverse map: largest r with ``|L^{-1}| < rho``."""
    theta = 2 * math.pi * np.arange(4096) / 4096

    def fits(r):
        with np.errstate(divide="ignore", invalid="ignore"):
            z = chart.L_inv(r * np.exp(1j * theta))
        return bool(np.all(np.isfinite(z)) and np.max(np.abs(z)) < chart.chart_radius)

    lo, hi = 0.5 * estimate, 1.5 * estimate
    while not fits(lo):
        lo *= 0.5
    for _ in range(60):
        mid = 0.5 * (lo + hi)
        lo, hi = (mid, hi) if fits(mid) else (lo, mid)
    return round(lo, 9)


def _surfaces():
    out = {
        "euclidean-plane": SurfaceModel(
            "euclidean-plane", "euclidean-plane", math.inf, _one, _zero, 0.0,
            description="C with dz and the flat metric"),
        "euclidean-disc": SurfaceModel(
            "euclidean-disc", "euclidean-disc", 1.0, _one, _zero, 0.0,
            description="unit disc with dz and the flat metric"),
        "poincare-disc": SurfaceModel(
            "poincare-disc", "poincare-disc", 1.0, _poincare, _poincare_ddbar, 1.0,
            description="unit disc with dz and lambda = 4/(1-|w|^2)^2"),
        "gaussian-plane": SurfaceModel(
            "gaussian-plane", "gaussian-plane", math.inf, _gaussian,
            lambda w: np.ones(np.shape(w)), 1.0,
            description="C with dz and lambda = exp(|w|^2), K = -exp(-|w|^2)"),
    }
    return out


_SURFACE_CACHE: dict = {}


def get_surface(name) -> SurfaceModel:
    if name not in _SURFACE_CACHE:
        if name in SURFACE_SPECS:
            _SURFACE_CACHE[name] = SURFACE_SPECS[name]()
        else:
            raise ConfigError(f"unknown surface {name!r}; known: {sorted(SURFACE_SPECS)}",
                              field="surface")
    return _SURFACE_CACHE[name]


def build_surface(spec) -> SurfaceModel:
    """Surface from a catalog name or a mapping with ``kind``, ``lambda``, ``chart``."""
    if isinstance(spec, SurfaceModel):
        return spec
    if isinstance(spec, str):
        return get_surface(spec)
    if not isinstance(spec, dict) or "kind" not in spec:
        raise ConfigError("surface must be a catalog name or a mapping with 'kind'",
                          field="surface")
    kind = spec["kind"]
    lam_id = spec.get("lambda", "one")
    if lam_id not in LAMBDA_EXPRS:
        raise ConfigError(f"unknown lambda expression {lam_id!r}", field="surface.lambda")
    lam, ddbar = LAMBDA_EXPRS[lam_id]
    C = spec.get("curvature_bound")
    if kind == "chart":
        chart = spec.get("chart") or {}
        if "phi" not in chart:
            raise ConfigError("chart surface needs chart.phi", field="surface.chart.phi")
        radius = float(chart.get("radius", math.inf))
        return chart_surface(spec.get("name", "chart"), chart["phi"], chart.get("L"), radius,
                             lam_id, C)
    base = {"euclidean-plane": math.inf, "euclidean-disc": 1.0, "poincare-disc": 1.0}
    if kind not in base:
        raise ConfigError(f"unknown surface kind {kind!r}", field="surface.kind")
    R = float(spec.get("s_radius", base[kind]))
    if kind == "poincare-disc" and "lambda" not in spec:
        lam, ddbar = _poincare, _poincare_ddbar
        C = 1.0 if C is None else C
    return SurfaceModel(spec.get("name", kind), kind, R, lam, ddbar, C)


SURFACE_SPECS = {name: (lambda s=s: s) for name, s in _surfaces().items()}
SURFACE_SPECS["moebius-exhausted-disc"] = lambda: chart_surface(
    "moebius-exhausted-disc", "inv-square-shift", "moebius-period", 1.0,
    description="unit disc exhausted by (1-z)^-2 dz, period map z/(1-z)")


# -- functions ------------------------------------------------------------------------

@dataclass(frozen=True)
class CatalogFunction:
    name: str
    spec: str
    surface: str
    targets: tuple
    r0: float
    grid: tuple  # (r_min, r_max, points)
    description: str = ""
    tags: tuple = field(default=())

    def build(self):
        return build_map(self.spec)

    def radii(self):
        return geometric_grid(*self.grid)


def geometric_grid(r_min, r_max, n):
    return list(np.geomspace(r_min, r_max, int(n)))


def linear_grid(r_min, r_max, n):
    return list(np.linspace(r_min, r_max, int(n)))


FUNCTIONS = {f.name: f for f in [
    CatalogFunction("identity", "rational{num:[1,0],den:[1]}", "euclidean-plane",
                    (0, "inf", 1), 1.0, (2.0, 50.0, 24), "f(w) = w"),
    CatalogFunction("square", "rational{num:[1,0,0],den:[1]}", "euclidean-plane",
                    (0, "inf", 1, -1), 1.0, (2.0, 60.0, 24), "f(w) = w^2"),
    CatalogFunction("cubic", "rational{num:[1,0,0,-1],den:[1]}", "euclidean-plane",
                    (0, 1, "inf"), 1.0, (2.0, 50.0, 24), "f(w) = w^3 - 1"),
    CatalogFunction("exp", "exp", "euclidean-plane",
                    (0, "inf", 1), 1.0, (5.0, 60.0, 60), "f(w) = e^w"),
    CatalogFunction("rational-pole", "rational{num:[1,0,1],den:[1,-2]}", "euclidean-plane",
                    (0, "inf", 1), 1.0, (2.5, 50.0, 24), "f(w) = (w^2 + 1)/(w - 2)"),
    CatalogFunction("moebius", "moebius{a:2,b:1,c:1,d:3}", "poincare-disc",
                    (0, "inf", 1), 0.5, (0.55, 0.95, 16), "f(w) = (2w + 1)/(w + 3)"),
    CatalogFunction("spiral", "composed{outer:exp, chart:cayley-i}", "euclidean-disc",
                    (0, "inf", 1), 0.5, (0.55, 0.99, 40),
                    "f(w) = exp(i(1+w)/(1-w)), unbounded, omits 0 and infinity"),
    CatalogFunction("halfplane-exp", "composed{outer:exp, chart:cayley}", "euclidean-disc",
                    (0, "inf", 1), 0.5, (0.55, 0.97, 30),
                    "f(w) = exp((1+w)/(1-w)), unbounded holomorphic on the disc"),
    CatalogFunction("chart-pullback",
                    "composed{outer:rational{num:[1,-0.2],den:[1]}, chart:moebius-inverse}",
                    "moebius-exhausted-disc", (0, "inf"), 0.1, (0.15, 0.45, 12),
                    "z - 0.2 pulled back through z = w/(1+w)"),
]}


def list_catalog(filt: str | None = None):
    """Rows ``(section, name, description)`` whose name contains ``filt``."""
    rows = []
    for name in SURFACE_SPECS:
        s = get_surface(name)
        rows.append(("surface", name, s.description or s.kind))
    for f in FUNCTIONS.values():
        rows.append(("function", f.name, f"{f.spec}  [{f.description}]"))
    if filt:
        rows = [r for r in rows if filt in r[1]]
    return rows
