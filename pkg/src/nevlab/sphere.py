"""Geometry of the target Riemann sphere.

Points are homogeneous pairs ``[a0 : a1]`` with the affine value ``a1 / a0``;
so ``[1 : 0]`` is zero and ``[0 : 1]`` is infinity.  A meromorphic map is
carried as a holomorphic pair ``(f0, f1)`` without common zeros, ``f = f1/f0``.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import DomainError

ArrayFn = Callable[[np.ndarray], tuple]


@dataclass(frozen=True)
class SpherePoint:
    """A point of P^1, stored with its largest coordinate equal to 1."""

    a0: complex
    a1: complex

    def __post_init__(self):
        a0, a1 = complex(self.a0), complex(self.a1)
        if not (cmath.isfinite(a0) and cmath.isfinite(a1)):
            raise DomainError("homogeneous coordinates must be finite")
        if a0 == 0 and a1 == 0:
            raise DomainError("[0:0] is not a point of the sphere")
        pivot = a0 if abs(a0) >= abs(a1) else a1
        object.__setattr__(self, "a0", a0 / pivot)
        object.__setattr__(self, "a1", a1 / pivot)

    @classmethod
    def from_value(cls, value) -> "SpherePoint":
        """Affine value -> point.  ``None``, ``inf`` and ``"inf"`` give infinity."""
        if isinstance(value, SpherePoint):
            return value
        if isinstance(value, (tuple, list)) and len(value) == 2:
            return cls(parse_complex(value[0]), parse_complex(value[1]))
        if value is None or (isinstance(value, str) and value.strip().lower() in
                             ("inf", "infinity", "∞", "oo")):
            return cls(0, 1)
        z = parse_complex(value)
        if cmath.isinf(z):
            return cls(0, 1)
        return cls(1, z)

    @property
    def norm(self) -> float:
        return math.hypot(abs(self.a0), abs(self.a1))

    @property
    def is_infinity(self) -> bool:
        return self.a0 == 0

    @property
    def value(self) -> complex:
        return complex("inf") if self.a0 == 0 else self.a1 / self.a0

    def label(self) -> str:
        if self.is_infinity:
            return "inf"
        z = self.value
        if z.imag == 0:
            return f"{z.real:g}"
        return f"{z.real:g}{z.imag:+g}j"

    def to_json(self):
        return [[self.a0.real, self.a0.imag], [self.a1.real, self.a1.imag]]


def parse_complex(value) -> complex:
    if isinstance(value, str):
        s = value.strip().replace(" ", "").replace("i", "j")
        if s.lower() in ("inf", "infinity", "∞", "oo"):
            return complex("inf")
        return complex(s)
    return complex(value)


def spherical_distance(p: SpherePoint, q: SpherePoint) -> float:
    """Chordal distance |p0 q1 - p1 q0| / (|p| |q|), a number in [0, 1]."""
    p, q = SpherePoint.from_value(p), SpherePoint.from_value(q)
    d = abs(p.a0 * q.a1 - p.a1 * q.a0) / (p.norm * q.norm)
    return min(d, 1.0)


def chern_bracket(f_value, a: SpherePoint):
    """``a0 f1 - a1 f0`` for a homogeneous value (or arrays of them)."""
    f0, f1 = f_value
    f0 = np.asarray(f0)
    f1 = np.asarray(f1)
    if f0.ndim == 0 and f0 == 0 and f1 == 0:
        raise DomainError("(0, 0) is not a homogeneous value")
    a = SpherePoint.from_value(a)
    return a.a0 * f1 - a.a1 * f0


# -- meromorphic maps ---------------------------------------------------------

@dataclass(frozen=True, eq=False)
class MeromorphicMap:
    """Holomorphic map into P^1 given by a homogeneous pair and its derivative.

    ``raw(w)`` returns ``(f0, f1, df0, df1)``; :meth:`evaluate` rescales all four
    by ``max(|f0|, |f1|)`` so results stay representable.  Every quantity built
    on top (chordal distance, pullback density, argument of the bracket) is
    invariant under that positive rescaling.
    """

    catalog_id: str
    params: dict
    raw: ArrayFn = field(repr=False)
    domain_radius: float = math.inf
    is_constant: bool = field(init=False, default=False)

    def __post_init__(self):
        if not self.domain_radius > 0:
            raise DomainError("domain radius must be positive")
        w = _sample_grid(0.5 * min(self.domain_radius, 2.0))
        f0, f1, df0, df1 = self.evaluate(w)
        if np.any((np.abs(f0) == 0) & (np.abs(f1) == 0)):
            raise DomainError(f"{self.catalog_id}: common zero of (f0, f1)")
        wr = f0 * df1 - f1 * df0
        object.__setattr__(self, "is_constant", bool(np.all(np.abs(wr) < 1e-14)))

    def evaluate(self, w):
        w = np.asarray(w, dtype=complex)
        if np.any(np.abs(w) >= self.domain_radius):
            raise DomainError(
                f"{self.catalog_id}: point outside |w| < {self.domain_radius}")
        f0, f1, df0, df1 = self.raw(w)
        s = np.maximum(np.abs(f0), np.abs(f1))
        s = np.where(s > 0, s, 1.0)
        return f0 / s, f1 / s, df0 / s, df1 / s

    def pair(self, w):
        f0, f1, _, _ = self.evaluate(w)
        return f0, f1

    def bracket(self, w, a: SpherePoint):
        """Bracket ``<f; a>`` and its w-derivative, in the normalized frame."""
        a = SpherePoint.from_value(a)
        f0, f1, df0, df1 = self.evaluate(w)
        return a.a0 * f1 - a.a1 * f0, a.a0 * df1 - a.a1 * df0

    def value(self, w):
        f0, f1 = self.pair(w)
        with np.errstate(divide="ignore", invalid="ignore"):
            return f1 / f0

    def describe(self) -> str:
        return format_map_spec(self.catalog_id, self.params)

    def require_nonconstant(self):
        if self.is_constant:
            raise DomainError(f"{self.describe()} is constant; analysis needs a nonconstant map")


def _sample_grid(rho):
    t = np.linspace(0.05, 1.0, 7) * rho
    ang = np.exp(2j * np.pi * (np.arange(11) + 0.3) / 11)
    return np.concatenate([[0.0], (t[:, None] * ang[None, :]).ravel()])


def fs_pullback_density(f: MeromorphicMap, w):
    """Density of ``f^* omega_FS`` per Euclidean area, ``|W|^2 / (pi |f|^4)``."""
    f0, f1, df0, df1 = f.evaluate(w)
    wr = f0 * df1 - f1 * df0
    n2 = np.abs(f0) ** 2 + np.abs(f1) ** 2
    return np.abs(wr) ** 2 / (math.pi * n2 * n2)


def log_norm_gradient(f: MeromorphicMap, w):
    """d/dw of log(|f0|^2 + |f1|^2)."""
    f0, f1, df0, df1 = f.evaluate(w)
    return (np.conj(f0) * df0 + np.conj(f1) * df1) / (np.abs(f0) ** 2 + np.abs(f1) ** 2)


def log_inverse_distance(f: MeromorphicMap, w, a: SpherePoint):
    """``log(1 / ||f(w), a||)``; ``+inf`` where ``f(w) = a``."""
    a = SpherePoint.from_value(a)
    f0, f1 = f.pair(w)
    br = np.abs(a.a0 * f1 - a.a1 * f0)
    n = np.sqrt(np.abs(f0) ** 2 + np.abs(f1) ** 2) * a.norm
    with np.errstate(divide="ignore"):
        return np.log(n) - np.log(br)


# -- constructors -------------------------------------------------------------

def _coeffs(values):
    return np.array([parse_complex(v) for v in values], dtype=complex)


def rational(num, den) -> MeromorphicMap:
    """``num(w)/den(w)``; coefficient lists run from the highest power down."""
    p = np.trim_zeros(_coeffs(num), "f")
    q = np.trim_zeros(_coeffs(den), "f")
    if len(q) == 0:
        raise DomainError("denominator is identically zero")
    if len(p) == 0:
        p = np.zeros(1, dtype=complex)
    if len(p) > 1 and len(q) > 1:
        rp, rq = np.roots(p), np.roots(q)
        gap = np.min(np.abs(rp[:, None] - rq[None, :]))
        if gap < 1e-8 * max(1.0, float(np.max(np.abs(rp)))):
            raise DomainError("numerator and denominator share a root")
    dp, dq = np.polyder(p), np.polyder(q)

    def raw(w):
        return (np.polyval(q, w), np.polyval(p, w),
                np.polyval(dq, w) if len(dq) else np.zeros_like(w),
                np.polyval(dp, w) if len(dp) else np.zeros_like(w))

    params = {"num": [_jsonable(c) for c in p], "den": [_jsonable(c) for c in q]}
    return MeromorphicMap("rational", params, raw)


def polynomial(coeffs) -> MeromorphicMap:
    return rational(coeffs, [1])


def polynomial_from_roots(roots, leading=1.0) -> MeromorphicMap:
    return polynomial(leading * np.poly(np.asarray(roots, dtype=complex)))


def exponential(k=1.0) -> MeromorphicMap:
    """``[1 : e^{k w}]`` in the balanced frame ``[e^{-kw/2} : e^{kw/2}]``."""
    k = complex(k)
    if k == 0:
        raise DomainError("exp{k: 0} is constant")

    def raw(w):
        kw = k * w
        s = 0.5 * np.abs(kw.real)
        f0 = np.exp(-0.5 * kw - s)
        f1 = np.exp(0.5 * kw - s)
        return f0, f1, -0.5 * k * f0, 0.5 * k * f1

    params = {} if k == 1 else {"k": _jsonable(k)}
    return MeromorphicMap("exp", params, raw)


def moebius(a, b, c, d) -> MeromorphicMap:
    a, b, c, d = (parse_complex(x) for x in (a, b, c, d))
    if abs(a * d - b * c) < 1e-14:
        raise DomainError("moebius map needs ad - bc != 0")

    def raw(w):
        return c * w + d, a * w + b, np.full_like(w, c), np.full_like(w, a)

    params = {"a": _jsonable(a), "b": _jsonable(b), "c": _jsonable(c), "d": _jsonable(d)}
    return MeromorphicMap("moebius", params, raw)


def lift(fn, dfn, domain_radius=math.inf, name="lift") -> MeromorphicMap:
    """Holomorphic scalar function lifted to ``[1 : fn(w)]``."""
    def raw(w):
        one = np.ones_like(w)
        return one, fn(w), np.zeros_like(w), dfn(w)

    return MeromorphicMap(name, {}, raw, domain_radius)


@dataclass(frozen=True)
class InnerChart:
    """Holomorphic change of variable used by ``composed`` maps."""

    name: str
    fn: Callable
    deriv: Callable
    domain_radius: float
    description: str


INNER_CHARTS = {
    "identity": InnerChart("identity", lambda w: w, lambda w: np.ones_like(w), math.inf,
                           "z = w"),
    "moebius-inverse": InnerChart(
        "moebius-inverse", lambda w: w / (1 + w), lambda w: 1 / (1 + w) ** 2, 0.5,
        "z = w/(1+w), inverse of the period map z/(1-z) of the disc"),
    "cayley": InnerChart(
        "cayley", lambda w: (1 + w) / (1 - w), lambda w: 2 / (1 - w) ** 2, 1.0,
        "z = (1+w)/(1-w), disc onto right half-plane"),
    "cayley-i": InnerChart(
        "cayley-i", lambda w: 1j * (1 + w) / (1 - w), lambda w: 2j / (1 - w) ** 2, 1.0,
        "z = i(1+w)/(1-w), disc onto upper half-plane"),
}


def composed(outer: MeromorphicMap, chart: str) -> MeromorphicMap:
    """``w -> outer(chart(w))`` for a named inner chart."""
    try:
        inner = INNER_CHARTS[chart]
    except KeyError:
        raise DomainError(f"unknown inner chart {chart!r}; known: {sorted(INNER_CHARTS)}") from None

    def raw(w):
        z = inner.fn(w)
        f0, f1, df0, df1 = outer.evaluate(z)
        dz = inner.deriv(w)
        return f0, f1, df0 * dz, df1 * dz

    params = {"outer": outer.describe(), "chart": chart}
    return MeromorphicMap("composed", params, raw, inner.domain_radius)


def _jsonable(c):
    c = complex(c)
    return c.real if c.imag == 0 else f"{c.real!r}{c.imag:+}j"


def format_map_spec(catalog_id, params) -> str:
    if not params:
        return catalog_id
    body = ",".join(f"{k}:{_fmt(v)}" for k, v in params.items())
    return f"{catalog_id}{{{body}}}"


def _fmt(v):
    if isinstance(v, list):
        return "[" + ",".join(_fmt(x) for x in v) + "]"
    if isinstance(v, float) and v.is_integer():
        return str(int(v))
    return str(v)
