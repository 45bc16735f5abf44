"""Exhausted Riemann surfaces in their canonical coordinate.

A surface is modelled in the chart ``w = L(x)`` given by the period map of its
exhaustion form.  There the exhaustion discs are round, ``|w| < r``, the form
is ``dw`` and the Green function and harmonic measure have closed forms.  The
conformal metric is ``h = lambda(w)`` with volume element ``dV = 2 lambda dA``
and Laplace-Beltrami operator ``Delta = (2 / lambda) d^2/dw dwbar``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .errors import ConfigError, DomainError, NumericError, PoleError, QuadratureError
from .quadrature import circle_means, gauss_kronrod, halton_disc, tanh_sinh

# Upper truncation of the pole-splitting variable s (t = r e^{-s}); the weight
# s e^{-2s} is below 1e-30 beyond it.
S_MAX = 36.0


@dataclass(frozen=True)
class ChartPresentation:
    """Exhaustion form ``phi(z) dz`` on a disc chart ``|z| < chart_radius``.

    ``L`` is the period map (``L(0) = 0``) and ``L_inv`` its inverse, both
    optional; without ``L`` the period map is obtained by integrating ``phi``.
    """

    name: str
    phi: Callable
    chart_radius: float = math.inf
    L: Optional[Callable] = None
    L_inv: Optional[Callable] = None

    @property
    def has_inverse(self) -> bool:
        return self.L_inv is not None

    def period(self, z):
        if self.L is not None:
            return self.L(np.asarray(z, dtype=complex))
        z = np.atleast_1d(np.asarray(z, dtype=complex))
        return np.array([integrate_form(self, [0.0, zz]) for zz in z])


@dataclass(frozen=True, eq=False)
class SurfaceModel:
    """Surface in the canonical chart.

    ``weight`` is the conformal factor lambda, ``log_weight_laplacian`` the
    closed form of d^2 log(lambda)/dw dwbar if known.  ``domain_radius`` is
    the largest radius whose disc is relatively compact in the surface; it
    equals ``s_radius`` unless the exhaustion is defective (see
    :func:`exhaustion_check`).
    """

    name: str
    kind: str
    s_radius: float
    weight: Callable = field(repr=False)
    log_weight_laplacian: Optional[Callable] = field(default=None, repr=False)
    curvature_bound: Optional[float] = None
    chart: Optional[ChartPresentation] = None
    domain_radius: Optional[float] = None
    description: str = ""

    def __post_init__(self):
        if not self.s_radius > 0:
            raise DomainError("surface radius must be positive")
        if self.domain_radius is None:
            object.__setattr__(self, "domain_radius", self.s_radius)
        rho = 0.95 * min(self.domain_radius, 4.0)
        lam = self.metric_weight(halton_disc(256, rho, seed=7))
        if not np.all(lam > 0):
            raise DomainError(f"{self.name}: metric weight must be positive")

    def metric_weight(self, w):
        w = np.asarray(w, dtype=complex)
        if np.any(np.abs(w) >= self.domain_radius):
            raise DomainError(f"{self.name}: point outside |w| < {self.domain_radius}")
        return np.broadcast_to(np.asarray(self.weight(w), dtype=float), w.shape)

    def ddbar_log_weight(self, w):
        """d^2 log(lambda)/dw dwbar, closed form or 5-point finite differences."""
        w = np.asarray(w, dtype=complex)
        if self.log_weight_laplacian is not None:
            self.metric_weight(w)
            return np.broadcast_to(np.asarray(self.log_weight_laplacian(w), dtype=float),
                                   w.shape)
        h = 1e-4 * np.maximum(1.0, np.abs(w))
        lw = lambda z: np.log(self.metric_weight(z))
        lap = (lw(w + h) + lw(w - h) + lw(w + 1j * h) + lw(w - 1j * h) - 4 * lw(w)) / h**2
        return 0.25 * lap

    def form_norm(self, w):
        """``||S||_h = lambda^{-1/2}``."""
        return self.metric_weight(w) ** -0.5

    def default_r0(self) -> float:
        return 1.0 if self.domain_radius > 2 else 0.5 * self.domain_radius

    def to_json(self):
        return {"name": self.name, "kind": self.kind,
                "s_radius": _ext(self.s_radius), "domain_radius": _ext(self.domain_radius),
                "curvature_bound": self.curvature_bound,
                "chart": self.chart.name if self.chart else None}


def _ext(x):
    return "inf" if math.isinf(x) else x


# -- form integration and exhaustion -------------------------------------------

def integrate_form(chart: ChartPresentation, path, tol=1e-12):
    """Integral of ``phi dz`` along a polyline ``path`` (list of complex points)."""
    pts = [complex(p) for p in path]
    total = 0j
    for z0, z1 in zip(pts[:-1], pts[1:]):
        if max(abs(z0), abs(z1)) >= chart.chart_radius:
            raise DomainError(f"path leaves the chart |z| < {chart.chart_radius}")
        dz = z1 - z0
        if dz == 0:
            continue
        val, _ = gauss_kronrod(lambda t: chart.phi(z0 + t * dz) * dz, 0.0, 1.0, tol=tol)
        total += val
    return complex(total)


@dataclass
class ChartCheck:
    derivative_error: float
    collisions: int
    spurious_zeros: int
    n_samples: int

    @property
    def ok(self):
        return self.derivative_error < 1e-8 and self.collisions == 0 and self.spurious_zeros == 0

    def to_json(self):
        return {"derivative_error": self.derivative_error, "collisions": self.collisions,
                "spurious_zeros": self.spurious_zeros, "n_samples": self.n_samples,
                "ok": self.ok}


def check_chart(chart: ChartPresentation, n=10_000, s_radius=math.inf, seed=0) -> ChartCheck:
    """Sampled certification of ``L' = phi``, univalence and ``L = 0`` only at 0."""
    from scipy.spatial import cKDTree

    rho = chart.chart_radius if math.isfinite(chart.chart_radius) else 10.0
    z = halton_disc(n, 0.98 * rho, seed=seed)
    Lz = chart.period(z)
    keep = np.abs(Lz) < s_radius
    z, Lz = z[keep], Lz[keep]
    # derivative by a fourth-order central difference on a subsample
    sub = z[:: max(1, len(z) // 200)]
    h = 1e-3 * np.minimum(1.0, rho - np.abs(sub)) * 0.5
    d = (-chart.period(sub + 2 * h) + 8 * chart.period(sub + h)
         - 8 * chart.period(sub - h) + chart.period(sub - 2 * h)) / (12 * h)
    ph = chart.phi(sub)
    rel = float(np.max(np.abs(d - ph) / np.maximum(np.abs(ph), 1e-300)))
    tree = cKDTree(np.column_stack([Lz.real, Lz.imag]))
    pairs = tree.query_pairs(1e-9, output_type="ndarray")
    collisions = int(np.sum(np.abs(z[pairs[:, 0]] - z[pairs[:, 1]]) > 1e-9)) if len(pairs) else 0
    spurious = int(np.sum((np.abs(Lz) < 1e-9) & (np.abs(z) > 1e-9)))
    return ChartCheck(rel, collisions, spurious, len(z))


@dataclass
class ExhaustionReport:
    s_radius: float
    boundary_infimum: float
    classification: str
    radii: list
    rows: list

    @property
    def exhausts(self):
        return self.boundary_infimum >= self.s_radius

    @property
    def violations(self):
        return [row["r"] for row in self.rows if row["violation"]]

    def to_json(self):
        return {"s_radius": _ext(self.s_radius), "boundary_infimum": _ext(self.boundary_infimum),
                "classification": self.classification, "exhausts": self.exhausts,
                "violations": self.violations, "rows": self.rows}


def _approach_values(chart: ChartPresentation, n_theta=2048, zoom=6):
    """Min and max of |L| on circles approaching the edge of the chart.

    The maximum is refined by zooming in on the best angle, which catches
    narrow spikes such as the one of ``z/(1-z)`` at ``z = 1``.
    """
    theta = 2 * math.pi * np.arange(n_theta) / n_theta + 0.1234
    if math.isfinite(chart.chart_radius):
        radii = chart.chart_radius * (1 - 10.0 ** -np.arange(1, 8))
    else:
        radii = 10.0 ** np.arange(1, 8)
    lo, hi = [], []
    for rho in radii:
        v = np.abs(chart.period(rho * np.exp(1j * theta)))
        lo.append(float(np.min(v)))
        best, th0, width = float(np.max(v)), theta[int(np.argmax(v))], 2 * math.pi / n_theta
        for _ in range(zoom):
            th = th0 + width * np.linspace(-1, 1, 257)
            u = np.abs(chart.period(rho * np.exp(1j * th)))
            if u.max() > best:
                best, th0 = float(u.max()), th[int(np.argmax(u))]
            width /= 64
        hi.append(best)
    return np.array(lo), np.array(hi)


def _limit(seq, chart, big=1e6):
    """Limit of values sampled at ``1 - 10^-k`` of a finite chart radius (linear
    in the offset, so one Richardson step) or at ``10^k`` for an infinite one.
    Growth past ``big`` reads as infinity."""
    if seq[-1] > big:
        return math.inf
    if math.isfinite(chart.chart_radius):
        return float(seq[-1] + (seq[-1] - seq[-2]) / 9.0)
    return float(seq[-1])


def estimate_s_radius(chart: ChartPresentation) -> float:
    """Supremum of |L| over the chart, i.e. the largest radius with a nonempty circle."""
    _, hi = _approach_values(chart)
    return _limit(np.maximum.accumulate(hi), chart)


def exhaustion_check(chart: ChartPresentation, radii) -> ExhaustionReport:
    """Sampled exhaustion report for the discs ``{|L| < r}``.

    For each radius it records whether the circle is nonempty, whether the disc
    stays a positive distance from the edge of the chart (relative compactness)
    and whether it is the whole surface.  Radii at which the disc reaches the
    edge while the circle is still nonempty are violations.
    """
    radii = [float(r) for r in radii]
    if any(r <= 0 for r in radii) or any(b <= a for a, b in zip(radii, radii[1:])):
        raise ConfigError("radii must be positive and increasing", field="radii")
    lo, hi = _approach_values(chart)
    s_radius = _limit(np.maximum.accumulate(hi), chart)
    b = _limit(lo, chart)
    if b >= s_radius * (1 - 1e-6):
        b = s_radius
    classification = "parabolic" if math.isinf(s_radius) else "hyperbolic"
    rows = []
    prev_count = -1
    samples = halton_disc(4096, 0.999 * chart.chart_radius if math.isfinite(chart.chart_radius)
                          else 1e7, seed=3)
    absL = np.abs(chart.period(samples))
    for r in radii:
        whole = r >= s_radius * (1 - 1e-9)
        compact = r < b
        count = int(np.sum(absL < r))
        margin = None
        if compact and math.isfinite(chart.chart_radius):
            inside = samples[absL < r]
            margin = float(chart.chart_radius - np.max(np.abs(inside))) if len(inside) else \
                float(chart.chart_radius)
        rows.append({"r": r, "circle_nonempty": not whole, "relatively_compact": compact,
                     "whole_surface": whole, "violation": (not compact) and not whole,
                     "nested": count >= prev_count, "samples_inside": count,
                     "boundary_margin": margin})
        prev_count = count
    return ExhaustionReport(s_radius, b, classification, radii, rows)


# -- Green function, harmonic measure ----------------------------------------

def green_function(r, w):
    """``(1/pi) log(r / |w|)`` on ``0 < |w| <= r``."""
    a = np.abs(np.asarray(w, dtype=complex))
    if np.any(a == 0):
        raise PoleError("Green function has its pole at w = 0")
    if np.any(a > r * (1 + 1e-12)):
        raise DomainError("point outside the closed disc")
    return np.log(r / a) / math.pi


def harmonic_measure_average(integrand, r=1.0, tol=1e-10, singular_angles=()):
    """Average of ``integrand(theta)`` against the harmonic measure of ``|w| = r``.

    In the canonical chart this measure is ``dtheta / 2 pi``, so ``r`` only
    documents the circle.  Smooth integrands use the periodic trapezoid; with
    flagged singular angles the circle is cut there and each arc is integrated
    by the double-exponential rule.
    """
    if not len(singular_angles):
        val = circle_means(lambda rad, th: integrand(th), [r], tol=tol)
        return float(np.real(val[0]))
    cuts = np.sort(np.mod(np.asarray(singular_angles, dtype=float), 2 * math.pi))
    edges = np.concatenate([cuts, [cuts[0] + 2 * math.pi]])
    total = 0.0
    for a, b in zip(edges[:-1], edges[1:]):
        if b - a <= 0:
            continue
        try:
            val, _ = tanh_sinh(integrand, a, b, tol=tol * (b - a))
        except QuadratureError:
            val, _ = gauss_kronrod(integrand, a, b, tol=tol * (b - a), initial=16,
                                   max_intervals=200000)
        total += float(np.real(val))
    return total / (2 * math.pi)


def radial_profile(fn, r, tol=1e-11):
    """Mean of ``fn`` over circles, returned as a callable of radius arrays."""
    def prof(t):
        return circle_means(lambda rad, th: fn(rad * np.exp(1j * th)), t, tol=tol)
    return prof


def green_disc_integral(fn, r, tol=1e-10):
    """``int_{|w|<r} log(r/|w|) fn(w) dA`` with the substitution ``t = r e^{-s}``.

    This equals ``2 pi r^2 int_0^inf s e^{-2s} <fn>(r e^{-s}) ds`` where
    ``<fn>`` is the circle mean; the logarithmic weight becomes polynomial.
    """
    if r <= 0:
        return 0.0
    prof = radial_profile(fn, r)

    def integrand(s):
        return s * np.exp(-2 * s) * np.real(prof(r * np.exp(-s)))

    val, _ = gauss_kronrod(integrand, 0.0, S_MAX, tol=tol / (2 * math.pi * r * r),
                           breakpoints=(0.5, 2.0, 6.0))
    return 2 * math.pi * r * r * val


# -- curvature ------------------------------------------------------------------

def gauss_curvature(surface: SurfaceModel, w):
    """``K = -(1/lambda) d^2 log(lambda)/dw dwbar``."""
    return -surface.ddbar_log_weight(w) / surface.metric_weight(w)


def check_curvature_bound(surface: SurfaceModel, C, n=2000, tol=1e-6, seed=11):
    """Sample ``K`` and confirm ``-C <= K <= 0``; returns ``(k_min, k_max)``."""
    from .errors import CurvatureBoundError

    rho = 0.99 * min(surface.domain_radius, 50.0)
    w = halton_disc(n, rho, seed=seed)
    k = gauss_curvature(surface, w)
    kmin, kmax = float(np.min(k)), float(np.max(k))
    if kmin < -C - tol or kmax > tol:
        raise CurvatureBoundError(
            f"{surface.name}: sampled curvature in [{kmin:.6g}, {kmax:.6g}] "
            f"is outside [-{C}, 0]")
    return kmin, kmax


def ricci_characteristic(surface: SurfaceModel, r0, r, tol=1e-10):
    """Green-weighted curvature integral ``T(r, Ric)`` from ``r0`` to ``r``.

    ``(1/2) int g_r K dV`` over ``|w| < r`` minus the same at ``r0``.  With
    ``K dV = -2 ddbar(log lambda) dA`` this is
    ``-(1/pi) int log(r/|w|) ddbar(log lambda) dA``.
    """
    if not 0 < r0 <= r < surface.domain_radius:
        raise DomainError("need 0 < r0 <= r < domain radius")
    if r == r0:
        return 0.0

    def part(rad):
        return -green_disc_integral(surface.ddbar_log_weight, rad, tol=tol) / math.pi

    return part(r) - part(r0)


def form_norm_extrema(surface: SurfaceModel, r, rel=1e-3, n0=16, n_max=2048):
    """``(inf, sup)`` of ``lambda^{-1/2}`` over ``|w| <= r`` on a refined polar grid."""
    if not 0 < r < surface.domain_radius:
        raise DomainError("need 0 < r < domain radius")
    prev = None
    n = n0
    while True:
        rho = np.linspace(0.0, r, n + 1)
        th = 2 * math.pi * np.arange(2 * n) / (2 * n)
        v = surface.form_norm(rho[:, None] * np.exp(1j * th)[None, :])
        cur = (float(np.min(v)), float(np.max(v)))
        if prev is not None and all(abs(c - p) <= rel * abs(p) for c, p in zip(cur, prev)):
            return cur
        if n >= n_max:
            raise NumericError("form norm extrema did not settle", achieved=abs(cur[0] - prev[0]))
        prev = cur
        n *= 2
