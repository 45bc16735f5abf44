"""Value-distribution functions of a map into the sphere over exhaustion discs.

Radii are canonical-chart radii: the disc of radius ``r`` is ``|w| < r`` and
the harmonic measure on its boundary is ``dtheta / 2 pi``.  Counting
functions start at ``r0``:

    N(r, a) = int_{r0}^r n(t, a) dt / t = sum_k m_k log(r / max(r0, |w_k|)),

without the ``n(0) log r`` correction of the classical planar theory.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import ContourZeroError, DomainError, NumericError
from .quadrature import circle_means, gauss_kronrod
from .sphere import (MeromorphicMap, SpherePoint, fs_pullback_density, log_inverse_distance,
                     log_norm_gradient)
from .surface import SurfaceModel, green_disc_integral, harmonic_measure_average, ricci_characteristic
from .zeros import (ZeroRecord, circle, locate_zeros_fn, winding_number, winding_on_circle,
                    with_fd_derivative)

DEFAULT_TOL = 1e-8


def _bracket_fn(f: MeromorphicMap, a):
    a = SpherePoint.from_value(a)
    return lambda w: f.bracket(w, a)


def _check_radius(f, r, r0=None):
    if not r > 0:
        raise DomainError("radius must be positive")
    if r >= f.domain_radius:
        raise DomainError(f"radius {r} is outside the map's domain |w| < {f.domain_radius}")
    if r0 is not None and not 0 < r0 <= r:
        raise DomainError("need 0 < r0 <= r")


def count_zeros(f: MeromorphicMap, a, r) -> int:
    """Number of solutions of ``f = a`` in ``|w| < r``, with multiplicity."""
    _check_radius(f, r)
    f.require_nonconstant()
    n, _ = winding_on_circle(_bracket_fn(f, a), r)
    return n


def locate_zeros(f: MeromorphicMap, a, r, tol=1e-6) -> list[ZeroRecord]:
    """Solutions of ``f = a`` in ``|w| < r`` as :class:`ZeroRecord` entries."""
    _check_radius(f, r)
    f.require_nonconstant()
    zs = locate_zeros_fn(_bracket_fn(f, a), r, tol=tol, domain_radius=f.domain_radius)
    return [z for z in zs if abs(z.location) < r]


def counting_from_zeros(zeros, r0, r, simple=False) -> float:
    """Counting function from located zeros; ``simple`` counts distinct points."""
    total = 0.0
    for z in zeros:
        rho = abs(z.location)
        if rho < r:
            weight = z.distinct if simple else z.multiplicity
            total += weight * math.log(r / max(r0, rho))
    return total


def counting(f: MeromorphicMap, a, r0, r, tol=1e-6) -> float:
    _check_radius(f, r, r0)
    return counting_from_zeros(locate_zeros(f, a, r, tol), r0, r)


def simple_counting(f: MeromorphicMap, a, r0, r, tol=1e-6) -> float:
    _check_radius(f, r, r0)
    return counting_from_zeros(locate_zeros(f, a, r, tol), r0, r, simple=True)


def _near_circle_angles(f: MeromorphicMap, a: SpherePoint, r, band=0.05):
    """Angles of solutions of ``f = a`` lying within ``band * r`` of ``|w| = r``.

    Local minima of the chordal distance on a fine circle scan are polished by
    Newton in the plane; a limit counts only if a small circle around it has
    winding number one, so tiny but nonzero values are not mistaken for roots.
    """
    n = int(min(1 << 16, max(1024, 64 * r)))
    theta = 2 * math.pi * np.arange(n) / n
    w = r * np.exp(1j * theta)
    d = np.exp(-log_inverse_distance(f, w, a))
    is_min = (d <= np.roll(d, 1)) & (d <= np.roll(d, -1)) & (d < 0.2)
    outer = min(r * (1 + band), r + 0.5 * (f.domain_radius - r))
    gd = _bracket_fn(f, a)
    angles = []
    for z in w[is_min]:
        ok = False
        for _ in range(60):
            g, dg = gd(np.array([z]))
            g, dg = complex(g[0]), complex(dg[0])
            if g == 0:
                ok = True
                break
            if dg == 0:
                break
            step = g / dg
            if abs(step) > 0.5 * band * r:
                step *= 0.5 * band * r / abs(step)
            z = z - step
            if abs(z) >= outer:
                break
            if abs(step) < 1e-13 * max(1.0, abs(z)):
                ok = True
                break
        if not ok or abs(z) >= outer or abs(abs(z) - r) >= band * r:
            continue
        rho = 1e-7 * max(1.0, abs(z))
        try:
            if winding_number(gd, circle(z, rho)) < 1:
                continue
        except NumericError:
            continue
        ang = float(np.angle(z)) % (2 * math.pi)
        if all(abs((ang - b + math.pi) % (2 * math.pi) - math.pi) > 1e-12 for b in angles):
            angles.append(ang)
    return sorted(angles)


def proximity(f: MeromorphicMap, a, r, tol=DEFAULT_TOL) -> float:
    """Mean over ``|w| = r`` of ``log(1 / ||f, a||)``, a nonnegative number.

    Solutions of ``f = a`` on or near the circle are located first and the
    circle is cut there, so the logarithmic peaks sit at arc endpoints.
    """
    _check_radius(f, r)
    f.require_nonconstant()
    a = SpherePoint.from_value(a)
    cuts = _near_circle_angles(f, a, r)

    def integrand(theta):
        return log_inverse_distance(f, r * np.exp(1j * np.asarray(theta)), a)

    return harmonic_measure_average(integrand, r, tol=min(tol, 1e-10), singular_angles=cuts)


# -- characteristic -----------------------------------------------------------------

def _flux(f: MeromorphicMap, t, tol):
    """``A(t) = int_{|w|<t} f^* omega_FS`` by Stokes: circle mean of Re(w d log|f|^2/dw)."""
    def fn(rad, theta):
        w = rad * np.exp(1j * theta)
        return np.real(w * log_norm_gradient(f, w))

    return circle_means(fn, t, tol=tol)


def spherical_area(f: MeromorphicMap, t, tol=1e-12):
    """Pullback area ``int_{|w|<t} f^* omega_FS`` (sphere normalized to area 1)."""
    return float(_flux(f, [t], tol)[0])


def characteristic_ahlfors_grid(f: MeromorphicMap, r0, radii, tol=DEFAULT_TOL):
    """``T(r) = int_{r0}^r A(t) dt / t`` at every radius of an increasing grid."""
    f.require_nonconstant()
    radii = np.asarray(radii, dtype=float)
    if np.any(np.diff(radii) < 0):
        raise DomainError("radii must be nondecreasing")
    if len(radii):
        _check_radius(f, float(radii[-1]), r0)
        if radii[0] < r0:
            raise DomainError("radii must not precede r0")
    out = np.empty(len(radii))
    acc, prev = 0.0, r0
    seg_tol = tol / max(1, len(radii))
    for i, r in enumerate(radii):
        if r > prev:
            val, _ = gauss_kronrod(lambda t: _flux(f, t, 1e-12) / t, prev, r, tol=seg_tol,
                                   rtol=1e-12)
            acc += val
        out[i] = acc
        prev = r
    return out


def characteristic_ahlfors(f: MeromorphicMap, r0, r, tol=DEFAULT_TOL) -> float:
    """Ahlfors-Shimizu characteristic ``int_{r0}^r dt/t int_{|w|<t} f^* omega_FS``."""
    _check_radius(f, r, r0)
    return float(characteristic_ahlfors_grid(f, r0, [r], tol)[0])


def characteristic_green(f: MeromorphicMap, r, r0, surface: Optional[SurfaceModel] = None,
                         tol=DEFAULT_TOL) -> float:
    """Green-function form ``(1/4) int g_r Delta log|f|^2 dV`` minus the same at ``r0``.

    The Laplacian ``(2/lambda) ddbar`` and volume ``2 lambda dA`` of the given
    surface are used as they stand; the product does not depend on lambda.
    """
    _check_radius(f, r, r0)
    f.require_nonconstant()
    if surface is not None and r >= surface.domain_radius:
        raise DomainError("radius outside the surface")
    lam = (lambda w: np.ones(np.shape(w))) if surface is None else surface.metric_weight

    def density(w):
        lw = lam(w)
        laplacian = (2.0 / lw) * math.pi * fs_pullback_density(f, w)
        return 0.25 / math.pi * laplacian * (2.0 * lw)

    def part(rad):
        return green_disc_integral(density, rad, tol=0.5 * tol)

    return float(part(r) - part(r0))


def wronskian_map(f: MeromorphicMap):
    """Callable ``w -> (W, W')`` for ``W = f0 f1' - f1 f0'`` in the normalized frame."""
    def W(w):
        f0, f1, df0, df1 = f.evaluate(w)
        return f0 * df1 - f1 * df0

    return with_fd_derivative(W)


def ramification_zeros(f: MeromorphicMap, r, tol=1e-6) -> list[ZeroRecord]:
    _check_radius(f, r)
    f.require_nonconstant()
    zs = locate_zeros_fn(wronskian_map(f), r, tol=tol, domain_radius=f.domain_radius)
    return [z for z in zs if abs(z.location) < r]


def ramification_counting(f: MeromorphicMap, r0, r, tol=1e-6) -> float:
    """Counting function of the ramification divisor (zeros of ``f0 f1' - f1 f0'``)."""
    _check_radius(f, r, r0)
    return counting_from_zeros(ramification_zeros(f, r, tol), r0, r)


# -- rows ----------------------------------------------------------------------------

@dataclass
class TargetValues:
    m: float
    N: float
    Nbar: float


@dataclass
class NevanlinnaRow:
    r: float
    r0: float
    T_ahlfors: float
    T_green: float
    T_ricci: float
    targets: dict = field(default_factory=dict)
    errors: list = field(default_factory=list)

    def to_json(self):
        return {"r": self.r, "r0": self.r0, "T_ahlfors": self.T_ahlfors,
                "T_green": self.T_green, "T_ricci": self.T_ricci,
                "targets": {k: {"m": v.m, "N": v.N, "Nbar": v.Nbar}
                            for k, v in self.targets.items()},
                "errors": list(self.errors)}


def target_label(a) -> str:
    return SpherePoint.from_value(a).label()


def compute_rows(f: MeromorphicMap, surface: SurfaceModel, targets, r0, grid,
                 tol=DEFAULT_TOL, green=True, zero_tol=1e-6) -> list[NevanlinnaRow]:
    """Rows of ``T``, ``m``, ``N``, ``Nbar`` and ``T(r, Ric)`` over a radius grid.

    Zeros are located once per target at the top radius.  A numeric failure
    at one radius is recorded in that row (value NaN) instead of aborting.
    """
    f.require_nonconstant()
    grid = [float(r) for r in grid]
    limit = min(f.domain_radius, surface.domain_radius)
    if not grid or grid[0] <= r0 or any(b <= a for a, b in zip(grid, grid[1:])):
        raise DomainError("grid must be increasing and start above r0")
    if grid[-1] >= limit:
        raise DomainError(f"grid exceeds the usable radius {limit}")
    targets = [SpherePoint.from_value(a) for a in targets]
    T = characteristic_ahlfors_grid(f, r0, grid, tol)
    zeros = {}
    for a in targets:
        zeros[a.label()] = locate_zeros(f, a, grid[-1], zero_tol)
    rows = []
    for r, t_a in zip(grid, T):
        errs = []
        t_g = math.nan
        if green:
            try:
                t_g = characteristic_green(f, r, r0, surface, tol)
            except NumericError as exc:
                errs.append(f"T_green: {exc}")
        try:
            t_r = ricci_characteristic(surface, r0, r, tol=1e-10)
        except NumericError as exc:
            t_r = math.nan
            errs.append(f"T_ricci: {exc}")
        vals = {}
        for a in targets:
            lab = a.label()
            try:
                m = proximity(f, a, r, tol)
            except (NumericError, ContourZeroError) as exc:
                m = math.nan
                errs.append(f"m[{lab}]: {exc}")
            z = zeros[lab]
            vals[lab] = TargetValues(m, counting_from_zeros(z, r0, r),
                                     counting_from_zeros(z, r0, r, simple=True))
        rows.append(NevanlinnaRow(r, r0, float(t_a), t_g, t_r, vals, errs))
    return rows


# -- the same quantities computed on the chart side ---------------------------------

@dataclass
class ChartValues:
    r: float
    T: float
    m: dict
    N: dict

    def to_json(self):
        return {"r": self.r, "T": self.T, "m": self.m, "N": self.N}


def _chart_boundary(chart, r, phi_angles):
    """Polar radius of the region ``|L(z)| < r`` along each z-direction."""
    from scipy.optimize import brentq

    out = []
    for ang in np.atleast_1d(phi_angles):
        e = np.exp(1j * ang)
        hi = chart.chart_radius * (1 - 1e-12) if math.isfinite(chart.chart_radius) else 1e6
        g = lambda rho: abs(complex(chart.period(rho * e))) - r  # noqa: E731
        if g(hi) < 0:
            raise DomainError(f"disc of radius {r} is not relatively compact in the chart")
        out.append(brentq(g, 0.0, hi, xtol=1e-15, rtol=1e-15))
    return np.array(out)


def _chart_green(h: MeromorphicMap, chart, r, tol):
    """``int_{|L(z)| < r} log(r/|L(z)|) h^* omega_FS`` in z-polar coordinates."""
    def inner(ang):
        rho_max = float(_chart_boundary(chart, r, [ang])[0])
        e = np.exp(1j * ang)

        def radial(x):
            z = rho_max * x * e
            with np.errstate(divide="ignore"):
                lw = np.log(r / np.abs(chart.period(z)))
            return np.where(x > 0, lw * fs_pullback_density(h, z) * rho_max**2 * x, 0.0)

        return gauss_kronrod(radial, 0.0, 1.0, tol=0.1 * tol, rtol=1e-13, breakpoints=(1e-6, 1e-3))

    means = circle_means(lambda rad, th: np.vectorize(inner)(th), [1.0], tol=tol, n_max=1 << 10)
    return 2.0 * math.pi * float(np.real(np.ravel(means)[0]))


def chart_values(h: MeromorphicMap, chart, targets, r0, r, tol=1e-9, zero_tol=1e-8) -> ChartValues:
    """``T``, ``m`` and ``N`` of ``h`` evaluated in the chart variable ``z``.

    The disc ``|w| < r`` is the region ``|L(z)| < r``.  The characteristic
    is the log-weighted area of ``h^* omega_FS`` over it, the proximity
    function is sampled on ``z = L^{-1}(r e^{i theta})`` and the counting
    function uses zeros of ``h - a`` found in the z-disc and mapped by ``L``.
    """
    if chart.L_inv is None:
        raise DomainError("chart values need an inverse period map")
    T = _chart_green(h, chart, r, tol) - _chart_green(h, chart, r0, tol)
    reach = float(np.max(_chart_boundary(chart, r, np.linspace(0, 2 * np.pi, 64, endpoint=False))))
    reach = min(reach * 1.01 + 1e-3, chart.chart_radius * (1 - 1e-9))
    m, N = {}, {}
    for a in targets:
        a = SpherePoint.from_value(a)
        lab = a.label()

        def integrand(theta, a=a):
            z = chart.L_inv(r * np.exp(1j * theta))
            return log_inverse_distance(h, z, a)

        m[lab] = float(harmonic_measure_average(integrand, r, tol=tol))
        zs = locate_zeros(h, a, reach, zero_tol)
        total = 0.0
        for zr in zs:
            aw = abs(complex(chart.period(zr.location)))
            if aw < r:
                total += zr.multiplicity * math.log(r / max(r0, aw))
        N[lab] = total
    return ChartValues(r, float(T), m, N)
