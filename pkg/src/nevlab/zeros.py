"""Argument-principle zero counting and localization for holomorphic functions.

Functions here work on any vectorized holomorphic ``g`` (possibly multiplied by
a positive, non-holomorphic scale, which leaves arguments unchanged).  Zeros in
a disc are isolated by recursive subdivision into polar cells -- a central disc
plus annular sectors -- so that every contour stays inside the disc.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, asdict

import numpy as np

from .errors import ContourZeroError, DomainError, NumericError

PHASE_STEP = math.pi / 6
ZERO_FLOOR = 1e-290
RESIDUAL_TOL = 1e-9
MAX_SEGMENTS = 1 << 17


@dataclass(frozen=True)
class ZeroRecord:
    location: complex
    multiplicity: int
    residual: float
    cluster: bool = False
    distinct: int = 1

    def to_json(self):
        d = asdict(self)
        d["location"] = [self.location.real, self.location.imag]
        return d


def winding_number(gd, curve, n_init=64, min_dt=1e-14):
    """Winding number of ``g`` along the closed curve ``curve(t)``, t in [0, 1].

    ``gd(w)`` returns ``(g(w), g'(w))``.  Phase is tracked segment by segment;
    a segment is accepted once both halves turn by less than ``PHASE_STEP``,
    its midpoint shows no dip in modulus, and the logarithmic derivative
    sampled at its ends and midpoint predicts less than pi/2 of turning over
    its length.  Anything else is bisected.
    """
    t = np.linspace(0.0, 1.0, n_init + 1)
    w = curve(t)
    v, dv = gd(w)
    _check_floor(v)
    rate = np.abs(dv / v)
    t0, t1, v0, v1, w0, w1 = t[:-1], t[1:], v[:-1], v[1:], w[:-1], w[1:]
    q0, q1 = rate[:-1], rate[1:]
    total = 0.0
    while len(t0):
        tm = 0.5 * (t0 + t1)
        wm = curve(tm)
        vm, dvm = gd(wm)
        _check_floor(vm)
        qm = np.abs(dvm / vm)
        d1 = np.angle(vm / v0)
        d2 = np.angle(v1 / vm)
        dip = np.abs(vm) < 0.25 * np.minimum(np.abs(v0), np.abs(v1))
        span = (np.abs(wm - w0) + np.abs(w1 - wm)) * np.maximum(np.maximum(q0, q1), qm)
        ok = (np.abs(d1) < PHASE_STEP) & (np.abs(d2) < PHASE_STEP) & ~dip & (span < 0.5 * math.pi)
        total += float(np.sum(d1[ok] + d2[ok]))
        bad = ~ok
        if not np.any(bad):
            break
        if np.any((t1[bad] - t0[bad]) < min_dt):
            raise ContourZeroError("phase tracking step underflow: zero on or near contour")
        if np.count_nonzero(bad) > MAX_SEGMENTS:
            raise ContourZeroError("phase tracking unresolved: values at noise level on contour")
        sel = [x[bad] for x in (t0, t1, v0, v1, w0, w1, q0, q1, tm, vm, wm, qm)]
        t0, t1, v0, v1, w0, w1, q0, q1, tm, vm, wm, qm = sel
        t0, t1 = np.concatenate([t0, tm]), np.concatenate([tm, t1])
        v0, v1 = np.concatenate([v0, vm]), np.concatenate([vm, v1])
        w0, w1 = np.concatenate([w0, wm]), np.concatenate([wm, w1])
        q0, q1 = np.concatenate([q0, qm]), np.concatenate([qm, q1])
    k = total / (2 * math.pi)
    n = round(k)
    if abs(k - n) > 1e-3:
        raise NumericError(f"non-integral winding {k:.6f}", achieved=abs(k - n))
    return int(n)


def _check_floor(v):
    if np.any(np.abs(v) < ZERO_FLOOR) or not np.all(np.isfinite(v)):
        raise ContourZeroError("function vanishes on the contour")


def circle(center, radius):
    return lambda t: center + radius * np.exp(2j * math.pi * t)


def winding_on_circle(gd, radius, nudges=3):
    """Winding on ``|w| = radius``; the radius is nudged by +1e-6 r on contour zeros.

    Returns ``(winding, radius_used)``.
    """
    r = radius
    for attempt in range(nudges + 1):
        try:
            return winding_number(gd, circle(0.0, r), n_init=max(64, int(8 * r) + 64)), r
        except ContourZeroError:
            if attempt == nudges:
                raise
            r *= 1 + 1e-6
    raise AssertionError("unreachable")


# -- polar cells --------------------------------------------------------------

@dataclass(frozen=True)
class Cell:
    """Central disc (``rho1 == 0`` and full turn) or an annular sector."""

    rho1: float
    rho2: float
    th1: float
    th2: float

    @property
    def is_disc(self):
        return self.rho1 == 0.0 and self.th2 - self.th1 >= 2 * math.pi

    @property
    def diameter(self):
        if self.is_disc:
            return 2 * self.rho2
        dth = self.th2 - self.th1
        chord = 2 * self.rho2 * math.sin(min(dth, math.pi) / 2)
        return math.hypot(self.rho2 - self.rho1, chord) if dth < math.pi else 2 * self.rho2

    @property
    def center(self):
        if self.is_disc:
            return 0j
        rho = 0.5 * (self.rho1 + self.rho2)
        return rho * np.exp(0.5j * (self.th1 + self.th2))

    def contains(self, z, slack=0.0):
        rho = abs(z)
        if self.is_disc:
            return rho < self.rho2 + slack
        if not (self.rho1 - slack <= rho <= self.rho2 + slack):
            return False
        th = (np.angle(z) - self.th1) % (2 * math.pi)
        pad = slack / max(rho, 1e-300)
        return th <= self.th2 - self.th1 + pad or th >= 2 * math.pi - pad

    def curve(self):
        if self.is_disc:
            return circle(0.0, self.rho2)
        r1, r2, a, b = self.rho1, self.rho2, self.th1, self.th2
        arc2 = r2 * (b - a)
        arc1 = r1 * (b - a)
        edge = r2 - r1
        lengths = np.array([arc2, edge, arc1, edge])
        cuts = np.concatenate([[0.0], np.cumsum(lengths) / lengths.sum()])

        def path(t):
            t = np.asarray(t, dtype=float)
            out = np.empty(t.shape, dtype=complex)
            seg = np.clip(np.searchsorted(cuts, t, side="right") - 1, 0, 3)
            s = (t - cuts[seg]) / np.where(lengths[seg] > 0, lengths[seg] / lengths.sum(), 1.0)
            for k, (fn) in enumerate((
                lambda s: r2 * np.exp(1j * (a + (b - a) * s)),
                lambda s: (r2 - (r2 - r1) * s) * np.exp(1j * b),
                lambda s: r1 * np.exp(1j * (b - (b - a) * s)),
                lambda s: (r1 + (r2 - r1) * s) * np.exp(1j * a),
            )):
                m = seg == k
                out[m] = fn(s[m])
            return out

        return path

    def split(self, jitter):
        """Four or five children; ``jitter`` in (-0.1, 0.1) moves the cut lines."""
        if self.is_disc:
            inner = self.rho2 * (0.5 + jitter)
            phase = 0.37 + 3.1 * jitter
            quarters = [phase + k * math.pi / 2 for k in range(5)]
            return [Cell(0.0, inner, 0.0, 2 * math.pi)] + [
                Cell(inner, self.rho2, quarters[k], quarters[k + 1]) for k in range(4)]
        rm = self.rho1 + (self.rho2 - self.rho1) * (0.5 + jitter)
        tm = self.th1 + (self.th2 - self.th1) * (0.5 - 0.7 * jitter)
        return [Cell(r1, r2, t1, t2)
                for (r1, r2) in ((self.rho1, rm), (rm, self.rho2))
                for (t1, t2) in ((self.th1, tm), (tm, self.th2))]


def _jitters():
    # deterministic, irrational-ish offsets
    k = 1
    while True:
        yield ((k * 0.6180339887498949) % 1.0 - 0.5) * 0.16
        k += 1


def _newton(g, dg, z, cell_slack, radius, max_iter=80):
    for _ in range(max_iter):
        if abs(z) >= radius:
            return None
        gz, dz = g(np.array([z])), dg(np.array([z]))
        gz, dz = complex(gz[0]), complex(dz[0])
        if gz == 0:
            return z
        if dz == 0 or not np.isfinite(dz):
            return None
        step = gz / dz
        z = z - step
        if abs(step) <= 4e-16 * max(1.0, abs(z)):
            return z
    return z if abs(complex(g(np.array([z]))[0])) < RESIDUAL_TOL else None


NOISE_MARGIN = 1e3


def _noise_level(g, pts):
    """Rounding-noise estimate of ``g`` near ``pts``.

    The second difference at step ``1e-10 |z|`` is dominated by evaluation
    noise for any reasonably scaled holomorphic function; its largest value
    over four directions is returned.
    """
    pts = np.atleast_1d(np.asarray(pts, dtype=complex))
    h = 1e-10 * np.maximum(1.0, np.abs(pts))
    g0 = g(pts)
    nu = 0.0
    for d in np.exp(1j * math.pi * np.arange(4) / 4):
        nu = max(nu, float(np.max(np.abs(g(pts + h * d) + g(pts - h * d) - 2 * g0))))
    return nu


def _within_noise(g, curve, n=64):
    """True if ``|g|`` on the curve is not clearly above rounding noise."""
    pts = curve(np.arange(n) / n)
    return float(np.min(np.abs(g(pts)))) < NOISE_MARGIN * max(_noise_level(g, pts[::8]), 1e-300)


def with_fd_derivative(g, h=1e-7):
    """Pair ``g`` with a central-difference derivative, in the ``gd`` form."""
    def gd(w):
        w = np.asarray(w, dtype=complex)
        step = h * np.maximum(1.0, np.abs(w))
        return g(w), (g(w + step) - g(w - step)) / (2 * step)
    return gd


def locate_zeros_fn(gd, radius, tol=1e-6, domain_radius=math.inf, max_cells=200000):
    """All zeros of ``g`` in ``|w| < radius`` with multiplicities.

    ``gd(w)`` returns ``(g(w), g'(w))`` in the same (possibly scaled) frame;
    see :func:`with_fd_derivative` when no derivative is at hand.  Returns a
    list of :class:`ZeroRecord` sorted by modulus.
    """
    def g(w):
        return gd(w)[0]

    def dg(w):
        return gd(w)[1]

    total, r_used = winding_on_circle(gd, radius)
    if total < 0:
        raise DomainError("negative winding: the function has poles inside the disc")
    records = []
    stack = [(Cell(0.0, r_used, 0.0, 2 * math.pi), total)]
    jit = _jitters()
    n_cells = 0
    while stack:
        cell, k = stack.pop()
        if k == 0:
            continue
        n_cells += 1
        if n_cells > max_cells:
            raise NumericError("zero localization exceeded cell budget")
        if k == 1 and cell.diameter < 0.5 * radius + 1.0:
            z = _newton(g, dg, complex(cell.center), 0.0, domain_radius)
            if z is not None and cell.contains(z):
                res = float(abs(g(np.array([z]))[0]))
                if res < RESIDUAL_TOL:
                    records.append(ZeroRecord(complex(z), 1, res))
                    continue
        if cell.diameter < tol or (k >= 2 and cell.diameter < 1e-3 * max(1.0, abs(cell.center))
                                   and _within_noise(g, cell.curve())):
            records.append(_resolve_cluster(gd, cell, k, domain_radius))
            continue
        for attempt in range(8):
            children = cell.split(next(jit))
            try:
                ks = [winding_number(gd, c.curve()) for c in children]
            except (ContourZeroError, NumericError):
                continue
            if sum(ks) == k and all(x >= 0 for x in ks):
                break
        else:
            # values at rounding level around a tight cluster or multiple root
            if cell.diameter > 1e-2 * max(1.0, abs(cell.center)):
                raise NumericError("could not split cell without contour zeros")
            records.append(_resolve_cluster(gd, cell, k, domain_radius))
            continue
        stack.extend(zip(children, ks))
    records = _merge_noise_split(g, records)
    records.sort(key=lambda z: (abs(z.location), np.angle(z.location)))
    if sum(z.multiplicity for z in records) != total:
        raise NumericError("multiplicity sum disagrees with the argument principle")
    return records


def _merge_noise_split(g, records):
    """Merge records that a cut line separated inside one rounding-noise ball."""
    records = list(records)
    merged = True
    while merged:
        merged = False
        for i in range(len(records)):
            for j in range(i + 1, len(records)):
                u, v = records[i], records[j]
                d = abs(u.location - v.location)
                if d >= 1e-3 * max(1.0, abs(u.location)):
                    continue
                m = u.multiplicity + v.multiplicity
                c = (u.multiplicity * u.location + v.multiplicity * v.location) / m
                if not _within_noise(g, circle(c, 2 * d + 1e-12 * max(1.0, abs(c)))):
                    continue
                rec = ZeroRecord(complex(c), m, float(abs(g(np.array([c]))[0])),
                                 cluster=u.cluster or v.cluster,
                                 distinct=1 if not (u.cluster or v.cluster) else u.distinct + v.distinct)
                records = [r for k, r in enumerate(records) if k not in (i, j)] + [rec]
                merged = True
                break
            if merged:
                break
    return records


def _resolve_cluster(gd, cell, k, domain_radius):
    """Record for ``k`` zeros trapped in a cell below the resolution limit.

    Newton limits from several starts are grouped.  Groups that can each be
    certified by their own winding circle are distinct zeros closer than the
    tolerance and yield a flagged cluster record; otherwise the spread is
    rounding noise around a single multiple root.
    """
    def g(w):
        return gd(w)[0]

    def dg(w):
        return gd(w)[1]

    c = complex(cell.center)
    rad = max(cell.diameter / 4, 1e-300)
    starts = [c] + [c + rad * np.exp(2j * math.pi * (j + 0.25) / k) for j in range(k)]
    limits = []
    for s in starts:
        z = _newton(g, dg, s, 0.0, domain_radius, max_iter=200)
        if z is not None and abs(z - c) <= cell.diameter:
            limits.append(z)
    groups = []
    for z in limits:
        if all(abs(z - u) > 1e-9 * max(1.0, abs(z)) for u in groups):
            groups.append(z)
    if len(groups) > 1:
        sep = min(abs(u - v) for i, u in enumerate(groups) for v in groups[i + 1:])
        try:
            ks = [winding_number(gd, circle(u, 0.4 * sep)) for u in groups]
            if any(_within_noise(g, circle(u, 0.4 * sep)) for u in groups):
                ks = None
        except (ContourZeroError, NumericError):
            ks = None
        if ks is not None and all(x >= 1 for x in ks) and sum(ks) == k:
            loc = complex(np.mean(groups))
            return ZeroRecord(loc, k, float(abs(g(np.array([loc]))[0])), cluster=True,
                              distinct=len(groups))
    z = complex(np.mean(groups)) if groups else c
    # modified Newton for a multiple root
    for _ in range(20):
        gz, dz = complex(g(np.array([z]))[0]), complex(dg(np.array([z]))[0])
        if gz == 0 or dz == 0:
            break
        step = k * gz / dz
        if abs(step) > cell.diameter:
            break
        z -= step
        if abs(step) <= 4e-16 * max(1.0, abs(z)):
            break
    return ZeroRecord(complex(z), k, float(abs(g(np.array([z]))[0])))
