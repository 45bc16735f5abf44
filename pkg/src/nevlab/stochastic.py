"""Monte-Carlo exit sampling for Brownian motion under a conformal metric.

In a conformal chart the Brownian trace is the Euclidean one; only the clock
changes.  Paths are therefore simulated as Euclidean Brownian motion with a
fixed step ``ds`` (so exit positions carry no metric bias) and the metric
clock is accumulated alongside.  With the Laplacian ``Delta = Delta_E / (2
lambda)``, the generator ``Delta / 2`` runs at ``dt = 2 lambda ds``.

Each path draws from its own counter-based Philox stream keyed by
``(seed, path index)``, so results do not depend on chunking or worker count.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy import stats

from .errors import ConfigError, DomainError
from .surface import SurfaceModel, green_disc_integral, harmonic_measure_average

MAX_STEPS = 10_000_000
BLOCK = 4096
SIGMA_FLOOR = 1e-9


@dataclass(frozen=True)
class BmConfig:
    """Sampling parameters.

    ``step`` is the Euclidean time step of the trace; ``None`` picks the
    step whose RMS displacement ``sqrt(2 step)`` is ``r_exit / 105``, just inside
    the ``r_exit / 100`` limit.
    """

    n_paths: int
    r_exit: float
    surface: SurfaceModel
    seed: int = 0
    step: Optional[float] = None
    n_bins: int = 20
    workers: int = 1

    def __post_init__(self):
        if self.n_paths < 0:
            raise ConfigError("n_paths must be nonnegative", field="n_paths")
        if not self.r_exit > 0:
            raise ConfigError("r_exit must be positive", field="r_exit")
        if self.r_exit >= self.surface.domain_radius:
            raise DomainError(f"exit radius {self.r_exit} not inside the chart "
                              f"(radius {self.surface.domain_radius})")
        if self.step is not None:
            if not self.step > 0:
                raise ConfigError("step must be positive", field="step")
            if math.sqrt(2 * self.step) >= self.r_exit / 100:
                raise ConfigError("step too coarse: RMS displacement must stay below "
                                  "r_exit/100", field="step")

    @property
    def ds(self) -> float:
        if self.step is not None:
            return float(self.step)
        return (self.r_exit / 105.0) ** 2 / 2.0


@dataclass
class ExitSample:
    """Per-path exit data, in path-index order."""

    exit_points: np.ndarray
    euclidean_times: np.ndarray
    metric_times: np.ndarray
    integrals: np.ndarray
    occupation: np.ndarray
    bin_edges: np.ndarray
    truncated: int

    @property
    def angles(self) -> np.ndarray:
        return np.mod(np.angle(self.exit_points), 2 * np.pi)

    @property
    def n(self) -> int:
        return len(self.exit_points)

    def to_json(self):
        return {"n_paths": self.n, "truncated": self.truncated,
                "mean_metric_time": float(self.metric_times.mean()) if self.n else None,
                "mean_euclidean_time": float(self.euclidean_times.mean()) if self.n else None,
                "occupation": self.occupation.tolist(), "bin_edges": self.bin_edges.tolist()}


def path_rng(seed: int, index: int) -> np.random.Generator:
    key = np.array([int(seed) & 0xFFFFFFFFFFFFFFFF, int(index)], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=key))


def _crossing(a, b, r):
    """Fraction ``t`` in (0, 1] where the segment ``a -> b`` meets ``|w| = r``."""
    d = b - a
    A = abs(d) ** 2
    B = 2 * (a.real * d.real + a.imag * d.imag)
    C = abs(a) ** 2 - r * r
    disc = max(B * B - 4 * A * C, 0.0)
    # C <= 0 so the root with +sqrt is the one in [0, 1]
    t = (-B + math.sqrt(disc)) / (2 * A) if A > 0 else 1.0
    return min(max(t, 0.0), 1.0)


def _run_chunk(cfg: BmConfig, indices, integrand):
    """Simulate the paths ``indices`` together, one block of steps at a time.

    Every path consumes its own stream in blocks of ``BLOCK`` steps, so the
    numbers drawn for a path are the same whatever chunk it lands in.
    """
    P = len(indices)
    rngs = [path_rng(cfg.seed, i) for i in indices]
    r, ds = cfg.r_exit, cfg.ds
    sd = math.sqrt(ds)
    nb = cfg.n_bins
    z = np.zeros(P, dtype=complex)
    exit_pt = np.zeros(P, dtype=complex)
    t_euc = np.zeros(P)
    t_metric = np.zeros(P)
    acc = np.zeros(P)
    occ = np.zeros((P, nb))
    steps = np.zeros(P, dtype=np.int64)
    active = np.arange(P)
    while len(active):
        inc = np.stack([rngs[i].standard_normal((BLOCK, 2)) for i in active])
        pts = z[active, None] + np.cumsum(sd * (inc[..., 0] + 1j * inc[..., 1]), axis=1)
        starts = np.concatenate((z[active, None], pts[:, :-1]), axis=1)
        outside = np.abs(pts) >= r
        hit = outside.any(axis=1)
        k = np.where(hit, outside.argmax(axis=1), BLOCK)
        cols = np.arange(BLOCK)[None, :]
        frac = (cols < k[:, None]).astype(float)
        rows = np.flatnonzero(hit)
        tcut = np.array([_crossing(starts[a, k[a]], pts[a, k[a]], r) for a in rows])
        if len(rows):
            frac[rows, k[rows]] = tcut
        # points after the exit step are parked at the origin; their weight is zero
        starts = np.where(frac > 0, starts, 0j)
        dt = 2.0 * np.asarray(cfg.surface.metric_weight(starts), dtype=float) * ds * frac
        t_metric[active] += dt.sum(axis=1)
        if integrand is not None:
            acc[active] += (np.asarray(integrand(starts), dtype=float) * dt).sum(axis=1)
        b = np.minimum((np.abs(starts) / r * nb).astype(np.int64), nb - 1)
        flat = np.bincount((np.arange(len(active))[:, None] * nb + b).ravel(),
                           weights=dt.ravel(), minlength=len(active) * nb)
        occ[active] += flat.reshape(len(active), nb)
        if len(rows):
            done = active[rows]
            e0 = starts[rows, k[rows]]
            e = e0 + tcut * (pts[rows, k[rows]] - e0)
            exit_pt[done] = e * (r / np.abs(e))
            t_euc[done] = (steps[done] + k[rows] + tcut) * ds
        steps[active] += BLOCK
        z[active] = pts[:, -1]
        still = active[~hit]
        over = steps[still] >= MAX_STEPS
        if over.any():
            gone = still[over]
            exit_pt[gone] = z[gone]
            t_euc[gone] = steps[gone] * ds
        active = still[~over]
    truncated = np.asarray(np.abs(exit_pt) < r * (1 - 1e-12))
    return exit_pt, t_euc, t_metric, acc, occ, truncated


def sample_exits(cfg: BmConfig, integrand: Optional[Callable] = None, chunk=64) -> ExitSample:
    """Run ``cfg.n_paths`` paths from 0 to the circle ``|w| = r_exit``.

    ``integrand`` (optional) is accumulated along each path against metric
    time.  The occupation histogram tallies metric time per radial bin.
    """
    n = cfg.n_paths
    edges = np.linspace(0.0, cfg.r_exit, cfg.n_bins + 1)
    if n == 0:
        e = np.zeros(0)
        return ExitSample(np.zeros(0, dtype=complex), e, e, e, np.zeros(cfg.n_bins), edges, 0)
    chunks = [np.arange(a, min(a + chunk, n)) for a in range(0, n, chunk)]
    if cfg.workers > 1:
        with ThreadPoolExecutor(cfg.workers) as ex:
            res = list(ex.map(lambda idx: _run_chunk(cfg, idx, integrand), chunks))
    else:
        res = [_run_chunk(cfg, idx, integrand) for idx in chunks]
    cat = [np.concatenate([x[j] for x in res]) for j in range(6)]
    # per-path tallies are merged in path-index order
    return ExitSample(cat[0], cat[1], cat[2], cat[3], cat[4].sum(axis=0) / n, edges,
                      int(cat[5].sum()))


@dataclass
class UniformityTest:
    ks_statistic: float
    ks_threshold: float
    ks_pvalue: float
    chi2_statistic: float
    chi2_pvalue: float
    bins: int

    @property
    def passed(self):
        return self.ks_statistic < self.ks_threshold and self.chi2_pvalue > 0.01

    def to_json(self):
        return {**self.__dict__, "passed": self.passed}


def exit_uniformity(sample: ExitSample, bins=36) -> UniformityTest:
    """KS (99% level, ``D < 1.63/sqrt(n)``) and 36-bin chi-square against ``dtheta/2pi``."""
    if sample.n == 0:
        raise ConfigError("no paths to test", field="n_paths")
    u = sample.angles / (2 * np.pi)
    ks = stats.kstest(u, "uniform")
    counts = np.histogram(u, bins=bins, range=(0.0, 1.0))[0]
    chi = stats.chisquare(counts)
    return UniformityTest(float(ks.statistic), 1.63 / math.sqrt(sample.n), float(ks.pvalue),
                          float(chi.statistic), float(chi.pvalue), bins)


@dataclass
class TestFunction:
    """``u`` with its Euclidean Laplacian in closed form."""

    name: str
    u: Callable
    laplacian_euclidean: Callable


TEST_FUNCTIONS = {
    "abs2": TestFunction("abs2", lambda w: np.abs(w) ** 2, lambda w: 4.0 * np.ones(np.shape(w))),
    "re": TestFunction("re", lambda w: np.real(w), lambda w: np.zeros(np.shape(w))),
    "re2-im2": TestFunction("re2-im2", lambda w: np.real(w) ** 2 - np.imag(w) ** 2,
                            lambda w: np.zeros(np.shape(w))),
    "abs4": TestFunction("abs4", lambda w: np.abs(w) ** 4, lambda w: 16.0 * np.abs(w) ** 2),
}


@dataclass
class Estimate:
    mean: float
    sigma: float

    def to_json(self):
        return {"mean": self.mean, "sigma": self.sigma}


def _estimate(x):
    n = len(x)
    if n == 0:
        return Estimate(math.nan, math.nan)
    s = float(np.std(x, ddof=1)) / math.sqrt(n) if n > 1 else math.inf
    return Estimate(float(np.mean(x)), s)


@dataclass
class DynkinResult:
    test_function: str
    analytic_lhs: float
    analytic_rhs: float
    mc_exit: Estimate
    mc_occupation: Estimate
    n_paths: int
    truncated: int
    uniformity: Optional[UniformityTest] = None
    extra: dict = field(default_factory=dict)

    @property
    def analytic_gap(self):
        return abs(self.analytic_lhs - self.analytic_rhs)

    @property
    def mc_zscore(self):
        return abs(self.mc_exit.mean - self.analytic_lhs) / max(self.mc_exit.sigma, SIGMA_FLOOR)

    @property
    def occupation_zscore(self):
        return (abs(self.mc_occupation.mean - self.analytic_rhs)
                / max(self.mc_occupation.sigma, SIGMA_FLOOR))

    @property
    def passed(self):
        ok = self.analytic_gap < 1e-6 and self.mc_zscore <= 3.0 and self.truncated == 0
        if self.uniformity is not None:
            ok = ok and self.uniformity.passed
        return bool(ok)

    def to_json(self):
        return {"test_function": self.test_function, "analytic_lhs": self.analytic_lhs,
                "analytic_rhs": self.analytic_rhs, "analytic_gap": self.analytic_gap,
                "mc_exit": self.mc_exit.to_json(), "mc_exit_z": self.mc_zscore,
                "mc_occupation": self.mc_occupation.to_json(),
                "mc_occupation_z": self.occupation_zscore, "n_paths": self.n_paths,
                "truncated": self.truncated,
                "uniformity": self.uniformity.to_json() if self.uniformity else None,
                "passed": self.passed, **self.extra}


def metric_laplacian(surface: SurfaceModel, tf: TestFunction):
    """``Delta u = Delta_E u / (2 lambda)``."""
    return lambda w: tf.laplacian_euclidean(w) / (2.0 * surface.metric_weight(w))


def dynkin_analytic(tf: TestFunction, surface: SurfaceModel, r, tol=1e-11):
    """Both sides of the Dynkin identity by quadrature.

    The right side ``(1/2) int g_r Delta u dV`` is evaluated literally, with
    ``g_r = log(r/|w|)/pi``, the metric Laplacian and ``dV = 2 lambda dA``.
    """
    lhs = harmonic_measure_average(lambda th: tf.u(r * np.exp(1j * th)), r, tol=1e-13) \
        - float(np.real(tf.u(0j)))
    lap = metric_laplacian(surface, tf)
    rhs = 0.5 / math.pi * green_disc_integral(
        lambda w: lap(w) * 2.0 * surface.metric_weight(w), r, tol=tol)
    return float(lhs), float(rhs)


def dynkin_check(tf: TestFunction, cfg: BmConfig, uniformity=True) -> DynkinResult:
    """Analytic left side, analytic right side and the two Monte-Carlo estimates.

    The exit estimator is ``E[u(X_tau)] - u(0)``; the occupation estimator
    is ``E int_0^tau (1/2) Delta u(X_t) dt`` in metric time.
    """
    lhs, rhs = dynkin_analytic(tf, cfg.surface, cfg.r_exit)
    lap = metric_laplacian(cfg.surface, tf)
    sample = sample_exits(cfg, integrand=lambda w: 0.5 * lap(w))
    u0 = float(np.real(tf.u(0j)))
    exit_vals = np.real(tf.u(sample.exit_points)) - u0
    uni = exit_uniformity(sample) if uniformity and sample.n else None
    return DynkinResult(tf.name, lhs, rhs, _estimate(exit_vals), _estimate(sample.integrals),
                        sample.n, sample.truncated, uni,
                        {"surface": cfg.surface.name, "r_exit": cfg.r_exit, "seed": cfg.seed,
                         "step": cfg.ds})
