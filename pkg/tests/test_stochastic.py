import math

import numpy as np
import pytest

from nevlab import stochastic as MC
from nevlab.catalog import get_surface
from nevlab.errors import ConfigError, DomainError


@pytest.fixture(scope="module")
def flat_sample():
    cfg = MC.BmConfig(3200, 1.0, get_surface("euclidean-plane"), seed=7)
    return MC.sample_exits(cfg, integrand=lambda w: np.ones(np.shape(w)))


def test_zero_paths_empty():
    s = MC.sample_exits(MC.BmConfig(0, 1.0, get_surface("euclidean-plane")))
    assert s.n == 0 and s.truncated == 0


def test_config_validation():
    S = get_surface("poincare-disc")
    with pytest.raises(DomainError):
        MC.BmConfig(10, 1.0, S)
    with pytest.raises(ConfigError):
        MC.BmConfig(10, 0.5, S, step=1e-3)
    assert math.sqrt(2 * MC.BmConfig(10, 0.5, S).ds) < 0.5 / 100


def test_exits_lie_on_circle(flat_sample):
    np.testing.assert_allclose(np.abs(flat_sample.exit_points), 1.0, atol=1e-14)
    assert flat_sample.truncated == 0


def test_mean_euclidean_exit_time(flat_sample):
    # E tau = r^2 / 2 for planar Brownian motion started at the centre
    t = flat_sample.euclidean_times
    assert abs(t.mean() - 0.5) < 4 * t.std() / math.sqrt(len(t)) + 0.01


def test_metric_time_is_twice_euclidean_when_flat(flat_sample):
    np.testing.assert_allclose(flat_sample.metric_times, 2 * flat_sample.euclidean_times,
                               rtol=1e-12)
    np.testing.assert_allclose(flat_sample.integrals, flat_sample.metric_times, rtol=1e-12)


def test_flat_exits_uniform(flat_sample):
    u = MC.exit_uniformity(flat_sample)
    assert u.passed, u.to_json()


def test_poincare_exits_uniform():
    s = MC.sample_exits(MC.BmConfig(2000, 0.8, get_surface("poincare-disc"), seed=3))
    assert MC.exit_uniformity(s).passed
    assert s.occupation.sum() == pytest.approx(s.metric_times.mean(), rel=1e-12)


def test_reproducible_across_chunks_and_workers():
    cfg = MC.BmConfig(150, 1.0, get_surface("gaussian-plane"), seed=99)
    a = MC.sample_exits(cfg, chunk=64)
    b = MC.sample_exits(cfg, chunk=7)
    c = MC.sample_exits(MC.BmConfig(150, 1.0, get_surface("gaussian-plane"), seed=99, workers=3))
    for x in (b, c):
        assert np.array_equal(a.exit_points, x.exit_points)
        assert np.array_equal(a.metric_times, x.metric_times)
        assert np.array_equal(a.occupation, x.occupation)
    d = MC.sample_exits(MC.BmConfig(150, 1.0, get_surface("gaussian-plane"), seed=100))
    assert not np.array_equal(a.exit_points, d.exit_points)


def test_truncation_counted(monkeypatch):
    monkeypatch.setattr(MC, "MAX_STEPS", MC.BLOCK)
    s = MC.sample_exits(MC.BmConfig(50, 1.0, get_surface("euclidean-plane"), seed=1))
    assert 0 < s.truncated < 50


@pytest.mark.parametrize("name,surface,r,expected", [
    ("abs2", "euclidean-plane", 1.0, 1.0),
    ("re", "euclidean-plane", 1.0, 0.0),
    ("abs2", "poincare-disc", 0.8, 0.64),
    ("abs4", "gaussian-plane", 1.5, 1.5**4),
])
def test_dynkin_analytic(name, surface, r, expected):
    lhs, rhs = MC.dynkin_analytic(MC.TEST_FUNCTIONS[name], get_surface(surface), r)
    assert lhs == pytest.approx(expected, abs=1e-10)
    assert rhs == pytest.approx(expected, abs=1e-8)


def test_dynkin_monte_carlo_small():
    cfg = MC.BmConfig(1500, 1.0, get_surface("gaussian-plane"), seed=5)
    res = MC.dynkin_check(MC.TEST_FUNCTIONS["re2-im2"], cfg)
    assert res.analytic_gap < 1e-9 and res.mc_zscore <= 3


def test_error_band_shrinks_like_inverse_sqrt():
    cfg = MC.BmConfig(3200, 1.0, get_surface("euclidean-plane"), seed=11)
    x = np.real(MC.sample_exits(cfg).exit_points)  # Re w has exit mean 0
    sig = []
    for n in (200, 400, 800, 1600, 3200):
        sub = x[:n]
        s = sub.std(ddof=1) / math.sqrt(n)
        assert abs(sub.mean()) <= 3 * s
        sig.append(s)
    ratios = np.array(sig[:-1]) / np.array(sig[1:])
    np.testing.assert_allclose(ratios, math.sqrt(2), rtol=0.15)
