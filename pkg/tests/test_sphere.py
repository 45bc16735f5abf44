import cmath
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from nevlab.errors import DomainError
from nevlab.sphere import (SpherePoint, chern_bracket, composed, exponential, fs_pullback_density,
                           moebius, polynomial, rational, spherical_distance)

finite = st.floats(-1e3, 1e3, allow_nan=False)
cplx = st.builds(complex, finite, finite)
nonzero = cplx.filter(lambda z: abs(z) > 1e-6)


def test_distance_zero_and_infinity_are_antipodal():
    assert spherical_distance(SpherePoint(1, 0), SpherePoint(0, 1)) == pytest.approx(1.0, abs=1e-15)


def test_distance_to_self_vanishes():
    p = SpherePoint(0.3 + 1j, -2)
    assert spherical_distance(p, p) == 0.0


def test_distance_zero_to_one():
    assert spherical_distance(SpherePoint(1, 0), SpherePoint(1, 1)) == pytest.approx(2**-0.5, abs=1e-15)


def test_zero_pair_rejected():
    with pytest.raises(DomainError):
        SpherePoint(0, 0)
    with pytest.raises(DomainError):
        chern_bracket((0.0, 0.0), SpherePoint(1, 0))


def test_point_is_normalized():
    p = SpherePoint(4j, 2)
    assert max(abs(p.a0), abs(p.a1)) == pytest.approx(1.0)
    assert SpherePoint.from_value("inf").is_infinity
    assert SpherePoint.from_value(2 + 1j).value == pytest.approx(2 + 1j)


@given(cplx, cplx, cplx, cplx, nonzero)
def test_distance_projective_invariance(a0, a1, b0, b1, lam):
    if abs(a0) + abs(a1) < 1e-9 or abs(b0) + abs(b1) < 1e-9:
        return
    p, q = SpherePoint(a0, a1), SpherePoint(b0, b1)
    d = spherical_distance(p, q)
    assert abs(d - spherical_distance(SpherePoint(lam * a0, lam * a1), q)) < 1e-12
    assert abs(d - spherical_distance(p, SpherePoint(lam * b0, lam * b1))) < 1e-12
    assert abs(d - spherical_distance(q, p)) < 1e-15


def test_distance_bounded_on_random_pairs(rng):
    z = rng.normal(size=(10_000, 4)) * rng.lognormal(0, 3, size=(10_000, 4))
    for row in z[:: 1]:
        d = spherical_distance(SpherePoint(row[0] + 1j * row[1], 1.0),
                               SpherePoint(1.0, row[2] + 1j * row[3]))
        assert 0.0 <= d <= 1.0


def test_bracket_examples():
    assert chern_bracket((1.0, 2.0), SpherePoint(1, 0)) == 2.0
    for w in (0.0, 3.0 - 1j, 1e5):
        assert chern_bracket((1.0, w), SpherePoint(0, 1)) == -1.0
    assert chern_bracket((2.0, 6.0), SpherePoint.from_value(3)) == 0.0


def test_density_examples():
    ident = rational([1, 0], [1])
    assert fs_pullback_density(ident, 0.0) == pytest.approx(1 / math.pi, rel=1e-14)
    sq = rational([1, 0, 0], [1])
    assert fs_pullback_density(sq, 1.0) == pytest.approx(1 / math.pi, rel=1e-14)
    const = polynomial([2.0])
    assert np.all(fs_pullback_density(const, np.array([0.0, 1j, 5.0])) == 0.0)


def test_density_finite_at_pole():
    f = rational([1], [1, 0])  # 1/w
    assert fs_pullback_density(f, 0.0) == pytest.approx(1 / math.pi, rel=1e-12)


def test_exp_balanced_far_out():
    f = exponential()
    f0, f1, _, _ = f.evaluate(np.array([800.0, -800.0, 1e3j]))
    assert np.all(np.isfinite(f0)) and np.all(np.isfinite(f1))
    assert np.all(np.maximum(abs(f0), abs(f1)) > 0)


def test_density_matches_chordal_derivative(rng):
    maps = [rational([1, 0, -1], [1, 2]), exponential(), moebius(2, 1, 1, 3)]
    h = 1e-6
    for f in maps:
        pts = rng.uniform(-2, 2, 34) + 1j * rng.uniform(-2, 2, 34)
        for w in pts:
            fd = spherical_distance(f.value(w + h), f.value(w)) / h
            assert fs_pullback_density(f, w) == pytest.approx(fd**2 / math.pi, rel=1e-4)


@pytest.mark.parametrize("f", [rational([1, 0, -1], [1, 2]), exponential(2.0),
                               moebius(2, 1, 1, 3), composed(exponential(), "cayley")])
def test_derivative_pair_consistent(f, rng):
    w = 0.4 * (rng.uniform(-1, 1, 20) + 1j * rng.uniform(-1, 1, 20))
    h = 1e-6
    _, _, d0, d1 = f.evaluate(w)
    a0, a1, _, _ = f.evaluate(w + h)
    b0, b1, _, _ = f.evaluate(w - h)
    # the pair is rescaled per point, so compare the ratio's derivative
    g = lambda x0, x1: x1 / x0  # noqa: E731
    f0, f1, _, _ = f.evaluate(w)
    fd = (g(a0, a1) - g(b0, b1)) / (2 * h)
    exact = (d1 * f0 - f1 * d0) / f0**2
    np.testing.assert_allclose(fd, exact, rtol=1e-6, atol=1e-8)


def test_constant_map_refused():
    with pytest.raises(DomainError):
        polynomial([3.0]).require_nonconstant()
