import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from nevlab.catalog import PERIOD_EXPRS, FORM_EXPRS, build_surface, get_surface
from nevlab.errors import CurvatureBoundError, DomainError, PoleError
from nevlab.surface import (ChartPresentation, check_chart, check_curvature_bound,
                            exhaustion_check, form_norm_extrema, gauss_curvature, green_function,
                            harmonic_measure_average, integrate_form, ricci_characteristic)

ONE = ChartPresentation("flat-plane", FORM_EXPRS["one"], math.inf, *PERIOD_EXPRS["identity"])
DISC = ChartPresentation("flat-disc", FORM_EXPRS["one"], 1.0, *PERIOD_EXPRS["identity"])
SHIFT = ChartPresentation("shift", FORM_EXPRS["inv-square-shift"], 1.0,
                          *PERIOD_EXPRS["moebius-period"])


def test_integrate_form_examples():
    assert integrate_form(ONE, [0, 1 + 1j]) == pytest.approx(1 + 1j, abs=1e-14)
    assert integrate_form(SHIFT, [0, 0.5]) == pytest.approx(1.0, abs=1e-12)
    assert abs(integrate_form(ONE, [0, 1, 1j, 0])) < 1e-14


def test_integrate_form_path_independent():
    a = integrate_form(SHIFT, [0, 0.3 + 0.4j])
    b = integrate_form(SHIFT, [0, 0.6, 0.6j, 0.3 + 0.4j])
    assert abs(a - b) < 1e-12
    assert abs(a - SHIFT.L(0.3 + 0.4j)) < 1e-12


@pytest.mark.parametrize("chart", [ONE, DISC, SHIFT])
def test_chart_certified(chart):
    rep = check_chart(chart)
    assert rep.ok and rep.n_samples > 5000


def test_exhaustion_plane():
    rep = exhaustion_check(ONE, [1, 2, 4])
    assert rep.classification == "parabolic" and rep.exhausts and not rep.violations
    assert all(row["nested"] for row in rep.rows)


def test_exhaustion_disc_beyond_radius_is_whole_surface():
    rep = exhaustion_check(DISC, [0.5, 0.9, 2.0])
    assert rep.classification == "hyperbolic" and rep.s_radius == pytest.approx(1.0)
    last = rep.rows[-1]
    assert last["whole_surface"] and not last["circle_nonempty"]


def test_exhaustion_shift_chart_parabolic_but_defective():
    rep = exhaustion_check(SHIFT, [1, 10, 100])
    assert rep.classification == "parabolic" and math.isinf(rep.s_radius)
    # the image is the half-plane Re w > -1/2: only discs with r < 1/2 are compact
    assert rep.boundary_infimum == pytest.approx(0.5, abs=1e-6)
    assert rep.violations == [1, 10, 100] and not rep.exhausts


def test_green_function_examples():
    assert green_function(math.e, 1.0) == pytest.approx(1 / math.pi, rel=1e-15)
    assert green_function(2.0, 2.0) == 0.0
    assert green_function(2.0, 1j) == pytest.approx(math.log(2) / math.pi, rel=1e-15)
    with pytest.raises(PoleError):
        green_function(1.0, 0.0)


@given(st.floats(0.0, 10.0), st.floats(0.1, 5.0))
def test_harmonic_measure_is_probability(c, r):
    assert harmonic_measure_average(lambda th: c + 0 * th, r) == pytest.approx(c, abs=1e-12)
    assert abs(harmonic_measure_average(np.cos, r)) < 1e-12


@given(st.complex_numbers(max_magnitude=0.95).filter(lambda a: abs(a) > 1e-3))
def test_mean_value_of_log(a):
    v = harmonic_measure_average(lambda th: np.log(np.abs(np.exp(1j * th) - a)), 1.0)
    assert abs(v) < 1e-9


def test_curvature_examples():
    w = np.array([0, 0.3, 0.5j, -0.7 + 0.1j])
    assert np.all(gauss_curvature(get_surface("euclidean-plane"), w) == 0)
    # with K = -(1/lambda) ddbar log lambda the weight 4/(1-|w|^2)^2 has K = -1/2
    np.testing.assert_allclose(gauss_curvature(get_surface("poincare-disc"), w), -0.5, atol=1e-12)
    np.testing.assert_allclose(gauss_curvature(get_surface("gaussian-plane"), w),
                               -np.exp(-np.abs(w) ** 2), rtol=1e-12)


def test_curvature_finite_difference_fallback():
    s = build_surface({"kind": "euclidean-disc", "lambda": "poincare"})
    fd = build_surface({"kind": "euclidean-disc", "lambda": "poincare"})
    object.__setattr__(fd, "log_weight_laplacian", None)
    w = np.array([0.1, 0.4j, -0.6])
    np.testing.assert_allclose(gauss_curvature(fd, w), gauss_curvature(s, w), rtol=1e-6)


def test_curvature_bound_check():
    assert check_curvature_bound(get_surface("poincare-disc"), 1.0)
    with pytest.raises(CurvatureBoundError):
        check_curvature_bound(get_surface("poincare-disc"), 0.25)


def test_ricci_flat_is_zero():
    assert ricci_characteristic(get_surface("euclidean-plane"), 1.0, 5.0) == 0.0


def test_ricci_poincare_closed_form():
    # (1/2) int g_r K dV = log(1 - r^2) for lambda = 4/(1-|w|^2)^2
    v = ricci_characteristic(get_surface("poincare-disc"), 0.1, 0.9)
    assert v == pytest.approx(math.log(0.19) - math.log(0.99), rel=1e-4)
    assert v < 0


def test_ricci_monotone_nonincreasing():
    S = get_surface("gaussian-plane")
    vals = [ricci_characteristic(S, 0.5, r) for r in np.linspace(0.6, 3.0, 9)]
    assert all(b <= a + 1e-12 for a, b in zip(vals, vals[1:]))


def test_form_norm_examples():
    assert form_norm_extrema(get_surface("euclidean-plane"), 3.0) == pytest.approx((1.0, 1.0))
    lo, hi = form_norm_extrema(get_surface("poincare-disc"), 0.9)
    assert lo == pytest.approx(0.095, rel=1e-3) and hi == pytest.approx(0.5, rel=1e-3)
    S = get_surface("poincare-disc")
    w = np.array([0.2, 0.8j])
    np.testing.assert_allclose(S.form_norm(w) ** 2 * S.metric_weight(w), 1.0, atol=1e-12)


def test_weight_outside_domain_rejected():
    with pytest.raises(DomainError):
        get_surface("poincare-disc").metric_weight(1.2)


def _bump_green_integral(c, s, r, n_rho=48, n_phi=96):
    x, wx = np.polynomial.legendre.leggauss(n_rho)
    rho = 0.5 * s * (x + 1)
    wr = 0.5 * s * wx
    phi = 2 * np.pi * np.arange(n_phi) / n_phi
    P, R = np.meshgrid(phi, rho)
    w = c + R * np.exp(1j * P)
    q = s**2 - R**2
    lap_e = -16 * q**3 + 48 * R**2 * q**2  # Euclidean Laplacian of (s^2 - rho^2)^4
    g = np.log(r / np.abs(w)) / np.pi
    # Delta = Delta_E / (2 lambda) and dV = 2 lambda dA: lambda drops out
    return float(np.sum(g * lap_e * R * wr[:, None]) * (2 * np.pi / n_phi))


def test_green_function_harmonic_away_from_pole(rng):
    r = 2.0
    for _ in range(50):
        s = rng.uniform(0.05, 0.4)
        rad = rng.uniform(s + 0.05, r - s - 0.05)
        c = rad * np.exp(1j * rng.uniform(0, 2 * np.pi))
        assert abs(_bump_green_integral(c, s, r)) < 1e-6
