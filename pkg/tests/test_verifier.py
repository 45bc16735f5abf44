import math
import warnings

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from nevlab import verifier as V
from nevlab.catalog import FUNCTIONS, build_map, get_surface
from nevlab.errors import ConfigError, CurvatureBoundError, DomainError, InsufficientGrowthError
from nevlab.nevanlinna import compute_rows


@pytest.fixture(scope="module")
def exp_rows(plane, exp_map):
    return compute_rows(exp_map, plane, [0, "inf", 1], 1.0, np.geomspace(5, 60, 60), green=False)


@pytest.fixture(scope="module")
def square_rows(plane):
    f = build_map("rational{num:[1,0,0],den:[1]}")
    return compute_rows(f, plane, [0, "inf", 1, -1], 1.0, np.geomspace(2, 60, 24), green=False)


def test_gamma_weights():
    assert np.all(V.GammaWeight()(np.array([1.0, 5.0])) == 1.0)
    assert V.GammaWeight("inverse-gap", 1.0)(0.75) == pytest.approx(4.0)
    g = V.GammaWeight("custom", 1.0, "1/(R - r)**2 + log(1 + r)")
    assert g(0.5) == pytest.approx(4 + math.log(1.5))
    with pytest.raises(ConfigError):
        V.GammaWeight("constant-one", 1.0)
    with pytest.raises(ConfigError):
        V.GammaWeight("custom", 1.0, "__import__('os')")


def test_gamma_measure_trapezoid():
    r = np.linspace(0, 1, 11)
    mask = np.zeros(11, bool)
    mask[3:6] = True
    # full interior cells between flagged points plus half-cells at the ends
    assert V.gamma_measure(r, mask, V.GammaWeight()) == pytest.approx(0.3)
    assert V.gamma_measure(r, np.zeros(11, bool), V.GammaWeight()) == 0.0


def test_fmt_identity_closed_form(identity_map):
    res = V.fmt_residual(identity_map, "inf", 1.0, np.geomspace(2, 50, 12))
    np.testing.assert_allclose(res.residual, -0.5 * math.log(2), atol=1e-10)
    assert res.width < 1e-6 and res.passed
    res0 = V.fmt_residual(identity_map, 0, 1.0, np.geomspace(2, 50, 12))
    assert res0.width < 1e-6


def test_fmt_exp_bounded(exp_map):
    res = V.fmt_residual(exp_map, 0, 1.0, np.geomspace(5, 40, 16))
    assert res.width < 1.0 and res.skipped == 0


def test_fit_envelope_minimal():
    basis = np.linspace(1, 2, 50)
    deficit = 0.5 * basis + 0.1
    c, c1, drop = V.fit_envelope(deficit, basis)
    assert np.all(c * basis + c1 >= deficit - 1e-9)
    assert not drop.any()
    deficit[10] = 100.0  # one outlier out of 50 is too many for 1% coverage
    c, c1, drop = V.fit_envelope(deficit, basis)
    assert not drop.any() and c * basis[10] + c1 >= 100 - 1e-9
    basis = np.linspace(1, 2, 200)
    deficit = 0.5 * basis
    deficit[[17, 99]] = 50.0
    c, c1, drop = V.fit_envelope(deficit, basis)
    assert set(np.flatnonzero(drop)) == {17, 99}
    assert c * basis[5] + c1 == pytest.approx(0.5 * basis[5], abs=1e-6)


def test_smt_exp(exp_rows, plane):
    v = V.smt_from_rows(exp_rows, [0, "inf", 1], plane, V.GammaWeight(), 0.1)
    assert v.passed and v.gamma_measure_of_exceptional < 2
    np.testing.assert_allclose(v.slack, np.array(v.rhs) - np.array(v.lhs))
    assert set(v.exceptional_set) <= set(v.grid)


def test_smt_identity_needs_no_constant(identity_map, plane):
    v = V.smt_check(identity_map, [0, 1, "inf"], plane, V.GammaWeight(), 0.1, 1.0,
                    np.geomspace(2, 50, 16))
    assert v.fitted_error_constant == pytest.approx(0.0, abs=1e-9)
    assert min(v.slack) >= -1e-9


def test_smt_rejects_constant_and_duplicates(identity_map, plane):
    with pytest.raises(DomainError):
        V.smt_check(build_map("rational{num:[2],den:[1]}"), [0, 1, "inf"], plane,
                    V.GammaWeight(), 0.1, 1.0, [2, 3])
    with pytest.raises(ConfigError):
        V.smt_check(identity_map, [0, 1, 1.0], plane, V.GammaWeight(), 0.1, 1.0, [2, 3])


@pytest.mark.parametrize("name", ["identity", "exp", "rational-pole", "moebius", "halfplane-exp"])
def test_smt_one_and_two_targets_hold(name):
    cf = FUNCTIONS[name]
    S = get_surface(cf.surface)
    rows = compute_rows(cf.build(), S, cf.targets[:2], cf.r0, cf.radii(), green=False)
    g = V.GammaWeight() if math.isinf(S.s_radius) else V.GammaWeight("inverse-gap", S.s_radius)
    for q in (1, 2):
        v = V.smt_from_rows(rows, cf.targets[:q], S, g, 0.1)
        assert not v.exceptional_set


def test_curvature_form_flat_reduces_to_plain(exp_rows, plane):
    a = V.smt_from_rows(exp_rows, [0, "inf", 1], plane, V.GammaWeight(), 0.1)
    b = V.smt_from_rows(exp_rows, [0, "inf", 1], plane, V.GammaWeight(), 0.1, curvature_bound=0.0)
    np.testing.assert_allclose(a.lhs, b.lhs)
    np.testing.assert_allclose(a.rhs, b.rhs)
    assert b.ricci_bound_ok


def test_curvature_form_poincare(poincare):
    cf = FUNCTIONS["halfplane-exp"]
    v = V.smt_check_curvature_form(cf.build(), cf.targets, poincare,
                                   V.GammaWeight("inverse-gap", 1.0), 0.1, 0.5,
                                   np.linspace(0.55, 0.95, 12))
    assert v.ricci_bound_ok and v.passed
    assert all(row["T_ricci"] <= 1e-12 for row in v.ricci_bound_rows)


def test_curvature_form_rejects_wrong_bound(poincare, identity_map):
    with pytest.raises(CurvatureBoundError):
        V.smt_check_curvature_form(identity_map, [0, 1, "inf"], poincare,
                                   V.GammaWeight("inverse-gap", 1.0), 0.1, 0.5, [0.6, 0.7], C=0.1)


def test_defects_exp(exp_rows):
    d = {a: V.defect_from_rows(exp_rows, a) for a in (0, "inf", 1)}
    assert d[0].value == 1.0 and d["inf"].value == 1.0
    assert abs(d[1].value) < 0.05
    for est in d.values():
        # finite-radius estimate never drops below the FMT floor
        assert est.fmt_floor - 1e-12 <= est.value <= 1.0


def test_defect_square_zero(square_rows):
    est = V.defect_from_rows(square_rows, 0)
    assert est.value == pytest.approx(0.5, abs=0.1)


def test_defect_needs_growth():
    rows = compute_rows(build_map("rational{num:[1,0],den:[1]}"), get_surface("euclidean-plane"),
                        [0], 1.0, [1.0 + 1e-14, 1.0 + 2e-14], green=False)
    with pytest.raises(InsufficientGrowthError):
        V.defect_from_rows(rows, 0)


def test_defect_relation_moebius_near_zero():
    cf = FUNCTIONS["moebius"]
    S = get_surface(cf.surface)
    rows = compute_rows(cf.build(), S, cf.targets, cf.r0, cf.radii(), green=False)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        rel = V.defect_relation_from_rows(rows, cf.targets, S, V.GammaWeight("inverse-gap", 1.0))
    assert rel.passed
    # a bijection has N-bar comparable to T; the finite-radius sum stays small
    assert rel.total < 1.0


def test_calculus_lemma_examples(plane):
    g = V.GammaWeight()
    grid = np.linspace(1.1, 20, 40)
    one = V.calculus_lemma_check(V.CALCULUS_DENSITIES["one"], plane, g, 0.5, 1.0, grid)
    np.testing.assert_allclose(one.lhs, 1.0, atol=1e-12)
    np.testing.assert_allclose(one.extra["A"], np.pi * (grid**2 - 1), rtol=1e-9)
    assert one.passed and max(one.violations) < 2
    sq = V.calculus_lemma_check(V.CALCULUS_DENSITIES["abs2"], plane, g, 0.5, 1.0, grid)
    np.testing.assert_allclose(sq.lhs, grid**2, rtol=1e-12)
    np.testing.assert_allclose(sq.extra["A"], np.pi * (grid**4 - 1) / 4, rtol=1e-9)
    assert sq.passed
    zero = V.calculus_lemma_check(V.CALCULUS_DENSITIES["zero"], plane, g, 0.5, 1.0, grid)
    assert zero.passed and zero.extra["vacuous"]


def test_calculus_lemma_rejects_negative(plane):
    with pytest.raises(ConfigError):
        V.calculus_lemma_check(lambda w: np.real(w), plane, V.GammaWeight(), 0.5, 1.0, [2, 3])


def test_calculus_lemma_pullback_density(plane, identity_map):
    k = V.pullback_density_over_volume(identity_map, plane)
    grid = np.linspace(1.5, 10, 12)
    v = V.calculus_lemma_check(k, plane, V.GammaWeight(), 0.5, 1.0, grid)
    # A_k is then the characteristic of the identity map
    np.testing.assert_allclose(v.extra["A"], 0.5 * np.log((1 + grid**2) / 2), atol=1e-9)


@pytest.mark.parametrize("h,logv,lo,hi", [
    (np.log, False, 1.01, 100.0),
    (lambda r: r, False, 0.5, 100.0),
    (np.exp, True, 0.1, 30.0),
])
def test_borel_examples(h, logv, lo, hi):
    v = V.borel_growth_check(h, V.GammaWeight(), 1.0, lo, hi, log_values=logv)
    assert v.passed and math.isfinite(v.gamma_measure)
    if v.violations:
        assert max(v.violations) < 10


def test_borel_log_violation_interval():
    # 1/r <= (log r)^2 fails exactly below the root of r (log r)^2 = 1
    v = V.borel_growth_check(np.log, V.GammaWeight(), 1.0, 1.01, 100.0, n=20000)
    from scipy.optimize import brentq

    root = brentq(lambda r: r * math.log(r) ** 2 - 1, 1.5, 3.0)
    assert max(v.violations) == pytest.approx(root, abs=1e-2)
    assert v.gamma_measure == pytest.approx(root - 1.01, abs=1e-2)
    assert v.extra["consistent"]


def test_borel_rejects_decreasing():
    with pytest.raises(ConfigError):
        V.borel_growth_check(lambda r: 1 / r, V.GammaWeight(), 1.0, 1.0, 2.0)


@given(st.floats(0.05, 2.0))
def test_borel_linear_never_violates_beyond_one(delta):
    v = V.borel_growth_check(lambda r: r, V.GammaWeight(), delta, 1.0, 50.0, n=500)
    assert not v.violations


def test_verdicts_are_deterministic(exp_rows, plane):
    a = V.smt_from_rows(exp_rows, [0, "inf", 1], plane, V.GammaWeight(), 0.1).to_json()
    b = V.smt_from_rows(exp_rows, [0, "inf", 1], plane, V.GammaWeight(), 0.1).to_json()
    assert a == b
