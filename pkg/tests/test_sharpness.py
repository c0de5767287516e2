import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from stablefi import (InvalidParam, make_reference, poincare_disproof, sp_sharpness_cor13,
                      sup_carre, wp_sharpness)
from stablefi.criteria import build_profile, closed_form_log, rate_curve
from stablefi.nonlocal_form import carre_values
from stablefi.sharpness import (lifted_reference, log_sobolev_probe, log_sobolev_statistic,
                                reference_moments)

from conftest import measure_of

NS = np.array([4.0, 8.0, 16.0, 32.0, 64.0])


# -- reference functions --------------------------------------------------------------

def test_reference_pieces():
    g = make_reference(4)
    assert g(3.0) == 0.0 and g(-3.0) == 0.0
    assert g(9.0) == 1.0 and g(-9.0) == 1.0
    assert g(6.0) == pytest.approx(0.5, abs=1e-12)
    x = np.concatenate([np.linspace(-4, 4, 41), np.linspace(8, 30, 41)])
    assert np.allclose(g(x), (np.abs(x) >= 8).astype(float), atol=1e-12, rtol=0)


@pytest.mark.parametrize("n", [1, 4, 17, 64])
def test_reference_slope(n):
    g = make_reference(n)
    x = np.linspace(0, 3 * n, 30001)
    d = np.abs(g.df(x))
    assert d.max() == pytest.approx(15 / (8 * n), rel=1e-6)
    assert abs(g.df(np.array(1.5 * n))) == pytest.approx(15 / (8 * n), rel=1e-12)
    assert d.max() <= 2 / n


def test_reference_order():
    x = np.linspace(-300, 300, 6001)
    vals = {n: make_reference(n)(x) for n in (1, 2, 4, 8, 16, 32, 64)}
    for n, v in vals.items():
        assert np.all((0 <= v) & (v <= 1))
        right = v[x >= 0]
        assert np.all(np.diff(right) >= 0)
    for n in vals:
        for m in vals:
            if m >= n:
                assert np.all(vals[m] <= vals[n] + 1e-15)


def test_reference_needs_n_at_least_one():
    with pytest.raises(InvalidParam):
        make_reference(0.5)


@settings(max_examples=40, deadline=None)
@given(n=st.sampled_from([2, 4, 8, 16, 32, 64]), u=st.floats(0.0, 3.0),
       alpha=st.sampled_from([0.5, 1.0, 1.5]))
def test_carre_dilation(n, u, alpha):
    # Gamma(g_n)(x) = n^-alpha Gamma(g_1)(x / n)
    a, ea = carre_values(make_reference(n), [n * u], alpha)
    b, eb = carre_values(make_reference(1), [u], alpha)
    assert abs(a[0] - n ** -alpha * b[0]) <= 3 * (ea[0] + n ** -alpha * eb[0]) + 1e-12 * b[0]


@pytest.mark.parametrize("alpha", [0.5, 1.0, 1.5])
def test_sup_carre_scaled_bounded(alpha):
    s = [n ** alpha * sup_carre(n, alpha) for n in (4, 8, 16)]
    assert all(x > 0 for x in s)
    assert max(s) / min(s) < 1 + 1e-9


# -- moments and the Poincare disproof ----------------------------------------------------

def test_moment_slopes():
    m = measure_of("poly_tail", 0.5)
    mom = [reference_moments(m, 1.0, n, with_energy=False) for n in NS]
    s2 = np.polyfit(np.log(NS), np.log([x.second.value for x in mom]), 1)[0]
    s1 = np.polyfit(np.log(NS), np.log([x.first.value ** 2 for x in mom]), 1)[0]
    assert s2 == pytest.approx(-0.5, abs=0.1)
    assert s1 == pytest.approx(-1.0, abs=0.1)


def test_reference_variance_positive():
    assert reference_moments(measure_of("poly_tail", 0.5), 1.0, 1, False).variance > 0


def test_disproof_without_poincare():
    rep = poincare_disproof(measure_of("poly_tail", 0.5), 1.0, (4, 8, 16))
    assert rep.decays
    assert rep.slope == pytest.approx(-0.5, abs=0.15)
    assert np.all(np.diff(rep.ratio) < 0)


def test_disproof_with_poincare():
    rep = poincare_disproof(measure_of("poly_tail", 2.0), 1.0, (4, 8, 16))
    assert not rep.decays
    assert rep.ratio.min() > 0.1 * rep.ratio.max()


# -- sharpness functionals ------------------------------------------------------------

@pytest.fixture(scope="module")
def polylog1():
    return measure_of("poly_log_tail", 1.0, 1.0)


@pytest.fixture(scope="module")
def cor13_constants(polylog1):
    return sp_sharpness_cor13(polylog1, 1.0, lambda r: 1.0).constants


def certified(r):
    return closed_form_log("polylog_super", r, eps=1.0, alpha=1.0)


def test_certified_rate_not_flagged(polylog1, cor13_constants):
    rep = sp_sharpness_cor13(polylog1, 1.0, certified, constants=cor13_constants)
    assert not rep.flagged
    assert rep.running_liminf[-1] > 0.5 * rep.functional[2]
    assert cor13_constants["c1"] > 0 and cor13_constants["c"] > 0


def test_half_rate_flagged(polylog1, cor13_constants):
    rep = sp_sharpness_cor13(polylog1, 1.0, lambda r: r ** -0.5, constants=cor13_constants)
    assert rep.flagged
    # the functional is r_n^{1/2}, so the trend against log log n is exactly -1/2
    assert rep.trend == pytest.approx(-0.5, abs=1e-9)


@pytest.mark.parametrize("beta", [certified, lambda r: r ** -0.5])
def test_constant_factor_keeps_flag(polylog1, cor13_constants, beta):
    a = sp_sharpness_cor13(polylog1, 1.0, beta, constants=cor13_constants)
    b = sp_sharpness_cor13(polylog1, 1.0, lambda r: beta(r) + math.log(100.0),
                           constants=cor13_constants)
    assert a.flagged == b.flagged


def test_running_liminf_is_cumulative_min(polylog1, cor13_constants):
    rep = sp_sharpness_cor13(polylog1, 1.0, lambda r: r ** -0.5, constants=cor13_constants)
    assert np.array_equal(rep.running_liminf, np.minimum.accumulate(rep.functional))


def test_cor13_needs_positive_log_perturbation():
    with pytest.raises(InvalidParam):
        sp_sharpness_cor13(measure_of("poly_tail", 2.0), 1.0, certified)
    with pytest.raises(InvalidParam):
        sp_sharpness_cor13(measure_of("poly_log_tail", -0.5, 1.0), 1.0, certified)


@pytest.mark.parametrize("family,eps", [("poly_tail", 0.5), ("heavy_log_tail", 2.0)])
def test_weak_engine_rate_not_flagged(family, eps):
    m = measure_of(family, eps)
    curve = rate_curve(build_profile(m, 1.0), "weak_t11", np.geomspace(1e-3, 1.0, 25))
    rep = wp_sharpness(m, 1.0, curve)
    assert not rep.flagged
    assert rep.running_liminf[-1] > 0


def test_constant_weak_rate_flagged():
    rep = wp_sharpness(measure_of("poly_tail", 0.5), 1.0, lambda r: 0.0)
    assert rep.flagged
    assert np.all(np.diff(rep.functional) < 0)


def test_weak_functional_mismatch():
    m = measure_of("poly_tail", 0.5)
    with pytest.raises(InvalidParam):
        wp_sharpness(m, 1.0, lambda r: 0.0, rate_functional="heavy_log_tail")
    with pytest.raises(InvalidParam):
        wp_sharpness(m, 1.0, lambda r: 0.0, rate_functional="no_such")
    with pytest.raises(InvalidParam):
        wp_sharpness(measure_of("poly_tail", 2.0), 1.0, lambda r: 0.0)


def test_rate_curve_outside_range_rejected():
    m = measure_of("poly_tail", 0.5)
    curve = rate_curve(build_profile(m, 1.0), "weak_t11", np.geomspace(1e-5, 1e-2, 7))
    with pytest.raises(InvalidParam):
        wp_sharpness(m, 1.0, curve)


# -- log-Sobolev probe ----------------------------------------------------------------

@pytest.mark.parametrize("eps,grows", [(0.5, True), (2.0, False)])
def test_log_sobolev_trend(eps, grows):
    m = measure_of("poly_log_tail", eps, 1.0)
    stat = [log_sobolev_statistic(m, 1.0, lifted_reference(m, n)) for n in (4, 16, 64)]
    assert all(s > 0 for s in stat)
    assert (np.all(np.diff(stat) > 0)) == grows


def test_log_sobolev_probe_is_max():
    m = measure_of("poly_log_tail", 0.5, 1.0)
    fam = [lifted_reference(m, n) for n in (4, 8)]
    assert log_sobolev_probe(m, 1.0, fam) == max(log_sobolev_statistic(m, 1.0, f) for f in fam)
    with pytest.raises(InvalidParam):
        log_sobolev_probe(m, 1.0, [])
