import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate

from stablefi import (GridTooCoarse, InvalidParam, assemble, local_poincare_constant,
                      semigroup_decay, spectral_gap, super_poincare_probe)
from stablefi.criteria import RateCurve, build_profile, rate_curve
from stablefi.sharpness import make_reference
from stablefi.spectral import (assemble_on_edges, bottom_eigenvalue, default_edges,
                               default_window, hermite_type, probe_family, psi2_bound,
                               split_probe, two_cell_gap)

from conftest import measure_of

R_GRID = np.geomspace(1e-3, 1.0, 13)


@pytest.fixture(scope="module")
def form40(poly2):
    return assemble(poly2, 1.0, 40.0, 512)


# -- assembly invariants --------------------------------------------------------------

@pytest.mark.parametrize("alpha", [0.5, 1.0, 1.5])
def test_form_invariants(poly2, alpha):
    form = assemble(poly2, alpha, 30.0, 128)
    assert form.quadratic_form(np.ones(form.n)) == 0.0
    assert np.array_equal(form.kernel_w, form.kernel_w.T)
    assert np.all(form.kernel_w >= 0) and np.all(form.mu_w > 0)
    assert form.mu_w.sum() == pytest.approx(1.0 - poly2.tail_mass(30.0), rel=1e-9)
    S = form.stiffness()
    assert np.array_equal(S, S.T)
    assert np.allclose(S.sum(axis=1), 0.0, atol=1e-12 * np.abs(S).max())


def test_detailed_balance(form40):
    A = form40.generator()
    flux = form40.mu_w[:, None] * A
    assert np.max(np.abs(flux - flux.T)) <= 1e-12 * np.abs(flux).max()


@settings(max_examples=20, deadline=None)
@given(seed=st.integers(0, 2 ** 32 - 1))
def test_quadratic_form_matches_stiffness(seed):
    form = assemble(measure_of("poly_tail", 2.0), 1.0, 20.0, 64)
    f = np.random.default_rng(seed).standard_normal(form.n)
    assert form.quadratic_form(f) == pytest.approx(f @ form.stiffness() @ f, rel=1e-10)


def test_default_grid():
    e = default_edges(40.0, 256)
    assert e.size == 257 and e[0] == -40.0 and e[-1] == 40.0
    assert np.allclose(e, -e[::-1])
    w = np.diff(e)
    assert np.all(w[1:] / w[:-1] < 1.5) and np.all(w[:-1] / w[1:] < 1.5)


def test_default_window(poly2):
    R = default_window(poly2)
    assert poly2.tail_mass(R) < 1e-3 <= poly2.tail_mass(0.98 * R)


def test_assembly_errors(poly2):
    with pytest.raises(InvalidParam):
        assemble(poly2, 1.0, 40.0, 8)
    with pytest.raises(InvalidParam):
        assemble(poly2, 1.0, -1.0, 64)
    with pytest.raises(GridTooCoarse):
        assemble(measure_of("poly_tail", 0.5), 1.0, 400.0, 256)


# -- spectra ------------------------------------------------------------------------------

@pytest.mark.parametrize("alpha", [0.5, 1.0, 1.5])
@pytest.mark.parametrize("edges", [(-1.0, 0.0, 1.0), (-1.0, 0.0, 2.0), (-0.5, 0.25, 3.0)])
def test_two_cell_gap(poly2, alpha, edges):
    # hand formula: moment-matched rate into the other cell plus the in-cell term,
    # both divided by the squared node distance
    a, m, b = edges
    x1, x2 = 0.5 * (a + m), 0.5 * (m + b)
    d2 = (x2 - x1) ** 2
    p = 2.0 - alpha
    k12 = (((b - x1) ** p - (m - x1) ** p) / p + 2 * (0.5 * (m - a)) ** p / p) / d2
    k21 = (((x2 - a) ** p - (x2 - m) ** p) / p + 2 * (0.5 * (b - m)) ** p / p) / d2
    mu1 = integrate.quad(poly2.density, a, m, epsabs=0, epsrel=1e-13)[0]
    mu2 = integrate.quad(poly2.density, m, b, epsabs=0, epsrel=1e-13)[0]
    form = assemble_on_edges(poly2, alpha, edges, check=False)
    assert spectral_gap(form).lambda1 == pytest.approx(two_cell_gap(mu1, mu2, k12, k21),
                                                       rel=1e-10)


def test_gap_eigenvector_contract(form40):
    gap = spectral_gap(form40)
    assert gap.lambda1 > 0
    assert abs(np.dot(form40.mu_w, gap.eigvec)) < 1e-10
    assert form40.norm2(gap.eigvec) == pytest.approx(1.0, rel=1e-12)
    assert gap.rayleigh == pytest.approx(gap.lambda1, rel=1e-10)


def test_rayleigh_quotients_bound_gap(form40):
    lam = spectral_gap(form40).lambda1
    rng = np.random.default_rng(7)
    rq = []
    for _ in range(50):
        v = form40.center(rng.standard_normal(form40.n))
        rq.append(form40.quadratic_form(v) / form40.norm2(v))
    assert min(rq) >= lam - 1e-8


def test_killed_spectrum_dominates_censored(poly2):
    # the extra diagonal is nonnegative, so every eigenvalue moves up (min-max);
    # the bottom of the killed spectrum is only compared with the censored bottom 0
    fc = assemble(poly2, 1.0, 20.0, 128)
    fk = assemble(poly2, 1.0, 20.0, 128, "killed")
    s = np.sqrt(fc.mu_w)
    lc = np.linalg.eigvalsh(fc.stiffness() / np.outer(s, s))
    lk = np.linalg.eigvalsh(fk.stiffness() / np.outer(s, s))
    assert np.all(lk >= lc - 1e-10 * lc[-1])
    assert bottom_eigenvalue(fk) > 0
    assert fk.quadratic_form(np.ones(fk.n)) > 0
    with pytest.raises(InvalidParam):
        spectral_gap(fk)


def test_gap_grid_convergence(poly2):
    lam = [spectral_gap(assemble(poly2, 1.0, 40.0, n)).lambda1 for n in (256, 512)]
    assert abs(lam[1] - lam[0]) < 0.02 * lam[1]


def test_gap_stable_in_window(poly2, form40):
    a = spectral_gap(form40).lambda1
    b = spectral_gap(assemble(poly2, 1.0, 60.0, 512)).lambda1
    assert abs(a - b) < 0.05 * a


def test_gap_closes_without_poincare():
    # eps < alpha: the window gap shrinks like R^(eps - alpha)
    m = measure_of("poly_tail", 0.5)
    R = np.array([25.0, 50.0, 100.0, 200.0])
    lam = [spectral_gap(assemble(m, 1.0, x, 256)).lambda1 for x in R]
    slope = np.polyfit(np.log(R), np.log(lam), 1)[0]
    assert slope == pytest.approx(-0.5, rel=0.2)


# -- local Poincare constant ------------------------------------------------------------

@pytest.mark.parametrize("family,eps,alpha", [("poly_tail", 2.0, None),
                                              ("poly_log_tail", 1.0, 1.0)])
@pytest.mark.parametrize("r", [1.0, 5.0, 20.0])
def test_local_constant_below_psi2(family, eps, alpha, r):
    m = measure_of(family, eps, alpha)
    assert local_poincare_constant(m, 1.0, r, 256) <= 1.05 * psi2_bound(m, 1.0, r)


def test_local_constant_small_ball_scaling(poly2):
    r = np.geomspace(0.01, 0.1, 5)
    c = [local_poincare_constant(poly2, 1.0, x, 128) for x in r]
    assert np.polyfit(np.log(r), np.log(c), 1)[0] == pytest.approx(1.0, abs=0.15)


@pytest.mark.parametrize("family,eps,alpha", [("poly_tail", 2.0, None),
                                              ("poly_log_tail", 1.0, 1.0)])
def test_local_constant_not_monotone(family, eps, alpha):
    # the censored form on a larger ball gains jumps as well as mass, and for these
    # measures the best constant peaks near r = 3 before settling
    m = measure_of(family, eps, alpha)
    c = {r: local_poincare_constant(m, 1.0, r, 256) for r in (1.0, 3.0, 20.0)}
    assert c[1.0] < c[3.0]
    assert c[20.0] < c[3.0]


# -- semigroup decay -------------------------------------------------------------------------

def test_decay_curve(form40):
    f0 = form40.center(form40.nodes / np.sqrt(1 + form40.nodes ** 2))
    times = np.linspace(0.0, 2.0, 21)
    curve = semigroup_decay(form40, f0, times)
    assert curve.variance[0] == pytest.approx(form40.norm2(f0), rel=1e-10)
    assert np.all(np.diff(curve.variance) <= 0)
    logv = np.log(curve.variance)
    assert np.all(np.diff(logv, 2) >= -1e-9)
    assert curve.rate == pytest.approx(spectral_gap(form40).lambda1, rel=0.05)


def test_decay_of_eigenvector_is_exact(form40):
    gap = spectral_gap(form40)
    curve = semigroup_decay(form40, gap.eigvec, [0.0, 0.1, 0.3])
    assert np.allclose(curve.variance, np.exp(-2 * gap.lambda1 * curve.times), rtol=1e-9)


def test_decay_bounded_by_gap():
    # on a window every mean-zero start decays at least like exp(-2 lambda1 t),
    # so slow decay for eps < alpha shows only through lambda1(R) -> 0
    m = measure_of("poly_tail", 0.5)
    form = assemble(m, 1.0, 200.0, 256)
    lam = spectral_gap(form).lambda1
    f0 = form.center(form.sample(make_reference(16)))
    t = np.array([0.0, 1.0, 10.0, 100.0])
    var = semigroup_decay(form, f0, t).variance
    assert np.all(var <= np.exp(-2 * lam * t) * var[0] * (1 + 1e-9))


def test_decay_arguments(form40):
    with pytest.raises(InvalidParam):
        semigroup_decay(form40, np.ones(form40.n), [0.0, 1.0])
    f0 = form40.center(form40.nodes)
    with pytest.raises(InvalidParam):
        semigroup_decay(form40, f0, [1.0, 0.5])


# -- super-Poincare probe ------------------------------------------------------------------

@pytest.fixture(scope="module")
def t11_curve(poly2):
    return rate_curve(build_profile(poly2, 1.0), "super_t11", R_GRID)


def test_probe_held_out(form40, t11_curve):
    rep = split_probe(form40, t11_curve, probe_family(), R_GRID)
    assert rep.ok
    assert rep.checks == 6 * R_GRID.size


def test_probe_monotone_in_rate(form40, t11_curve):
    fam = probe_family()
    for scale in (1e-12, 1e-6, 1.0):
        base = super_poincare_probe(form40, t11_curve, fam, R_GRID, scale)
        more = super_poincare_probe(form40, t11_curve, fam, R_GRID, 10 * scale)
        assert len(more.violations) <= len(base.violations)
        if base.ok:
            assert more.ok


def test_probe_catches_reference_functions():
    # eps = alpha: no polynomially bounded rate survives the g_n family
    m = measure_of("poly_tail", 1.0)
    form = assemble(m, 1.0, 400.0, 512)
    fam = [make_reference(n) for n in (4, 8, 16, 32, 64)]
    for k in (0.5, 1.0, 2.0):
        beta = RateCurve("poly", R_GRID, np.log1p(R_GRID ** -k))
        rep = super_poincare_probe(form, beta, fam, R_GRID)
        assert any(v.name == "g_64" for v in rep.violations)


def test_probe_needs_family(form40, t11_curve):
    with pytest.raises(InvalidParam):
        super_poincare_probe(form40, t11_curve, [], R_GRID)


def test_probe_family():
    fam = probe_family()
    assert len(fam) == 12 and len({f.name for f in fam}) == 12


@settings(max_examples=40, deadline=None)
@given(k=st.integers(0, 5), x=st.floats(-6, 6))
def test_hermite_derivatives(k, x):
    f = hermite_type(k, 1.5, 0.5)
    h = 1e-5
    fd1 = (f(x + h) - f(x - h)) / (2 * h)
    fd2 = (f.df(np.array(x + h)) - f.df(np.array(x - h))) / (2 * h)
    assert abs(f.df(np.array(x)) - fd1) < 1e-6 * (1 + abs(fd1))
    assert abs(f.d2f(np.array(x)) - fd2) < 1e-6 * (1 + abs(fd2))
