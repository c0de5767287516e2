import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from stablefi import (InvalidParam, Potential, SmoothnessViolation, TestFunction, bump,
                      canonical_test_functions, carre, dirichlet_form, drift_functional,
                      generator, lyapunov_check, pairing)
from stablefi.nonlocal_form import (carre_values, check_smoothness, constant, gaussian,
                                    generator_values, lyapunov_function, poly_decay, smooth_ramp)

from conftest import measure_of

# Frozen oracles for bump(0, 1) at x = 0.3, computed in mpmath at 60 digits.
# The folded integrand h(z) + h(-z) was expanded in a Taylor series and
# integrated term by term on [0, 1e-3]; beyond that, mp.quad with breakpoints
# at the kinks of the bump.
CARRE_ORACLE = {0.5: 3.5577869807066600, 1.0: 3.5101534199134199, 1.5: 6.9845461656664389}
# same bump, potential log(1 + x^2) (poly tail, eps = 2)
GENERATOR_ORACLE = {0.5: -5.2117770093649566, 1.0: -4.7915884692775372,
                    1.5: -7.7369795753356779}


@pytest.mark.parametrize("alpha", sorted(CARRE_ORACLE))
def test_carre_against_oracle(alpha):
    q = carre(bump(0.0, 1.0), 0.3, alpha)
    assert q.value == pytest.approx(CARRE_ORACLE[alpha], rel=1e-9)
    # the reported error must bound the true one
    assert abs(q.value - CARRE_ORACLE[alpha]) <= q.est_error + 1e-14 * abs(q.value)


@pytest.mark.parametrize("alpha", sorted(GENERATOR_ORACLE))
def test_generator_against_oracle(alpha):
    q = generator(bump(0.0, 1.0), Potential.poly_tail(2.0), 0.3, alpha)
    want = GENERATOR_ORACLE[alpha]
    assert abs(q.value - want) <= max(3 * q.est_error, 1e-9 * abs(want))


@pytest.mark.parametrize("alpha", [0.5, 1.0, 1.5])
def test_constants_are_annihilated(alpha):
    c = constant(3.0)
    xs = np.array([-40.0, -1.0, 0.0, 0.7, 25.0])
    assert np.all(carre_values(c, xs, alpha)[0] == 0.0)
    lv, _ = generator_values(c, Potential.poly_tail(2.0), xs, alpha)
    assert np.all(lv == 0.0)


def test_carre_self_convergence():
    # a ramp with a C^2 join; the default tolerance must agree with a much tighter run
    f = smooth_ramp(1.0)
    xs = np.array([-3.0, -1.0, 0.0, 0.4, 1.0, 6.0])
    coarse, err = carre_values(f, xs, 1.0)
    fine, _ = carre_values(f, xs, 1.0, rtol=1e-13)
    assert np.all(coarse > 0)
    assert np.allclose(coarse, fine, rtol=1e-9)
    assert np.all(err < 1e-8 * coarse)


@pytest.mark.parametrize("alpha", [0.5, 1.0, 1.5])
def test_carre_far_from_smooth_bump(alpha):
    # (1 + y^2)^-1 has no breakpoints; far out Gamma(x) |x|^{1+alpha} -> int f^2 = pi/2,
    # with corrections of relative order x^-2
    f = poly_decay(1.0)
    xs = np.array([1e4, -1e6, 1e8])
    v, e = carre_values(f, xs, alpha)
    assert np.allclose(v * np.abs(xs) ** (1 + alpha), math.pi / 2, rtol=1e-6, atol=0)
    assert np.all(e < 1e-8 * v)


@pytest.mark.parametrize("alpha", [0.5, 1.0, 1.5])
def test_generator_independent_of_cutoff(alpha):
    V = Potential.poly_tail(2.0)
    xs = np.array([-7.0, -0.2, 0.3, 2.5, 30.0])
    for f in (bump(0.0, 1.0), gaussian(1.0, 2.0)):
        a, ea = generator_values(f, V, xs, alpha, cutoff=1.0)
        b, eb = generator_values(f, V, xs, alpha, cutoff=2.0)
        assert np.all(np.abs(a - b) <= 3 * (ea + eb) + 1e-9 * np.abs(a))


def test_generator_far_from_support():
    # outside the support only jumps into it contribute, and f(x) = 0 there
    f = bump(0.0, 1.0)
    lv, _ = generator_values(f, Potential.poly_tail(2.0), [50.0], 1.0)
    assert lv[0] > 0


# -- the Dirichlet form ------------------------------------------------------------

def test_form_symmetric(poly2):
    f, g = bump(0.0, 1.0), bump(0.5, 2.0)
    a = dirichlet_form(f, g, poly2, 1.0)
    b = dirichlet_form(g, f, poly2, 1.0)
    assert a.value == pytest.approx(b.value, rel=1e-12)


def test_form_bilinear(poly2):
    f, g, h = bump(0.0, 1.0), bump(0.5, 2.0), gaussian(0.0, 1.0)
    fg = f.combine(g, 2.0, -3.0)
    lhs = dirichlet_form(fg, h, poly2, 1.0)
    rhs = (2.0 * dirichlet_form(f, h, poly2, 1.0).value
           - 3.0 * dirichlet_form(g, h, poly2, 1.0).value)
    assert lhs.value == pytest.approx(rhs, rel=1e-8)


@pytest.mark.parametrize("f", canonical_test_functions()[:5], ids=lambda f: f.name)
def test_form_positive(poly2, f):
    q = dirichlet_form(f, f, poly2, 1.0)
    assert q.value > 0 and q.est_error < 1e-6 * q.value


def test_form_of_constant_vanishes(poly2):
    assert dirichlet_form(constant(2.0), constant(2.0), poly2, 1.0).value == 0.0


@pytest.mark.parametrize("alpha", [0.5, 1.0])
def test_pairing_matches_form(poly2, alpha):
    f, g = bump(0.0, 1.0), bump(0.5, 2.0)
    a = pairing(f, g, poly2, alpha)
    b = dirichlet_form(f, g, poly2, alpha)
    assert a.value == pytest.approx(b.value, rel=1e-7)


def test_drift_functional_below_form(poly2):
    f = bump(0.0, 2.0)
    phi = lyapunov_function(0.25)
    assert drift_functional(f, phi, poly2, 1.0).value <= dirichlet_form(f, f, poly2, 1.0).value


# -- test function contracts --------------------------------------------------------

def test_growth_is_checked_against_alpha():
    phi = lyapunov_function(0.5)
    phi.check_growth(1.0)
    with pytest.raises(InvalidParam):
        phi.check_growth(0.3)
    with pytest.raises(InvalidParam):
        carre_values(phi, [0.0], 0.5)  # f^2 grows like |x|, not integrable against |z|^-1.5
    with pytest.raises(InvalidParam):
        generator_values(poly_decay(1.0), Potential.poly_tail(2.0), [0.0], 2.0)


def test_support_must_be_honest():
    with pytest.raises(InvalidParam):
        TestFunction(np.sin, np.cos, support=(-1.0, 1.0), name="sin")
    with pytest.raises(InvalidParam):
        bump(0.0, 0.0)


def test_canonical_functions():
    fs = canonical_test_functions()
    assert len(fs) == 10
    assert len({f.name for f in fs}) == 10
    assert all(f.growth[1] == 0 for f in fs)


@settings(max_examples=60, deadline=None)
@given(x=st.floats(-20, 20))
def test_test_function_derivatives(x):
    h = 1e-6
    for f in canonical_test_functions():
        fd = (f(x + h) - f(x - h)) / (2 * h)
        assert abs(f.df(np.array(x)) - fd) < 1e-5 * (1 + abs(fd))


# -- smoothness and the Lyapunov drift ------------------------------------------------

@pytest.mark.parametrize("family,eps,alpha", [("poly_tail", 2.0, None), ("poly_log_tail", 1.0, 1.0),
                                              ("stretched_log", 0.5, None),
                                              ("sub_gaussian", 1.0, None)])
def test_built_in_potentials_are_smooth(family, eps, alpha):
    check_smoothness(measure_of(family, eps, alpha).potential)


def test_cusp_potential_rejected():
    with pytest.raises(SmoothnessViolation):
        check_smoothness(Potential.custom("1e4*sqrt(|x|)"))


@pytest.mark.parametrize("alpha", [0.5, 1.0, 1.5])
def test_lyapunov_generator_negative_far_out(alpha):
    V = Potential.poly_tail(alpha)
    phi = lyapunov_function(0.5 * min(1.0, alpha))
    lv, _ = generator_values(phi, V, np.array([-150.0, -60.0, 40.0, 120.0]), alpha)
    assert np.all(lv < 0)


def test_lyapunov_check_report(poly2):
    rep = lyapunov_check(poly2.potential, 1.0)
    assert rep.success
    assert rep.alpha0 == 0.5
    far = np.abs(rep.x) >= 20
    assert np.all(rep.ratio[far] >= 0.01)
    assert math.isfinite(rep.r0_empirical) and rep.r0_empirical <= 20
    assert len(rep.rows()) == rep.x.size


def test_lyapunov_check_arguments(poly2):
    with pytest.raises(InvalidParam):
        lyapunov_check(poly2.potential, 1.0, alpha0=1.0)
    with pytest.raises(InvalidParam):
        lyapunov_check(poly2.potential, 2.5)
