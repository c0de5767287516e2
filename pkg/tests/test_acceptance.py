"""The twelve acceptance criteria at their stated tolerances.

Each test records one ``criterion N: PASS|FAIL`` line; the lines are printed
together at the end of the pytest run (see ``conftest.py``).  Run alone with
``pytest tests/test_acceptance.py -v`` or ``python tests/test_acceptance.py``.
"""
import json
import math
import sys

import numpy as np
import pytest

from stablefi import (CriterionInapplicable, bump, canonical_test_functions, dirichlet_form,
                      drift_functional, lyapunov_check, pairing, poincare_disproof,
                      sp_sharpness_cor13, sup_carre)
from stablefi.cli import main
from stablefi.criteria import (build_profile, closed_form_curve, closed_form_log,
                               default_r_grid, log_beta_super_t11, rate_curve)
from stablefi.nonlocal_form import default_alpha0, lyapunov_function
from stablefi.sharpness import DEFAULT_N_VALUES
from stablefi.spectral import (assemble, local_poincare_constant, psi2_bound, semigroup_decay,
                               spectral_gap)

from conftest import measure_of

RESULTS: dict[int, str] = {}
_PARTS: dict[int, list] = {}
R_WINDOW = default_r_grid()  # 13 points on [1e-5, 1e-2]


def verdict(number: int, ok: bool, detail: str):
    """Record one criterion (or one part of a parametrized one) and assert it."""
    parts = _PARTS.setdefault(number, [])
    parts.append((bool(ok), detail))
    passed = all(p[0] for p in parts)
    line = (f"criterion {number:>2}: {'PASS' if passed else 'FAIL'}  "
            + "; ".join(p[1] for p in parts))
    RESULTS[number] = line
    print(line)
    assert ok, line


def profile(family, eps, alpha=1.0):
    fam_alpha = alpha if family == "poly_log_tail" else None
    return build_profile(measure_of(family, eps, fam_alpha), alpha)


# 1 ------------------------------------------------------------------------------------

PAIRS = [(bump(0.0, 1.0), bump(0.5, 2.0)), (bump(0.0, 1.0), bump(0.0, 1.0)),
         (bump(-1.0, 2.0), bump(2.0, 1.5)), (bump(0.0, 3.0), bump(1.0, 0.5)),
         (bump(3.0, 1.0), bump(-2.0, 4.0))]


def test_criterion_01_symmetry_identity():
    m = measure_of("poly_tail", 2.0)
    worst_rel, worst_err = 0.0, 0.0
    ok = True
    for alpha in (0.5, 1.0, 1.5):
        for f, g in PAIRS:
            p = pairing(f, g, m, alpha)
            e = dirichlet_form(f, g, m, alpha)
            diff = abs(p.value - e.value)
            tol = 3 * (p.est_error + e.est_error)
            rel = diff / max(abs(e.value), 1e-300)
            ok &= diff <= tol and rel <= 1e-5
            worst_rel = max(worst_rel, rel)
            worst_err = max(worst_err, diff / tol if tol > 0 else math.inf)
    verdict(1, ok, f"max rel diff {worst_rel:.2e}, max diff / 3 est_error {worst_err:.2f}")


# 2 ------------------------------------------------------------------------------------

@pytest.mark.parametrize("family,eps", [("poly_tail", 1.0), ("stretched_log", 0.5)])
def test_criterion_02_lyapunov_drift(family, eps):
    m = measure_of(family, eps)
    x = np.concatenate([-np.geomspace(200, 0.1, 40), [0.0], np.geomspace(0.1, 200, 40)])
    rep = lyapunov_check(m.potential, 1.0, x_grid=x, profile=build_profile(m, 1.0))
    far = (np.abs(rep.x) >= 20) & (np.abs(rep.x) <= 200)
    inner = np.abs(rep.x) <= 20
    min_far = float(rep.ratio[far].min())
    sup_in = float(np.max(np.abs(rep.L_phi[inner])))
    ok = min_far >= 0.01 and math.isfinite(sup_in)
    verdict(2, ok, f"{family}({eps:g}): min ratio on [20,200] {min_far:.4f}, "
                   f"sup inner |L phi| {sup_in:.4f}")


# 3 ------------------------------------------------------------------------------------

def test_criterion_03_reference_carre_slope():
    ns = np.array(DEFAULT_N_VALUES, dtype=float)
    slopes = {}
    for alpha in (0.5, 1.0, 1.5):
        s = [sup_carre(n, alpha) for n in ns]
        slopes[alpha] = float(np.polyfit(np.log(ns), np.log(s), 1)[0])
    ok = all(abs(s + a) <= 0.1 for a, s in slopes.items())
    verdict(3, ok, ", ".join(f"alpha={a:g}: {s:.4f}" for a, s in slopes.items()))


# 4 ------------------------------------------------------------------------------------

def test_criterion_04_poincare_dichotomy():
    fail = poincare_disproof(measure_of("poly_tail", 0.5), 1.0, DEFAULT_N_VALUES)
    hold = poincare_disproof(measure_of("poly_tail", 2.0), 1.0, DEFAULT_N_VALUES)
    ok_fail = abs(fail.slope + 0.5) <= 0.15
    ok_hold = hold.variation < 10 and hold.ratio.min() > 0.01
    verdict(4, ok_fail and ok_hold,
            f"eps=0.5 slope {fail.slope:.4f}; eps=2 ratio {hold.ratio.min():.4g}.."
            f"{hold.ratio.max():.4g} varies by {hold.variation:.2f} (limit 10)")


# 5 ------------------------------------------------------------------------------------

def test_criterion_05_super_rate_shape():
    slope = rate_curve(profile("poly_tail", 2.0), "super_t11", R_WINDOW).slope_fit().exponent
    try:
        log_beta_super_t11(profile("poly_tail", 1.0), 1e-3)
        inapplicable = False
    except CriterionInapplicable:
        inapplicable = True
    verdict(5, abs(slope + 10) <= 0.5 and inapplicable,
            f"slope {slope:.4f}; eps=1 inapplicable: {inapplicable}")


# 6 ------------------------------------------------------------------------------------

def _composite_power(curve, g):
    """Coefficient ``a`` of ``log(1/r)`` in ``log beta = a log(1/r) + b g(r) + c``."""
    A = np.stack([np.log(1 / curve.r), g(curve.r), np.ones_like(curve.r)], axis=1)
    return float(np.linalg.lstsq(A, curve.log_values, rcond=None)[0][0])


def test_criterion_06_closed_form_agreement():
    params = {"alpha": 1.0}
    rows, ok = [], True

    # log-perturbed tail, super rate: log beta ~ r^(-1/eps)
    eps = 1.0
    eng = rate_curve(profile("poly_log_tail", eps), "super_t11", R_WINDOW)
    ref = closed_form_curve("polylog_super", dict(params, eps=eps), R_WINDOW)
    a = eng.slope_fit(transform="logloglog").exponent
    b = ref.slope_fit(transform="logloglog").exponent
    rows.append(f"log tail {a:.4f} vs {b:.4f}")
    ok &= abs(a - b) <= 0.1 * abs(b)

    # heavy tail, weak rate: log beta ~ r^(-1/(eps-1))
    eps = 2.0
    eng = rate_curve(profile("heavy_log_tail", eps), "weak_t11", R_WINDOW)
    ref = closed_form_log("heavylog_weak", R_WINDOW, eps=eps, alpha=1.0)
    a = eng.slope_fit(transform="logloglog").exponent
    b = float(np.polyfit(np.log(R_WINDOW), np.log(ref), 1)[0])
    rows.append(f"heavy tail {a:.4f} vs {b:.4f}")
    ok &= abs(a - b) <= 0.1 * abs(b)

    # stretched and sub-Gaussian: power of 1/r in front of the slower factor
    eps = 1.0
    forms = [("stretched_log", "stretched_super",
              lambda r: np.log1p(1 / r) ** (1 / (1 + eps))),
             ("sub_gaussian", "subgauss_super", lambda r: np.log(np.log1p(1 / r)))]
    for family, name, g in forms:
        eng = rate_curve(profile(family, eps), "super_t11", R_WINDOW)
        ref = closed_form_curve(name, dict(params, eps=eps), R_WINDOW)
        a, b = _composite_power(eng, g), _composite_power(ref, g)
        rows.append(f"{family} {a:.4f} vs {b:.4f}")
        ok &= abs(a - b) <= 0.1 * abs(b)
    verdict(6, ok, "; ".join(rows))


# 7 ------------------------------------------------------------------------------------

def test_criterion_07_ef_comparison():
    p = profile("sub_gaussian", 1.0)
    t11 = rate_curve(p, "super_t11", R_WINDOW)
    t51 = rate_curve(p, "super_t51", R_WINDOW)
    ratio = t51.log_values / t11.log_values
    last = R_WINDOW <= 1e-4 * (1 + 1e-12)  # the last decade of r
    monotone = bool(np.all(np.diff(ratio[last]) < 0))  # r increases along the grid
    grows = ratio[0] > ratio[-1] > 1
    try:
        rate_curve(profile("sub_gaussian", 0.25), "super_t51", R_WINDOW)
        inapplicable = False
    except CriterionInapplicable:
        inapplicable = True
    verdict(7, monotone and grows and inapplicable,
            f"ratio {ratio[-1]:.4g} at r=1e-2 -> {ratio[0]:.4g} at r=1e-5, "
            f"monotone on last decade: {monotone}; eps=0.25 inapplicable: {inapplicable}")


# 8 ------------------------------------------------------------------------------------

def test_criterion_08_local_poincare():
    rows, ok = [], True
    for family, eps, fa in (("poly_tail", 2.0, None), ("poly_log_tail", 1.0, 1.0)):
        m = measure_of(family, eps, fa)
        for r in (1.0, 5.0, 20.0):
            c = local_poincare_constant(m, 1.0, r, 512)
            psi = psi2_bound(m, 1.0, r)
            ok &= c <= 1.05 * psi
            rows.append(f"{family} r={r:g}: {c:.4g} <= {psi:.4g}")
    verdict(8, ok, "; ".join(rows))


# 9 ------------------------------------------------------------------------------------

def test_criterion_09_spectral_sanity():
    m = measure_of("poly_tail", 2.0)
    lam = [spectral_gap(assemble(m, 1.0, 40.0, n)).lambda1 for n in (256, 512, 1024)]
    ratio = abs(lam[2] - lam[1]) / abs(lam[1] - lam[0])
    form = assemble(m, 1.0, 40.0, 512)
    f0 = form.center(form.nodes / np.sqrt(1 + form.nodes ** 2))
    decay = semigroup_decay(form, f0, np.linspace(0.0, 2.0, 21))
    lam1 = spectral_gap(form).lambda1
    ok = ratio < 0.6 and abs(decay.rate - lam1) <= 0.05 * lam1
    verdict(9, ok, f"lambda1 {lam[0]:.5f}/{lam[1]:.5f}/{lam[2]:.5f}, ratio {ratio:.3f}; "
                   f"decay rate {decay.rate:.6f} vs {lam1:.6f}")


# 10 -----------------------------------------------------------------------------------

@pytest.mark.parametrize("alpha", [0.5, 1.0, 1.5])
def test_criterion_10_quadratic_form_inequality(alpha):
    m = measure_of("poly_tail", alpha)
    phi = lyapunov_function(default_alpha0(alpha))
    bad = []
    for f in canonical_test_functions():
        lhs = drift_functional(f, phi, m, alpha)
        rhs = dirichlet_form(f, f, m, alpha)
        if lhs.value > rhs.value + lhs.est_error + rhs.est_error:
            bad.append(f.name)
    verdict(10, not bad,
            f"alpha={alpha:g}: {10 - len(bad)}/10" + (f" (violations {bad})" if bad else ""))


# 11 -----------------------------------------------------------------------------------

def test_criterion_11_sharpness_functionals():
    eps = 1.0
    m = measure_of("poly_log_tail", eps, 1.0)
    ns = (4, 8, 16, 32, 64)
    good = sp_sharpness_cor13(m, 1.0, lambda r: closed_form_log("polylog_super", r, eps=eps,
                                                                alpha=1.0), ns)
    half = sp_sharpness_cor13(m, 1.0, lambda r: r ** (-1 / (2 * eps)), ns,
                              constants=good.constants)
    i16, i8 = ns.index(16), ns.index(8)
    ok_a = bool(np.all(good.running_liminf[i16:] > 0.5 * good.functional[i16]))
    share = half.functional[-1] / half.functional[i8]
    ok_b = share < 0.25
    verdict(11, ok_a and ok_b,
            f"certified liminf {good.running_liminf[-1]:.4f} vs half of {good.functional[i16]:.4f}"
            f"; half-rate F(64)/F(8) = {share:.4f} (limit 0.25)")


# 12 -----------------------------------------------------------------------------------

def test_criterion_12_reproducible_report(tmp_path, capsys):
    texts = []
    for name in ("first", "second"):
        out = tmp_path / name
        code = main(["report", "--family", "poly_tail", "--eps", "2", "--alpha", "1",
                     "--seed", "0", "--out", str(out)])
        capsys.readouterr()
        assert code == 0
        texts.append((out / "report.json").read_bytes())
    same = texts[0] == texts[1]
    sha = json.loads(texts[0])["config_sha256"][:12]
    verdict(12, same, f"byte-identical: {same} ({len(texts[0])} bytes, config {sha})")


if __name__ == "__main__":
    sys.exit(pytest.main([__file__, "-q", "-p", "no:cacheprovider"]))
