"""Cut-off reference functions and the disproof and sharpness computations built on them.

``g_n`` vanishes on ``|x| <= n``, equals 1 on ``|x| >= 2n`` and rises by a
quintic smoothstep in between.  Since ``g_n(x) = g_1(x / n)``, its carre du
champ scales exactly: ``Gamma(g_n)(x) = n^{-alpha} Gamma(g_1)(x / n)``.
The constants entering the arguments (mass lower bounds, energy upper
bounds) are measured along the sampled ``n`` rather than assumed.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy import optimize

from .criteria import RateCurve, slope_fit
from .errors import InvalidParam
from .nonlocal_form import TestFunction, carre_values, constant, dirichlet_form, smoothstep
from .potential import Measure
from .quad import QuadResult

DEFAULT_N_VALUES = (4, 8, 16, 32, 64)
# a sharpness functional decaying at least like log(n)^-FLAG_SLOPE is flagged
FLAG_SLOPE = 0.25


def make_reference(n: float) -> TestFunction:
    """``g_n``: 0 on ``|x| <= n``, 1 on ``|x| >= 2n``, quintic smoothstep between."""
    if not n >= 1:
        raise InvalidParam("n must be at least 1")
    n = float(n)

    def f(x):
        r = np.abs(np.asarray(x, dtype=float))
        return smoothstep((r - n) / n)[0]

    def df(x):
        x = np.asarray(x, dtype=float)
        return np.sign(x) * smoothstep((np.abs(x) - n) / n)[1] / n

    def d2f(x):
        r = np.abs(np.asarray(x, dtype=float))
        return smoothstep((r - n) / n)[2] / n ** 2

    return TestFunction(f, df, d2f, (-2 * n, -n, n, 2 * n), (-2 * n, 2 * n), (1.0, 0.0),
                        hess_bound=lambda r: 5.7735 / n ** 2, name=f"g_{n:g}")


def sup_carre(n: float, alpha: float, points: int = 241) -> float:
    """``sup_x Gamma(g_n, g_n)(x)``: grid search on ``[0, 3n]`` then local refinement."""
    g = make_reference(n)
    xs = np.linspace(0.0, 3.0 * n, points)
    vals, _ = carre_values(g, xs, alpha)
    j = int(np.argmax(vals))
    lo, hi = xs[max(j - 1, 0)], xs[min(j + 1, xs.size - 1)]
    res = optimize.minimize_scalar(lambda x: -carre_values(g, [x], alpha)[0][0],
                                   bounds=(lo, hi), method="bounded",
                                   options={"xatol": 1e-6 * n})
    return float(max(vals[j], -res.fun))


@dataclass(frozen=True)
class ReferenceMoments:
    n: float
    second: QuadResult  # mu(g_n^2)
    first: QuadResult  # mu(|g_n|)
    energy: QuadResult  # E(g_n, g_n)

    @property
    def variance(self) -> float:
        return self.second.value - self.first.value ** 2


def reference_moments(measure: Measure, alpha: float, n: float,
                      with_energy: bool = True) -> ReferenceMoments:
    g = make_reference(n)
    br = g.breaks
    m2 = measure.expect(lambda x: g.f(x) ** 2, br, const_tails=(1.0, 1.0))
    m1 = measure.expect(g.f, br, const_tails=(1.0, 1.0))
    en = dirichlet_form(g, g, measure, alpha) if with_energy else QuadResult(math.nan, 0.0, 0)
    return ReferenceMoments(float(n), m2, m1, en)


# ---------------------------------------------------------------------------
# Poincare disproof

@dataclass(frozen=True)
class SeriesReport:
    n_values: np.ndarray
    ratio: np.ndarray
    slope: float
    variation: float  # max / min of the ratio over the sampled n
    decays: bool
    meta: dict = field(default_factory=dict)


def poincare_disproof(measure: Measure, alpha: float,
                      n_values: Sequence[float] = DEFAULT_N_VALUES) -> SeriesReport:
    """``E(g_n, g_n) / Var(g_n)`` along ``n`` with its log-log slope.

    ``decays`` is set when the fitted slope is below ``-0.25``, which is the
    signature of a failing Poincare inequality on the sampled range.
    """
    ns = np.asarray(n_values, dtype=float)
    ratio, errs = [], []
    for n in ns:
        mom = reference_moments(measure, alpha, n)
        var = mom.variance
        if not var > 0:
            raise InvalidParam(f"Var(g_{n:g}) is not positive")
        ratio.append(mom.energy.value / var)
        errs.append(mom.energy.est_error / var)
    ratio = np.asarray(ratio)
    slope = slope_fit(ns, np.log(ratio)).exponent if ns.size > 1 else math.nan
    return SeriesReport(ns, ratio, slope, float(ratio.max() / ratio.min()), bool(slope < -0.25),
                        {"energy_error": errs})


# ---------------------------------------------------------------------------
# sharpness functionals

def _log_beta_fn(beta) -> Callable[[float], float]:
    """A callable ``r -> log beta(r)`` from a curve or a callable."""
    if isinstance(beta, RateCurve):
        order = np.argsort(beta.r)
        lr, lv = np.log(beta.r[order]), beta.log_values[order]

        def fn(r):
            x = math.log(r)
            if x < lr[0] - 1e-9 or x > lr[-1] + 1e-9:
                raise InvalidParam(f"r={r:.3g} lies outside the sampled curve")
            return float(np.interp(x, lr, lv))
        return fn
    return beta


@dataclass(frozen=True)
class SharpnessReport:
    n_values: np.ndarray
    r_n: np.ndarray
    functional: np.ndarray
    running_liminf: np.ndarray
    trend: float  # slope of log functional against log log(e + n)
    flagged: bool  # the functional trends to 0, the candidate rate is too small
    constants: dict = field(default_factory=dict)


def _report(ns, r_n, F, constants) -> SharpnessReport:
    F = np.asarray(F, dtype=float)
    run = np.minimum.accumulate(F)
    pos = F > 0
    if pos.sum() >= 2:
        x = np.log(np.log(math.e + ns[pos]))
        trend = float(np.polyfit(x, np.log(F[pos]), 1)[0])
    else:
        trend = -math.inf
    flagged = bool(trend < -FLAG_SLOPE or not np.all(pos))
    return SharpnessReport(ns, np.asarray(r_n), F, run, trend, flagged, constants)


def measured_constants(measure: Measure, alpha: float, ns: np.ndarray, eps: float,
                       mass_rate: Callable[[float], float]) -> dict:
    """``c1 = min_n mu(g_n^2) / mass_rate(n)``, ``c = max_n n^alpha sup Gamma(g_n)``."""
    m2 = np.array([reference_moments(measure, alpha, n, with_energy=False).second.value
                   for n in ns])
    c1 = float(np.min(m2 / np.array([mass_rate(n) for n in ns])))
    c = float(max(n ** alpha * sup_carre(n, alpha) for n in ns))
    return {"c1": c1, "c": c, "second_moments": m2.tolist()}


def sp_sharpness_cor13(measure: Measure, alpha: float, beta, n_values=DEFAULT_N_VALUES,
                       constants: dict | None = None) -> SharpnessReport:
    """``r_n^{1/eps} log beta(r_n)`` with ``r_n = (c1 / 2c) log^{-eps}(e + n)``.

    For ``V = (1+alpha)/2 log(1+x^2) + eps log log(e+x^2)``; the tail mass
    of ``|x| > n`` behaves like ``n^-alpha log^-eps(e + n)``, which fixes
    ``c1``.  ``beta`` is a curve or a callable returning ``log beta(r)``.
    """
    pot = measure.potential
    eps = float(pot.eps) if pot.eps is not None else math.nan
    if pot.family.value != "poly_log_tail" or not eps > 0:
        raise InvalidParam("sp_sharpness_cor13 needs the log-perturbed tail with eps > 0")
    ns = np.asarray(n_values, dtype=float)
    if constants is None:
        constants = measured_constants(measure, alpha, ns, eps,
                                       lambda n: n ** -alpha * math.log(math.e + n) ** -eps)
    lb = _log_beta_fn(beta)
    r_n = constants["c1"] / (2.0 * constants["c"]) * np.log(math.e + ns) ** -eps
    F = [r ** (1.0 / eps) * lb(r) for r in r_n]
    return _report(ns, r_n, F, constants)


# each weak-rate sharpness functional belongs to one potential family
WP_FUNCTIONALS = ("poly_tail", "poly_log_tail", "heavy_log_tail")


def wp_sharpness(measure: Measure, alpha: float, beta_tilde, n_values=DEFAULT_N_VALUES,
                 rate_functional: str | None = None) -> SharpnessReport:
    """Evaluate a weak-Poincare sharpness functional along ``r_n = Var(g_n) / 2``.

    ``poly_tail``       (``0 < eps < alpha``): ``r^{(alpha-eps)/eps} beta(r)``
    ``poly_log_tail``   (``eps < 0``):         ``beta(r) log^eps(1 + 1/r)``
    ``heavy_log_tail``  (``eps > 1``):         ``r^{1/(eps-1)} log beta(r)``

    The functional defaults to the measure's family.  ``beta_tilde`` is a
    curve or a callable ``r -> log beta(r)``.
    """
    pot = measure.potential
    fam = pot.family.value
    if rate_functional is None:
        rate_functional = fam
    if rate_functional not in WP_FUNCTIONALS:
        raise InvalidParam(f"unknown functional {rate_functional!r}; expected one of {WP_FUNCTIONALS}")
    if fam != rate_functional:
        raise InvalidParam(f"the {rate_functional} functional needs a {rate_functional} measure")
    eps = float(pot.eps) if pot.eps is not None else math.nan
    if rate_functional == "poly_tail" and not 0 < eps < alpha:
        raise InvalidParam("the poly_tail functional needs 0 < eps < alpha")
    if rate_functional == "poly_log_tail" and not eps < 0:
        raise InvalidParam("the poly_log_tail functional needs eps < 0")
    if rate_functional == "heavy_log_tail" and not eps > 1:
        raise InvalidParam("the heavy_log_tail functional needs eps > 1")
    ns = np.asarray(n_values, dtype=float)
    lb = _log_beta_fn(beta_tilde)
    var = np.array([reference_moments(measure, alpha, n, with_energy=False).variance
                    for n in ns])
    r_n = 0.5 * var
    F = []
    for r in r_n:
        lbeta = lb(r)
        if rate_functional == "poly_tail":
            F.append(math.exp((alpha - eps) / eps * math.log(r) + lbeta))
        elif rate_functional == "poly_log_tail":
            F.append(math.exp(lbeta + eps * math.log(math.log1p(1.0 / r))))
        else:
            F.append(r ** (1.0 / (eps - 1.0)) * lbeta)
    return _report(ns, r_n, F, {"variance": var.tolist()})


# ---------------------------------------------------------------------------
# log-Sobolev probe

def lifted_reference(measure: Measure, n: float, t: float | None = None) -> TestFunction:
    """``1 + t g_n``; by default ``t = mu(|x| > n)^{-1/2}``."""
    if t is None:
        t = measure.tail_mass(n) ** -0.5
    g = make_reference(n)
    f = constant(1.0).combine(g, 1.0, t)
    return TestFunction(f.f, f.df, f.d2f, g.breaks, None, f.growth, name=f"1+{t:.3g}*g_{n:g}")


def log_sobolev_statistic(measure: Measure, alpha: float, f: TestFunction) -> float:
    """``mu(f^2 log f^2) / E(f, f)`` after scaling ``f`` to ``mu(f^2) = 1``."""
    m2 = measure.expect(lambda x: f.f(x) ** 2, f.breaks).value
    if not m2 > 0:
        raise InvalidParam(f"{f.name} vanishes mu-almost everywhere")

    def ent(x):
        u = f.f(x) ** 2 / m2
        return np.where(u > 0, u * np.log(np.where(u > 0, u, 1.0)), 0.0)
    e = measure.expect(ent, f.breaks).value
    en = dirichlet_form(f, f, measure, alpha).value / m2
    if not en > 0:
        raise InvalidParam(f"{f.name} is constant; the statistic is undefined")
    return e / en


def log_sobolev_probe(measure: Measure, alpha: float, family: Sequence[TestFunction]) -> float:
    """Largest entropy-to-energy ratio over ``family``: a lower bound on the constant."""
    if not family:
        raise InvalidParam("the probe family is empty")
    return max(log_sobolev_statistic(measure, alpha, f) for f in family)
