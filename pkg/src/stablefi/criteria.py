"""Scalar criterion functions and rate curves.

All radial quantities are handled in log-radius ``t = log|x|`` and as
logarithms of the criterion values: for the slowly growing families the
generalized inverses land at radii far beyond the floating-point range
(``Phi^{-1}`` for a log-log perturbed tail at ``r = 1e-5`` sits near
``exp(5e4)``).  Functions named ``log_*`` return natural logarithms;
radii passed as ``t`` are log-radii with ``t = -inf`` meaning the origin.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable, Sequence

import numpy as np
from scipy import optimize

from .errors import CriterionInapplicable, InvalidParam
from .potential import Family, Measure, Potential, log_sphere_area
from .quad import Segment, integrate

# generalized inverses are resolved to this relative accuracy in log-radius
INV_RTOL = 1e-10
PSI2_RADIAL_POINTS = 65
# beyond this radius Psi2 follows its large-ball asymptotics
PSI2_DIRECT_MAX = 1e4


def _log1p_exp(t):
    """log(1 + e^t)."""
    return np.logaddexp(0.0, t)


def _half_log1p_sq_minus_log1p(t):
    """0.5 log(1 + e^{2t}) - log(1 + e^t), stable for large t."""
    t = np.asarray(t, dtype=float)
    pos = t > 0
    tp = np.where(pos, t, 0.0)
    big = 0.5 * np.log1p(np.exp(-2.0 * tp)) - np.log1p(np.exp(-tp))
    small = 0.5 * np.logaddexp(0.0, 2.0 * np.minimum(t, 0.0)) - _log1p_exp(np.minimum(t, 0.0))
    return np.where(pos, big, small)


def log_radius_grid(t_max: float) -> np.ndarray:
    """512-point tabulation grid: uniform in t on [-20, 20], geometric in t beyond."""
    core = np.linspace(-20.0, 20.0, 256)
    far = np.geomspace(20.0, t_max, 257)[1:]
    return np.concatenate([core, far])


class _Envelope:
    """Tabulated radial function ``g(t)`` with exact local refinement.

    ``g`` must be vectorized in ``t``; ``g0`` is its value at the origin.
    """

    def __init__(self, g: Callable[[np.ndarray], np.ndarray], t: np.ndarray, g0: float):
        self.g = g
        self.t = t
        self.g0 = float(g0)
        with np.errstate(all="ignore"):
            self.vals = np.asarray(g(t), dtype=float)
        n = len(t)
        # suffix minima and their positions
        self.suf = np.minimum.accumulate(self.vals[::-1])[::-1]
        self.suf_arg = np.empty(n, dtype=int)
        best = n - 1
        for k in range(n - 1, -1, -1):
            if self.vals[k] <= self.vals[best]:
                best = k
            self.suf_arg[k] = best
        self.pre = np.minimum.accumulate(self.vals)
        self.pre_arg = np.empty(n, dtype=int)
        best = 0
        for k in range(n):
            if self.vals[k] < self.vals[best]:
                best = k
            self.pre_arg[k] = best

    def _g1(self, t: float) -> float:
        if t == -np.inf:
            return self.g0
        with np.errstate(all="ignore"):
            return float(self.g(np.array([t]))[0])

    def _refine_min(self, j: int, lo: float, hi: float, sign: float = 1.0) -> float:
        """Local minimum of ``sign * g`` around node ``j`` within [lo, hi]."""
        a = max(lo, self.t[j - 1] if j > 0 else self.t[0] - 1.0)
        b = min(hi, self.t[j + 1] if j + 1 < len(self.t) else self.t[-1])
        if not b > a:
            return sign * self._g1(self.t[j])
        res = optimize.minimize_scalar(lambda s: sign * self._g1(s), bounds=(a, b),
                                       method="bounded", options={"xatol": 1e-12 * max(1.0, abs(b))})
        return min(float(res.fun), sign * self.vals[j])

    def suffix_inf(self, t: float) -> float:
        """``inf_{s >= t} g(s)``."""
        if t == -np.inf:
            return min(self.g0, self.suffix_inf(self.t[0]))
        cand = self._g1(t)
        k = int(np.searchsorted(self.t, t, side="right"))
        if k >= len(self.t):
            return cand
        j = int(self.suf_arg[k])
        best = min(cand, self.vals[j])
        if np.isfinite(best) and 0 < j < len(self.t) - 1:
            best = min(best, self._refine_min(j, t, np.inf))
        return best

    def prefix_inf(self, t: float) -> float:
        """``inf_{s <= t} g(s)`` including the origin."""
        if t == -np.inf:
            return self.g0
        cand = min(self.g0, self._g1(t))
        k = int(np.searchsorted(self.t, t, side="right")) - 1
        if k < 0:
            # below the grid: scan a short geometric ladder down to the origin
            ladder = t - np.geomspace(1e-3, 40.0, 40)
            return min(cand, float(np.min(self.g(ladder))))
        j = int(self.pre_arg[k])
        best = min(cand, self.vals[j])
        if np.isfinite(best) and 0 < j < k:
            best = min(best, self._refine_min(j, -np.inf, t))
        return best

    def inverse(self, y: float) -> float:
        """``inf{s : inf_{u >= s} g(u) >= y}`` as a log-radius (``-inf`` = origin)."""
        below = self.vals < y
        if not below.any():
            return -np.inf
        k = int(np.nonzero(below)[0][-1])
        if k == len(self.t) - 1:
            return np.inf
        lo, hi = float(self.t[k]), float(self.t[k + 1])
        for _ in range(200):
            if hi - lo <= INV_RTOL * max(1.0, abs(hi)):
                break
            mid = 0.5 * (lo + hi)
            if self._g1(mid) < y:
                lo = mid
            else:
                hi = mid
        return hi


def _probe_diverges(g: Callable, t_probe: np.ndarray, rise: float = 0.5) -> bool:
    """True when ``g`` is nondecreasing along ``t_probe`` and rises by more than ``rise``.

    Overflow to ``+inf`` counts as divergence.
    """
    with np.errstate(all="ignore"):
        v = np.asarray(g(t_probe), dtype=float)
    if np.any(np.isnan(v)) or np.any(v == -np.inf):
        return False
    v = np.minimum(v, 1e300)
    return bool(np.all(np.diff(v) >= 0) and v[-1] - v[0] > rise)


class CriterionProfile:
    """The scalar criterion functions attached to one ``(V, alpha, d)``.

    Public evaluators take radii ``r`` (floats); the ``log_*`` variants take
    log-radii and return logarithms.  ``Phi`` is defined with the
    ``(1 + |x|)^{d + alpha}`` weight and ``Psi2`` with the normalized
    density.
    """

    def __init__(self, measure: Measure, alpha: float, delta: float = 0.5):
        if not 0.0 < alpha < 2.0:
            raise InvalidParam("alpha must lie in (0, 2)")
        if not 0.0 < delta < 1.0:
            raise InvalidParam("delta must lie in (0, 1)")
        self.measure = measure
        self.potential: Potential = measure.potential
        self.alpha = float(alpha)
        self.delta = float(delta)
        self.dim = self.potential.dim
        pot = self.potential
        if pot.family is Family.POLY_LOG_TAIL and pot.alpha != alpha:
            raise InvalidParam("poly_log_tail potential was built for a different alpha")
        stable = pot._profile is not None
        self.t_grid = log_radius_grid(1e10 if stable else 230.0)
        self.t_probe = np.geomspace(1e2, 1e8, 13) if stable else np.linspace(10.0, 230.0, 12)
        self.v0 = pot.v0
        self.kappa = self.dim + self.alpha  # d + alpha

    # -- ball extrema of V ---------------------------------------------------
    def _vmin(self, t):
        if self.potential.radial:
            return self.potential.v_logr(t)
        return self.potential.sphere_extrema_logr(t)[0]

    def _vmax(self, t):
        if self.potential.radial:
            return self.potential.v_logr(t)
        return self.potential.sphere_extrema_logr(t)[1]

    @cached_property
    def _vmin_env(self) -> _Envelope:
        return _Envelope(self._vmin, self.t_grid, self.v0)

    @cached_property
    def _neg_vmax_env(self) -> _Envelope:
        return _Envelope(lambda t: -self._vmax(t), self.t_grid, -self.v0)

    def log_h(self, t: float) -> float:
        """log h at log-radius t: ``inf_{|x| <= e^t} V``."""
        if self.potential.radial:
            return self.v0
        return self._vmin_env.prefix_inf(t)

    def log_H(self, t: float) -> float:
        """log H at log-radius t: ``sup_{|x| <= e^t} V``."""
        if t == -np.inf:
            return self.v0
        if self.potential.radial:
            return float(self.potential.v_logr(np.array([t]))[0])
        return -self._neg_vmax_env.prefix_inf(t)

    def h(self, r: float) -> float:
        return math.exp(self.log_h(_logr(r)))

    def H(self, r: float) -> float:
        return _exp(self.log_H(_logr(r)))

    def delta_r(self, r: float) -> float:
        """``sup_{|x| <= r} V``."""
        return self.log_H(_logr(r))

    # -- Phi, its inverse and Psi1 ---------------------------------------------
    def _g(self, t, which: str = "min"):
        """log of ``e^V / (1 + |x|)^{d + alpha}`` on the sphere (min or max over it)."""
        pot = self.potential
        t = np.asarray(t, dtype=float)
        if pot._profile is not None:
            base = pot.v_minus_log1p_logr(t, 0.5 * self.kappa)
            return base + self.kappa * _half_log1p_sq_minus_log1p(t)
        v = self._vmin(t) if which == "min" else self._vmax(t)
        return v - self.kappa * _log1p_exp(t)

    @cached_property
    def _phi_env(self) -> _Envelope:
        return _Envelope(lambda t: self._g(t, "min"), self.t_grid, self.v0)

    @cached_property
    def _gmax_env(self) -> _Envelope:
        return _Envelope(lambda t: -self._g(t, "max"), self.t_grid, -self.v0)

    def log_phi(self, t: float) -> float:
        return self._phi_env.suffix_inf(t)

    def Phi(self, r: float) -> float:
        return _exp(self.log_phi(_logr(r)))

    def log_phi_inv(self, log_y: float) -> float:
        """log of ``Phi^{-1}(e^{log_y})``; ``inf`` when the level is never reached."""
        return self._phi_env.inverse(log_y)

    def PhiInv(self, y: float) -> float:
        if not y > 0:
            raise InvalidParam("PhiInv needs y > 0")
        return _exp(self.log_phi_inv(math.log(y)))

    @cached_property
    def phi_unbounded(self) -> bool:
        return _probe_diverges(lambda t: self._g(t, "min"), self.t_probe)

    @cached_property
    def psi1_infinite(self) -> bool:
        return _probe_diverges(lambda t: self._g(t, "max"), self.t_probe)

    @cached_property
    def _log_sup_g(self) -> float:
        """log of ``sup_x e^V / (1 + |x|)^{d + alpha}``."""
        if self.psi1_infinite:
            return np.inf
        env = self._gmax_env
        return -min(env.g0, env.suffix_inf(env.t[0]))

    def log_psi1(self, t: float) -> float:
        if self.psi1_infinite:
            return np.inf
        return -self._phi_env.prefix_inf(t) + self._log_sup_g

    def Psi1(self, r: float) -> float:
        return _exp(self.log_psi1(_logr(r)))

    # -- Psi2 ----------------------------------------------------------------
    def _log_psi2_direct(self, R: float) -> float:
        m = self.measure
        pot = self.potential
        log_z2 = 2.0 * math.log(m.z_const)
        k = self.kappa

        if self.dim == 1:
            def inner(x):
                def f(y):
                    with np.errstate(under="ignore", over="ignore"):
                        return (np.abs(y - x) ** k * np.exp(-2.0 * pot.eval1(y))
                                + np.abs(y + x) ** k * np.exp(-2.0 * pot.eval1(-y)))
                return integrate(f, _segments_0R(R, [abs(x)]), rtol=1e-10, atol=1e-300,
                                 max_panels=1024).value
            xs = (np.linspace(0.0, R, PSI2_RADIAL_POINTS) if pot.radial
                  else np.linspace(-R, R, 2 * PSI2_RADIAL_POINTS - 1))
        else:
            if not pot.radial:
                raise InvalidParam("Psi2 for non-radial potentials is implemented in dim 1 only")
            d = self.dim
            th, wth = _theta_rule(d)
            log_s2 = log_sphere_area(d - 1) if d > 2 else math.log(2.0)

            def inner(x):
                def f(s):
                    dist2 = s[:, None] ** 2 + x * x - 2.0 * s[:, None] * x * np.cos(th)[None, :]
                    ang = np.sum(wth * np.maximum(dist2, 0.0) ** (0.5 * k), axis=1)
                    with np.errstate(under="ignore"):
                        return np.exp(log_s2) * s ** (d - 1) * ang * np.exp(-2.0 * pot.eval(s[:, None] * np.eye(d)[0]))
                return integrate(f, _segments_0R(R, [x]), rtol=1e-10, atol=1e-300,
                                 max_panels=1024).value
            xs = np.linspace(0.0, R, PSI2_RADIAL_POINTS)
        best = max(inner(float(x)) for x in xs)
        return math.log(best) - log_z2 - 2.0 * math.log(self.measure.ball_mass(R))

    @cached_property
    def _psi2_anchor(self) -> float:
        return self._log_psi2_direct(PSI2_DIRECT_MAX)

    def log_psi2(self, t: float) -> float:
        """log Psi2 at log-radius t."""
        if t == -np.inf:
            raise InvalidParam("Psi2 needs r > 0")
        if t <= math.log(PSI2_DIRECT_MAX):
            return self._log_psi2_direct(math.exp(t))
        t0 = math.log(PSI2_DIRECT_MAX)
        m = self.measure
        lb = math.log1p(-m.tail_mass_logr(t))
        lb0 = math.log1p(-m.tail_mass_logr(t0))
        return self._psi2_anchor + self.kappa * (t - t0) - 2.0 * (lb - lb0)

    def Psi2(self, r: float) -> float:
        return _exp(self.log_psi2(_logr(r)))

    # -- W_delta ---------------------------------------------------------------
    def _w_radial(self, t):
        pot = self.potential
        p = pot._profile
        t = np.asarray(t, dtype=float)
        d = self.dim
        with np.errstate(all="ignore"):
            if p is not None:
                s = np.exp(2.0 * t)
                dF = p.dF(s)
                grad2 = 4.0 * dF * dF * s
                lap = 2.0 * d * dF + 4.0 * p.sd2F(s)
                return self.delta * grad2 - lap
            rho = np.exp(t)
            pts = np.zeros(t.shape + (d,))
            pts[..., 0] = rho
            g = pot.grad(pts)
            return self.delta * np.sum(g * g, axis=-1) - pot.lapl(pts)

    def _w_sphere_min(self, t):
        pot = self.potential
        if pot.radial:
            return self._w_radial(t)
        t = np.atleast_1d(np.asarray(t, dtype=float))

        def w(x):
            g = pot.grad(x)
            return self.delta * np.sum(g * g, axis=-1) - pot.lapl(x)
        rho = np.exp(np.minimum(t, 700.0))
        if self.dim == 1:
            return np.minimum(w(rho[:, None]), w(-rho[:, None]))
        from .potential import _multistart_sphere

        shadow = Potential(Family.CUSTOM, self.dim, radial=False, func=w, seed=pot.seed)
        return _multistart_sphere(shadow, rho)[0]

    @cached_property
    def _w_env(self) -> _Envelope:
        t = np.concatenate([np.linspace(-20.0, 20.0, 256), np.geomspace(20.0, 150.0, 257)[1:]])
        return _Envelope(self._w_sphere_min, t, float(self._w_sphere_min(np.array([-40.0]))[0]))

    def Wdelta(self, r: float) -> float:
        return self._w_env.suffix_inf(_logr(r))

    def log_w_inv(self, y: float) -> float:
        """log-radius of ``W_delta^{-1}(y)``."""
        return self._w_env.inverse(y)

    @cached_property
    def ef_holds(self) -> bool:
        """Probe of ``W_delta -> inf``: positive, increasing, log-log slope >= 0.05."""
        t = np.log(np.geomspace(1e6, 1e12, 13))
        w = np.asarray(self._w_sphere_min(t), dtype=float)
        if not np.all(w > 0) or not np.all(np.diff(w) > 0):
            return False
        if np.any(np.isinf(w)):
            return True
        slope = np.polyfit(t, np.log(w), 1)[0]
        return bool(slope >= 0.05)

    # -- U ---------------------------------------------------------------------
    def log_U(self, r: float) -> float:
        """log of ``U(r) = inf{s : mu(|x| > s) <= r / (1 + r)}``."""
        if not r > 0:
            raise InvalidParam("U needs r > 0")
        q = r / (1.0 + r)
        tail = self.measure.tail_mass_logr
        lo, hi = -1.0, 0.0
        while tail(hi) > q:
            lo, hi = hi, (1.0 if hi <= 0 else 2.0 * hi)
            if hi > 1e15:
                return np.inf
        while tail(lo) <= q:
            hi, lo = lo, 2.0 * lo
            if lo < -700:
                return -np.inf
        for _ in range(200):
            if hi - lo <= INV_RTOL * max(1.0, abs(hi)):
                break
            mid = 0.5 * (lo + hi)
            if tail(mid) > q:
                lo = mid
            else:
                hi = mid
        return hi

    def U(self, r: float) -> float:
        return _exp(self.log_U(r))


def build_profile(measure: Measure, alpha: float, delta: float = 0.5) -> CriterionProfile:
    return CriterionProfile(measure, alpha, delta)


def _logr(r: float) -> float:
    if r < 0:
        raise InvalidParam("radius must be nonnegative")
    if r == 0:
        return -np.inf
    return math.log(r)


def _exp(x: float) -> float:
    with np.errstate(over="ignore"):
        return float(np.exp(x))


def _segments_0R(R: float, breaks: Sequence[float]) -> list[Segment]:
    pts = sorted({b for b in breaks if 0 < b < R} | {min(1.0, R), R})
    segs, lo = [], 0.0
    for hi in pts:
        if hi <= lo:
            continue
        kind = "log" if lo > 0 and hi / lo > 4 else "linear"
        segs.append(Segment(lo, hi, kind))
        lo = hi
    return segs


def _theta_rule(d: int):
    """Angle nodes on [0, pi] with weights sin^{d-2}(theta) d theta."""
    x, w = np.polynomial.legendre.leggauss(64)
    th = 0.5 * np.pi * (x + 1.0)
    return th, 0.5 * np.pi * w * np.sin(th) ** (d - 2)


# ---------------------------------------------------------------------------
# rate engines (log values)

def log_beta_super_t11(profile: CriterionProfile, r: float, c1: float = 1.0,
                       c2: float = 1.0) -> float:
    """log of the super-Poincare rate built from h, H and the inverse of Phi."""
    if not profile.phi_unbounded:
        raise CriterionInapplicable("Phi stays bounded; no super-Poincare rate from this criterion")
    _check_pos(r, c1, c2)
    d, a = profile.dim, profile.alpha
    ts = profile.log_phi_inv(math.log(c2) - math.log(r))
    if ts == np.inf:
        raise CriterionInapplicable("Phi^{-1} is infinite at this level")
    x = (-(d / a) * math.log(r) - (1.0 + d / a) * profile.log_h(ts)
         + (2.0 + d / a) * profile.log_H(ts))
    return math.log(c1) + float(np.logaddexp(0.0, x))


def beta_super_t11(profile: CriterionProfile, r: float, c1: float = 1.0, c2: float = 1.0) -> float:
    return _exp(log_beta_super_t11(profile, r, c1, c2))


def log_beta_weak_t11(profile: CriterionProfile, r: float, c: float = 1.0) -> float:
    """log of the weak-Poincare rate ``min(c Psi1(R), Psi2(R))`` at the smallest feasible R."""
    _check_pos(r, c)
    t = profile.log_U(r)
    lp2 = profile.log_psi2(t)
    lp1 = profile.log_psi1(t)
    return min(math.log(c) + lp1, lp2)


def beta_weak_t11(profile: CriterionProfile, r: float, c: float = 1.0) -> float:
    return _exp(log_beta_weak_t11(profile, r, c))


def log_beta_super_t51(profile: CriterionProfile, r: float, c1: float = 1.0,
                       c2: float = 1.0, delta: float | None = None) -> float:
    """log of the super-Poincare rate built from the inverse of W_delta."""
    if delta is not None and delta != profile.delta:
        profile = CriterionProfile(profile.measure, profile.alpha, delta)
    if profile.v0 < 0 or profile.log_h(np.inf if profile.potential.radial else profile.t_grid[-1]) < -1e-12:
        raise CriterionInapplicable("this criterion needs V >= 0")
    if not profile.ef_holds:
        raise CriterionInapplicable("delta |grad V|^2 - lap V does not tend to infinity")
    _check_pos(r, c1, c2)
    d, a = profile.dim, profile.alpha
    ts = profile.log_w_inv(c2 * r ** (-2.0 / a))
    if ts == np.inf:
        raise CriterionInapplicable("W_delta^{-1} is infinite at this level")
    x = (-(d / a) * math.log(r) + (2.0 + 0.5 * d) * profile.log_H(ts)
         - (1.0 + 0.5 * d) * profile.log_h(ts))
    return math.log(c1) + float(np.logaddexp(0.0, x))


def beta_super_t51(profile: CriterionProfile, r: float, c1: float = 1.0, c2: float = 1.0,
                   delta: float | None = None) -> float:
    return _exp(log_beta_super_t51(profile, r, c1, c2, delta))


def log_beta_weak_t52(profile: CriterionProfile, r: float, c1: float = 1.0,
                      c2: float = 1.0) -> float:
    """log of the weak-Poincare rate ``c1 U^2 exp(2 sup_{B(0,U)} V)``."""
    _check_pos(r, c1, c2)
    tu = profile.log_U(c2 * r ** (0.5 * profile.alpha))
    return math.log(c1) + 2.0 * tu + 2.0 * profile.log_H(tu)


def beta_weak_t52(profile: CriterionProfile, r: float, c1: float = 1.0, c2: float = 1.0) -> float:
    return _exp(log_beta_weak_t52(profile, r, c1, c2))


def _check_pos(*vals):
    for v in vals:
        if not v > 0:
            raise InvalidParam("rates need r and constants > 0")


# ---------------------------------------------------------------------------
# rate curves

ENGINE_KINDS = ("super_t11", "weak_t11", "super_t51", "weak_t52")
SUPER_KINDS = ("super_t11", "super_t51")


@dataclass(frozen=True)
class SlopeFit:
    exponent: float
    intercept: float
    residual: float
    window: tuple[float, float]
    transform: str = "loglog"


@dataclass(frozen=True)
class RateCurve:
    kind: str
    r: np.ndarray
    log_values: np.ndarray
    meta: dict = field(default_factory=dict)

    @property
    def values(self) -> np.ndarray:
        with np.errstate(over="ignore"):
            return np.exp(self.log_values)

    @property
    def is_super(self) -> bool:
        return self.kind in SUPER_KINDS or self.meta.get("super", False)

    def regularized(self) -> "RateCurve":
        """Smallest nonincreasing majorant (super kinds may always be taken decreasing)."""
        order = np.argsort(self.r)
        lv = self.log_values[order]
        reg = np.maximum.accumulate(lv[::-1])[::-1]
        out = np.empty_like(lv)
        out[order] = reg
        return RateCurve(self.kind, self.r, out, dict(self.meta, regularized=True))

    def slope_fit(self, window: tuple[float, float] | None = None,
                  transform: str = "loglog") -> SlopeFit:
        return slope_fit(self.r, self.log_values, window, transform)


def slope_fit(r: Sequence[float], log_values: Sequence[float],
              window: tuple[float, float] | None = None, transform: str = "loglog") -> SlopeFit:
    """Least-squares exponent of a sampled rate.

    ``loglog``     fits ``log value`` against ``log r``
    ``logloglog``  fits ``log(log value)`` against ``log r`` (exponential rates)
    """
    r = np.asarray(r, dtype=float)
    y = np.asarray(log_values, dtype=float)
    if window is None:
        window = (float(r.min()), float(r.max()))
    sel = (r >= window[0] * (1 - 1e-12)) & (r <= window[1] * (1 + 1e-12))
    if transform == "logloglog":
        sel &= y > 0
        y = np.log(np.where(y > 0, y, 1.0))
    elif transform != "loglog":
        raise InvalidParam(f"unknown slope transform {transform!r}")
    if sel.sum() < 2:
        raise InvalidParam("slope fit needs at least two samples in the window")
    x = np.log(r[sel])
    coef, res, *_ = np.polyfit(x, y[sel], 1, full=True)
    resid = float(np.sqrt(res[0] / sel.sum())) if res.size else 0.0
    return SlopeFit(float(coef[0]), float(coef[1]), resid, (float(window[0]), float(window[1])),
                    transform)


def default_r_grid(lo: float = 1e-5, hi: float = 1e-2, n: int = 13) -> np.ndarray:
    return np.geomspace(lo, hi, n)


def rate_curve(profile: CriterionProfile, kind: str, r_grid: Sequence[float] | None = None,
               c1: float = 1.0, c2: float = 1.0, c: float = 1.0) -> RateCurve:
    """Sample one engine on ``r_grid``; the rate is frozen beyond the largest sample."""
    r = np.asarray(default_r_grid() if r_grid is None else r_grid, dtype=float)
    if kind == "super_t11":
        fn = lambda x: log_beta_super_t11(profile, x, c1, c2)
    elif kind == "weak_t11":
        fn = lambda x: log_beta_weak_t11(profile, x, c)
    elif kind == "super_t51":
        fn = lambda x: log_beta_super_t51(profile, x, c1, c2)
    elif kind == "weak_t52":
        fn = lambda x: log_beta_weak_t52(profile, x, c1, c2)
    else:
        raise InvalidParam(f"unknown engine {kind!r}; expected one of {ENGINE_KINDS}")
    lv = np.array([fn(float(x)) for x in r])
    meta = {"engine": kind, "alpha": profile.alpha, "potential": profile.potential.describe(),
            "constants": {"c1": c1, "c2": c2, "c": c}, "frozen_beyond": float(r.max())}
    if kind == "super_t51":
        meta["delta"] = profile.delta
    return RateCurve(kind, r, lv, meta)


# ---------------------------------------------------------------------------
# closed-form family curves

CLOSED_FORMS = {
    "poly_tail_super": "c (1 + r^-(d/alpha + (d+eps)(2 alpha+d)/(alpha(eps-alpha)))), eps > alpha",
    "poly_tail_weak": "c (1 + r^-((alpha-eps)/eps)), 0 < eps < alpha",
    "polylog_super": "exp(c (1 + r^(-1/eps))), eps > 0",
    "polylog_logsobolev": "exp(c (1 + 1/r)), eps >= 1",
    "polylog_weak": "c (1 + log^(-eps)(1 + 1/r)), eps < 0",
    "heavylog_weak": "c1 exp(c2 r^(-1/(eps-1))), eps > 1",
    "stretched_super": "c + c r^(-2(alpha+d)/alpha) exp(c log^(1/(1+eps))(1 + 1/r)), eps > 0",
    "subgauss_super": "c (1 + r^(-2(alpha+d)/alpha) log^((2alpha+d)(d+alpha)/(2 eps alpha))(1 + 1/r)), eps > 0",
    "subgauss_ef_super": "exp(c (1 + r^(-2 eps/(alpha(2 eps-1))))), eps > 1/2",
}

# closed forms whose log grows like a power of 1/r; their shapes are compared
# through log(log beta), since the plain log-log slope scales with c
EXPONENTIAL_FORMS = frozenset({"polylog_super", "polylog_logsobolev", "heavylog_weak",
                               "subgauss_ef_super"})


def closed_form_log(name: str, r, eps: float, alpha: float, d: int = 1, c: float = 1.0,
                    c2: float = 1.0) -> np.ndarray:
    """log of a closed-form rate for the built-in families (constants default to 1)."""
    r = np.asarray(r, dtype=float)
    a = alpha
    lc = math.log(c)
    l1r = np.log1p(1.0 / r)
    if not 0 < a < 2:
        raise InvalidParam("alpha must lie in (0, 2)")
    if name == "poly_tail_super":
        _need(eps > a, "poly_tail_super needs eps > alpha")
        k = d / a + (d + eps) * (2 * a + d) / (a * (eps - a))
        return lc + np.logaddexp(0.0, -k * np.log(r))
    if name == "poly_tail_weak":
        _need(0 < eps < a, "poly_tail_weak needs 0 < eps < alpha")
        return lc + np.logaddexp(0.0, -(a - eps) / eps * np.log(r))
    if name == "polylog_super":
        _need(eps > 0, "polylog_super needs eps > 0")
        return c * (1.0 + r ** (-1.0 / eps))
    if name == "polylog_logsobolev":
        _need(eps >= 1, "the log-Sobolev inequality holds only for eps >= 1")
        return c * (1.0 + 1.0 / r)
    if name == "polylog_weak":
        _need(eps < 0, "polylog_weak needs eps < 0")
        return lc + np.logaddexp(0.0, -eps * np.log(l1r))
    if name == "heavylog_weak":
        _need(eps > 1, "heavylog_weak needs eps > 1")
        return lc + c2 * r ** (-1.0 / (eps - 1.0))
    if name == "stretched_super":
        _need(eps > 0, "stretched_super needs eps > 0")
        tail = -2 * (a + d) / a * np.log(r) + c * l1r ** (1.0 / (1.0 + eps))
        return lc + np.logaddexp(0.0, tail)
    if name == "subgauss_super":
        _need(eps > 0, "subgauss_super needs eps > 0")
        tail = (-2 * (a + d) / a * np.log(r)
                + (2 * a + d) * (d + a) / (2 * eps * a) * np.log(l1r))
        return lc + np.logaddexp(0.0, tail)
    if name == "subgauss_ef_super":
        _need(eps > 0.5, "subgauss_ef_super needs eps > 1/2")
        return c * (1.0 + r ** (-2 * eps / (a * (2 * eps - 1))))
    raise InvalidParam(f"unknown closed form {name!r}; expected one of {sorted(CLOSED_FORMS)}")


def _need(ok: bool, msg: str):
    if not ok:
        raise InvalidParam(msg)


def closed_form_curve(name: str, params: dict, r_grid: Sequence[float] | None = None) -> RateCurve:
    """Sample a closed-form rate; ``params`` holds eps, alpha and optionally d, c, c2."""
    unknown = set(params) - {"eps", "alpha", "d", "c", "c2"}
    if unknown:
        raise InvalidParam(f"unknown closed-form parameters {sorted(unknown)}")
    r = np.asarray(default_r_grid() if r_grid is None else r_grid, dtype=float)
    lv = closed_form_log(name, r, **params)
    meta = {"closed_form": name, "formula": CLOSED_FORMS[name], "params": dict(params),
            "super": name.endswith("super") or name == "polylog_logsobolev"}
    return RateCurve("closed_form", r, np.asarray(lv, dtype=float), meta)
