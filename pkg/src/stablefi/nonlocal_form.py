"""Carre du champ, Dirichlet form and generator of the stable-like form in d = 1.

Every inner integral is written as two one-sided integrals over ``z > 0``
(jumps to ``x + z`` and to ``x - z``).  Near ``z = 0`` each side integrand
behaves like ``c(x) z^{1 - alpha}``; the piece ``[0, z0]`` is taken in closed
form from the second-order Taylor coefficient and the remainder is
integrated in ``log z`` between the kinks of the integrand, with a
logarithmic tail map to infinity.  All of this is vectorized over batches
of evaluation points ``x``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .errors import InvalidParam, QuadDiverged, SmoothnessViolation
from .potential import Measure, Potential
from .quad import GL_ORDER, QuadResult, Segment, half_line_segments

_GX, _GW = np.polynomial.legendre.leggauss(GL_ORDER)
_EPS = np.finfo(float).eps
TAYLOR_Z0 = 1e-3
_BATCH = 256
# decade points where exp(V(x) - V(y)), or a test function centred near 0,
# changes character; used to split jumps from far out
_V_FEATURES = np.concatenate([-np.geomspace(1e6, 1.0, 7), [0.0], np.geomspace(1.0, 1e6, 7)])


@dataclass(frozen=True)
class TestFunction:
    """A function on the real line with the metadata the quadrature needs.

    ``breaks`` lists abscissae where ``f`` is only C^2 (or less);
    ``support`` is an interval outside which ``f`` is constant; ``growth``
    is ``(C, rho)`` with ``|f(x)| <= C (1 + |x|^rho)``.
    """
    f: Callable[[np.ndarray], np.ndarray]
    df: Callable[[np.ndarray], np.ndarray]
    d2f: Callable[[np.ndarray], np.ndarray] | None = None
    breaks: tuple[float, ...] = ()
    support: tuple[float, float] | None = None
    growth: tuple[float, float] = (1.0, 0.0)
    hess_bound: Callable[[float], float] | None = None
    name: str = "f"
    __test__ = False  # keep pytest from collecting this class

    def __post_init__(self):
        if self.growth[1] < 0:
            raise InvalidParam("growth exponent must be nonnegative")
        if self.support is not None:
            a, b = self.support
            if not a < b:
                raise InvalidParam("support must be a nonempty interval")
            probes_l = a - np.geomspace(1e-3, 1e3, 12)
            probes_r = b + np.geomspace(1e-3, 1e3, 12)
            for pr in (probes_l, probes_r):
                v = self.f(pr)
                if np.ptp(v) > 1e-12 * (1.0 + np.abs(v).max()):
                    raise InvalidParam(f"{self.name} is not constant outside its support")

    def __call__(self, x):
        return self.f(np.asarray(x, dtype=float))

    def second(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if self.d2f is not None:
            return self.d2f(x)
        h = 1e-5 * (1.0 + np.abs(x))
        return (self.df(x + h) - self.df(x - h)) / (2.0 * h)

    def check_growth(self, alpha: float, power: int = 1):
        if not power * self.growth[1] < alpha:
            raise InvalidParam(
                f"{self.name}: growth exponent {self.growth[1]} is too large for alpha={alpha}")

    def combine(self, other: "TestFunction", a: float = 1.0, b: float = 1.0) -> "TestFunction":
        """The linear combination ``a f + b g``."""
        d2 = None
        if self.d2f is not None and other.d2f is not None:
            d2 = lambda x: a * self.d2f(x) + b * other.d2f(x)
        sup = None
        if self.support is not None and other.support is not None:
            sup = (min(self.support[0], other.support[0]), max(self.support[1], other.support[1]))
        return TestFunction(lambda x: a * self.f(x) + b * other.f(x),
                            lambda x: a * self.df(x) + b * other.df(x), d2,
                            tuple(sorted(set(self.breaks) | set(other.breaks))), sup,
                            (abs(a) * self.growth[0] + abs(b) * other.growth[0],
                             max(self.growth[1], other.growth[1])),
                            name=f"({a}*{self.name}+{b}*{other.name})")


# ---------------------------------------------------------------------------
# building blocks

def smoothstep(t):
    """Quintic smoothstep on [0, 1] with value and derivatives: (S, S', S'')."""
    t = np.clip(t, 0.0, 1.0)
    s = t * t * t * (t * (6.0 * t - 15.0) + 10.0)
    ds = 30.0 * t * t * (t - 1.0) ** 2
    d2s = 60.0 * t * (t - 1.0) * (2.0 * t - 1.0)
    return s, ds, d2s


def bump(center: float = 0.0, width: float = 1.0, height: float = 1.0) -> TestFunction:
    """``height (1 - u^2)^3`` for ``|u| < 1``, ``u = (x - center)/width``; C^2."""
    c, w, hgt = float(center), float(width), float(height)

    def f(x):
        u = np.clip((np.asarray(x, dtype=float) - c) / w, -1.0, 1.0)
        return np.where(np.abs(u) < 1, hgt * (1 - u * u) ** 3, 0.0)

    def df(x):
        u = np.clip((np.asarray(x, dtype=float) - c) / w, -1.0, 1.0)
        return np.where(np.abs(u) < 1, hgt * -6.0 * u * (1 - u * u) ** 2 / w, 0.0)

    def d2f(x):
        u = np.clip((np.asarray(x, dtype=float) - c) / w, -1.0, 1.0)
        return np.where(np.abs(u) < 1,
                        hgt * (-6.0 * (1 - u * u) ** 2 + 24.0 * u * u * (1 - u * u)) / w ** 2, 0.0)

    return TestFunction(f, df, d2f, (c - w, c + w), (c - w, c + w), (abs(hgt), 0.0),
                        hess_bound=lambda r: 6.0 * abs(hgt) / w ** 2,
                        name=f"bump({c:g},{w:g})")


def smooth_ramp(half_width: float = 1.0) -> TestFunction:
    """``x`` on ``[-a/2, a/2]`` bent smoothly to the constants ``+-c`` beyond ``|x| = a``."""
    a = float(half_width)
    # odd C^2 function: x near 0, saturating via a quintic blend on [a/2, a]
    k = 0.5 * a
    # matches x at k (value, slope 1, curvature 0) and is flat at a
    def core(r):
        t = (r - k) / (a - k)
        tt = np.clip(t, 0.0, 1.0)
        L = a - k
        # integral of the slope 1 - S(t): value k + L * int_0^t (1 - S)
        integ = tt - (tt ** 6 - 3 * tt ** 5 + 2.5 * tt ** 4)
        val = np.where(r <= k, r, k + L * integ)
        slope = np.where(r <= k, 1.0, 1.0 - smoothstep(tt)[0])
        curv = np.where(r <= k, 0.0, -smoothstep(tt)[1] / L)
        return val, slope, curv

    def f(x):
        x = np.asarray(x, dtype=float)
        return np.sign(x) * core(np.abs(x))[0]

    def df(x):
        return core(np.abs(np.asarray(x, dtype=float)))[1]

    def d2f(x):
        x = np.asarray(x, dtype=float)
        return np.sign(x) * core(np.abs(x))[2]

    top = k + (a - k) * 0.5
    return TestFunction(f, df, d2f, (-a, -k, k, a), (-a, a), (top, 0.0),
                        hess_bound=lambda r: 1.875 / (a - k), name=f"ramp({a:g})")


def poly_decay(power: float = 1.0, shift: float = 0.0) -> TestFunction:
    """``(1 + (x - shift)^2)^{-power}``."""
    p, s = float(power), float(shift)

    def f(x):
        u = np.asarray(x, dtype=float) - s
        return (1 + u * u) ** -p

    def df(x):
        u = np.asarray(x, dtype=float) - s
        return -2 * p * u * (1 + u * u) ** (-p - 1)

    def d2f(x):
        u = np.asarray(x, dtype=float) - s
        return (-2 * p * (1 + u * u) ** (-p - 1)
                + 4 * p * (p + 1) * u * u * (1 + u * u) ** (-p - 2))

    return TestFunction(f, df, d2f, (), None, (1.0, 0.0), hess_bound=lambda r: 2 * p * (p + 2),
                        name=f"polydecay({p:g},{s:g})")


def gaussian(center: float = 0.0, width: float = 1.0) -> TestFunction:
    c, w = float(center), float(width)

    def f(x):
        u = (np.asarray(x, dtype=float) - c) / w
        return np.exp(-0.5 * u * u)

    def df(x):
        u = (np.asarray(x, dtype=float) - c) / w
        return -u / w * np.exp(-0.5 * u * u)

    def d2f(x):
        u = (np.asarray(x, dtype=float) - c) / w
        return (u * u - 1) / w ** 2 * np.exp(-0.5 * u * u)

    return TestFunction(f, df, d2f, (), None, (1.0, 0.0), hess_bound=lambda r: 1.0 / w ** 2,
                        name=f"gauss({c:g},{w:g})")


def constant(value: float = 1.0) -> TestFunction:
    v = float(value)
    return TestFunction(lambda x: np.full(np.shape(x), v), lambda x: np.zeros(np.shape(x)),
                        lambda x: np.zeros(np.shape(x)), (), None, (abs(v), 0.0),
                        name=f"const({v:g})")


def lyapunov_function(alpha0: float) -> TestFunction:
    """``1 + |x|^alpha0`` for ``|x| >= 1``, constant for ``|x| <= 1/2``, quintic blend between."""
    if not alpha0 > 0:
        raise InvalidParam("alpha0 must be positive")
    a0 = float(alpha0)
    c0 = 1.0 + 0.5 ** a0

    def radial(r):
        r = np.asarray(r, dtype=float)
        rs = np.maximum(r, 0.5)
        psi = 1.0 + rs ** a0
        dpsi = a0 * rs ** (a0 - 1)
        d2psi = a0 * (a0 - 1) * rs ** (a0 - 2)
        S, dS, d2S = smoothstep(2.0 * (r - 0.5))
        val = c0 + S * (psi - c0)
        d1 = 2.0 * dS * (psi - c0) + S * dpsi
        d2 = 4.0 * d2S * (psi - c0) + 4.0 * dS * dpsi + S * d2psi
        return val, d1, d2

    def f(x):
        return radial(np.abs(np.asarray(x, dtype=float)))[0]

    def df(x):
        x = np.asarray(x, dtype=float)
        return np.sign(x) * radial(np.abs(x))[1]

    def d2f(x):
        return radial(np.abs(np.asarray(x, dtype=float)))[2]

    return TestFunction(f, df, d2f, (-1.0, -0.5, 0.5, 1.0), None, (2.0, a0),
                        name=f"lyapunov({a0:g})")


def canonical_test_functions() -> list[TestFunction]:
    """Ten fixed test functions: bumps, a ramp and smooth decaying profiles."""
    return [
        bump(0.0, 1.0), bump(0.0, 3.0), bump(2.0, 1.0), bump(-5.0, 2.0), bump(10.0, 4.0),
        smooth_ramp(2.0), poly_decay(1.0), poly_decay(0.5, 3.0), gaussian(0.0, 1.0),
        bump(0.0, 0.5).combine(bump(4.0, 1.5), 1.0, -2.0),
    ]


# ---------------------------------------------------------------------------
# vectorized one-sided singular integrals

def _side_integral(num: Callable[[np.ndarray, np.ndarray, np.ndarray], np.ndarray],
                   coef2: Callable[[np.ndarray], np.ndarray], xs: np.ndarray, side: float,
                   kinks, alpha: float, decay: float, rtol: float = 1e-11,
                   max_panels: int = 256, strict: bool = True
                   ) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """``int_0^inf num(rows, y, y - x) z^{-1-alpha} dz`` with ``y = x + side z``, per x.

    ``num`` receives the indices of the points it is evaluated for (rows of
    ``y``); ``num ~ coef2(x) z^2`` as ``z -> 0``.  ``kinks`` are abscissae (shared,
    or one row per x) where the numerator loses smoothness.  ``decay`` is
    the power with which the integrand decays at infinity.  Pieces spanning
    a small range of ``z`` are parametrized by the jump target ``y`` itself
    so that far-away points keep full resolution.  Returns the value, the
    quadrature error and the signed Taylor-consistency defect (which largely
    cancels between the two sides).
    """
    xs = np.asarray(xs, dtype=float)
    nx = xs.size
    kinks = np.asarray(kinks, dtype=float)
    if kinks.ndim == 1:
        kinks = np.broadcast_to(kinks, (nx, kinks.size))
    zk = side * (kinks - xs[:, None])
    near = np.where(zk > 1e-9, zk, np.inf).min(axis=1) if zk.shape[1] else np.full(nx, np.inf)
    z0 = np.minimum(TAYLOR_Z0, 0.5 * near)
    # points in z with their exact abscissae
    zcol = np.concatenate([np.maximum(zk, z0[:, None]), z0[:, None]], axis=1)
    ycol = np.concatenate([np.where(zk > z0[:, None], kinks, xs[:, None] + side * z0[:, None]),
                           (xs + side * z0)[:, None]], axis=1)
    # far from the origin distinct kinks can round to one z; order ties by y
    order = np.lexsort((side * ycol, zcol), axis=1)
    pts = np.take_along_axis(zcol, order, axis=1)
    ypt = np.take_along_axis(ycol, order, axis=1)
    lo, hi = np.log(pts[:, :-1]), np.log(pts[:, 1:])
    ya, yb = ypt[:, :-1, None], ypt[:, 1:, None]
    short = (pts[:, 1:] < 4.0 * pts[:, :-1])[:, :, None]
    # short in z but spanning decades of |y|: jumps landing far out on the other side
    with np.errstate(divide="ignore", invalid="ignore"):
        ly_a, ly_b = np.log(np.abs(ya)), np.log(np.abs(yb))
        use_logy = short & (ya * yb > 0) & (np.abs(ly_b - ly_a) > math.log(4.0))
    use_lin = short & ~use_logy
    ly_a, ly_b = np.where(use_logy, ly_a, 0.0), np.where(use_logy, ly_b, 0.0)
    ysign = np.sign(ya)
    t_last = np.log(pts[:, -1])
    scale = 1.0 / max(decay, 1e-3)
    two_a = 2.0 - alpha
    xcol = xs[:, None]

    def level(n, rows):
        edges = np.linspace(0.0, 1.0, n + 1)
        half = 0.5 * np.diff(edges)
        u = ((0.5 * (edges[1:] + edges[:-1]))[:, None] + half[:, None] * _GX).ravel()
        w = (half[:, None] * _GW).ravel()
        uu, ww = u[None, None, :], w[None, None, :]
        xr = xcol[rows]
        lo_r, hi_r = lo[rows][:, :, None], hi[rows][:, :, None]
        ya_r, yb_r = ya[rows], yb[rows]
        lin_r, logy_r = use_lin[rows], use_logy[rows]
        # log-z pieces
        z_log = np.exp(lo_r + (hi_r - lo_r) * uu)
        y_log = xr[:, :, None] + side * z_log
        w_log = (hi_r - lo_r) * ww * z_log
        # linear-in-y pieces
        y_lin = ya_r + (yb_r - ya_r) * uu
        dz_lin = y_lin - xr[:, :, None]
        w_lin = np.abs(yb_r - ya_r) * ww
        # log-|y| pieces
        la, lb = ly_a[rows], ly_b[rows]
        y_ly = ysign[rows] * np.exp(la + (lb - la) * uu)
        w_ly = np.abs(lb - la) * ww * np.abs(y_ly)
        m = rows.size
        y_fin = np.where(lin_r, y_lin, np.where(logy_r, y_ly, y_log)).reshape(m, -1)
        dz_fin = np.where(lin_r, dz_lin,
                          np.where(logy_r, y_ly - xr[:, :, None], side * z_log)).reshape(m, -1)
        w_fin = np.where(lin_r, w_lin, np.where(logy_r, w_ly, w_log)).reshape(m, -1)
        # tail piece: log z = t_last + scale ((1 - u)^-1 - 1)
        om = 1.0 - u
        tau = scale * (1.0 / om - 1.0)
        t_tail = t_last[rows][:, None] + tau[None, :]
        ok = t_tail < 700.0
        z_tail = np.exp(np.minimum(t_tail, 700.0))
        with np.errstate(over="ignore"):
            w_tail = np.where(ok, w[None, :] * (scale / om ** 2)[None, :] * z_tail, 0.0)
        y = np.concatenate([y_fin, xr + side * z_tail], axis=1)
        dz = np.concatenate([dz_fin, side * z_tail], axis=1)
        wz = np.concatenate([w_fin, w_tail], axis=1)
        with np.errstate(over="ignore", invalid="ignore", under="ignore", divide="ignore"):
            vals = num(rows, y, dz) * np.abs(dz) ** (-1.0 - alpha)
        terms = np.where((vals == 0.0) | (wz == 0.0), 0.0, wz * vals)
        if not np.all(np.isfinite(terms)):
            raise QuadDiverged("non-finite values in singular integral")
        return terms.sum(axis=1), np.abs(terms).sum(axis=1)

    # panel doubling per point; converged points drop out
    every = np.arange(nx)
    prev, _ = level(2, every)
    cur, mag = prev.copy(), np.abs(prev)
    err = np.full(nx, np.inf)
    active = every
    n = 2
    while active.size:
        n *= 2
        c, mg = level(n, active)
        e = np.maximum(np.abs(c - prev[active]), 16 * _EPS * mg)
        cur[active], mag[active], err[active] = c, mg, e
        prev[active] = c
        done = e <= rtol * np.maximum(np.abs(c), mg * 1e-3) + 1e-300
        if n >= max_panels:
            bad = e > 1e-6 * np.maximum(np.abs(c), mg) + 1e-300
            if strict and np.any(bad):
                i = int(np.argmax(e / np.maximum(np.abs(c), mg)))
                raise QuadDiverged(
                    "singular integral did not converge under panel doubling at "
                    f"x={xs[active[i]]:.6g}: value {c[i]:.6g}, change {e[i]:.3g}, "
                    f"magnitude {mg[i]:.3g}")
            break
        active = active[~done]
    # closed-form piece on [0, z0], checked against [0, z0/2] in closed form + quadrature
    c2 = coef2(xs)
    taylor = c2 * z0 ** two_a / two_a
    zh = 0.5 * z0
    tq = np.log(zh)[:, None] + math.log(2.0) * (0.5 * (_GX + 1.0))[None, :]
    zq = np.exp(tq)
    wq = (0.5 * _GW)[None, :] * math.log(2.0) * zq
    with np.errstate(invalid="ignore"):
        piece = np.sum(wq * num(every, xcol + side * zq, side * zq) * zq ** (-1.0 - alpha), axis=1)
    defect = c2 * zh ** two_a / two_a + piece - taylor
    return cur + taylor, err + 16 * _EPS * np.abs(taylor), defect


def _both_sides(num, coef, xb, kinks, alpha, decay, rtol, strict=True):
    vp, ep, dp = _side_integral(num, coef, xb, 1.0, kinks, alpha, decay, rtol, strict=strict)
    vm, em, dm = _side_integral(num, coef, xb, -1.0, kinks, alpha, decay, rtol, strict=strict)
    # odd Taylor terms cancel between the sides, so the remainder on [0, z0]
    # scales like z0^{4 - alpha}: extrapolate it from the half-step defect
    defect = dp + dm
    remainder = defect / (1.0 - 2.0 ** (alpha - 4.0))
    return vp + vm + remainder, ep + em + np.abs(defect)


def _batched(fn, xs: np.ndarray):
    """Apply ``fn`` to batches of points grouped by magnitude."""
    xs = np.atleast_1d(np.asarray(xs, dtype=float))
    order = np.argsort(np.abs(xs), kind="stable")
    vals, errs = np.empty_like(xs), np.empty_like(xs)
    for k in range(0, xs.size, _BATCH):
        idx = order[k:k + _BATCH]
        vals[idx], errs[idx] = fn(xs[idx])
    return vals, errs


def carre_values(f: TestFunction, xs, alpha: float, g: TestFunction | None = None,
                 rtol: float = 1e-11, strict: bool = True) -> tuple[np.ndarray, np.ndarray]:
    """``int (f(y)-f(x))(g(y)-g(x)) |y-x|^{-1-alpha} dy`` and error estimates at ``xs``."""
    _check_alpha(alpha)
    g = f if g is None else g
    f.check_growth(alpha, 1)
    g.check_growth(alpha, 1)
    decay = alpha - f.growth[1] - g.growth[1]
    if decay <= 0:
        raise InvalidParam("f g grows too fast for a finite carre du champ")
    kinks = sorted(set(f.breaks) | set(g.breaks))

    def one(xb):
        # seen from far out, a feature of unit width near the origin is a
        # sliver in log z; the decade points and x/2, 2x split it off
        reach = max(1.0, 0.5 * float(np.max(np.abs(xb))))
        feats = _V_FEATURES[np.abs(_V_FEATURES) <= reach]
        pts = np.asarray(sorted(set(kinks) | set(feats.tolist())), dtype=float)
        far = np.abs(xb) > _V_FEATURES[-1]
        cols = [np.broadcast_to(pts, (xb.size, pts.size))]
        if far.any():
            cols += [np.where(far, 0.5 * xb, 0.0)[:, None], np.where(far, 2.0 * xb, 0.0)[:, None]]
        row_kinks = np.concatenate(cols, axis=1)
        fx, gx = f.f(xb)[:, None], g.f(xb)[:, None]

        def num(rows, y, dz):
            return (f.f(y) - fx[rows]) * (g.f(y) - gx[rows])

        def coef(x):
            return f.df(x) * g.df(x)

        return _both_sides(num, coef, xb, row_kinks, alpha, decay, rtol, strict)
    return _batched(one, xs)


def carre(f: TestFunction, x: float, alpha: float) -> QuadResult:
    v, e = carre_values(f, [x], alpha)
    return QuadResult(float(v[0]), float(e[0]), 0)


def generator_values(f: TestFunction, V: Potential, xs, alpha: float, cutoff: float = 1.0,
                     rtol: float = 1e-11, measure: Measure | None = None,
                     strict: bool = True) -> tuple[np.ndarray, np.ndarray]:
    """The generator applied to ``f`` at ``xs`` with compensation radius ``cutoff``.

    Each side uses the compensated integrand
    ``(f(x+z) - f(x) - f'(x) z 1_{|z|<=c}) (1 + E) + f'(x) z 1_{|z|<=c} (E - 1)``
    with ``E = exp(V(x) - V(x+z))``; the compensators cancel between the
    two sides, so the sum does not depend on ``cutoff``.

    With ``measure`` given, returns ``p(x) L f(x)`` for the density ``p``,
    using ``p(x) E = p(x+z)``; this stays finite where ``E`` overflows.
    """
    _check_alpha(alpha)
    if V.dim != 1:
        raise InvalidParam("the generator is implemented for dim 1")
    if not cutoff > 0:
        raise InvalidParam("cutoff must be positive")
    f.check_growth(alpha, 1)
    decay = alpha - f.growth[1]

    def one(xb):
        # features of V only matter for jumps from much farther out
        reach = max(1.0, 0.5 * float(np.max(np.abs(xb))))
        feats = _V_FEATURES[np.abs(_V_FEATURES) <= reach]
        breaks = np.asarray(sorted(set(f.breaks) | set(feats.tolist())), dtype=float)
        fx = f.f(xb)[:, None]
        f1 = f.df(xb)[:, None]
        vx = V.eval1(xb)[:, None]
        px = measure.density(xb)[:, None] if measure is not None else None

        def num(rows, y, dz):
            comp = np.where(np.abs(dz) <= cutoff, f1[rows] * dz, 0.0)
            if px is None:
                with np.errstate(over="ignore"):
                    E = np.exp(vx[rows] - V.eval1(y))
                return (f.f(y) - fx[rows] - comp) * (1.0 + E) + comp * (E - 1.0)
            py, pr = measure.density(y), px[rows]
            return (f.f(y) - fx[rows] - comp) * (pr + py) + comp * (py - pr)

        def coef(x):
            c = f.second(x) - f.df(x) * V.d1(x)
            return c if px is None else c * px[:, 0]

        # kinks of f, features of V and the compensator edges x -+ cutoff, per point;
        # far out, x/2 and 2x separate jumps near x from jumps landing near the
        # origin or where the density has dropped by a fixed factor
        far = np.abs(xb) > _V_FEATURES[-1]
        half = np.where(far, 0.5 * xb, xb - cutoff)
        double = np.where(far, 2.0 * xb, xb + cutoff)
        kinks = np.concatenate([np.broadcast_to(breaks, (xb.size, breaks.size)),
                                (xb - cutoff)[:, None], (xb + cutoff)[:, None],
                                half[:, None], double[:, None]], axis=1)
        return _both_sides(num, coef, xb, kinks, alpha, decay, rtol, strict)

    return _batched(one, xs)


def generator(f: TestFunction, V: Potential, x: float, alpha: float,
              cutoff: float = 1.0) -> QuadResult:
    v, e = generator_values(f, V, [x], alpha, cutoff)
    return QuadResult(float(v[0]), float(e[0]), 0)


def _check_alpha(alpha):
    if not 0.0 < alpha < 2.0:
        raise InvalidParam("alpha must lie in (0, 2)")


# ---------------------------------------------------------------------------
# integrals against the measure

def _x_segments(measure: Measure, breaks: Sequence[float], bounded: tuple[float, float] | None):
    """Segments covering the line (or ``bounded``) split at ``breaks``; (segments, sign) pairs."""
    pts = np.asarray(sorted(set(float(b) for b in breaks) | {0.0}))
    out = []
    if bounded is not None:
        a, b = bounded
        knots = sorted({a, b} | {p for p in pts if a < p < b})
        for lo, hi in zip(knots[:-1], knots[1:]):
            out.append((Segment(lo, hi, "linear"), 1.0))
        return out
    for side in (1.0, -1.0):
        side_pts = np.sort(np.abs(pts[pts * side > 0]))
        for seg in half_line_segments(side_pts, start=0.0, tail_p=measure.quad_spec.tail_p):
            out.append((seg, side))
    return out


def integrate_against(measure: Measure, fn: Callable[[np.ndarray], tuple[np.ndarray, np.ndarray]],
                      breaks: Sequence[float] = (), bounded: tuple[float, float] | None = None,
                      rtol: float = 1e-9, max_panels: int = 64, lebesgue: bool = False) -> QuadResult:
    """``int fn(x) mu(dx)`` where ``fn`` returns values and pointwise error bounds.

    With ``bounded = (a, b)`` the integrand is taken to vanish outside
    ``[a, b]``; with ``lebesgue`` the integral is against ``dx`` (``fn``
    already carries the density).  The reported error adds the outer
    doubling difference and the integrated pointwise errors.
    """
    if measure.dim != 1:
        raise InvalidParam("integration against the measure is implemented for dim 1")
    segs = _x_segments(measure, breaks, bounded)

    def level(n):
        xs, ws = [], []
        for seg, side in segs:
            x, w = seg.rule(n)
            keep = w != 0.0
            xs.append(side * x[keep])
            ws.append(w[keep])
        x = np.concatenate(xs)
        w = np.concatenate(ws)
        if not lebesgue:
            w = w * measure.density(x)
        live = w != 0.0
        v = np.zeros_like(x)
        e = np.zeros_like(x)
        if live.any():
            v[live], e[live] = fn(x[live])
        return float(np.sum(w * v)), float(np.sum(np.abs(w) * e)), float(np.sum(np.abs(w * v)))

    n = 2
    prev, _, _ = level(n)
    while True:
        n *= 2
        cur, perr, mag = level(n)
        err = max(abs(cur - prev), 16 * _EPS * mag)
        if err <= rtol * max(abs(cur), 1e-3 * mag) or n >= max_panels:
            break
        prev = cur
    if err + perr > 1e-4 * max(abs(cur), mag) + 1e-300:
        raise QuadDiverged(f"outer integral did not converge: value {cur:.6g}, "
                           f"change {err:.3g}, pointwise error {perr:.3g}")
    return QuadResult(cur, err + perr, n * len(segs))


def _support_of(*fs: TestFunction) -> tuple[float, float] | None:
    """Interval outside which every f vanishes identically, if known."""
    lo, hi = np.inf, -np.inf
    for f in fs:
        if f.support is None:
            return None
        a, b = f.support
        if abs(float(f.f(np.array([a - 1.0]))[0])) > 0 or abs(float(f.f(np.array([b + 1.0]))[0])) > 0:
            return None
        lo, hi = min(lo, a), max(hi, b)
    return lo, hi


def dirichlet_form(f: TestFunction, g: TestFunction, measure: Measure, alpha: float,
                   rtol: float = 1e-9) -> QuadResult:
    """``int int (f(x)-f(y))(g(x)-g(y)) |x-y|^{-1-alpha} dy mu(dx)``."""
    breaks = sorted(set(f.breaks) | set(g.breaks))
    return integrate_against(measure, lambda xs: carre_values(f, xs, alpha, g, strict=False), breaks,
                             rtol=rtol)


def pairing(f: TestFunction, g: TestFunction, measure: Measure, alpha: float,
            cutoff: float = 1.0, rtol: float = 1e-9) -> QuadResult:
    """``-int f L g dmu``; equals the Dirichlet form for regular f and g."""
    sup = _support_of(f)
    breaks = sorted(set(f.breaks) | set(g.breaks))
    V = measure.potential

    def fn(xs):
        lv, le = generator_values(g, V, xs, alpha, cutoff, measure=measure, strict=False)
        fv = f.f(xs)
        return -fv * lv, np.abs(fv) * le
    return integrate_against(measure, fn, breaks, bounded=sup, rtol=rtol, lebesgue=True)


def drift_functional(f: TestFunction, phi: TestFunction, measure: Measure, alpha: float,
                     rtol: float = 1e-9) -> QuadResult:
    """``int f^2 (-L phi / phi) dmu``, bounded above by the Dirichlet form of f."""
    sup = _support_of(f)
    breaks = sorted(set(f.breaks) | set(phi.breaks))
    V = measure.potential

    def fn(xs):
        lv, le = generator_values(phi, V, xs, alpha, measure=measure, strict=False)
        w = f.f(xs) ** 2 / phi.f(xs)
        return -w * lv, np.abs(w) * le
    return integrate_against(measure, fn, breaks, bounded=sup, rtol=rtol, lebesgue=True)


def check_smoothness(V: Potential, radius: float = 100.0, bound: float = 1e8):
    """Probe that ``exp(-V)`` has bounded second derivatives on ``[-radius, radius]``."""
    x = np.linspace(-radius, radius, 4001)
    d1 = V.d1(x)
    lap = V.lapl(x[:, None]) if V.dim == 1 else None
    with np.errstate(over="ignore", invalid="ignore"):
        e = np.exp(-V.eval1(x))
        second = e * (d1 * d1 - lap)
    if not np.all(np.isfinite(second)) or np.max(np.abs(second)) > bound:
        raise SmoothnessViolation("exp(-V) fails the bounded second-derivative probe")


# ---------------------------------------------------------------------------
# Lyapunov drift

@dataclass(frozen=True)
class LyapunovReport:
    x: np.ndarray
    L_phi: np.ndarray
    est_error: np.ndarray
    Phi: np.ndarray
    ratio: np.ndarray
    r_sweep: np.ndarray
    inf_ratio: np.ndarray  # inf of the ratio over |x| >= r for r in r_sweep
    r0_empirical: float
    sup_inner: float
    alpha0: float
    meta: dict = field(default_factory=dict)

    @property
    def success(self) -> bool:
        return bool(np.isfinite(self.r0_empirical) and np.isfinite(self.sup_inner))

    def rows(self):
        return list(zip(self.x.tolist(), self.L_phi.tolist(), self.Phi.tolist(),
                        self.ratio.tolist()))


def default_alpha0(alpha: float) -> float:
    return 0.5 * min(1.0, alpha)


def lyapunov_check(V: Potential, alpha: float, alpha0: float | None = None,
                   x_grid: Sequence[float] | None = None, profile=None,
                   r_sweep: Sequence[float] | None = None) -> LyapunovReport:
    """Drift ratio ``-L phi / (Phi(|x|) phi)`` of ``phi = 1 + |x|^alpha0`` on a grid.

    ``r0_empirical`` is the smallest sweep radius beyond which the ratio
    stays positive on the grid; ``sup_inner`` is ``max |L phi|`` inside it.
    """
    from .criteria import build_profile
    from .potential import normalize

    _check_alpha(alpha)
    a0 = default_alpha0(alpha) if alpha0 is None else float(alpha0)
    if not 0 < a0 < min(1.0, alpha):
        raise InvalidParam("alpha0 must lie in (0, min(1, alpha))")
    if profile is None:
        profile = build_profile(normalize(V), alpha)
    if not profile.log_phi(-np.inf) > -np.inf:
        raise InvalidParam("the drift check needs Phi(0) > 0")
    x = np.asarray(np.concatenate([-np.geomspace(200, 0.1, 40), [0.0], np.geomspace(0.1, 200, 40)])
                   if x_grid is None else x_grid, dtype=float)
    phi = lyapunov_function(a0)
    lv, le = generator_values(phi, V, x, alpha)
    Phi = np.array([profile.Phi(abs(float(xi))) for xi in x])
    ratio = -lv / (Phi * phi.f(x))
    rs = np.asarray(np.geomspace(0.5, max(1.0, np.abs(x).max()), 24) if r_sweep is None
                    else r_sweep, dtype=float)
    inf_ratio = np.array([ratio[np.abs(x) >= r].min() if np.any(np.abs(x) >= r) else np.inf
                          for r in rs])
    ok = np.nonzero(inf_ratio > 0)[0]
    r0 = np.inf
    if ok.size:
        # smallest r such that every larger sweep radius also has a positive ratio
        tail_ok = np.flip(np.logical_and.accumulate(np.flip(inf_ratio > 0)))
        idx = np.nonzero(tail_ok)[0]
        r0 = float(rs[idx[0]]) if idx.size else np.inf
    inner = np.abs(x) <= (r0 if np.isfinite(r0) else np.abs(x).max())
    sup_inner = float(np.max(np.abs(lv[inner]))) if inner.any() else 0.0
    return LyapunovReport(x, lv, le, Phi, ratio, rs, inf_ratio, r0, sup_inner, a0,
                          {"alpha": alpha, "potential": V.describe()})
