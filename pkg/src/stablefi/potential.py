"""Potentials ``V`` on R^d and the probability measures ``exp(-V) dx / Z``.

Built-in families are radial and written as ``V(x) = F(|x|^2)`` so that
``grad V = 2 F'(s) x`` and ``lap V = 2 d F'(s) + 4 s F''(s)`` are exact.
Each family also evaluates ``V`` directly from the log-radius ``t = log|x|``
without forming ``|x|``; generalized inverses of the criterion functions
routinely land at radii such as ``exp(5e4)``.
"""
from __future__ import annotations

import ast
import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, Sequence

import numpy as np
from scipy import optimize
from scipy.special import gammaln

from .errors import InvalidParam, NonIntegrable
from .quad import QuadResult, Segment, half_line_segments, integrate


class Family(str, Enum):
    POLY_TAIL = "poly_tail"
    POLY_LOG_TAIL = "poly_log_tail"
    HEAVY_LOG_TAIL = "heavy_log_tail"
    STRETCHED_LOG = "stretched_log"
    SUB_GAUSSIAN = "sub_gaussian"
    CUSTOM = "custom"


FAMILY_ALIASES = {
    "polytail": Family.POLY_TAIL, "poly_tail": Family.POLY_TAIL,
    "polylogtail": Family.POLY_LOG_TAIL, "poly_log_tail": Family.POLY_LOG_TAIL,
    "heavylogtail": Family.HEAVY_LOG_TAIL, "heavy_log_tail": Family.HEAVY_LOG_TAIL,
    "stretchedlog": Family.STRETCHED_LOG, "stretched_log": Family.STRETCHED_LOG,
    "subgaussian": Family.SUB_GAUSSIAN, "sub_gaussian": Family.SUB_GAUSSIAN,
    "custom": Family.CUSTOM,
}


def log_sphere_area(d: int) -> float:
    """log of the surface area of the unit sphere in R^d (2 for d = 1)."""
    return math.log(2.0) + 0.5 * d * math.log(math.pi) - gammaln(0.5 * d)


def _log1p_sq(t):
    """log(1 + e^{2t}), stable for any t."""
    return np.logaddexp(0.0, 2.0 * t)


def _loglog_e_sq(t):
    """log log(e + e^{2t})."""
    return np.log(np.logaddexp(1.0, 2.0 * t))


# ---------------------------------------------------------------------------
# radial profiles F(s), s = |x|^2, with F', F'' and a log-radius evaluator

@dataclass(frozen=True)
class _Profile:
    F: Callable
    dF: Callable
    sd2F: Callable  # s * F''(s), kept separate to stay finite at s = 0
    F_logr: Callable
    lead: float = 0.0  # F = lead log(1 + s) + loglog log log(e + s) when lead != 0
    loglog: float = 0.0


def _poly_log_profile(a: float, eps: float) -> _Profile:
    e = math.e

    def F(s):
        out = a * np.log1p(s)
        return out + eps * np.log(np.log(e + s)) if eps != 0.0 else out

    def dF(s):
        m = np.log(e + s)
        return a / (1.0 + s) + eps / ((e + s) * m)

    def sd2F(s):
        m = np.log(e + s)
        return s * (-a / (1.0 + s) ** 2 - eps * (m + 1.0) / ((e + s) ** 2 * m ** 2))

    def F_logr(t):
        out = a * _log1p_sq(t)
        return out + eps * _loglog_e_sq(t) if eps != 0.0 else out

    return _Profile(F, dF, sd2F, F_logr, lead=a, loglog=eps)


def _stretched_log_profile(eps: float) -> _Profile:
    k = 1.0 + eps

    def F(s):
        return np.log1p(s) ** k

    def dF(s):
        return k * np.log1p(s) ** eps / (1.0 + s)

    def sd2F(s):
        s = np.asarray(s, dtype=float)
        L = np.log1p(s)
        with np.errstate(divide="ignore", invalid="ignore"):
            ratio = np.where(s > 0, s / np.where(L > 0, L, 1.0), 1.0)  # s/L -> 1 at 0
        return k * ratio * L ** eps * (eps - L) / (1.0 + s) ** 2

    def F_logr(t):
        return _log1p_sq(t) ** k

    return _Profile(F, dF, sd2F, F_logr)


def _sub_gaussian_profile(eps: float) -> _Profile:
    def F(s):
        return (1.0 + s) ** eps

    def dF(s):
        return eps * (1.0 + s) ** (eps - 1.0)

    def sd2F(s):
        return s * eps * (eps - 1.0) * (1.0 + s) ** (eps - 2.0)

    def F_logr(t):
        with np.errstate(over="ignore"):
            return np.exp(eps * _log1p_sq(t))

    return _Profile(F, dF, sd2F, F_logr)


# ---------------------------------------------------------------------------
# expression grammar for custom potentials

_FUNCS = {"log": np.log, "exp": np.exp, "sqrt": np.sqrt, "abs": np.abs, "pow": np.power}
_CONSTS = {"pi": math.pi, "e": math.e}
_BINOPS = {ast.Add: np.add, ast.Sub: np.subtract, ast.Mult: np.multiply,
           ast.Div: np.divide, ast.Pow: np.power}


def parse_expression(text: str, dim: int) -> tuple[Callable[[np.ndarray], np.ndarray], bool]:
    """Compile an arithmetic expression in ``|x|`` (alias ``r``) and ``x1..xd``.

    Supported: numbers, ``+ - * / ^ **``, unary minus, ``log exp sqrt abs
    pow`` and the constants ``pi`` and ``e``.  Returns the evaluator (taking
    points of shape ``(..., dim)``) and whether only ``|x|`` occurs.
    """
    src = text.replace("|x|", "r").replace("^", "**").replace("×", "*").replace("÷", "/")
    src = src.replace("−", "-")
    try:
        tree = ast.parse(src, mode="eval")
    except SyntaxError as exc:
        raise InvalidParam(f"cannot parse potential expression {text!r}: {exc.msg}") from None
    coords = {f"x{i + 1}": i for i in range(dim)}
    used: set[str] = set()

    def build(node):
        if isinstance(node, ast.Expression):
            return build(node.body)
        if isinstance(node, ast.Constant) and isinstance(node.value, (int, float)):
            v = float(node.value)
            return lambda env: v
        if isinstance(node, ast.Name):
            name = node.id
            if name in _CONSTS:
                v = _CONSTS[name]
                return lambda env: v
            if name == "r" or name in coords:
                used.add(name)
                return lambda env: env[name]
            raise InvalidParam(f"unknown symbol {name!r} in potential expression")
        if isinstance(node, ast.UnaryOp) and isinstance(node.op, (ast.USub, ast.UAdd)):
            inner = build(node.operand)
            sign = -1.0 if isinstance(node.op, ast.USub) else 1.0
            return lambda env: sign * inner(env)
        if isinstance(node, ast.BinOp) and type(node.op) in _BINOPS:
            op = _BINOPS[type(node.op)]
            lhs, rhs = build(node.left), build(node.right)
            return lambda env: op(lhs(env), rhs(env))
        if (isinstance(node, ast.Call) and isinstance(node.func, ast.Name)
                and node.func.id in _FUNCS and not node.keywords):
            fn = _FUNCS[node.func.id]
            nargs = 2 if node.func.id == "pow" else 1
            if len(node.args) != nargs:
                raise InvalidParam(f"{node.func.id} takes {nargs} argument(s)")
            args = [build(a) for a in node.args]
            return lambda env: fn(*(a(env) for a in args))
        raise InvalidParam(f"unsupported construct in potential expression: {ast.dump(node)[:40]}")

    body = build(tree)

    def evaluate(x):
        x = np.asarray(x, dtype=float)
        env = {"r": np.linalg.norm(x, axis=-1)}
        for name, i in coords.items():
            env[name] = x[..., i]
        with np.errstate(all="ignore"):
            out = body(env)
        return np.broadcast_to(np.asarray(out, dtype=float), x.shape[:-1]).copy()

    return evaluate, not (used - {"r"})


# ---------------------------------------------------------------------------

class Potential:
    """A potential ``V`` on R^d.

    Points are arrays of shape ``(..., dim)``; for ``dim == 1`` a bare array
    of abscissae is accepted as well.  ``radial`` asserts that ``V`` depends
    on ``|x|`` only and is nondecreasing in ``|x|``.
    """

    def __init__(self, family: Family, dim: int, *, eps: float | None = None,
                 alpha: float | None = None, radial: bool = True,
                 func: Callable | None = None, grad: Callable | None = None,
                 lapl: Callable | None = None, expr: str | None = None,
                 profile: _Profile | None = None, seed: int = 0):
        self.family = Family(family)
        self.dim = int(dim)
        self.eps = eps
        self.alpha = alpha
        self.radial = bool(radial)
        self.expr = expr
        self.seed = seed
        self._profile = profile
        self._func = func
        self._grad = grad
        self._lapl = lapl

    # -- constructors ------------------------------------------------------
    @classmethod
    def poly_tail(cls, eps: float, dim: int = 1) -> "Potential":
        """``((d + eps)/2) log(1 + |x|^2)``, eps > 0."""
        _check_dim(dim)
        if not eps > 0:
            raise InvalidParam("poly_tail requires eps > 0")
        a = 0.5 * (dim + eps)
        return cls(Family.POLY_TAIL, dim, eps=eps, profile=_poly_log_profile(a, 0.0))

    @classmethod
    def poly_log_tail(cls, eps: float, alpha: float, dim: int = 1) -> "Potential":
        """``((d + alpha)/2) log(1 + |x|^2) + eps log log(e + |x|^2)``, any real eps."""
        _check_dim(dim)
        _check_alpha(alpha)
        a = 0.5 * (dim + alpha)
        return cls(Family.POLY_LOG_TAIL, dim, eps=eps, alpha=alpha,
                   profile=_poly_log_profile(a, eps), radial=eps >= -a)

    @classmethod
    def heavy_log_tail(cls, eps: float, dim: int = 1) -> "Potential":
        """``(d/2) log(1 + |x|^2) + eps log log(e + |x|^2)``; integrable only for eps > 1."""
        _check_dim(dim)
        return cls(Family.HEAVY_LOG_TAIL, dim, eps=eps,
                   profile=_poly_log_profile(0.5 * dim, eps), radial=eps >= -0.5 * dim)

    @classmethod
    def stretched_log(cls, eps: float, dim: int = 1) -> "Potential":
        _check_dim(dim)
        if not eps > 0:
            raise InvalidParam("stretched_log requires eps > 0")
        return cls(Family.STRETCHED_LOG, dim, eps=eps, profile=_stretched_log_profile(eps))

    @classmethod
    def sub_gaussian(cls, eps: float, dim: int = 1) -> "Potential":
        _check_dim(dim)
        if not eps > 0:
            raise InvalidParam("sub_gaussian requires eps > 0")
        return cls(Family.SUB_GAUSSIAN, dim, eps=eps, profile=_sub_gaussian_profile(eps))

    @classmethod
    def custom(cls, func: Callable | str, dim: int = 1, *, radial: bool | None = None,
               grad: Callable | None = None, lapl: Callable | None = None,
               seed: int = 0) -> "Potential":
        """User potential from a callable on points ``(..., dim)`` or an expression.

        Missing ``grad``/``lapl`` fall back to central differences with step
        ``1e-5 (1 + |x|)``.  A ``radial=True`` claim is checked on a scan.
        """
        _check_dim(dim)
        expr = None
        if isinstance(func, str):
            expr = func
            func, only_r = parse_expression(func, dim)
            if radial is None:
                radial = only_r
        pot = cls(Family.CUSTOM, dim, radial=bool(radial), func=func, grad=grad,
                  lapl=lapl, expr=expr, seed=seed)
        if pot.radial:
            pot._check_radial_claim()
        return pot

    @classmethod
    def from_family(cls, family: str | Family, eps: float | None = None, dim: int = 1,
                    alpha: float | None = None, **kw) -> "Potential":
        fam = FAMILY_ALIASES.get(str(getattr(family, "value", family)).lower().replace("-", "_"))
        if fam is None:
            raise InvalidParam(f"unknown potential family {family!r}")
        if fam is Family.CUSTOM:
            return cls.custom(kw.pop("expr"), dim, **kw)
        if eps is None:
            raise InvalidParam(f"family {fam.value} needs eps")
        if fam is Family.POLY_LOG_TAIL:
            if alpha is None:
                raise InvalidParam("poly_log_tail needs alpha (its leading coefficient uses it)")
            return cls.poly_log_tail(eps, alpha, dim)
        return {Family.POLY_TAIL: cls.poly_tail, Family.HEAVY_LOG_TAIL: cls.heavy_log_tail,
                Family.STRETCHED_LOG: cls.stretched_log,
                Family.SUB_GAUSSIAN: cls.sub_gaussian}[fam](eps, dim)

    def describe(self) -> dict:
        out = {"family": self.family.value, "dim": self.dim, "radial": self.radial}
        if self.eps is not None:
            out["eps"] = float(self.eps)
        if self.alpha is not None:
            out["alpha"] = float(self.alpha)
        if self.expr is not None:
            out["expr"] = self.expr
        return out

    def __repr__(self):
        return f"Potential({', '.join(f'{k}={v!r}' for k, v in self.describe().items())})"

    # -- evaluation --------------------------------------------------------
    def _points(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if self.dim == 1 and (x.ndim == 0 or x.shape[-1] != 1):
            x = x[..., None]
        if x.shape[-1] != self.dim:
            raise InvalidParam(f"points must have trailing dimension {self.dim}")
        return x

    def __call__(self, x) -> np.ndarray:
        return self.eval(x)

    def eval(self, x) -> np.ndarray:
        x = self._points(x)
        if self._profile is not None:
            s = np.sum(x * x, axis=-1)
            big = s > 1e300
            if np.any(big):
                with np.errstate(divide="ignore"):
                    t = np.log(np.linalg.norm(x, axis=-1))
                return np.where(big, self._profile.F_logr(t), self._profile.F(np.where(big, 0.0, s)))
            return self._profile.F(s)
        return np.asarray(self._func(x), dtype=float)

    def grad(self, x) -> np.ndarray:
        """Gradient, shape ``(..., dim)``."""
        x = self._points(x)
        if self._profile is not None:
            return 2.0 * self._profile.dF(np.sum(x * x, axis=-1))[..., None] * x
        if self._grad is not None:
            return np.asarray(self._grad(x), dtype=float)
        h = 1e-5 * (1.0 + np.linalg.norm(x, axis=-1))
        out = np.empty(x.shape)
        for i in range(self.dim):
            e = np.zeros(self.dim)
            e[i] = 1.0
            step = h[..., None] * e
            out[..., i] = (self.eval(x + step) - self.eval(x - step)) / (2.0 * h)
        return out

    def lapl(self, x) -> np.ndarray:
        x = self._points(x)
        if self._profile is not None:
            s = np.sum(x * x, axis=-1)
            return 2.0 * self.dim * self._profile.dF(s) + 4.0 * self._profile.sd2F(s)
        if self._lapl is not None:
            return np.asarray(self._lapl(x), dtype=float)
        h = 1e-4 * (1.0 + np.linalg.norm(x, axis=-1))
        v0 = self.eval(x)
        out = np.zeros(x.shape[:-1])
        for i in range(self.dim):
            e = np.zeros(self.dim)
            e[i] = 1.0
            step = h[..., None] * e
            out += (self.eval(x + step) - 2.0 * v0 + self.eval(x - step)) / h ** 2
        return out

    def eval1(self, x) -> np.ndarray:
        """``V`` on an array of abscissae of any shape (dim 1)."""
        if self.dim != 1:
            raise InvalidParam("eval1 is for dim 1")
        return self.eval(np.asarray(x, dtype=float)[..., None])

    def d1(self, x) -> np.ndarray:
        """``V'(x)`` for ``dim == 1`` on a bare array of abscissae."""
        return self.grad(np.asarray(x, dtype=float)[..., None])[..., 0]

    @property
    def v0(self) -> float:
        return float(self.eval(np.zeros(self.dim)))

    # -- radial views (log-radius t = log|x|) ------------------------------
    def v_logr(self, t) -> np.ndarray:
        """``V`` on the sphere of radius ``exp(t)`` (radial potentials)."""
        t = np.asarray(t, dtype=float)
        if self._profile is not None:
            return self._profile.F_logr(t)
        rho = np.exp(np.minimum(t, 700.0))
        pts = np.zeros(t.shape + (self.dim,))
        pts[..., 0] = rho
        with np.errstate(all="ignore"):
            v = self.eval(pts)
        return np.where(t > 700.0, np.inf, v)

    def v_minus_log1p_logr(self, t, c: float) -> np.ndarray:
        """``V - c log(1 + |x|^2)`` at radius ``exp(t)`` without cancellation."""
        t = np.asarray(t, dtype=float)
        p = self._profile
        if p is not None and p.lead != 0.0:
            return (p.lead - c) * _log1p_sq(t) + p.loglog * _loglog_e_sq(t)
        with np.errstate(invalid="ignore"):
            return self.v_logr(t) - c * _log1p_sq(t)

    def sphere_extrema_logr(self, t) -> tuple[np.ndarray, np.ndarray]:
        """(min, max) of ``V`` over the sphere of radius ``exp(t)``."""
        t = np.atleast_1d(np.asarray(t, dtype=float))
        if self.radial:
            v = self.v_logr(t)
            return v, v
        rho = np.exp(np.minimum(t, 700.0))
        if self.dim == 1:
            vp, vm = self.eval(rho[:, None]), self.eval(-rho[:, None])
            return np.minimum(vp, vm), np.maximum(vp, vm)
        return _multistart_sphere(self, rho)

    def log_shell_density_logr(self, t) -> np.ndarray:
        """log of the spherical mean of ``exp(-V)`` at radius ``exp(t)``."""
        t = np.asarray(t, dtype=float)
        if self.radial or self._profile is not None:
            return -self.v_logr(t)
        rho = np.exp(np.minimum(t, 700.0))
        dirs, wts = _sphere_rule(self.dim)
        pts = rho[..., None, None] * dirs
        with np.errstate(all="ignore"):
            v = self.eval(pts)
        vmin = np.min(v, axis=-1)
        with np.errstate(all="ignore"):
            out = -vmin + np.log(np.sum(wts * np.exp(-(v - vmin[..., None])), axis=-1))
        return np.where((t > 700.0) | ~np.isfinite(vmin), -np.inf, out)

    def _check_radial_claim(self, n_dir: int = 20):
        rng = np.random.default_rng(self.seed)
        radii = np.concatenate([[0.0], np.geomspace(1e-3, 1e3, 200)])
        dirs = rng.normal(size=(n_dir, self.dim))
        dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
        vals = self.eval(radii[None, :, None] * dirs[:, None, :])
        scale = 1e-9 * (1.0 + np.abs(vals))
        if np.any(np.diff(vals, axis=1) < -scale[:, 1:]):
            raise InvalidParam("radial flag set but V is not nondecreasing in |x|")
        if np.ptp(vals, axis=0).max() > 1e-9 * (1.0 + np.abs(vals).max()):
            raise InvalidParam("radial flag set but V depends on the direction")


def _check_dim(dim):
    if int(dim) != dim or dim < 1:
        raise InvalidParam("dimension must be a positive integer")


def _check_alpha(alpha):
    if not (0.0 < alpha < 2.0):
        raise InvalidParam("alpha must lie in (0, 2)")


def _sphere_rule(d: int) -> tuple[np.ndarray, np.ndarray]:
    """Directions and weights averaging over the unit sphere (d <= 3)."""
    if d == 1:
        return np.array([[1.0], [-1.0]]), np.array([0.5, 0.5])
    if d == 2:
        th = 2 * np.pi * np.arange(64) / 64
        return np.stack([np.cos(th), np.sin(th)], -1), np.full(64, 1 / 64)
    if d == 3:
        c, wc = np.polynomial.legendre.leggauss(16)
        ph = 2 * np.pi * np.arange(32) / 32
        cc, pp = np.meshgrid(c, ph, indexing="ij")
        s = np.sqrt(1 - cc ** 2)
        dirs = np.stack([s * np.cos(pp), s * np.sin(pp), cc], -1).reshape(-1, 3)
        w = (wc[:, None] / 2 / 32 * np.ones(32)).ravel()
        return dirs, w
    raise InvalidParam("non-radial potentials are supported for dim <= 3 only")


def _multistart_sphere(pot: Potential, rho: np.ndarray, starts: int = 64):
    """Min and max of V on spheres via multistart search plus local refinement."""
    rng = np.random.default_rng(pot.seed)
    dirs = rng.normal(size=(starts, pot.dim))
    dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
    vmin = np.empty(rho.shape)
    vmax = np.empty(rho.shape)
    for k, r in enumerate(rho):
        vals = pot.eval(r * dirs)
        best = []
        for sign, idx in ((1.0, np.argmin(vals)), (-1.0, np.argmax(vals))):
            def obj(u, sign=sign, r=r):
                nu = np.linalg.norm(u)
                return sign * float(pot.eval(r * u / max(nu, 1e-300)))
            res = optimize.minimize(obj, dirs[idx], method="Nelder-Mead",
                                    options={"xatol": 1e-8, "fatol": 1e-12, "maxiter": 400})
            best.append(sign * min(res.fun, obj(dirs[idx])))
        vmin[k], vmax[k] = best
    return vmin, vmax


# ---------------------------------------------------------------------------
# measures

@dataclass(frozen=True)
class QuadSpec:
    panels: int = 4
    cutoff: float = 1.0  # radius splitting the core from the tail map
    tail_p: float = 1.0  # exponent of the (1 - u)^(-p) tail substitution


@dataclass(frozen=True)
class Measure:
    potential: Potential
    z_const: float
    quad_spec: QuadSpec = field(default_factory=QuadSpec)
    z_error: float = 0.0

    @property
    def dim(self) -> int:
        return self.potential.dim

    def _v(self, x):
        pot = self.potential
        return pot.eval1(x) if pot.dim == 1 else pot.eval(x)

    def density(self, x) -> np.ndarray:
        """``exp(-V) / Z``; in dim 1 ``x`` is an array of abscissae."""
        with np.errstate(over="ignore", under="ignore"):
            return np.exp(-self._v(x)) / self.z_const

    def log_density(self, x) -> np.ndarray:
        return -self._v(x) - math.log(self.z_const)

    # -- radial integrals ----------------------------------------------------
    def _outer_mass(self, t0: float) -> QuadResult:
        """Unnormalized mass of ``{|x| > exp(t0)}`` for ``t0 >= log cutoff``."""
        return _radial_tail(self.potential, t0, self.quad_spec)

    def tail_mass_logr(self, t: float) -> float:
        """``mu(|x| > exp(t))``."""
        if t == -np.inf:
            return 1.0
        t_cut = math.log(self.quad_spec.cutoff)
        if t >= t_cut:
            return min(1.0, self._outer_mass(t).value / self.z_const)
        inner = _radial_core(self.potential, math.exp(t), self.quad_spec.cutoff, self.quad_spec)
        total = inner.value + self._outer_mass(t_cut).value
        return min(1.0, total / self.z_const)

    def tail_mass(self, R: float) -> float:
        """``mu(|x| > R)``."""
        if R < 0:
            raise InvalidParam("tail_mass needs R >= 0")
        if R == 0:
            return 1.0
        if R == np.inf:
            return 0.0
        return self.tail_mass_logr(math.log(R))

    def ball_mass(self, R: float) -> float:
        """``mu(|x| <= R)``, computed directly for small balls."""
        if R <= 0:
            return 0.0
        if R <= self.quad_spec.cutoff:
            return _radial_core(self.potential, 0.0, R, self.quad_spec).value / self.z_const
        return 1.0 - self.tail_mass(R)

    # -- one-dimensional expectations ---------------------------------------
    def side_tail(self, B: float, side: int = 1) -> float:
        """``mu(x > B)`` (side=+1) or ``mu(x < -B)`` (side=-1) for dim 1, ``B >= 0``."""
        pot = self.potential
        if pot.radial or pot._profile is not None:
            return 0.5 * self.tail_mass(B)
        segs = half_line_segments([B], start=B, tail_p=self.quad_spec.tail_p)
        res = integrate(lambda x: self.density(side * x), segs, rtol=1e-12, atol=1e-300)
        return res.value

    def expect(self, fun: Callable[[np.ndarray], np.ndarray], breaks: Sequence[float] = (),
               const_tails: tuple[float, float] | None = None, rtol: float = 1e-11,
               max_panels: int = 512) -> QuadResult:
        """``int fun(x) mu(dx)`` over the real line (dim 1).

        ``breaks`` are abscissae where ``fun`` loses smoothness.  When
        ``const_tails = (c_minus, c_plus)`` the integrand beyond the extreme
        breakpoints is taken as that constant and its exact tail mass is
        used instead of quadrature.
        """
        if self.dim != 1:
            raise InvalidParam("expect() is implemented for dim 1")
        pts = np.asarray(sorted(set(float(b) for b in breaks) | {0.0}))
        res = QuadResult(0.0, 0.0, 0)
        for side in (1, -1):
            side_pts = np.sort(np.abs(pts[pts * side > 0]))
            def g(x, s=side):
                dens = self.density(s * x)
                with np.errstate(all="ignore"):
                    return np.where(dens == 0.0, 0.0, fun(s * x) * dens)
            if const_tails is not None and side_pts.size:
                B = float(side_pts[-1])
                segs = half_line_segments(side_pts, start=0.0, core=min(1.0, B))
                segs = [s for s in segs if s.kind not in ("tail", "logtail")]
                part = integrate(g, segs, rtol=rtol, atol=1e-300, max_panels=max_panels)
                c = const_tails[1 if side > 0 else 0]
                tail = c * self.side_tail(B, side)
                res = res + part + QuadResult(tail, abs(tail) * 1e-12, 0)
            else:
                segs = half_line_segments(side_pts, start=0.0, tail_p=self.quad_spec.tail_p)
                res = res + integrate(g, segs, rtol=rtol, atol=1e-300, max_panels=max_panels)
        return res


def _log_integrand(pot: Potential):
    lsa = log_sphere_area(pot.dim)
    d = pot.dim

    def f(t):
        with np.errstate(over="ignore", invalid="ignore"):
            if pot._profile is not None:
                # d t - V = -(d/2) log(1 + e^{-2t}) - (V - (d/2) log(1 + e^{2t}))
                w = (lsa - 0.5 * d * np.log1p(np.exp(-2.0 * t))
                     - pot.v_minus_log1p_logr(t, 0.5 * d))
            else:
                w = lsa + d * t + pot.log_shell_density_logr(t)
            return np.where(np.isnan(w), 0.0, np.exp(w))
    return f


def _radial_tail(pot: Potential, t0: float, spec: QuadSpec) -> QuadResult:
    seg = Segment(t0, kind="tail", q=spec.tail_p, scale=1.0)
    return integrate(_log_integrand(pot), [seg], rtol=1e-12, atol=1e-300,
                     panels=spec.panels, max_panels=4096)


def _radial_core(pot: Potential, a: float, b: float, spec: QuadSpec) -> QuadResult:
    lsa = log_sphere_area(pot.dim)
    d = pot.dim

    def f(rho):
        with np.errstate(divide="ignore"):
            t = np.log(rho)
            w = lsa + (d - 1) * t + pot.log_shell_density_logr(t)
        return np.exp(w)
    return integrate(f, [Segment(a, b, "linear")], rtol=1e-12, atol=1e-300,
                     panels=spec.panels, max_panels=4096)


def _tail_decay_exponent(pot: Potential) -> float:
    """Power of ``t`` with which the log-radius mass integrand decays.

    ``inf`` signals faster than any power (every polynomial-tail family).
    """
    f = _log_integrand(pot)
    stable = pot._profile is not None
    t1, t2 = (1e3, 1e4) if stable else (100.0, 200.0)
    with np.errstate(divide="ignore"):
        w1, w2 = np.log(f(np.array([t1, t2])))
    if w2 == -np.inf:
        return np.inf
    if not (np.isfinite(w1) and np.isfinite(w2)):
        return 0.0
    return float(-(w2 - w1) / math.log(t2 / t1))


def normalize(potential: Potential, quad_spec: QuadSpec | None = None) -> Measure:
    """Normalize ``exp(-V)`` into a probability measure.

    Raises :class:`NonIntegrable` when the radial tail of ``exp(-V)`` decays
    no faster than ``|x|^-d (log|x|)^-1`` or does not decrease under radius
    doubling.
    """
    gamma = _tail_decay_exponent(potential)
    if not gamma > 1.0 + 1e-6:
        raise NonIntegrable(f"exp(-V) tail decays like (log r)^-{gamma:.3g}; not integrable")
    if quad_spec is None:
        p = 1.0 if gamma > 50 else min(40.0, max(1.0, 2.0 / (gamma - 1.0)))
        quad_spec = QuadSpec(tail_p=p)
    t_cut = math.log(quad_spec.cutoff)
    core = _radial_core(potential, 0.0, quad_spec.cutoff, quad_spec)
    outer = _radial_tail(potential, t_cut, quad_spec)
    z = core.value + outer.value
    if not (np.isfinite(z) and z > 0):
        raise NonIntegrable("normalizing constant is not finite and positive")
    # tail must shrink under radius doubling
    tails = [_radial_tail(potential, t_cut + k * math.log(2.0), quad_spec).value
             for k in (4, 5, 6)]
    if not (tails[0] >= tails[1] >= tails[2] and (tails[2] < tails[0] or tails[0] == 0.0)):
        raise NonIntegrable("tail integral does not decay under radius doubling")
    return Measure(potential, z, quad_spec, core.est_error + outer.est_error)
