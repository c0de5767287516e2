"""Finite-window discretization of the weighted jump form and its spectrum.

Functions are represented by their values at cell midpoints.  The form
``Q(f) = sum_i mu_i sum_j (f_i - f_j)^2 k_ij`` uses point-to-cell jump rates
``k_ij`` from node ``i`` into cell ``j`` (closed form for nearby cells,
midpoint rule far away) plus a correction for the jumps that stay inside a
cell, which is expressed through neighbour differences so the matrix keeps
the structure of a Markov generator.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy import linalg, optimize

from .criteria import RateCurve, build_profile
from .errors import GridTooCoarse, InvalidParam, SolverFailure
from .nonlocal_form import TestFunction, bump
from .potential import Measure
from .quad import GL_ORDER

_GX, _GW = np.polynomial.legendre.leggauss(GL_ORDER)
# cells closer than this many widths use the closed-form kernel integral
NEAR_CELLS = 4.0
# largest admissible ratio of neighbouring cell widths
MAX_WIDTH_RATIO = 1.5
# largest admissible variation of log-density across one cell
MAX_LOG_DENSITY_STEP = 1.0


class BoundaryMode(str, enum.Enum):
    CENSORED = "censored"
    KILLED = "killed"


@dataclass(frozen=True, eq=False)
class FormMatrix:
    edges: np.ndarray
    nodes: np.ndarray
    widths: np.ndarray
    mu_w: np.ndarray
    rates: np.ndarray  # k_ij, point-to-cell jump rates with in-cell correction
    kernel_w: np.ndarray  # symmetric K_ij = (w_i k_ij + w_j k_ji) / 2
    alpha: float
    mode: BoundaryMode = BoundaryMode.CENSORED
    kill_w: np.ndarray | None = None
    meta: dict = field(default_factory=dict)

    @property
    def n(self) -> int:
        return self.nodes.size

    @property
    def R(self) -> float:
        return float(self.edges[-1])

    def stiffness(self) -> np.ndarray:
        """Symmetric matrix ``S`` with ``Q(f) = f^T S f``."""
        flux = self.mu_w[:, None] * self.rates
        sym = 0.5 * (flux + flux.T)
        S = -2.0 * sym
        np.fill_diagonal(S, 0.0)
        np.fill_diagonal(S, -S.sum(axis=1))
        if self.mode == BoundaryMode.KILLED:
            S[np.diag_indices_from(S)] += self.mu_w * self.kill_w
        return S

    def generator(self) -> np.ndarray:
        """The mu-weighted generator ``A = M^{-1} S`` (nonnegative spectrum)."""
        return self.stiffness() / self.mu_w[:, None]

    def quadratic_form(self, f) -> float:
        f = np.asarray(f, dtype=float)
        diff2 = (f[:, None] - f[None, :]) ** 2
        q = float(np.sum(self.mu_w[:, None] * self.rates * diff2))
        if self.mode == BoundaryMode.KILLED:
            q += float(np.sum(self.mu_w * self.kill_w * f * f))
        return q

    def mean(self, f) -> float:
        return float(np.dot(self.mu_w, f) / self.mu_w.sum())

    def center(self, f) -> np.ndarray:
        f = np.asarray(f, dtype=float)
        return f - self.mean(f)

    def norm2(self, f) -> float:
        f = np.asarray(f, dtype=float)
        return float(np.dot(self.mu_w, f * f))

    def sample(self, fn: TestFunction | Callable) -> np.ndarray:
        return np.asarray(fn(self.nodes), dtype=float)


def default_edges(R: float, n: int, core_fraction: float = 0.75) -> np.ndarray:
    """Uniform cells on ``[-R/2, R/2]``, geometrically growing cells out to ``+-R``."""
    m = max(1, int(round(0.5 * (1.0 - core_fraction) * n)))
    n_core = n - 2 * m
    if n_core < 2:
        raise InvalidParam("grid too small for a core and stretched outer cells")
    core = np.linspace(-0.5 * R, 0.5 * R, n_core + 1)
    h = R / n_core
    span = 0.5 * R
    if h * m >= span:
        widths = np.full(m, span / m)
    else:
        q = optimize.brentq(lambda q: h * (q ** m - 1.0) / (q - 1.0) - span, 1.0 + 1e-12, 4.0)
        widths = h * q ** np.arange(1, m + 1)
        widths *= span / widths.sum()
    outer = 0.5 * R + np.cumsum(widths)
    outer[-1] = R
    return np.concatenate([-outer[::-1], core, outer])


def default_window(measure: Measure, tail: float = 1e-3) -> float:
    """Smallest ``R`` (to 1%) with ``mu(|x| > R) < tail``."""
    lo, hi = 0.0, 1.0
    while measure.tail_mass(hi) >= tail:
        lo, hi = hi, 2.0 * hi
        if hi > 1e12:
            raise InvalidParam("window for the requested tail mass exceeds 1e12")
    while hi - lo > 0.01 * hi:
        mid = 0.5 * (lo + hi)
        if measure.tail_mass(mid) < tail:
            hi = mid
        else:
            lo = mid
    return hi


def _cell_masses(measure: Measure, edges: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    a, b = edges[:-1], edges[1:]
    half = 0.5 * (b - a)
    x = (0.5 * (a + b))[:, None] + half[:, None] * _GX[None, :]
    dens = measure.density(x.ravel()).reshape(x.shape)
    mu = np.sum(dens * _GW[None, :], axis=1) * half
    with np.errstate(divide="ignore"):
        logd = np.log(dens)
    step = np.max(logd, axis=1) - np.min(logd, axis=1)
    return mu, step


def _point_to_cell(nodes, edges, alpha) -> np.ndarray:
    """Jump rates from node ``i`` into cell ``j`` (zero diagonal).

    ``k_ij = int_{cell_j} |x_i - y|^{1-alpha} dy / (x_j - x_i)^2``, which
    equals the kernel integral ``int_{cell_j} |x_i - y|^{-1-alpha} dy`` up to
    ``O((w_j / |x_j - x_i|)^2)`` and makes the form exact on linear functions.
    """
    a, b = edges[:-1][None, :], edges[1:][None, :]
    x = nodes[:, None]
    w = b - a
    centre = 0.5 * (a + b)
    dist = np.abs(x - centre)
    near = np.minimum(np.abs(x - a), np.abs(x - b))
    far = np.maximum(np.abs(x - a), np.abs(x - b))
    p = 2.0 - alpha
    with np.errstate(divide="ignore", invalid="ignore"):
        # (far^p - near^p) / p without cancellation
        closed = near ** p * np.expm1(p * np.log(far / near)) / p / dist ** 2
        mid = w / dist ** (1.0 + alpha)
    wmax = np.maximum(w, np.diff(edges)[:, None])
    k = np.where(dist < NEAR_CELLS * wmax, closed, mid)
    np.fill_diagonal(k, 0.0)
    return k


def assemble_on_edges(measure: Measure, alpha: float, edges, mode: BoundaryMode | str =
                      BoundaryMode.CENSORED, check: bool = True) -> FormMatrix:
    """Assemble the form on the cells delimited by ``edges`` (any ``n >= 2``)."""
    if measure.dim != 1:
        raise InvalidParam("the discretization is implemented for dim 1")
    if not 0.0 < alpha < 2.0:
        raise InvalidParam("alpha must lie in (0, 2)")
    mode = BoundaryMode(mode)
    edges = np.asarray(edges, dtype=float)
    if edges.ndim != 1 or edges.size < 3 or np.any(np.diff(edges) <= 0):
        raise InvalidParam("edges must be strictly increasing with at least two cells")
    widths = np.diff(edges)
    nodes = 0.5 * (edges[1:] + edges[:-1])
    if check:
        ratio = widths[1:] / widths[:-1]
        if ratio.size and max(ratio.max(), (1.0 / ratio).max()) > MAX_WIDTH_RATIO:
            raise GridTooCoarse("neighbouring cell widths differ by more than a factor "
                                f"{MAX_WIDTH_RATIO}")
    mu, step = _cell_masses(measure, edges)
    if not np.all(mu > 0):
        raise GridTooCoarse("a cell carries no measure (density underflow)")
    if check and np.max(step) > MAX_LOG_DENSITY_STEP:
        raise GridTooCoarse("the density varies by more than a factor e across one cell")
    k = _point_to_cell(nodes, edges, alpha)
    if not np.all(np.isfinite(k)):
        raise GridTooCoarse("non-finite kernel integral between neighbouring cells")
    # jumps inside the own cell: f'(x_i)^2 * 2 (w_i/2)^{2-alpha} / (2-alpha), with f'^2
    # averaged over the neighbouring difference quotients
    self_w = 2.0 * (0.5 * widths) ** (2.0 - alpha) / (2.0 - alpha)
    n = nodes.size
    gaps = np.diff(nodes)
    for i in range(n):
        nb = [j for j in (i - 1, i + 1) if 0 <= j < n]
        for j in nb:
            k[i, j] += self_w[i] / (len(nb) * gaps[min(i, j)] ** 2)
    kernel = 0.5 * (widths[:, None] * k + (widths[:, None] * k).T)
    kill = None
    if mode == BoundaryMode.KILLED:
        R_lo, R_hi = edges[0], edges[-1]
        kill = ((R_hi - nodes) ** -alpha + (nodes - R_lo) ** -alpha) / alpha
    return FormMatrix(edges, nodes, widths, mu, k, kernel, float(alpha), mode, kill,
                      {"mass": float(mu.sum())})


def assemble(measure: Measure, alpha: float, R: float, n: int,
             mode: BoundaryMode | str = BoundaryMode.CENSORED) -> FormMatrix:
    """The form on ``[-R, R]`` with ``n`` cells on the default stretched grid."""
    if not R > 0:
        raise InvalidParam("R must be positive")
    if n < 16:
        raise InvalidParam("n must be at least 16")
    return assemble_on_edges(measure, alpha, default_edges(R, n), mode)


# ---------------------------------------------------------------------------
# spectra

def _eig(form: FormMatrix):
    s = np.sqrt(form.mu_w)
    B = form.stiffness() / np.outer(s, s)
    try:
        lam, U = linalg.eigh(0.5 * (B + B.T))
    except linalg.LinAlgError as exc:
        raise SolverFailure(f"symmetric eigensolver failed: {exc}") from exc
    return lam, U / s[:, None]


@dataclass(frozen=True)
class Gap:
    lambda1: float
    eigvec: np.ndarray
    rayleigh: float
    lambda0: float


def spectral_gap(form: FormMatrix) -> Gap:
    """Smallest nonzero eigenvalue of the censored form in ``L^2(mu)``."""
    if form.mode != BoundaryMode.CENSORED:
        raise InvalidParam("spectral_gap needs the censored form; use bottom_eigenvalue")
    lam, V = _eig(form)
    scale = max(abs(lam[-1]), 1e-300)
    if abs(lam[0]) > 1e-8 * scale:
        raise SolverFailure(f"constants are not in the kernel: lambda0={lam[0]:.3g}")
    lam1 = float(lam[1])
    v = form.center(V[:, 1])
    v /= math.sqrt(form.norm2(v))
    rq = form.quadratic_form(v) / form.norm2(v)
    if not lam1 > 0 or abs(rq - lam1) > 1e-10 * max(lam1, 1e-14 * scale):
        raise SolverFailure(f"Rayleigh quotient {rq:.17g} does not reproduce {lam1:.17g}")
    return Gap(lam1, v, rq, float(lam[0]))


def bottom_eigenvalue(form: FormMatrix) -> float:
    """Smallest eigenvalue of the form (positive in killed mode)."""
    return float(_eig(form)[0][0])


def two_cell_gap(mu1: float, mu2: float, k12: float, k21: float) -> float:
    """Exact gap of the two-state form ``Q = (mu1 k12 + mu2 k21)(f1 - f2)^2``."""
    c = mu1 * k12 + mu2 * k21
    return c * (1.0 / mu1 + 1.0 / mu2)


def local_poincare_constant(measure: Measure, alpha: float, r: float, n: int = 512) -> float:
    """Best constant of the censored form on ``[-r, r]`` (inverse gap), unnormalized mass."""
    if not r > 0:
        raise InvalidParam("r must be positive")
    form = assemble_on_edges(measure, alpha, np.linspace(-r, r, n + 1))
    return 1.0 / spectral_gap(form).lambda1


# ---------------------------------------------------------------------------
# semigroup decay

@dataclass(frozen=True)
class DecayCurve:
    times: np.ndarray
    variance: np.ndarray
    rate: float  # fitted exponential rate of the L^2 norm over the late window

    def __iter__(self):
        return iter((self.times, self.variance))


def semigroup_decay(form: FormMatrix, f0, times: Sequence[float],
                    fit_window: tuple[float, float] | None = None) -> DecayCurve:
    """``t -> ||exp(-t A) f0||^2_mu`` from the full eigendecomposition.

    ``rate`` is minus half the least-squares slope of the log variance over
    ``fit_window`` (default: the later half of ``times``).
    """
    if form.mode != BoundaryMode.CENSORED:
        raise InvalidParam("semigroup_decay needs the censored form")
    if form.n > 2048:
        raise InvalidParam("full eigendecomposition limited to n <= 2048")
    f0 = np.asarray(f0, dtype=float)
    if abs(np.dot(form.mu_w, f0)) > 1e-8 * np.dot(form.mu_w, np.abs(f0)):
        raise InvalidParam("f0 must have mu-mean zero")
    times = np.asarray(times, dtype=float)
    if np.any(times < 0) or np.any(np.diff(times) <= 0):
        raise InvalidParam("times must be nonnegative and increasing")
    lam, V = _eig(form)
    lam = np.maximum(lam, 0.0)
    coef = V.T @ (form.mu_w * f0)  # eigenvectors are mu-orthonormal
    # f0 is mean-zero, so its component on the constants is rounding error
    coef[lam <= 1e-8 * max(lam[-1], 1e-300)] = 0.0
    var = np.array([np.sum(coef ** 2 * np.exp(-2.0 * lam * t)) for t in times])
    if fit_window is None:
        fit_window = (times[0] + 0.5 * (times[-1] - times[0]), times[-1])
    sel = (times >= fit_window[0]) & (times <= fit_window[1]) & (var > 0)
    rate = float("nan")
    if sel.sum() >= 2:
        rate = -0.5 * float(np.polyfit(times[sel], np.log(var[sel]), 1)[0])
    return DecayCurve(times, var, rate)


# ---------------------------------------------------------------------------
# super-Poincare probe

def hermite_type(k: int, scale: float = 1.0, center: float = 0.0) -> TestFunction:
    """``He_k(u) exp(-u^2/4)`` with ``u = (x - center)/scale``."""
    He = np.polynomial.hermite_e.HermiteE.basis(k)
    dHe, d2He = He.deriv(1), He.deriv(2)
    s, c = float(scale), float(center)

    def parts(x):
        u = (np.asarray(x, dtype=float) - c) / s
        return u, np.exp(-0.25 * u * u)

    def f(x):
        u, g = parts(x)
        return He(u) * g

    def df(x):
        u, g = parts(x)
        return (dHe(u) - 0.5 * u * He(u)) * g / s

    def d2f(x):
        u, g = parts(x)
        return (d2He(u) - u * dHe(u) + (0.25 * u * u - 0.5) * He(u)) * g / s ** 2

    return TestFunction(f, df, d2f, (), None, (1.0, 0.0), name=f"hermite({k},{s:g},{c:g})")


def probe_family(scale: float = 1.0) -> list[TestFunction]:
    """Twelve bump and Hermite-type functions of width about ``scale``."""
    s = float(scale)
    bumps = [bump(c * s, w * s) for c, w in ((0, 1), (0, 3), (2, 1), (-3, 2), (5, 2), (0, 0.5))]
    herm = [hermite_type(k, s * w) for k, w in ((1, 1), (2, 1), (3, 1), (1, 3), (2, 2), (4, 1))]
    return bumps + herm


@dataclass(frozen=True)
class Violation:
    r: float
    name: str
    lhs: float
    rhs: float


@dataclass(frozen=True)
class ProbeReport:
    violations: list
    checks: int
    scale: float

    @property
    def ok(self) -> bool:
        return not self.violations


def _log_beta_at(beta: RateCurve, r: np.ndarray) -> np.ndarray:
    order = np.argsort(beta.r)
    return np.interp(np.log(r), np.log(beta.r[order]), beta.log_values[order])


def _stats(form: FormMatrix, family):
    out = []
    for f in family:
        v = form.sample(f)
        out.append((getattr(f, "name", "f"), form.norm2(v), form.quadratic_form(v),
                    float(np.dot(form.mu_w, np.abs(v))) ** 2))
    return out


def super_poincare_probe(form: FormMatrix, beta: RateCurve, family: Sequence, r_grid,
                         scale: float = 1.0) -> ProbeReport:
    """Check ``mu(f^2) <= r Q(f) + b(r) mu(|f|)^2`` on a finite family.

    ``b = max(1, scale beta)``: constants force any valid rate to be at
    least 1. ``beta`` is interpolated log-linearly in ``log r`` and held
    constant outside its sampled range.
    """
    if not family:
        raise InvalidParam("the probe family is empty")
    r_grid = np.asarray(r_grid, dtype=float)
    lb = _log_beta_at(beta, r_grid)
    bad = []
    stats = _stats(form, family)
    for r, lbeta in zip(r_grid, lb):
        for name, m2, q, m1 in stats:
            rhs = r * q + max(1.0, scale * math.exp(min(lbeta, 700.0))) * m1
            if m2 > rhs * (1.0 + 1e-12):
                bad.append(Violation(float(r), name, m2, rhs))
    return ProbeReport(bad, len(stats) * r_grid.size, float(scale))


def fit_beta_scale(form: FormMatrix, beta: RateCurve, family: Sequence, r_grid) -> float:
    """Smallest multiple of ``beta`` with no violations on ``family`` (rate floored at 1)."""
    r_grid = np.asarray(r_grid, dtype=float)
    lb = _log_beta_at(beta, r_grid)
    need = 0.0
    for name, m2, q, m1 in _stats(form, family):
        for r, lbeta in zip(r_grid, lb):
            excess = m2 - r * q
            if excess > m1 * (1.0 + 1e-12):
                need = max(need, excess / (math.exp(min(lbeta, 700.0)) * m1))
    return need


def split_probe(form: FormMatrix, beta: RateCurve, family: Sequence, r_grid) -> ProbeReport:
    """Fit the scale of ``beta`` on the even-indexed half of ``family``, probe the rest."""
    train, test = list(family[0::2]), list(family[1::2])
    scale = max(fit_beta_scale(form, beta, train, r_grid), 1e-300)
    return super_poincare_probe(form, beta, test, r_grid, scale)


def psi2_bound(measure: Measure, alpha: float, r: float) -> float:
    return build_profile(measure, alpha).Psi2(r)
