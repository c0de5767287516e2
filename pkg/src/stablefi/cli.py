"""Batch front-end: config parsing, engine dispatch, JSON and CSV artifacts.

Every run reads an optional TOML config, lets command-line flags override it,
validates the merged settings into a :class:`RunConfig` and writes its
artifacts under ``out``.  Floats are written with 17 significant digits and
keys are sorted, so identical settings give byte-identical files.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import math
import platform
import sys
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Any, Sequence

import numpy as np
import scipy

from . import __version__
from .criteria import (CLOSED_FORMS, ENGINE_KINDS, EXPONENTIAL_FORMS, SUPER_KINDS, RateCurve,
                       build_profile, closed_form_curve, default_r_grid, log_beta_super_t11,
                       log_beta_weak_t11, log_beta_weak_t52, rate_curve, slope_fit)
from .errors import (ConfigError, CriterionInapplicable, DisjointWindows, GridTooCoarse,
                     InvalidParam, NonIntegrable, QuadDiverged, SmoothnessViolation,
                     SolverFailure, StableFIError)
from .nonlocal_form import canonical_test_functions, check_smoothness, dirichlet_form, lyapunov_check
from .potential import Potential, normalize
from .sharpness import (DEFAULT_N_VALUES, poincare_disproof, sp_sharpness_cor13,
                        wp_sharpness)
from .spectral import (BoundaryMode, assemble, bottom_eigenvalue, default_window,
                       probe_family, semigroup_decay, spectral_gap, split_probe)

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

SCHEMA = 1

# bumped whenever an engine's numerical output changes
ENGINE_VERSIONS = {"criteria": "1", "nonlocal_form": "1", "spectral": "1", "sharpness": "1"}

COMMANDS = ("criteria", "beta", "gap", "decay", "probe", "lyapunov", "form", "sharpness",
            "report", "compare")

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC, EXIT_INAPPLICABLE = 0, 2, 3, 4

ENGINE_ALIASES = {"t11": "super_t11", "t51": "super_t51", "t52": "weak_t52",
                  "weak": "weak_t11", "super": "super_t11"}

# sharpness selector -> (potential family, functional kind)
SHARPNESS_TARGETS = {"1.2": "poly_tail", "1.3": "poly_log_tail", "1.4": "heavy_log_tail"}


# ---------------------------------------------------------------------------
# configuration

@dataclass(frozen=True)
class RunConfig:
    family: str
    alpha: float
    eps: float | None = None
    dim: int = 1
    expr: str | None = None
    engine: str = "super_t11"
    R: float | None = None
    n: int = 256
    mode: str = "censored"
    times: tuple = tuple(np.linspace(0.0, 2.0, 21).tolist())
    r_grid: tuple = tuple(default_r_grid().tolist())
    n_values: tuple = DEFAULT_N_VALUES
    delta: float = 0.5
    alpha0: float | None = None
    c1: float = 1.0
    c2: float = 1.0
    c: float = 1.0
    seed: int = 0
    out: str = "stablefi_out"
    corollary: str | None = None
    closed_form: str | None = None
    functions: tuple | None = None

    def hashed(self) -> dict:
        """Settings that determine the numbers (the output location does not)."""
        d = asdict(self)
        d.pop("out")
        return d

    def sha256(self) -> str:
        return hashlib.sha256(dumps(self.hashed()).encode()).hexdigest()


CONFIG_KEYS = tuple(f.name for f in fields(RunConfig))


def _float(key, v, lo=-math.inf, hi=math.inf, open_lo=True, open_hi=True) -> float:
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise ConfigError(f"{key} must be a number, got {v!r}")
    v = float(v)
    ok_lo = v > lo if open_lo else v >= lo
    ok_hi = v < hi if open_hi else v <= hi
    if not (math.isfinite(v) and ok_lo and ok_hi):
        raise ConfigError(f"{key}={v!r} is out of range")
    return v


def _int(key, v, lo, hi) -> int:
    if isinstance(v, bool) or not isinstance(v, int) or not lo <= v <= hi:
        raise ConfigError(f"{key} must be an integer in [{lo}, {hi}], got {v!r}")
    return int(v)


def _grid(key, v) -> tuple:
    """A positive list, or a table ``{lo, hi, n}`` expanded geometrically."""
    if isinstance(v, dict):
        unknown = set(v) - {"lo", "hi", "n"}
        if unknown or len(v) != 3:
            raise ConfigError(f"{key} table needs exactly lo, hi, n")
        lo = _float(f"{key}.lo", v["lo"], 0.0)
        hi = _float(f"{key}.hi", v["hi"], lo)
        n = _int(f"{key}.n", v["n"], 2, 10000)
        return tuple(np.geomspace(lo, hi, n).tolist())
    if not isinstance(v, (list, tuple)) or len(v) < 2:
        raise ConfigError(f"{key} must be a list of at least two numbers")
    return tuple(_float(key, x, 0.0) for x in v)


def _increasing(key, vals):
    if np.any(np.diff(vals) <= 0):
        raise ConfigError(f"{key} must be strictly increasing")


def validate(raw: dict) -> RunConfig:
    """Check ranges and types of a merged settings dict."""
    unknown = sorted(set(raw) - set(CONFIG_KEYS))
    if unknown:
        raise ConfigError(f"unknown config keys: {unknown}")
    if not raw:
        raise ConfigError("empty configuration: at least family and alpha are required")
    for key in ("family", "alpha"):
        if key not in raw:
            raise ConfigError(f"missing required key {key!r}")
    kw: dict[str, Any] = {}
    if not isinstance(raw["family"], str):
        raise ConfigError("family must be a string")
    kw["family"] = raw["family"].lower().replace("-", "_")
    kw["alpha"] = _float("alpha", raw["alpha"], 0.0, 2.0)
    if raw.get("eps") is not None:
        kw["eps"] = _float("eps", raw["eps"])
    if "dim" in raw:
        kw["dim"] = _int("dim", raw["dim"], 1, 16)
    if raw.get("expr") is not None:
        if not isinstance(raw["expr"], str):
            raise ConfigError("expr must be a string")
        kw["expr"] = raw["expr"]
    if "engine" in raw:
        eng = ENGINE_ALIASES.get(str(raw["engine"]), str(raw["engine"]))
        if eng not in ENGINE_KINDS:
            raise ConfigError(f"engine must be one of {ENGINE_KINDS}, got {raw['engine']!r}")
        kw["engine"] = eng
    if raw.get("R") is not None:
        kw["R"] = _float("R", raw["R"], 0.0, 1e8)
    if "n" in raw:
        kw["n"] = _int("n", raw["n"], 16, 2048)
    if "mode" in raw:
        if raw["mode"] not in [m.value for m in BoundaryMode]:
            raise ConfigError("mode must be 'censored' or 'killed'")
        kw["mode"] = raw["mode"]
    if "times" in raw:
        t = raw["times"]
        if not isinstance(t, (list, tuple)) or len(t) < 2:
            raise ConfigError("times must be a list of at least two numbers")
        kw["times"] = tuple(_float("times", x, 0.0, open_lo=False) for x in t)
        _increasing("times", kw["times"])
    if "r_grid" in raw:
        kw["r_grid"] = _grid("r_grid", raw["r_grid"])
        _increasing("r_grid", kw["r_grid"])
    if "n_values" in raw:
        nv = raw["n_values"]
        if not isinstance(nv, (list, tuple)) or len(nv) < 2:
            raise ConfigError("n_values must be a list of at least two integers")
        kw["n_values"] = tuple(_int("n_values", x, 1, 10 ** 6) for x in nv)
        _increasing("n_values", kw["n_values"])
    if "delta" in raw:
        kw["delta"] = _float("delta", raw["delta"], 0.0, 1.0)
    if raw.get("alpha0") is not None:
        kw["alpha0"] = _float("alpha0", raw["alpha0"], 0.0, min(1.0, kw["alpha"]))
    for key in ("c1", "c2", "c"):
        if key in raw:
            kw[key] = _float(key, raw[key], 0.0)
    if "seed" in raw:
        kw["seed"] = _int("seed", raw["seed"], 0, 2 ** 32 - 1)
    if "out" in raw:
        if not isinstance(raw["out"], str) or not raw["out"]:
            raise ConfigError("out must be a nonempty path string")
        kw["out"] = raw["out"]
    if raw.get("corollary") is not None:
        if str(raw["corollary"]) not in SHARPNESS_TARGETS:
            raise ConfigError(f"corollary must be one of {sorted(SHARPNESS_TARGETS)}")
        kw["corollary"] = str(raw["corollary"])
    if raw.get("closed_form") is not None:
        if raw["closed_form"] not in CLOSED_FORMS:
            raise ConfigError(f"closed_form must be one of {sorted(CLOSED_FORMS)}")
        kw["closed_form"] = raw["closed_form"]
    if raw.get("functions") is not None:
        names = raw["functions"]
        known = [f.name for f in canonical_test_functions()]
        if not isinstance(names, (list, tuple)) or not names:
            raise ConfigError("functions must be a nonempty list of names")
        bad = [x for x in names if x not in known]
        if bad:
            raise ConfigError(f"unknown test functions {bad}; known: {known}")
        kw["functions"] = tuple(names)
    return RunConfig(**kw)


def load_config(path: str | Path | None) -> dict:
    if path is None:
        return {}
    try:
        with open(path, "rb") as fh:
            return tomllib.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"invalid TOML in {path}: {exc}") from exc


def merge(config: dict, flags: dict) -> dict:
    """Flags win over the config file; ``None`` means the flag was not given."""
    merged = dict(config)
    merged.update({k: v for k, v in flags.items() if v is not None})
    return merged


# ---------------------------------------------------------------------------
# deterministic serialization

def _fmt_float(x: float) -> str:
    if math.isnan(x):
        return '"nan"'
    if math.isinf(x):
        return '"inf"' if x > 0 else '"-inf"'
    return format(x, ".17g")


def dumps(obj: Any, indent: int = 0) -> str:
    """JSON with sorted keys and floats pinned to 17 significant digits.

    Non-finite floats become the strings ``"nan"``, ``"inf"`` and ``"-inf"``.
    """
    pad, inner = "  " * indent, "  " * (indent + 1)
    if obj is None:
        return "null"
    if isinstance(obj, (bool, np.bool_)):
        return "true" if obj else "false"
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        return _fmt_float(float(obj))
    if isinstance(obj, str):
        return json.dumps(obj)
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = sorted((str(k), v) for k, v in obj.items())
        body = ",\n".join(f"{inner}{json.dumps(k)}: {dumps(v, indent + 1)}" for k, v in items)
        return "{\n" + body + "\n" + pad + "}"
    if isinstance(obj, (list, tuple, np.ndarray)):
        seq = obj.tolist() if isinstance(obj, np.ndarray) else obj
        if not seq:
            return "[]"
        if all(not isinstance(v, (dict, list, tuple, np.ndarray)) for v in seq):
            return "[" + ", ".join(dumps(v) for v in seq) + "]"
        return "[\n" + ",\n".join(inner + dumps(v, indent + 1) for v in seq) + "\n" + pad + "]"
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def write_json(path: Path, payload: dict) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(dumps(payload) + "\n", encoding="utf-8")


def write_csv(path: Path, header: Sequence[str], columns: Sequence[Sequence]) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    rows = zip(*columns)
    with path.open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([_fmt_float(float(v)).strip('"') if isinstance(v, (float, np.floating))
                        else v for v in row])


def read_curve(path: str | Path) -> RateCurve:
    """Load a curve CSV with columns ``r`` and ``log_beta``."""
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.DictReader(fh))
    if not rows or "r" not in rows[0] or "log_beta" not in rows[0]:
        raise ConfigError(f"{path} is not a curve file (needs r and log_beta columns)")
    r = np.array([float(x["r"]) for x in rows])
    lv = np.array([float(x["log_beta"]) for x in rows])
    return RateCurve("file", r, lv, {"source": str(path)})


def _curve_csv(path: Path, curve: RateCurve) -> None:
    write_csv(path, ["r", "log_beta"], [curve.r, curve.log_values])


# ---------------------------------------------------------------------------
# curve comparison

@dataclass(frozen=True)
class Comparison:
    window: tuple[float, float]
    slope_a: float
    slope_b: float
    slope_diff: float
    max_log_ratio: float
    samples: int

    def as_dict(self) -> dict:
        return asdict(self)


def compare(curve_a: RateCurve, curve_b: RateCurve,
            window: tuple[float, float] | None = None, transform: str = "loglog") -> Comparison:
    """Slope difference and largest ``|log(beta_a / beta_b)|`` on a common window.

    ``curve_b`` is interpolated in ``log r`` onto the samples of ``curve_a``
    that fall inside the window. ``transform`` is passed to ``slope_fit``.
    """
    lo = max(curve_a.r.min(), curve_b.r.min())
    hi = min(curve_a.r.max(), curve_b.r.max())
    if window is not None:
        lo, hi = max(lo, window[0]), min(hi, window[1])
    sel = (curve_a.r >= lo * (1 - 1e-12)) & (curve_a.r <= hi * (1 + 1e-12))
    if not hi > lo or sel.sum() < 2:
        raise DisjointWindows(f"curves share fewer than two samples on [{lo:.3g}, {hi:.3g}]")
    r = curve_a.r[sel]
    la = curve_a.log_values[sel]
    ob = np.argsort(curve_b.r)
    lb = np.interp(np.log(r), np.log(curve_b.r[ob]), curve_b.log_values[ob])
    sa = slope_fit(r, la, transform=transform).exponent
    sb = slope_fit(r, lb, transform=transform).exponent
    return Comparison((float(lo), float(hi)), sa, sb, sa - sb, float(np.max(np.abs(la - lb))),
                      int(sel.sum()))


# ---------------------------------------------------------------------------
# engines

@dataclass
class Run:
    """State shared by the subcommands of a single run."""
    cfg: RunConfig
    command: str
    out: Path
    potential: Potential = field(init=False)
    quadrature: dict = field(default_factory=dict)
    checks: list = field(default_factory=list)

    def __post_init__(self):
        cfg = self.cfg
        kw = {"seed": cfg.seed} if cfg.family == "custom" else {}
        if cfg.expr is not None:
            kw["expr"] = cfg.expr
        self.potential = Potential.from_family(cfg.family, cfg.eps, cfg.dim, cfg.alpha, **kw)
        self.measure = normalize(self.potential)
        self.quadrature["normalization_est_error"] = self.measure.z_error
        self._profile = None

    @property
    def profile(self):
        if self._profile is None:
            self._profile = build_profile(self.measure, self.cfg.alpha, self.cfg.delta)
        return self._profile

    def check(self, name: str, passed: bool, **detail) -> None:
        self.checks.append(dict(detail, name=name, passed=bool(passed)))

    def curve(self, kind: str | None = None) -> RateCurve:
        cfg = self.cfg
        return rate_curve(self.profile, kind or cfg.engine, cfg.r_grid, cfg.c1, cfg.c2, cfg.c)

    def form(self):
        cfg = self.cfg
        R = cfg.R if cfg.R is not None else default_window(self.measure)
        return assemble(self.measure, cfg.alpha, R, cfg.n, cfg.mode)


def _profile_json(run: Run) -> dict:
    p = run.profile
    radii = [0.0, 0.5, 1.0, 2.0, 5.0, 10.0, 20.0, 50.0, 100.0]
    out = {
        "schema": SCHEMA,
        "potential": run.potential.describe(),
        "alpha": run.cfg.alpha,
        "delta": p.delta,
        "normalizing_constant": run.measure.z_const,
        "normalization_est_error": run.measure.z_error,
        "phi_unbounded": bool(p.phi_unbounded),
        "psi1_infinite": bool(p.psi1_infinite),
        "radii": radii,
    }
    for name, fn in (("h", p.h), ("H", p.H), ("Phi", p.Phi), ("Psi2", p.Psi2)):
        vals = []
        for r in radii:
            try:
                vals.append(float(fn(r)) if (r > 0 or name != "Psi2") else None)
            except StableFIError:
                vals.append(None)
        out[name] = vals
    levels = [1e-4, 1e-3, 1e-2, 1e-1, 1.0]
    out["U_levels"] = levels
    out["U"] = [p.U(q) for q in levels]
    try:
        out["ef_holds"] = bool(p.ef_holds)
    except StableFIError:
        out["ef_holds"] = None
    return out


def cmd_criteria(run: Run) -> dict:
    write_json(run.out / "profile.json", _profile_json(run))
    curve = run.curve()
    _curve_csv(run.out / "curves" / f"beta_{curve.kind}.csv", curve)
    fit = curve.slope_fit()
    finite = bool(np.all(np.isfinite(curve.log_values)))
    run.check("rate_finite", finite)
    return {"engine": curve.kind, "slope": fit.exponent, "fit_residual": fit.residual,
            "window": list(fit.window), "frozen_beyond": curve.meta["frozen_beyond"]}


def cmd_beta(run: Run) -> dict:
    res = cmd_criteria(run)
    cfg = run.cfg
    if cfg.closed_form is not None:
        params = {"eps": cfg.eps, "alpha": cfg.alpha, "d": cfg.dim}
        ref = closed_form_curve(cfg.closed_form, params, cfg.r_grid)
        _curve_csv(run.out / "curves" / f"closed_{cfg.closed_form}.csv", ref)
        transform = "logloglog" if cfg.closed_form in EXPONENTIAL_FORMS else "loglog"
        cmp = compare(run.curve(), ref, transform=transform)
        res["closed_form"] = dict(cmp.as_dict(), name=cfg.closed_form, transform=transform)
        run.check("closed_form_slope_within_10pct",
                  abs(cmp.slope_diff) < 0.1 * abs(cmp.slope_b), slope_diff=cmp.slope_diff)
    return res


def cmd_gap(run: Run) -> dict:
    form = run.form()
    res = {"R": form.R, "n": form.n, "mode": run.cfg.mode}
    if form.mode == BoundaryMode.CENSORED:
        gap = spectral_gap(form)
        res.update(lambda1=gap.lambda1, lambda0=gap.lambda0, rayleigh=gap.rayleigh)
        write_csv(run.out / "curves" / "eigenvector.csv", ["x", "cell_mass", "eigvec"],
                  [form.nodes, form.mu_w, gap.eigvec])
        run.check("gap_positive", gap.lambda1 > 0, value=gap.lambda1)
    else:
        lam = bottom_eigenvalue(form)
        res["lambda_bottom"] = lam
        run.check("bottom_positive", lam > 0, value=lam)
    return res


def cmd_decay(run: Run) -> dict:
    if run.cfg.mode != "censored":
        raise ConfigError("decay runs on the censored form")
    form = run.form()
    f0 = form.center(form.nodes / np.sqrt(1.0 + form.nodes ** 2))
    dc = semigroup_decay(form, f0, run.cfg.times)
    lam1 = spectral_gap(form).lambda1
    write_csv(run.out / "curves" / "decay.csv", ["t", "variance"], [dc.times, dc.variance])
    rel = abs(dc.rate - lam1) / lam1
    run.check("decay_rate_matches_gap", rel < 0.05, relative_difference=rel)
    return {"rate": dc.rate, "lambda1": lam1, "R": form.R, "n": form.n}


def cmd_probe(run: Run) -> dict:
    cfg = run.cfg
    kind = cfg.engine if cfg.engine in SUPER_KINDS else "super_t11"
    curve = run.curve(kind)
    if cfg.mode != "censored":
        raise ConfigError("the super-Poincare probe runs on the censored form")
    form = run.form()
    rep = split_probe(form, curve, probe_family(), cfg.r_grid)
    _curve_csv(run.out / "curves" / f"beta_{kind}.csv", curve)
    run.check("no_held_out_violation", rep.ok, violations=len(rep.violations))
    return {"engine": kind, "fitted_scale": rep.scale, "checks": rep.checks,
            "violations": [{"r": v.r, "function": v.name, "lhs": v.lhs, "rhs": v.rhs}
                           for v in rep.violations]}


def cmd_lyapunov(run: Run) -> dict:
    write_json(run.out / "profile.json", _profile_json(run))
    rep = lyapunov_check(run.potential, run.cfg.alpha, run.cfg.alpha0, profile=run.profile)
    write_csv(run.out / "curves" / "lyapunov.csv", ["x", "L_phi", "est_error", "Phi", "ratio"],
              [rep.x, rep.L_phi, rep.est_error, rep.Phi, rep.ratio])
    run.quadrature["generator_max_est_error"] = float(np.max(rep.est_error))
    far = (np.abs(rep.x) >= 20) & (np.abs(rep.x) <= 200)
    min_far = float(rep.ratio[far].min()) if far.any() else math.nan
    run.check("drift_ratio_far", min_far >= 0.01, min_ratio=min_far)
    run.check("inner_generator_finite", math.isfinite(rep.sup_inner), sup_inner=rep.sup_inner)
    return {"alpha0": rep.alpha0, "r0_empirical": rep.r0_empirical, "sup_inner": rep.sup_inner,
            "min_ratio_20_200": min_far}


def cmd_form(run: Run) -> dict:
    wanted = run.cfg.functions
    funcs = [f for f in canonical_test_functions() if wanted is None or f.name in wanted]
    vals, errs = [], []
    for f in funcs:
        q = dirichlet_form(f, f, run.measure, run.cfg.alpha)
        vals.append(q.value)
        errs.append(q.est_error)
    write_csv(run.out / "curves" / "form.csv", ["function", "energy", "est_error"],
              [[f.name for f in funcs], vals, errs])
    run.quadrature["form_max_est_error"] = float(max(errs))
    run.check("energy_nonnegative", all(v >= -e for v, e in zip(vals, errs)))
    return {"energy": {f.name: v for f, v in zip(funcs, vals)}}


def _sharpness_functional(run: Run) -> dict | None:
    cfg = run.cfg
    target = cfg.corollary
    if target is None:
        return None
    fam = SHARPNESS_TARGETS[target]
    if cfg.family != fam:
        raise InvalidParam(f"corollary {target} needs the {fam} family")
    p = run.profile
    if target == "1.3" and cfg.eps is not None and cfg.eps > 0:
        rep = sp_sharpness_cor13(run.measure, cfg.alpha,
                                 lambda r: log_beta_super_t11(p, r, cfg.c1, cfg.c2), cfg.n_values)
        kind = "super"
    else:
        if cfg.engine == "weak_t52":
            lb = lambda r: log_beta_weak_t52(p, r, cfg.c1, cfg.c2)
        else:
            lb = lambda r: log_beta_weak_t11(p, r, cfg.c)
        rep = wp_sharpness(run.measure, cfg.alpha, lb, cfg.n_values, fam)
        kind = "weak"
    write_csv(run.out / "curves" / "sharpness.csv", ["n", "r_n", "functional", "running_liminf"],
              [rep.n_values, rep.r_n, rep.functional, rep.running_liminf])
    run.check("rate_not_too_small", not rep.flagged, trend=rep.trend)
    return {"kind": kind, "trend": rep.trend, "flagged": rep.flagged,
            "running_liminf_last": float(rep.running_liminf[-1])}


def cmd_sharpness(run: Run) -> dict:
    cfg = run.cfg
    series = poincare_disproof(run.measure, cfg.alpha, cfg.n_values)
    write_csv(run.out / "curves" / "reference_ratio.csv", ["n", "ratio"],
              [series.n_values, series.ratio])
    run.quadrature["energy_max_relative_error"] = float(max(series.meta["energy_error"]
                                                              / series.ratio))
    res = {"reference_ratio": {"slope": series.slope, "variation": series.variation,
                               "decays": series.decays}}
    func = _sharpness_functional(run)
    if func is not None:
        res["functional"] = func
    return res


def cmd_report(run: Run) -> dict:
    cfg = run.cfg
    p = run.profile
    write_json(run.out / "profile.json", _profile_json(run))
    res: dict[str, Any] = {}

    phi0 = p.Phi(0.0)
    try:
        check_smoothness(run.potential)
        smooth = True
    except SmoothnessViolation:
        smooth = False
    applicable = bool(phi0 > 0 and smooth)
    res["poincare"] = {"applicable": applicable, "Phi0": phi0, "smooth": smooth}
    run.check("poincare_applicable", applicable, Phi0=phi0)

    for key, kind in (("super_poincare", "super_t11"), ("weak_poincare", "weak_t11")):
        try:
            curve = run.curve(kind)
        except CriterionInapplicable as exc:
            res[key] = {"applicable": False, "engine": kind, "reason": str(exc)}
            continue
        _curve_csv(run.out / "curves" / f"beta_{kind}.csv", curve)
        fit = curve.slope_fit()
        finite = bool(np.all(np.isfinite(curve.log_values)))
        res[key] = {"applicable": True, "engine": kind, "slope": fit.exponent,
                    "fit_residual": fit.residual, "window": list(fit.window)}
        run.check(f"{key}_rate_finite", finite, slope=fit.exponent)

    if cfg.dim == 1:
        try:
            gap = cmd_gap(run)
        except (GridTooCoarse, SolverFailure) as exc:
            gap = {"error": exc.code, "message": str(exc)}
        res["spectral"] = gap
    return res


COMMAND_FUNCS = {"criteria": cmd_criteria, "beta": cmd_beta, "gap": cmd_gap, "decay": cmd_decay,
                 "probe": cmd_probe, "lyapunov": cmd_lyapunov, "form": cmd_form, "sharpness": cmd_sharpness,
                 "report": cmd_report}


def _meta(cfg: RunConfig | None) -> dict:
    versions = dict(ENGINE_VERSIONS, stablefi=__version__, numpy=np.__version__,
                    scipy=scipy.__version__, python=platform.python_version())
    out: dict[str, Any] = {"schema": SCHEMA, "versions": versions}
    if cfg is not None:
        out["config"] = cfg.hashed()
        out["config_sha256"] = cfg.sha256()
    return out


def run(cfg: RunConfig, command: str) -> dict:
    """Execute one subcommand and write its artifacts; returns the report payload."""
    if command not in COMMAND_FUNCS:
        raise ConfigError(f"unknown command {command!r}")
    state = Run(cfg, command, Path(cfg.out))
    results = COMMAND_FUNCS[command](state)
    report = dict(_meta(cfg), command=command, results=results, checks=state.checks,
                  quadrature=state.quadrature,
                  passed=all(c["passed"] for c in state.checks))
    write_json(state.out / "report.json", report)
    return report


# ---------------------------------------------------------------------------
# command line

def exit_code(exc: BaseException) -> int:
    if isinstance(exc, (CriterionInapplicable, SmoothnessViolation)):
        return EXIT_INAPPLICABLE
    if isinstance(exc, (QuadDiverged, SolverFailure, GridTooCoarse)):
        return EXIT_NUMERIC
    if isinstance(exc, (ConfigError, InvalidParam, NonIntegrable, DisjointWindows)):
        return EXIT_CONFIG
    return EXIT_NUMERIC


def error_object(exc: BaseException, code: int) -> dict:
    kind = getattr(exc, "code", "error")
    return {"schema": SCHEMA, "exit_code": code,
            "error": {"code": kind, "type": type(exc).__name__, "message": str(exc)}}


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ConfigError(message)


def _csv_floats(text: str) -> list:
    """``a,b,c`` or ``lo:hi:n`` (geometric) into a list or grid table."""
    if ":" in text:
        parts = text.split(":")
        if len(parts) != 3:
            raise ConfigError(f"expected lo:hi:n, got {text!r}")
        return {"lo": float(parts[0]), "hi": float(parts[1]), "n": int(parts[2])}
    try:
        return [float(x) for x in text.split(",") if x]
    except ValueError as exc:
        raise ConfigError(f"expected a comma-separated list, got {text!r}") from exc


def _csv_ints(text: str) -> list:
    try:
        return [int(x) for x in text.split(",") if x]
    except ValueError as exc:
        raise ConfigError(f"expected comma-separated integers, got {text!r}") from exc


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="stablefi", description=__doc__.splitlines()[0], allow_abbrev=False)
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS[:-1]:
        p = sub.add_parser(name, help=f"run the {name} engine", allow_abbrev=False)
        p.add_argument("--config", type=str, default=None, help="TOML file; flags win over it")
        p.add_argument("--family", type=str)
        p.add_argument("--eps", type=float)
        p.add_argument("--dim", type=int)
        p.add_argument("--expr", type=str, help="expression for the custom family")
        p.add_argument("--alpha", type=float)
        p.add_argument("--engine", type=str, help=f"rate engine, one of {ENGINE_KINDS}")
        p.add_argument("--R", dest="R", type=float, help="half-width of the spectral window")
        p.add_argument("--n", type=int, help="number of spectral cells")
        p.add_argument("--mode", type=str, choices=[m.value for m in BoundaryMode])
        p.add_argument("--times", type=_csv_floats)
        p.add_argument("--r-grid", dest="r_grid", type=_csv_floats, help="a,b,c or lo:hi:n")
        p.add_argument("--n-values", dest="n_values", type=_csv_ints)
        p.add_argument("--delta", type=float)
        p.add_argument("--alpha0", type=float)
        p.add_argument("--c1", type=float)
        p.add_argument("--c2", type=float)
        p.add_argument("--c", type=float)
        p.add_argument("--seed", type=int)
        p.add_argument("--out", type=str)
        p.add_argument("--corollary", type=str, choices=sorted(SHARPNESS_TARGETS),
                       help="sharpness target family: 1.2 poly tail, 1.3 log tail, 1.4 heavy tail")
        p.add_argument("--closed-form", dest="closed_form", type=str)
        p.add_argument("--functions", type=lambda t: [x for x in t.split(";") if x],
                       help="semicolon-separated test function names (form)")
    cmp = sub.add_parser("compare", help="compare two curve CSV files")
    cmp.add_argument("curve_a")
    cmp.add_argument("curve_b")
    cmp.add_argument("--window", type=float, nargs=2, default=None, metavar=("LO", "HI"))
    cmp.add_argument("--transform", choices=("loglog", "logloglog"), default="loglog",
                     help="logloglog for exponential-type rates")
    cmp.add_argument("--out", type=str, default=None)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    out_dir = None
    try:
        args = build_parser().parse_args(argv)
        if args.command == "compare":
            out_dir = args.out
            res = compare(read_curve(args.curve_a), read_curve(args.curve_b),
                          tuple(args.window) if args.window else None, args.transform)
            payload = dict(_meta(None), command="compare", results=res.as_dict())
            if out_dir:
                write_json(Path(out_dir) / "report.json", payload)
            print(dumps(payload))
            return EXIT_OK
        flags = {k: getattr(args, k) for k in CONFIG_KEYS if hasattr(args, k)}
        raw = merge(load_config(args.config), flags)
        out_dir = raw.get("out")
        cfg = validate(raw)
        out_dir = cfg.out
        report = run(cfg, args.command)
        print(dumps({"command": args.command, "passed": report["passed"],
                     "report": str(Path(cfg.out) / "report.json")}))
        return EXIT_OK
    except (StableFIError, FloatingPointError, ArithmeticError) as exc:
        code = exit_code(exc)
        payload = error_object(exc, code)
        if out_dir:
            try:
                write_json(Path(out_dir) / "error.json", payload)
            except OSError:
                pass
        print(dumps(payload))
        return code


if __name__ == "__main__":
    sys.exit(main())
