"""Probability measures on the positive half-line.

Three representations are supported:

* ``Atomic`` -- a finite list of weighted point masses;
* ``GridDensity`` -- a sampled density on an increasing (canonically
  log-spaced) grid, interpreted as its piecewise-linear interpolant;
* ``Named`` -- closed-form families (dirac, lambda, half_normal, gamma,
  beta, marchenko_pastur, marchenko_pastur_inverse, boolean_stable,
  uniform, log_normal).

Every measure knows how to integrate a kernel against itself, invert itself
under x -> 1/x, and push itself forward through the logarithm.  Kernel
integrals accept a list of known trouble points so the adaptive quadrature
can seed panels around poles and narrow peaks.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np
from scipy import optimize, stats

from ._quad import adaptive_quad, build_edges, ladder_edges
from .errors import (
    AtomicHasNoDensity,
    DomainError,
    InvariantViolation,
    NonIntegrable,
)

# mass-validation tolerances: atomic weights are exact data, sampled grids
# carry discretization error
TOL_MASS_ATOMIC = 1e-6
TOL_MASS_GRID = 1e-3
# quadrature defaults
TOL_QUAD = 1e-9
TOL_TAIL = 1e-12

_EPS = np.finfo(float).eps


# ---------------------------------------------------------------------------
# named families
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class _FamilyDef:
    params: tuple[str, ...]
    validate: Callable[[dict], None]
    pdf: Callable[[dict, np.ndarray], np.ndarray]
    cdf: Callable[[dict, np.ndarray], np.ndarray]
    ppf: Callable[[dict, float], float]
    mean: Callable[[dict], float]
    support: Callable[[dict], tuple[float, float]]
    singular: Callable[[dict], tuple[float, ...]]
    invert: Callable[[dict], tuple[str, dict] | None]


def _require(cond: bool, invariant: str, msg: str) -> None:
    if not cond:
        raise InvariantViolation(invariant, msg)


def _lambda_validate(p):
    _require(0.0 < p["b"] < math.pi, "lambda.b", f"b={p['b']} not in (0, pi)")


def _lambda_pdf(p, x):
    b = p["b"]
    cb = math.sin(b) / (math.pi - b)
    x = np.asarray(x, float)
    out = cb / (1.0 - 2.0 * x * math.cos(b) + x * x)
    return np.where(x > 0, out, 0.0)


def _lambda_cdf(p, x):
    b = p["b"]
    x = np.asarray(x, float)
    val = (np.arctan((x - math.cos(b)) / math.sin(b)) + math.pi / 2 - b) / (math.pi - b)
    return np.clip(np.where(x > 0, val, 0.0), 0.0, 1.0)


def _lambda_ppf(p, q):
    b = p["b"]
    return math.cos(b) + math.sin(b) * math.tan(q * (math.pi - b) - (math.pi / 2 - b))


def _bool_validate(p):
    _require(0.0 < p["alpha"] < 1.0, "boolean_stable.alpha",
             f"alpha={p['alpha']} not in (0, 1)")


def _bool_pdf(p, x):
    al = p["alpha"]
    s, c = math.sin(math.pi * al), math.cos(math.pi * al)
    x = np.asarray(x, float)
    with np.errstate(divide="ignore", invalid="ignore"):
        xa = np.power(np.where(x > 0, x, 1.0), al)
        out = (s / math.pi) * np.power(np.where(x > 0, x, 1.0), al - 1.0) / (
            xa * xa + 2.0 * xa * c + 1.0)
    return np.where(x > 0, out, 0.0)


def _bool_cdf(p, x):
    al = p["alpha"]
    s, c = math.sin(math.pi * al), math.cos(math.pi * al)
    x = np.asarray(x, float)
    xa = np.power(np.where(x > 0, x, 1.0), al)
    val = (np.arctan((xa + c) / s) - (math.pi / 2 - math.pi * al)) / (al * math.pi)
    return np.clip(np.where(x > 0, val, 0.0), 0.0, 1.0)


def _bool_ppf(p, q):
    al = p["alpha"]
    s, c = math.sin(math.pi * al), math.cos(math.pi * al)
    u = s * math.tan(al * math.pi * q + math.pi / 2 - math.pi * al) - c
    return u ** (1.0 / al)


def _mp_pdf(p, x):
    x = np.asarray(x, float)
    inside = (x > 0) & (x < 4)
    xx = np.where(inside, x, 1.0)
    out = np.sqrt((4.0 - xx) / xx) / (2.0 * math.pi)
    return np.where(inside, out, 0.0)


def _mp_cdf(p, x):
    x = np.asarray(x, float)
    xx = np.clip(x, 0.0, 4.0)
    phi = np.arccos(1.0 - xx / 2.0)
    return (phi + np.sin(phi)) / math.pi


def _mp_ppf(p, q):
    phi = optimize.brentq(lambda t: (t + math.sin(t)) / math.pi - q, 0.0, math.pi,
                          xtol=1e-300, rtol=8.9e-16)
    return 4.0 * math.sin(0.5 * phi) ** 2


def _mpinv_pdf(p, x):
    x = np.asarray(x, float)
    inside = x > 0.25
    xx = np.where(inside, x, 1.0)
    out = np.sqrt(4.0 * xx - 1.0) / (2.0 * math.pi * xx * xx)
    return np.where(inside, out, 0.0)


def _mpinv_cdf(p, x):
    x = np.asarray(x, float)
    xx = np.where(x > 0.25, x, 0.25)
    return np.where(x > 0.25, 1.0 - _mp_cdf(p, 1.0 / xx), 0.0)


def _mpinv_ppf(p, q):
    return 1.0 / _mp_ppf(p, 1.0 - q)


def _uniform_validate(p):
    _require(0.0 < p["lo"] < p["hi"], "uniform.bounds",
             f"need 0 < lo < hi, got [{p['lo']}, {p['hi']}]")


_FAMILIES: dict[str, _FamilyDef] = {}


def _register(name: str, fam: _FamilyDef) -> None:
    _FAMILIES[name] = fam


_register("lambda", _FamilyDef(
    params=("b",),
    validate=_lambda_validate,
    pdf=_lambda_pdf,
    cdf=_lambda_cdf,
    ppf=_lambda_ppf,
    mean=lambda p: math.inf,
    support=lambda p: (0.0, math.inf),
    singular=lambda p: (),
    invert=lambda p: ("lambda", dict(p)),
))

_register("boolean_stable", _FamilyDef(
    params=("alpha",),
    validate=_bool_validate,
    pdf=_bool_pdf,
    cdf=_bool_cdf,
    ppf=_bool_ppf,
    mean=lambda p: math.inf,
    support=lambda p: (0.0, math.inf),
    singular=lambda p: (0.0,),
    invert=lambda p: ("boolean_stable", dict(p)),
))

_register("marchenko_pastur", _FamilyDef(
    params=(),
    validate=lambda p: None,
    pdf=_mp_pdf,
    cdf=_mp_cdf,
    ppf=_mp_ppf,
    mean=lambda p: 1.0,
    support=lambda p: (0.0, 4.0),
    singular=lambda p: (0.0,),
    invert=lambda p: ("marchenko_pastur_inverse", {}),
))

_register("marchenko_pastur_inverse", _FamilyDef(
    params=(),
    validate=lambda p: None,
    pdf=_mpinv_pdf,
    cdf=_mpinv_cdf,
    ppf=_mpinv_ppf,
    mean=lambda p: math.inf,
    support=lambda p: (0.25, math.inf),
    singular=lambda p: (),
    invert=lambda p: ("marchenko_pastur", {}),
))

_register("half_normal", _FamilyDef(
    params=("t",),
    validate=lambda p: _require(p["t"] > 0, "half_normal.t", f"t={p['t']} <= 0"),
    pdf=lambda p, x: stats.halfnorm.pdf(x, scale=math.sqrt(p["t"])),
    cdf=lambda p, x: stats.halfnorm.cdf(x, scale=math.sqrt(p["t"])),
    ppf=lambda p, q: float(stats.halfnorm.ppf(q, scale=math.sqrt(p["t"]))),
    mean=lambda p: math.sqrt(2.0 * p["t"] / math.pi),
    support=lambda p: (0.0, math.inf),
    singular=lambda p: (),
    invert=lambda p: None,
))

_register("gamma", _FamilyDef(
    params=("p", "theta"),
    validate=lambda p: _require(p["p"] > 0 and p["theta"] > 0, "gamma.params",
                                f"need p, theta > 0, got {p}"),
    pdf=lambda p, x: stats.gamma.pdf(x, a=p["p"], scale=p["theta"]),
    cdf=lambda p, x: stats.gamma.cdf(x, a=p["p"], scale=p["theta"]),
    ppf=lambda p, q: float(stats.gamma.ppf(q, a=p["p"], scale=p["theta"])),
    mean=lambda p: p["p"] * p["theta"],
    support=lambda p: (0.0, math.inf),
    singular=lambda p: (0.0,) if p["p"] < 1 else (),
    invert=lambda p: None,
))

_register("beta", _FamilyDef(
    params=("p", "q"),
    validate=lambda p: _require(p["p"] > 0 and p["q"] > 0, "beta.params",
                                f"need p, q > 0, got {p}"),
    pdf=lambda p, x: stats.beta.pdf(x, p["p"], p["q"]),
    cdf=lambda p, x: stats.beta.cdf(x, p["p"], p["q"]),
    ppf=lambda p, q: float(stats.beta.ppf(q, p["p"], p["q"])),
    mean=lambda p: p["p"] / (p["p"] + p["q"]),
    support=lambda p: (0.0, 1.0),
    singular=lambda p: tuple(v for v, bad in ((0.0, p["p"] < 1), (1.0, p["q"] < 1)) if bad),
    invert=lambda p: None,
))

_register("uniform", _FamilyDef(
    params=("lo", "hi"),
    validate=_uniform_validate,
    pdf=lambda p, x: stats.uniform.pdf(x, loc=p["lo"], scale=p["hi"] - p["lo"]),
    cdf=lambda p, x: stats.uniform.cdf(x, loc=p["lo"], scale=p["hi"] - p["lo"]),
    ppf=lambda p, q: p["lo"] + q * (p["hi"] - p["lo"]),
    mean=lambda p: 0.5 * (p["lo"] + p["hi"]),
    support=lambda p: (p["lo"], p["hi"]),
    singular=lambda p: (),
    invert=lambda p: None,
))

_register("log_normal", _FamilyDef(
    params=("m", "s"),
    validate=lambda p: _require(p["s"] > 0, "log_normal.s", f"s={p['s']} <= 0"),
    pdf=lambda p, x: stats.lognorm.pdf(x, s=p["s"], scale=math.exp(p["m"])),
    cdf=lambda p, x: stats.lognorm.cdf(x, s=p["s"], scale=math.exp(p["m"])),
    ppf=lambda p, q: float(stats.lognorm.ppf(q, s=p["s"], scale=math.exp(p["m"]))),
    mean=lambda p: math.exp(p["m"] + 0.5 * p["s"] ** 2),
    support=lambda p: (0.0, math.inf),
    singular=lambda p: (),
    invert=lambda p: ("log_normal", {"m": -p["m"], "s": p["s"]}),
))

_register("dirac", _FamilyDef(
    params=("c",),
    validate=lambda p: _require(p["c"] > 0, "dirac.c", f"c={p['c']} <= 0"),
    pdf=None, cdf=None, ppf=None,
    mean=lambda p: p["c"],
    support=lambda p: (p["c"], p["c"]),
    singular=lambda p: (),
    invert=lambda p: ("dirac", {"c": 1.0 / p["c"]}),
))


# ---------------------------------------------------------------------------
# measure classes
# ---------------------------------------------------------------------------

class Measure:
    """Common interface of the three measure representations."""

    kind: str

    def has_density(self) -> bool:
        raise NotImplementedError

    def atoms(self):
        """List of (weight, location) pairs, or None for density measures."""
        return None

    def density(self, x):
        raise AtomicHasNoDensity(f"{self.kind} measure has no Lebesgue density")

    def cdf(self, x):
        raise NotImplementedError

    def mean(self) -> float:
        raise NotImplementedError

    def math_support(self) -> tuple[float, float]:
        """Hull of the mathematical support (may be unbounded)."""
        raise NotImplementedError

    def effective_support(self, tail: float = TOL_TAIL) -> tuple[float, float]:
        """Positive finite bounds containing all but `tail` of the mass per side."""
        raise NotImplementedError

    def integrate(self, kernel, points=(), scales=(), rtol: float = TOL_QUAD,
                  max_depth: int = 48) -> complex | float:
        raise NotImplementedError

    def invert(self) -> "Measure":
        raise NotImplementedError

    def to_dict(self) -> dict:
        raise NotImplementedError


class Atomic(Measure):
    """Finite positive point masses with total weight one."""

    kind = "atomic"

    def __init__(self, weights: Sequence[float], locations: Sequence[float]):
        w = np.asarray(weights, float)
        a = np.asarray(locations, float)
        if w.ndim != 1 or a.shape != w.shape or w.size == 0:
            raise InvariantViolation("atomic.shape", "weights and locations must "
                                     "be equal-length non-empty vectors")
        if not np.all(w > 0):
            raise InvariantViolation("atomic.weights", "weights must be positive")
        if not np.all(a > 0):
            raise InvariantViolation("atomic.locations", "locations must be positive")
        if not np.all(np.diff(a) > 0):
            raise InvariantViolation("atomic.locations",
                                     "locations must be strictly increasing")
        if abs(w.sum() - 1.0) > TOL_MASS_ATOMIC:
            raise InvariantViolation("atomic.mass",
                                     f"weights sum to {w.sum()!r}, expected 1")
        self.w = w
        self.a = a

    def has_density(self) -> bool:
        return False

    def atoms(self):
        return list(zip(self.w.tolist(), self.a.tolist()))

    def cdf(self, x):
        x = np.asarray(x, float)
        idx = np.searchsorted(self.a, x, side="right")
        cw = np.concatenate([[0.0], np.cumsum(self.w)])
        return cw[idx]

    def mean(self) -> float:
        return float(np.dot(self.w, self.a))

    def math_support(self):
        return float(self.a[0]), float(self.a[-1])

    def effective_support(self, tail: float = TOL_TAIL):
        return self.math_support()

    def integrate(self, kernel, points=(), scales=(), rtol=TOL_QUAD, max_depth=48):
        vals = np.asarray(kernel(self.a))
        total = np.dot(self.w, vals)
        return complex(total) if np.iscomplexobj(vals) else float(total)

    def invert(self) -> "Atomic":
        inv = 1.0 / self.a[::-1]
        return Atomic(self.w[::-1], inv)

    def to_dict(self):
        return {"kind": "atomic",
                "atoms": [{"w": float(w), "a": float(a)}
                          for w, a in zip(self.w, self.a)]}


class GridDensity(Measure):
    """Sampled density, interpreted as its piecewise-linear interpolant."""

    kind = "grid"

    def __init__(self, x: Sequence[float], f: Sequence[float],
                 normalize: bool = False):
        x = np.asarray(x, float)
        f = np.asarray(f, float)
        if x.ndim != 1 or f.shape != x.shape or x.size < 2:
            raise InvariantViolation("grid.shape",
                                     "x and f must be equal-length vectors (>= 2)")
        if not np.all(x > 0):
            raise InvariantViolation("grid.abscissae", "abscissae must be positive")
        if not np.all(np.diff(x) > 0):
            raise InvariantViolation("grid.abscissae",
                                     "abscissae must be strictly increasing")
        if not np.all(f >= 0):
            raise InvariantViolation("grid.values", "density values must be >= 0")
        mass = float(np.trapezoid(f, x))
        if normalize:
            if mass <= 0:
                raise InvariantViolation("grid.mass", "cannot normalize zero mass")
            f = f / mass
        elif abs(mass - 1.0) > TOL_MASS_GRID:
            raise InvariantViolation("grid.mass",
                                     f"trapezoid mass {mass!r} differs from 1 by "
                                     f"more than {TOL_MASS_GRID}")
        self.x = x
        self.f = f

    def has_density(self) -> bool:
        return True

    def density(self, x):
        return np.interp(np.asarray(x, float), self.x, self.f, left=0.0, right=0.0)

    def cdf(self, x):
        knots = self.x
        cum = np.concatenate([[0.0], np.cumsum(
            0.5 * (self.f[1:] + self.f[:-1]) * np.diff(knots))])
        x = np.asarray(x, float)
        i = np.clip(np.searchsorted(knots, x) - 1, 0, knots.size - 2)
        x0, x1 = knots[i], knots[i + 1]
        f0 = self.f[i]
        slope = (self.f[i + 1] - f0) / (x1 - x0)
        dx = np.clip(x - x0, 0.0, x1 - x0)
        partial = f0 * dx + 0.5 * slope * dx * dx
        out = cum[i] + partial
        return np.where(x <= knots[0], 0.0, np.where(x >= knots[-1], cum[-1], out))

    def mean(self) -> float:
        return float(np.trapezoid(self.x * self.f, self.x))

    def math_support(self):
        return float(self.x[0]), float(self.x[-1])

    def effective_support(self, tail: float = TOL_TAIL):
        return self.math_support()

    def integrate(self, kernel, points=(), scales=(), rtol=TOL_QUAD, max_depth=48):
        lo, hi = self.math_support()
        extra = [self.x]
        for p, s in zip(points, scales):
            extra.append(ladder_edges(float(p), float(s), lo, hi))
        edges = np.unique(np.concatenate(extra))
        keep = np.concatenate([[True], np.diff(edges) > 4 * _EPS * edges[1:]])
        edges = edges[keep]
        val, _err = adaptive_quad(
            lambda u: np.asarray(kernel(u)) * self.density(u),
            edges, rtol=rtol, max_depth=max_depth)
        return val

    def invert(self) -> "GridDensity":
        xi = 1.0 / self.x[::-1]
        fi = self.f[::-1] * (self.x[::-1] ** 2)
        return GridDensity(xi, fi, normalize=False) if _mass_ok(xi, fi) \
            else GridDensity(xi, fi, normalize=True)

    def to_dict(self):
        return {"kind": "grid",
                "grid": {"x": self.x.tolist(), "f": self.f.tolist()}}


def _mass_ok(x, f):
    return abs(float(np.trapezoid(f, x)) - 1.0) <= TOL_MASS_GRID


class Named(Measure):
    """Closed-form family measure; `dirac` is atomic, everything else has a
    density."""

    kind = "named"

    def __init__(self, family: str, **params):
        if family not in _FAMILIES:
            raise InvariantViolation("named.family",
                                     f"unknown family {family!r}; known: "
                                     f"{sorted(_FAMILIES)}")
        fam = _FAMILIES[family]
        missing = set(fam.params) - set(params)
        extra = set(params) - set(fam.params)
        if missing or extra:
            raise InvariantViolation(
                "named.params",
                f"family {family!r} takes {fam.params}, got {sorted(params)}")
        params = {k: float(params[k]) for k in fam.params}
        fam.validate(params)
        self.family = family
        self.params = params
        self._fam = fam

    def has_density(self) -> bool:
        return self.family != "dirac"

    def atoms(self):
        if self.family == "dirac":
            return [(1.0, self.params["c"])]
        return None

    def density(self, x):
        if not self.has_density():
            raise AtomicHasNoDensity("dirac is a point mass; it has no density")
        return self._fam.pdf(self.params, x)

    def cdf(self, x):
        if self.family == "dirac":
            return np.where(np.asarray(x, float) >= self.params["c"], 1.0, 0.0)
        return self._fam.cdf(self.params, x)

    def mean(self) -> float:
        return self._fam.mean(self.params)

    def math_support(self):
        return self._fam.support(self.params)

    def effective_support(self, tail: float = TOL_TAIL):
        if self.family == "dirac":
            return self.math_support()
        # quantiles on both sides keep endpoint-singular densities (beta with
        # p or q below 1, Marchenko-Pastur at 0, ...) off the panel edges;
        # clamp a few ulps inside finite endpoints in case the quantile
        # rounds onto them
        lo, hi = self.math_support()
        lo_eff = max(self._fam.ppf(self.params, tail), 1e-300)
        hi_eff = self._fam.ppf(self.params, 1.0 - tail)
        if lo > 0.0:
            lo_eff = max(lo_eff, lo * (1.0 + 4 * _EPS))
        if not math.isinf(hi):
            hi_eff = min(hi_eff, hi * (1.0 - 4 * _EPS))
        return float(lo_eff), float(hi_eff)

    def integrate(self, kernel, points=(), scales=(), rtol=TOL_QUAD, max_depth=48):
        if self.family == "dirac":
            c = self.params["c"]
            val = np.asarray(kernel(np.array([c])))[0]
            return complex(val) if np.iscomplexobj(val) else float(val)
        lo, hi = self.effective_support()
        pts = list(points) + [s for s in self._fam.singular(self.params)]
        scl = list(scales) + [max(abs(s), lo) * 1e-9
                              for s in self._fam.singular(self.params)]
        edges = build_edges(lo, hi, pts, scl)
        val, _err = adaptive_quad(
            lambda u: np.asarray(kernel(u)) * self.density(u),
            edges, rtol=rtol, max_depth=max_depth)
        return val

    def invert(self) -> Measure:
        mapped = self._fam.invert(self.params)
        if mapped is not None:
            return Named(mapped[0], **mapped[1])
        return to_grid(self).invert()

    def to_dict(self):
        return {"kind": "named", "family": self.family,
                "params": dict(self.params)}


# ---------------------------------------------------------------------------
# factories
# ---------------------------------------------------------------------------

def atomic(pairs: Sequence[tuple[float, float]]) -> Atomic:
    """Atomic measure from (weight, location) pairs (any order)."""
    pairs = sorted(pairs, key=lambda p: p[1])
    return Atomic([p[0] for p in pairs], [p[1] for p in pairs])


def dirac(c: float) -> Named:
    return Named("dirac", c=c)


def lambda_measure(b: float) -> Named:
    return Named("lambda", b=b)


def half_normal(t: float) -> Named:
    return Named("half_normal", t=t)


def gamma_measure(p: float, theta: float) -> Named:
    return Named("gamma", p=p, theta=theta)


def beta_measure(p: float, q: float) -> Named:
    return Named("beta", p=p, q=q)


def marchenko_pastur() -> Named:
    return Named("marchenko_pastur")


def marchenko_pastur_inverse() -> Named:
    return Named("marchenko_pastur_inverse")


def boolean_stable(alpha: float) -> Named:
    return Named("boolean_stable", alpha=alpha)


def uniform_interval(lo: float, hi: float) -> Named:
    return Named("uniform", lo=lo, hi=hi)


def log_normal(m: float, s: float) -> Named:
    return Named("log_normal", m=m, s=s)


def grid_density(x, f, normalize: bool = False) -> GridDensity:
    return GridDensity(x, f, normalize=normalize)


def to_grid(nu: Measure, n: int = 2048, tail: float = 1e-7) -> GridDensity:
    """Sample a density measure onto the canonical log-spaced grid."""
    if not nu.has_density():
        raise AtomicHasNoDensity("cannot grid a purely atomic measure")
    if isinstance(nu, GridDensity):
        return nu
    lo, hi = nu.effective_support(tail)
    x = np.geomspace(lo, hi, n)
    return GridDensity(x, nu.density(x), normalize=True)


# ---------------------------------------------------------------------------
# module-level operations
# ---------------------------------------------------------------------------

def density_at(nu: Measure, x) -> float | np.ndarray:
    """Lebesgue density of `nu` at `x` (0 outside the support)."""
    vals = nu.density(x)
    return float(vals) if np.isscalar(x) else vals


def integrate(nu: Measure, kernel, points=(), scales=(),
              rtol: float = TOL_QUAD, max_depth: int = 48):
    """Integral of `kernel` against `nu`.

    Atomic measures give the exact weighted sum.  Density measures use
    adaptive panel quadrature over the effective support (mass beyond `TOL_TAIL` per
    side is truncated), with panels seeded around `points` at widths
    `scales`.
    """
    return nu.integrate(kernel, points=points, scales=scales,
                        rtol=rtol, max_depth=max_depth)


def invert_measure(nu: Measure) -> Measure:
    """Push-forward of `nu` under x -> 1/x."""
    return nu.invert()


def pushforward_log(nu: Measure, y_lo: float, y_hi: float, n: int):
    """Density of the logarithm push-forward sampled on a uniform grid.

    Returns (y, p) with p(y) = density(e^y) * e^y.
    """
    if not nu.has_density():
        raise AtomicHasNoDensity("push-forward density needs a density")
    if not (y_lo < y_hi) or n < 2:
        raise DomainError("need y_lo < y_hi and n >= 2")
    y = np.linspace(y_lo, y_hi, n)
    x = np.exp(y)
    return y, nu.density(x) * x


def is_mult_symmetric(nu: Measure, tol: float = 1e-9) -> bool:
    """True when `nu` equals its multiplicative inverse.

    Atomic measures are compared atom by atom after inversion; density
    measures by the sup-distance of the distribution functions of `nu` and
    `invert_measure(nu)` on a log-symmetric grid.
    """
    if not nu.has_density():
        mine = nu.atoms()
        other = invert_measure_atoms(nu)
        if len(mine) != len(other):
            return False
        for (w1, a1), (w2, a2) in zip(sorted(mine, key=lambda p: p[1]),
                                      sorted(other, key=lambda p: p[1])):
            if abs(w1 - w2) > 1e-12 or abs(a1 - a2) > 1e-12 * max(1.0, abs(a1)):
                return False
        return True
    inv = invert_measure(nu)
    lo1, hi1 = nu.effective_support(1e-9)
    lo2, hi2 = inv.effective_support(1e-9)
    span = max(abs(math.log(v)) for v in (lo1, hi1, lo2, hi2))
    x = np.exp(np.linspace(-span, span, 1025))
    return float(np.max(np.abs(nu.cdf(x) - inv.cdf(x)))) <= tol


def invert_measure_atoms(nu: Measure):
    at = nu.atoms()
    return sorted(((w, 1.0 / a) for w, a in at), key=lambda p: p[1])


def sup_cdf_distance(mu: Measure, nu: Measure, points: int = 1025) -> float:
    """Sup-distance of distribution functions on a shared log grid."""
    bounds = [*mu.effective_support(1e-9), *nu.effective_support(1e-9)]
    lo, hi = min(bounds), max(bounds)
    x = np.geomspace(max(lo, 1e-300), hi, points)
    return float(np.max(np.abs(mu.cdf(x) - nu.cdf(x))))


def f_blowup(nu: Measure, r: float) -> float:
    """The blow-up integral f(r) = int r*xi / (1 - r*xi)^2 d nu(xi).

    Returns +inf when the pole xi = 1/r carries mass: an atom at 1/r, or
    1/r interior to the support of a density measure.  Finiteness of f is
    what decides whether r belongs to the blow-up region of the flow.

    The interior test uses the effective (tail-truncated) support so the
    verdict matches what the quadrature of the implicit-equation kernels
    sees; beyond the truncation the density carries less than TOL_TAIL of
    mass and f is computed as the (finite) truncated integral.
    """
    if r <= 0:
        raise DomainError(f"r must be positive, got {r}")
    at = nu.atoms()
    if at is not None:
        w = np.array([p[0] for p in at])
        a = np.array([p[1] for p in at])
        u = a * r
        if np.any(np.abs(1.0 - u) <= 64 * _EPS * np.maximum(1.0, u)):
            return math.inf
        return float(np.sum(w * u / (1.0 - u) ** 2))
    xs = 1.0 / r
    lo, hi = nu.effective_support()
    if lo < xs < hi and _density_positive_near(nu, xs):
        return math.inf
    kernel = lambda xi: r * xi / (1.0 - r * xi) ** 2
    try:
        return float(nu.integrate(kernel, points=(xs,), scales=(xs * 1e-9,)))
    except NonIntegrable:
        # pole effectively on the support boundary
        return math.inf


def _density_positive_near(nu: Measure, xs: float) -> bool:
    if isinstance(nu, GridDensity):
        i = int(np.clip(np.searchsorted(nu.x, xs) - 1, 0, nu.x.size - 2))
        j0, j1 = max(i - 1, 0), min(i + 2, nu.x.size - 1)
        return bool(np.max(nu.f[j0:j1 + 1]) > 0.0)
    return float(np.max(nu.density(np.array([xs])))) > 0.0
