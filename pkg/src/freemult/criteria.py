"""Solution-count criteria, classical multiplicative convolution, and the
atomic counterexample builder.

Log-unimodality of the time-t marginal is equivalent to the level equation

    Theta_R(r) := sin(R)/R * int r*xi / (1 + r^2 xi^2 - 2 r xi cos R) d nu
                = 1/t

having at most two solutions in r for every angle R in (0, pi).  The same
equation arises as the rescaled density of the classical multiplicative
convolution of a lambda-family member with the inverted measure, which gives
an independent cross-check route.

For a measure supported on [lo, hi] with hi^4 - 3 lo^4 < 2 lo^3 hi there is
a closed-form time threshold beyond which the marginal is log-unimodal; and
for atomic measures whose locations collapse fast enough, midpoint gap
certificates prove the blow-up region disconnected at every time, so the
marginals are never log-unimodal.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import optimize

from .errors import (
    DomainError,
    GridUnderflow,
    HypothesisViolated,
    IndexOutOfRange,
    WindowTooNarrow,
)
from .flow import poisson_kernel_integral
from .measures import (
    Atomic,
    GridDensity,
    Measure,
    atomic,
    f_blowup,
    pushforward_log,
)

_TANGENT_TOL = 1e-9


def level_function(nu: Measure, R: float, r: float, rtol: float = 1e-12) -> float:
    """Theta_R(r): the angle-equation integral at fixed angle R as a function
    of the radial variable."""
    if not (0.0 < R < math.pi):
        raise DomainError(f"R must be in (0, pi), got {R}")
    if r <= 0:
        raise DomainError(f"r must be positive, got {r}")
    s2 = math.sin(0.5 * R) ** 2
    return math.sin(R) / R * poisson_kernel_integral(nu, r, s2, rtol=rtol)


def _simpson_weights(n: int, h: float) -> np.ndarray:
    # n odd
    w = np.full(n, 2.0)
    w[1::2] = 4.0
    w[0] = w[-1] = 1.0
    return w * h / 3.0


def _level_profile(nu: Measure, R: float, r_grid: np.ndarray) -> np.ndarray:
    """Vectorized Theta_R over an r grid -- used to locate sign structure;
    individual roots are polished with the scalar adaptive route."""
    s2 = math.sin(0.5 * R) ** 2
    pref = math.sin(R) / R
    at = nu.atoms()
    if at is not None:
        w = np.array([p[0] for p in at])
        a = np.array([p[1] for p in at])
        u = r_grid[:, None] * a[None, :]
        denom = (1.0 - u) ** 2 + 4.0 * u * s2
        return pref * np.sum(w[None, :] * u / denom, axis=1)
    lo, hi = nu.effective_support()
    span = math.log(hi / lo)
    n = int(min(max(513, math.ceil(10.0 * span / R)), 24001))
    if n % 2 == 0:
        n += 1
    if n >= 24001:
        # kernel too narrow for a shared node set: per-point adaptive route
        return np.array([level_function(nu, R, float(r), rtol=1e-9)
                         for r in r_grid])
    y = np.linspace(math.log(lo), math.log(hi), n)
    xi = np.exp(y)
    wts = _simpson_weights(n, y[1] - y[0]) * xi * nu.density(xi)
    out = np.empty(r_grid.size)
    chunk = max(1, int(4e6 // n))
    for i in range(0, r_grid.size, chunk):
        rr = r_grid[i:i + chunk, None]
        u = rr * xi[None, :]
        denom = (1.0 - u) ** 2 + 4.0 * u * s2
        out[i:i + chunk] = pref * (u / denom) @ wts
    return out


@dataclass(frozen=True)
class LevelSolutions:
    """Roots of Theta_R(r) = 1/t inside the window.

    `count` is the number of distinct solution locations; tangential
    (double) roots are flagged `boundary` and each adds one to
    `effective_count` on top of `count`, so the at-most-two verdict treats
    them conservatively."""

    count: int
    roots: tuple[float, ...]
    boundary: bool
    effective_count: int
    window: tuple[float, float]


def _default_level_window(nu: Measure) -> tuple[float, float]:
    lo, hi = nu.effective_support(1e-9)
    return 1e-2 / hi, 1e2 / lo


def count_level_solutions(nu: Measure, R: float, t: float, window=None,
                          grid: int = 4096, expand: bool = True) -> LevelSolutions:
    """Count solutions of Theta_R(r) = 1/t.

    Sign changes on a log grid are polished by bracketed root finding; local
    extrema that touch the level within tolerance are reported as boundary
    (tangency) cases.  When the level function is still above 1/t at a
    window end the window is widened (or WindowTooNarrow is raised if the
    caller pinned it)."""
    if t <= 0:
        raise DomainError(f"t must be positive, got {t}")
    target = 1.0 / t
    if window is None:
        wlo, whi = _default_level_window(nu)
    else:
        wlo, whi = float(window[0]), float(window[1])
        if not (0.0 < wlo < whi):
            raise DomainError(f"bad window {window}")

    for _ in range(80):
        r = np.geomspace(wlo, whi, grid)
        vals = _level_profile(nu, R, r) - target
        lo_clipped = vals[0] >= 0.0
        hi_clipped = vals[-1] >= 0.0
        if not (lo_clipped or hi_clipped):
            break
        if window is not None and not expand:
            raise WindowTooNarrow(
                f"level function exceeds 1/t at a window end of {window}")
        if lo_clipped:
            wlo /= 4.0
        if hi_clipped:
            whi *= 4.0
    else:
        raise WindowTooNarrow("could not expand the window below the level")

    g = lambda rr: level_function(nu, R, rr) - target
    roots: list[float] = []
    flips = np.nonzero(np.sign(vals[:-1]) * np.sign(vals[1:]) < 0)[0]
    for i in flips:
        a, b = float(r[i]), float(r[i + 1])
        ga, gb = g(a), g(b)
        if ga * gb > 0:
            continue  # profile artifact finer than the scalar route
        roots.append(optimize.brentq(g, a, b, xtol=1e-300, rtol=1e-12))
    exact = np.nonzero(vals == 0.0)[0]
    roots.extend(float(r[i]) for i in exact)

    # tangency sweep: interior extrema of the profile that touch the level
    n_tangent = 0
    tol_t = _TANGENT_TOL * target
    interior = np.arange(1, r.size - 1)
    is_max = (vals[interior] > vals[interior - 1]) & (vals[interior] >= vals[interior + 1])
    is_min = (vals[interior] < vals[interior - 1]) & (vals[interior] <= vals[interior + 1])
    for i in interior[(is_max & (np.abs(vals[interior]) < 1e-5 * target)) |
                      (is_min & (np.abs(vals[interior]) < 1e-5 * target))]:
        a, b = float(r[i - 1]), float(r[i + 1])
        if any(a < rt < b for rt in roots):
            continue
        sign = 1.0 if is_max[i - 1] else -1.0
        res = optimize.minimize_scalar(lambda rr: -sign * g(rr),
                                       bounds=(a, b), method="bounded",
                                       options={"xatol": 1e-14 * b})
        ext = -res.fun * sign
        r_ext = float(res.x)
        if abs(ext) <= tol_t:
            roots.append(r_ext)
            n_tangent += 1
        elif sign * ext > 0:
            # grid missed a genuine double crossing around this extremum
            for aa, bb in ((a, r_ext), (r_ext, b)):
                if g(aa) * g(bb) <= 0:
                    roots.append(optimize.brentq(g, aa, bb,
                                                 xtol=1e-300, rtol=1e-12))

    roots = sorted(set(roots))
    merged: list[float] = []
    for rt in roots:
        if not merged or rt - merged[-1] > 1e-9 * rt:
            merged.append(rt)
    return LevelSolutions(len(merged), tuple(merged), n_tangent > 0,
                          len(merged) + n_tangent, (wlo, whi))


def default_angle_sweep(n: int = 64) -> np.ndarray:
    """Angles in (0, pi), log-spaced toward both ends where the criterion
    transitions live."""
    half = np.geomspace(0.01, math.pi / 2, n // 2 + 1)[:-1]
    return np.unique(np.concatenate([half, math.pi - half]))


@dataclass(frozen=True)
class CriterionReport:
    angles: tuple[float, ...]
    counts: tuple[int, ...]
    effective_counts: tuple[int, ...]
    roots: tuple[tuple[float, ...], ...]
    boundary_flags: tuple[bool, ...]
    log_unimodal: bool


def sweep_level_counts(nu: Measure, t: float, angles=None, window=None,
                       grid: int = 4096) -> CriterionReport:
    """Run the solution count across an angle sweep; the marginal at time t
    is log-unimodal exactly when every count is at most two."""
    angles = default_angle_sweep() if angles is None else np.asarray(angles, float)
    counts, eff, roots, flags = [], [], [], []
    for R in angles:
        sol = count_level_solutions(nu, float(R), t, window=window, grid=grid)
        counts.append(sol.count)
        eff.append(sol.effective_count)
        roots.append(sol.roots)
        flags.append(sol.boundary)
    return CriterionReport(tuple(float(R) for R in angles), tuple(counts),
                           tuple(eff), tuple(roots), tuple(flags),
                           all(c <= 2 for c in eff))


def time_threshold(lo: float, hi: float) -> float:
    """Closed-form time bound: beyond it, the marginal of any measure
    supported on [lo, hi] is log-unimodal.  Requires hi^4 - 3 lo^4 <
    2 lo^3 hi."""
    if not (0.0 < lo < hi):
        raise DomainError(f"need 0 < lo < hi, got [{lo}, {hi}]")
    if hi ** 4 - 3.0 * lo ** 4 >= 2.0 * lo ** 3 * hi:
        raise HypothesisViolated(
            f"hi^4 - 3 lo^4 = {hi ** 4 - 3 * lo ** 4:.6g} is not below "
            f"2 lo^3 hi = {2 * lo ** 3 * hi:.6g}")
    disc = 4.0 * lo ** 6 * hi ** 2 - (3.0 * lo ** 4 - hi ** 4) ** 2
    return 2.0 * hi ** 2 * (lo + hi) ** 2 * math.pi / math.sqrt(disc)


def reciprocal_interval_check(nu: Measure, t: float, n_r: int = 64,
                              n_angle: int = 64) -> bool:
    """Verify the level function stays above 1/t on the reciprocal-support
    block for all angles with cos R above the interval threshold.

    For such angles the level equation then has no solutions between 1/hi
    and 1/lo, which closes the at-most-two count for times past the
    threshold.  Vacuously true when no angle qualifies."""
    lo, hi = nu.math_support()
    if not (0.0 < lo) or math.isinf(hi):
        raise DomainError("measure must be supported on a bounded interval")
    if t <= 0:
        raise DomainError(f"t must be positive, got {t}")
    thr = (3.0 * lo ** 4 - hi ** 4) / (2.0 * lo ** 3 * hi)
    angles = np.linspace(1e-3, math.pi - 1e-3, n_angle)
    angles = angles[np.cos(angles) > thr]
    if angles.size == 0:
        return True
    if lo == hi:
        r_grid = np.array([1.0 / lo])
    else:
        r_grid = np.geomspace(1.0 / hi, 1.0 / lo, n_r)
    target = 1.0 / t
    for R in angles:
        if np.min(_level_profile(nu, float(R), r_grid)) <= target:
            return False
    return True


# ---------------------------------------------------------------------------
# classical multiplicative convolution
# ---------------------------------------------------------------------------

def mult_convolve(mu: Measure, nu: Measure, n: int = 4096) -> Measure:
    """Classical multiplicative convolution: the law of a product of
    independent draws.

    Atomic (*) atomic stays atomic; atomic (*) density is the finite mixture
    of dilations; density (*) density goes through additive convolution of
    the log-pushforwards on a shared uniform log grid."""
    if n < 16:
        raise GridUnderflow(f"need at least 16 grid points, got {n}")
    mu_at, nu_at = mu.atoms(), nu.atoms()
    if mu_at is not None and nu_at is not None:
        prods: dict[float, float] = {}
        for w1, a1 in mu_at:
            for w2, a2 in nu_at:
                key = a1 * a2
                prods[key] = prods.get(key, 0.0) + w1 * w2
        return atomic(sorted(((w, a) for a, w in prods.items()),
                             key=lambda p: p[1]))
    if mu_at is not None or nu_at is not None:
        at, dens = (mu_at, nu) if mu_at is not None else (nu_at, mu)
        if len(at) == 1 and abs(at[0][1] - 1.0) < 1e-15:
            return dens  # convolving with a unit point mass is the identity
        slo, shi = dens.effective_support(1e-9)
        lo = min(a * slo for _, a in at)
        hi = max(a * shi for _, a in at)
        x = np.geomspace(lo, hi, n)
        f = np.zeros_like(x)
        for w, a in at:
            f += w * dens.density(x / a) / a
        return GridDensity(x, f, normalize=True)

    l1, h1 = (math.log(v) for v in mu.effective_support(1e-9))
    l2, h2 = (math.log(v) for v in nu.effective_support(1e-9))
    span = (h1 - l1) + (h2 - l2)
    h = span / (n - 1)
    m1 = int(math.ceil((h1 - l1) / h)) + 1
    m2 = int(math.ceil((h2 - l2) / h)) + 1
    # both grids share the exact spacing h so the discrete convolution is a
    # true Riemann sum of the additive convolution of the log-pushforwards
    y1, p1 = pushforward_log(mu, l1, l1 + h * (m1 - 1), m1)
    y2, p2 = pushforward_log(nu, l2, l2 + h * (m2 - 1), m2)
    conv = np.convolve(p1, p2) * h
    y = (l1 + l2) + h * np.arange(conv.size)
    x = np.exp(y)
    f = conv / x
    mass = float(np.trapezoid(f, x))
    if mass < 0.99:
        raise GridUnderflow(
            f"log-grid convolution captured only {mass:.4f} of the mass; "
            f"the supports are too separated for {n} points")
    return GridDensity(x, f, normalize=True)


def scaled_convolution_density(nu: Measure, a: float, t: float, r: float,
                               rtol: float = 1e-12) -> float:
    """(r / c_B) times the density of (lambda-family at angle B = a*pi*t)
    multiplicatively convolved with the inverted measure, evaluated at r.

    Computed by the direct kernel integral obtained from substituting
    xi = 1/s in the convolution density; equals the level function at angle
    B rescaled by B / sin(B)."""
    if t <= 0 or r <= 0:
        raise DomainError("need t > 0 and r > 0")
    B = a * math.pi * t
    if not (0.0 < B < math.pi):
        raise DomainError(f"a*pi*t = {B} must lie in (0, pi)")
    c_b = math.sin(B) / (math.pi - B)
    s2 = math.sin(0.5 * B) ** 2
    at = nu.atoms()
    if at is not None:
        total = sum(w * c_b * xi / ((1.0 - r * xi) ** 2 + 4.0 * r * xi * s2)
                    for w, xi in at)
        return r / c_b * total

    def kernel(xi):
        return c_b * xi / ((1.0 - r * xi) ** 2 + 4.0 * r * xi * s2)

    xs = 1.0 / r
    scale = max(2.0 * math.sqrt(s2) * xs, xs * 1e-14)
    total = float(nu.integrate(kernel, points=(xs,), scales=(scale,), rtol=rtol))
    return r / c_b * total


# ---------------------------------------------------------------------------
# atomic counterexamples
# ---------------------------------------------------------------------------

_ZETA6 = math.pi ** 6 / 945.0


@dataclass(frozen=True)
class CounterexampleSpec:
    """Derived quantities of a truncated atomic cascade.

    Weights are recorded raw (before renormalization to total mass one);
    `partial_sum_w_over_a` uses the raw weights so it can be compared with
    the closed-form full-series value.  `midpoints` are the reciprocal-gap
    midpoints b_k used by the gap certificates."""

    n_atoms: int
    raw_weights: tuple[float, ...]
    locations: tuple[float, ...]          # decreasing, as generated
    weights: tuple[float, ...]            # renormalized
    partial_sum_w_over_a: float
    ratios: tuple[float, ...]             # a_k a_{k+1} (a_k + a_{k+1}) / (a_k - a_{k+1})^2
    ratios_decreasing: bool
    midpoints: tuple[float, ...]          # b_k = (1/a_{k+1} + 1/a_k) / 2
    truncated_mass: float                 # raw weight mass beyond the truncation


def build_counterexample(n_atoms: int, rule: str = "zeta6",
                         weight_rule=None, location_rule=None):
    """Truncated atomic cascade whose marginals are never log-unimodal.

    The built-in `zeta6` rule places weight n^-6 / zeta(6) at location n^-4.
    Custom rules supply `weight_rule` and `location_rule` callables of the
    1-based index; locations must decrease strictly.

    Returns (measure, spec): the measure has weights renormalized to total
    mass one; the spec records the raw quantities and certificates inputs.
    """
    if n_atoms < 3:
        raise DomainError(f"need at least 3 atoms, got {n_atoms}")
    if rule == "zeta6":
        weight_rule = lambda k: 1.0 / (_ZETA6 * k ** 6)
        location_rule = lambda k: float(k) ** -4
    elif rule == "custom":
        if weight_rule is None or location_rule is None:
            raise DomainError("custom rule needs weight_rule and location_rule")
    else:
        raise DomainError(f"unknown rule {rule!r}")

    idx = np.arange(1, n_atoms + 1)
    w_raw = np.array([float(weight_rule(int(k))) for k in idx])
    locs = np.array([float(location_rule(int(k))) for k in idx])
    if not np.all(w_raw > 0):
        raise HypothesisViolated("weights must be positive")
    if not np.all(locs > 0) or not np.all(np.diff(locs) < 0):
        raise HypothesisViolated("locations must be positive and strictly "
                                 "decreasing")

    ratios = locs[:-1] * locs[1:] * (locs[:-1] + locs[1:]) / (locs[:-1] - locs[1:]) ** 2
    mids = 0.5 * (1.0 / locs[1:] + 1.0 / locs[:-1])
    weights = w_raw / w_raw.sum()
    measure = atomic(list(zip(weights.tolist(), locs.tolist())))
    spec = CounterexampleSpec(
        n_atoms=n_atoms,
        raw_weights=tuple(w_raw.tolist()),
        locations=tuple(locs.tolist()),
        weights=tuple(weights.tolist()),
        partial_sum_w_over_a=float(np.sum(w_raw / locs)),
        ratios=tuple(ratios.tolist()),
        ratios_decreasing=bool(np.all(np.diff(ratios) < 0)),
        midpoints=tuple(mids.tolist()),
        truncated_mass=float(max(1.0 - w_raw.sum(), 0.0)),
    )
    return measure, spec


@dataclass(frozen=True)
class GapCertificate:
    k: int
    midpoint: float
    f_value: float
    below: bool


def gap_certificate(nu: Measure, t: float, k: int) -> GapCertificate:
    """Evaluate the blow-up integral at the k-th reciprocal-gap midpoint.

    `below=True` certifies that the blow-up region excludes the midpoint
    while containing the reciprocals of the two adjacent atoms, hence is
    disconnected and the time-t marginal is not log-unimodal."""
    at = nu.atoms()
    if at is None:
        raise DomainError("gap certificates need an atomic measure")
    if t <= 0:
        raise DomainError(f"t must be positive, got {t}")
    locs = sorted((a for _, a in at), reverse=True)
    if not (1 <= k <= len(locs) - 1):
        raise IndexOutOfRange(
            f"k={k} needs atoms k and k+1; measure has {len(locs)} atoms")
    a_k, a_k1 = locs[k - 1], locs[k]
    b_k = 0.5 * (1.0 / a_k1 + 1.0 / a_k)
    f_val = f_blowup(nu, b_k)
    return GapCertificate(k, b_k, f_val, f_val < 1.0 / t)
