"""Density of the free positive multiplicative Brownian flow at time t.

For a starting measure nu on the positive half-line, the marginal at time
t > 0 is absolutely continuous and its density q satisfies

    x * q(x) = u(Lambda^-1(1/x)) / (pi * t),

where u(r) is the unique angle in (0, pi) solving the implicit equation

    sin(theta)/theta * int r*xi / (1 + r^2 xi^2 - 2 r xi cos theta) d nu = 1/t

whenever the blow-up integral f(r) = int r*xi/(1 - r*xi)^2 d nu exceeds 1/t
(and u(r) = 0 otherwise), and Lambda is the radial homeomorphism

    Lambda(r) = r * exp( (t/2) int (r^2 xi^2 - 1) / |1 - r xi e^{i u(r)}|^2 d nu ).

The denominators are evaluated in the cancellation-free form
(1 - r*xi)^2 + 4 r*xi sin^2(theta/2).

The support of the marginal is the closure of the image of the blow-up
region {f > 1/t} under r -> 1/Lambda(r); the density curve is sampled
parametrically in r inside each component (exact values, no interpolation).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property
import numpy as np
from scipy import optimize

from .errors import (
    BracketFailure,
    DomainError,
    EmptyVSet,
    InvariantViolation,
    NonIntegrable,
)
from .measures import Measure

_THETA_EDGE = 1e-14
# Angles below this floor are reported as 0: their density contribution is
# u/(pi t x) < 1e-9, far below every curve tolerance, while the kernel peak
# they would require resolving has relative width below the floor.  The
# in-region predicate evaluates the angle kernel AT the floor, which equals
# the blow-up integral away from poles and regularizes it near them.
ANGLE_FLOOR = 1e-9
_S2_FLOOR = math.sin(0.5 * ANGLE_FLOOR) ** 2
_DENOM_FLOOR = 1e-280
TOL_INT = 1e-4


@dataclass(frozen=True)
class FlowContext:
    """Immutable bundle of a starting measure, a time, and solver knobs.

    tol_root is the relative residual target of the angle and inversion
    solves; tol_quad is the quadrature tolerance used inside the solver
    (tighter than the public integration default so root residuals are not
    limited by quadrature noise).
    """

    nu: Measure
    t: float
    tol_root: float = 1e-10
    tol_quad: float = 1e-12
    scan_points: int = 1024
    max_bracket_expansions: int = 60
    boundary_max_iter: int = 200

    def __post_init__(self):
        if not (self.t > 0):
            raise InvariantViolation("flow.t", f"time must be positive, got {self.t}")
        if self.tol_root <= 0 or self.tol_quad <= 0:
            raise InvariantViolation("flow.tol", "tolerances must be positive")

    @cached_property
    def _atom_arrays(self):
        at = self.nu.atoms()
        if at is None:
            return None
        return (np.array([p[0] for p in at]), np.array([p[1] for p in at]))


def _kernel_rtol(rtol: float, sin_half_sq: float) -> float:
    """Achievable tolerance for the angle kernels: the cancellation noise of
    (1 - r*xi)^2 close to the pole floors the relative accuracy at roughly
    1e-16 / theta."""
    theta = max(2.0 * math.sqrt(sin_half_sq), ANGLE_FLOOR)
    return max(rtol, 1e-16 / theta)


def poisson_kernel_integral(nu: Measure, r: float, sin_half_sq: float,
                            rtol: float = 1e-12) -> float:
    """int r*xi / ((1 - r*xi)^2 + 4 r*xi sin^2(theta/2)) d nu(xi)."""
    at = nu.atoms()
    if at is not None:
        w = np.array([p[0] for p in at])
        a = np.array([p[1] for p in at])
        u = r * a
        denom = np.maximum((1.0 - u) ** 2 + 4.0 * u * sin_half_sq, _DENOM_FLOOR)
        return float(np.sum(w * u / denom))
    xs = 1.0 / r

    def kernel(xi):
        u = r * xi
        denom = np.maximum((1.0 - u) ** 2 + 4.0 * u * sin_half_sq, _DENOM_FLOOR)
        return u / denom

    scale = max(2.0 * math.sqrt(sin_half_sq) * xs, xs * 1e-14)
    eff = _kernel_rtol(rtol, sin_half_sq)
    try:
        return float(nu.integrate(kernel, points=(xs,), scales=(scale,), rtol=eff))
    except NonIntegrable:
        # graceful retry when the noise floor was underestimated
        return float(nu.integrate(kernel, points=(xs,), scales=(scale,),
                                  rtol=eff * 100.0))


def angle_equation_lhs(ctx: FlowContext, r: float, theta: float) -> float:
    """Left-hand side of the implicit angle equation at (r, theta)."""
    if r <= 0:
        raise DomainError(f"r must be positive, got {r}")
    if not (0.0 < theta < math.pi):
        raise DomainError(f"theta must be in (0, pi), got {theta}")
    s2 = math.sin(0.5 * theta) ** 2
    return math.sin(theta) / theta * poisson_kernel_integral(
        ctx.nu, r, s2, rtol=ctx.tol_quad)


def _angle_lhs_dtheta(ctx: FlowContext, r: float, theta: float) -> float:
    """d/d theta of the angle-equation LHS (used for root polishing)."""
    s2 = math.sin(0.5 * theta) ** 2
    sin_t, cos_t = math.sin(theta), math.cos(theta)
    ival = poisson_kernel_integral(ctx.nu, r, s2, rtol=ctx.tol_quad)

    arrays = ctx._atom_arrays
    if arrays is not None:
        w, a = arrays
        u = r * a
        denom = np.maximum((1.0 - u) ** 2 + 4.0 * u * s2, _DENOM_FLOOR)
        dival = float(np.sum(-w * u * (2.0 * u * sin_t) / denom ** 2))
    else:
        xs = 1.0 / r

        def kernel(xi):
            u = r * xi
            denom = np.maximum((1.0 - u) ** 2 + 4.0 * u * s2, _DENOM_FLOOR)
            return -u * (2.0 * u * sin_t) / denom ** 2

        scale = max(2.0 * math.sqrt(s2) * xs, xs * 1e-14)
        eff = _kernel_rtol(ctx.tol_quad, s2)
        try:
            dival = float(ctx.nu.integrate(kernel, points=(xs,),
                                           scales=(scale,), rtol=eff))
        except NonIntegrable:
            dival = float(ctx.nu.integrate(kernel, points=(xs,),
                                           scales=(scale,), rtol=eff * 100.0))
    return (cos_t * theta - sin_t) / theta ** 2 * ival + sin_t / theta * dival


def capped_blowup(ctx: FlowContext, r: float) -> float:
    """Angle-equation LHS at the floor angle: the finite, resolvable stand-in
    for the blow-up integral that decides membership in the blow-up region.
    Away from poles it equals the blow-up integral to within ~1e-18
    relative; at poles it saturates around 1/ANGLE_FLOOR^2 instead of
    diverging."""
    if r <= 0:
        raise DomainError(f"r must be positive, got {r}")
    pref = math.sin(ANGLE_FLOOR) / ANGLE_FLOOR
    return pref * poisson_kernel_integral(ctx.nu, r, _S2_FLOOR,
                                          rtol=ctx.tol_quad)


def solve_angle(ctx: FlowContext, r: float) -> float:
    """The angle u(r): 0 off the blow-up region, else the unique root of the
    implicit equation, solved to |LHS - 1/t| <= tol_root / t.

    Roots below ANGLE_FLOOR are reported as 0."""
    if r <= 0:
        raise DomainError(f"r must be positive, got {r}")
    target = 1.0 / ctx.t
    glo = capped_blowup(ctx, r) - target
    if glo <= 0.0:
        return 0.0

    lo, hi = ANGLE_FLOOR, math.pi - _THETA_EDGE
    g = lambda th: angle_equation_lhs(ctx, r, th) - target
    ghi = g(hi)
    if not (ghi < 0.0):
        lo, hi = _angle_bracket_scan(ctx, r, target)
    root = optimize.brentq(g, lo, hi, xtol=1e-300, rtol=1e-12, maxiter=200)

    # Newton polish: brentq stops on theta resolution, the contract is on
    # the residual
    for _ in range(6):
        res = g(root)
        if abs(res) <= ctx.tol_root * target:
            return root
        der = _angle_lhs_dtheta(ctx, r, root)
        if not math.isfinite(der) or der == 0.0:
            break
        cand = root - res / der
        if not (lo < cand < hi):
            break
        root = cand
    return root


def _angle_bracket_scan(ctx: FlowContext, r: float, target: float):
    """Fallback 1024-point scan for a sign change of the angle equation."""
    half = np.geomspace(ANGLE_FLOOR, math.pi / 2, 512)
    thetas = np.concatenate([half, (math.pi - half)[::-1]])
    vals = np.array([angle_equation_lhs(ctx, r, th) for th in thetas]) - target
    sign = np.sign(vals)
    flips = np.nonzero(sign[:-1] * sign[1:] < 0)[0]
    if flips.size == 0:
        raise BracketFailure(
            f"no sign change of the angle equation at r={r}; the blow-up "
            f"integral and the angle kernel disagree numerically")
    i = flips[0]
    return float(thetas[i]), float(thetas[i + 1])


def _radial_exponent(ctx: FlowContext, r: float, u: float) -> float:
    """int (r^2 xi^2 - 1) / ((1 - r*xi)^2 + 4 r*xi sin^2(u/2)) d nu(xi)."""
    s2 = math.sin(0.5 * u) ** 2
    arrays = ctx._atom_arrays
    if arrays is not None:
        w, a = arrays
        q = r * a
        denom = np.maximum((1.0 - q) ** 2 + 4.0 * q * s2, _DENOM_FLOOR)
        return float(np.sum(w * (q * q - 1.0) / denom))
    xs = 1.0 / r

    def kernel(xi):
        q = r * xi
        denom = np.maximum((1.0 - q) ** 2 + 4.0 * q * s2, _DENOM_FLOOR)
        return (q * q - 1.0) / denom

    scale = max(2.0 * math.sqrt(s2) * xs, xs * 1e-14)
    eff = _kernel_rtol(ctx.tol_quad, s2)
    try:
        return float(ctx.nu.integrate(kernel, points=(xs,), scales=(scale,),
                                      rtol=eff))
    except NonIntegrable:
        return float(ctx.nu.integrate(kernel, points=(xs,), scales=(scale,),
                                      rtol=eff * 100.0))


def radial_map(ctx: FlowContext, r: float) -> float:
    """The increasing homeomorphism Lambda of (0, inf) onto itself."""
    if r <= 0:
        raise DomainError(f"r must be positive, got {r}")
    u = solve_angle(ctx, r)
    return r * math.exp(0.5 * ctx.t * _radial_exponent(ctx, r, u))


def radial_map_inverse(ctx: FlowContext, y: float, bracket=None) -> float:
    """Solve Lambda(r) = y by bracketed root finding.

    Starts from the caller-provided bracket when available, otherwise
    expands geometrically (factor 2) from the initial guess r = y.
    """
    if y <= 0:
        raise DomainError(f"y must be positive, got {y}")
    g = lambda r: radial_map(ctx, r) - y

    lo = hi = None
    if bracket is not None:
        blo, bhi = bracket
        glo, ghi = g(blo), g(bhi)
        if abs(glo) <= ctx.tol_root * y:
            return blo
        if abs(ghi) <= ctx.tol_root * y:
            return bhi
        if glo < 0.0 < ghi:
            lo, hi = blo, bhi
    if lo is None:
        lo, hi = _expand_bracket(ctx, g, y)
        if lo == hi:
            return lo  # the guess was an exact root
    root = optimize.brentq(g, lo, hi, xtol=1e-300, rtol=1e-13, maxiter=300)
    return root


def _expand_bracket(ctx: FlowContext, g, r0: float):
    g0 = g(r0)
    if g0 == 0.0:
        return r0, r0
    if g0 < 0.0:
        lo = hi = r0
        for _ in range(ctx.max_bracket_expansions):
            hi *= 2.0
            if g(hi) >= 0.0:
                return lo, hi
            lo = hi
    else:
        lo = hi = r0
        for _ in range(ctx.max_bracket_expansions):
            lo *= 0.5
            if g(lo) <= 0.0:
                return lo, hi
            hi = lo
    raise BracketFailure(
        f"no bracket for the radial map after {ctx.max_bracket_expansions} "
        f"geometric expansions from r0={r0}; the map may not be monotone")


def density(ctx: FlowContext, x: float) -> float:
    """Density q(x) of the marginal at time t, exactly 0 off the support."""
    if x <= 0:
        raise DomainError(f"x must be positive, got {x}")
    r = radial_map_inverse(ctx, 1.0 / x)
    u = solve_angle(ctx, r)
    if u == 0.0:
        return 0.0
    return u / (math.pi * ctx.t * x)


# ---------------------------------------------------------------------------
# blow-up region and support
# ---------------------------------------------------------------------------

def default_window(nu: Measure) -> tuple[float, float]:
    """Default radial search window: poles of the blow-up integral sit at
    reciprocal support points, so the window brackets the reciprocal of the
    effective support with four decades of margin."""
    slo, shi = nu.effective_support(1e-9)
    return 1e-4 / shi, 1e4 / slo


def blowup_region(ctx: FlowContext, window=None) -> list[tuple[float, float]]:
    """Maximal open intervals of {r : f(r) > 1/t} inside the window.

    Boundaries are refined by bisection on the predicate f(r) > 1/t.
    Reciprocal atoms and the reciprocal support of density measures are
    force-included in the scan so no island is missed.
    """
    nu = ctx.nu
    if window is None:
        window = default_window(nu)
    wlo, whi = float(window[0]), float(window[1])
    if not (0.0 < wlo < whi):
        raise DomainError(f"bad window {window}")
    target = 1.0 / ctx.t

    rs = [np.geomspace(wlo, whi, ctx.scan_points)]
    at = nu.atoms()
    if at is not None:
        recips = np.array([1.0 / a for _, a in at])
        rs.append(recips[(recips > wlo) & (recips < whi)])
    else:
        mlo, mhi = nu.effective_support()
        plo, phi_ = max(1.0 / mhi, wlo), min(1.0 / mlo, whi)
        if plo < phi_:
            rs.append(np.geomspace(plo, phi_, 17))
    scan = np.unique(np.concatenate(rs))

    above = np.array([capped_blowup(ctx, float(r)) > target for r in scan])
    if not above.any():
        raise EmptyVSet(
            f"f never exceeds 1/t={target} on the window [{wlo}, {whi}]")

    intervals = []
    i = 0
    n = scan.size
    while i < n:
        if not above[i]:
            i += 1
            continue
        j = i
        while j + 1 < n and above[j + 1]:
            j += 1
        lo_edge = (wlo if i == 0 else
                   _refine_boundary(ctx, scan[i - 1], scan[i], target, rising=True))
        hi_edge = (whi if j == n - 1 else
                   _refine_boundary(ctx, scan[j], scan[j + 1], target, rising=False))
        intervals.append((float(lo_edge), float(hi_edge)))
        i = j + 1
    return intervals


def _refine_boundary(ctx, a, b, target, rising: bool) -> float:
    """Bisect the predicate f(r) > target on (a, b).

    For a rising (lower) boundary, a is outside the region and b inside;
    for a falling (upper) boundary, a is inside and b outside.  Returns the
    inside-leaning edge.
    """
    lo, hi = float(a), float(b)
    for _ in range(ctx.boundary_max_iter):
        if hi - lo <= 1e-12 * hi:
            break
        mid = math.sqrt(lo * hi)
        inside = capped_blowup(ctx, mid) > target
        if inside == rising:
            hi = mid
        else:
            lo = mid
    return hi if rising else lo


# ---------------------------------------------------------------------------
# curves
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SupportSet:
    """Ordered disjoint closed intervals on the positive half-line."""

    intervals: tuple[tuple[float, float], ...]

    def __post_init__(self):
        prev_hi = 0.0
        for lo, hi in self.intervals:
            if not (0.0 < lo <= hi):
                raise InvariantViolation("support.interval",
                                         f"bad interval ({lo}, {hi})")
            if lo <= prev_hi:
                raise InvariantViolation("support.order",
                                         "intervals must be disjoint and sorted")
            prev_hi = hi

    def __len__(self):
        return len(self.intervals)

    def contains(self, x: float) -> bool:
        return any(lo <= x <= hi for lo, hi in self.intervals)


@dataclass(frozen=True)
class DensityCurve:
    """Sampled marginal density with its support decomposition."""

    x: np.ndarray
    q: np.ndarray
    support: SupportSet
    metadata: dict = field(default_factory=dict)

    def xq(self) -> np.ndarray:
        return self.x * self.q

    def mass(self) -> float:
        return float(np.trapezoid(self.q, self.x))

    def mean(self) -> float:
        return float(np.trapezoid(self.x * self.q, self.x))

    def interp(self, x):
        return np.interp(np.asarray(x, float), self.x, self.q,
                         left=0.0, right=0.0)


def density_curve(ctx: FlowContext, points: int = 512, window=None,
                  r_window=None) -> DensityCurve:
    """Sample the marginal density over its support.

    The curve is sampled parametrically: inside each blow-up component the
    radial variable runs over a log grid and every sample is an exact
    (r -> 1/Lambda(r), u/(pi t x)) pair, so no interpolation error enters.
    `window`, when given, clips the curve in x-space; `r_window` overrides
    the radial scan window.
    """
    if points < 64:
        raise DomainError(f"need at least 64 points, got {points}")
    tolerances = {"tol_root": ctx.tol_root, "tol_quad": ctx.tol_quad,
                  "tol_int": TOL_INT}
    meta = {"t": ctx.t, "measure": ctx.nu.to_dict(), "points": points,
            "window": list(window) if window else None,
            "tolerances": tolerances, "warnings": [], "merged": 0}

    try:
        r_ints = blowup_region(ctx, window=r_window)
    except EmptyVSet:
        rw = r_window or default_window(ctx.nu)
        x = np.geomspace(1.0 / rw[1], 1.0 / rw[0], points)
        meta["warnings"].append("empty blow-up region: zero curve")
        meta["mass"] = 0.0
        return DensityCurve(x, np.zeros_like(x), SupportSet(()), meta)

    # map components to x-space (reverse order: 1/Lambda is decreasing)
    comps = []
    for rlo, rhi in r_ints:
        x_hi = 1.0 / radial_map(ctx, rlo)
        x_lo = 1.0 / radial_map(ctx, rhi)
        if x_lo > x_hi:
            meta["warnings"].append("radial map not increasing on a component")
            x_lo, x_hi = x_hi, x_lo
        comps.append([x_lo, x_hi, rlo, rhi])
    comps.sort(key=lambda c: c[0])

    if window is not None:
        comps = _clip_components(ctx, comps, float(window[0]), float(window[1]))
        if not comps:
            x = np.geomspace(float(window[0]), float(window[1]), points)
            meta["warnings"].append("window excludes the whole support")
            meta["mass"] = 0.0
            return DensityCurve(x, np.zeros_like(x), SupportSet(()), meta)

    comps, merged = _merge_close(comps, points)
    meta["merged"] = merged

    widths = np.array([math.log(c[1] / c[0]) if c[1] > c[0] else 1e-12
                       for c in comps])
    alloc = np.maximum(16, np.round(points * widths / widths.sum())).astype(int)

    xs_parts, qs_parts = [], []
    for (x_lo, x_hi, rlo, rhi), n_i in zip(comps, alloc):
        r_grid = np.geomspace(rlo, rhi, int(n_i))[::-1]
        xs = np.empty(r_grid.size)
        qs = np.empty(r_grid.size)
        for k, r in enumerate(r_grid):
            u = solve_angle(ctx, float(r))
            lam = float(r) * math.exp(0.5 * ctx.t * _radial_exponent(ctx, float(r), u))
            xs[k] = 1.0 / lam
            qs[k] = 0.0 if u == 0.0 else u / (math.pi * ctx.t) * lam
        order = np.argsort(xs)
        xs_parts.append(xs[order])
        qs_parts.append(qs[order])

    x_all, q_all = _assemble_with_gaps(xs_parts, qs_parts)
    support = SupportSet(tuple((c[0], c[1]) for c in comps))
    curve = DensityCurve(x_all, q_all, support, meta)
    meta["mass"] = curve.mass()
    if abs(meta["mass"] - 1.0) > TOL_INT:
        meta["warnings"].append(
            f"curve mass {meta['mass']:.6g} deviates from 1 by more than "
            f"{TOL_INT}; support may extend beyond the sampled window")
    return curve


def _clip_components(ctx, comps, x_lo_w, x_hi_w):
    out = []
    for x_lo, x_hi, rlo, rhi in comps:
        if x_hi < x_lo_w or x_lo > x_hi_w:
            continue
        if x_lo < x_lo_w:
            rhi = radial_map_inverse(ctx, 1.0 / x_lo_w, bracket=(rlo, rhi))
            x_lo = x_lo_w
        if x_hi > x_hi_w:
            rlo = radial_map_inverse(ctx, 1.0 / x_hi_w, bracket=(rlo, rhi))
            x_hi = x_hi_w
        out.append([x_lo, x_hi, rlo, rhi])
    return out


def _merge_close(comps, points):
    total = sum(math.log(c[1] / c[0]) for c in comps if c[1] > c[0]) or 1.0
    resolution = 2.0 * total / points
    merged = 0
    out = [comps[0]]
    for comp in comps[1:]:
        gap = math.log(comp[0] / out[-1][1])
        if gap < resolution:
            out[-1] = [out[-1][0], comp[1], out[-1][2], comp[3]]
            merged += 1
        else:
            out.append(comp)
    return out, merged


def _assemble_with_gaps(xs_parts, qs_parts):
    xs, qs = [], []
    for i, (xp, qp) in enumerate(zip(xs_parts, qs_parts)):
        if i > 0:
            gap_mid = math.sqrt(xs_parts[i - 1][-1] * xp[0])
            xs.append(np.array([gap_mid]))
            qs.append(np.array([0.0]))
        xs.append(xp)
        qs.append(qp)
    x = np.concatenate(xs)
    q = np.concatenate(qs)
    # enforce strict monotonicity (guards against duplicated edge samples)
    keep = np.concatenate([[True], np.diff(x) > 0])
    return x[keep], q[keep]
