"""Minimal enlargement of an ellipse so it contains the ellipse swept by a disc.

An axis-aligned ellipse with semi-axes (a, b) grown uniformly to (a+d, b+d)
does NOT necessarily contain the Minkowski sum of the ellipse and a disc of
radius d; near the high-curvature ends the sum bulges outside.  This module
computes the smallest enlargement delta such that the (a+delta, b+delta)
ellipse fully contains ellipse (+) disc(r), together with a sampling oracle
that certifies containment and a generator for counterexamples to the naive
delta = r rule.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq

DEFAULT_TOL = 1e-9       # m, bisection bracket width at termination
MAX_ITERATIONS = 200
ORACLE_SAMPLES = 4096
CONTAIN_SLACK = 1e-12    # allowed excess of the quadratic form over 1
GOLDEN = (np.sqrt(5.0) - 1.0) / 2.0


class BoundSolverError(RuntimeError):
    """Enlargement search failed to converge; carries the best bracket."""

    def __init__(self, message, bracket):
        super().__init__(message)
        self.bracket = bracket


@dataclass(frozen=True)
class EllipseShape:
    """Axis-aligned ellipse, semi-major a >= semi-minor b > 0 (meters)."""

    a: float
    b: float

    def __post_init__(self):
        if not (np.isfinite(self.a) and np.isfinite(self.b)):
            raise ValueError("ellipse semi-axes must be finite")
        if not (self.a >= self.b > 0.0):
            raise ValueError(f"require a >= b > 0, got a={self.a}, b={self.b}")


@dataclass(frozen=True)
class BoundResult:
    delta: float       # enlargement, m
    alpha: float       # a + delta
    beta: float        # b + delta
    iterations: int
    method: str        # "closed_root" or "bisection"


def minkowski_boundary_point(e: EllipseShape, r: float, theta: float):
    """Boundary point of ellipse (+) disc(r) at ellipse parameter theta.

    The sum's boundary is the ellipse point pushed distance r along the
    outward unit normal: (a cos t, b sin t) + r (b cos t, a sin t) / g with
    g = sqrt(b^2 cos^2 t + a^2 sin^2 t).
    """
    if r < 0.0:
        raise ValueError("disc radius must be >= 0")
    c, s = np.cos(theta), np.sin(theta)
    g = np.sqrt(e.b * e.b * c * c + e.a * e.a * s * s)
    return e.a * c + r * e.b * c / g, e.b * s + r * e.a * s / g


def _violation_at(e, r, delta, theta):
    """Quadratic-form excess of the sum boundary over the enlarged ellipse."""
    c, s = np.cos(theta), np.sin(theta)
    g = np.sqrt(e.b * e.b * c * c + e.a * e.a * s * s)
    x = e.a * c + r * e.b * c / g
    y = e.b * s + r * e.a * s / g
    al, be = e.a + delta, e.b + delta
    return x * x / (al * al) + y * y / (be * be) - 1.0


def _golden_max(f, lo, hi, iters=60):
    a, b = lo, hi
    c = b - GOLDEN * (b - a)
    d = a + GOLDEN * (b - a)
    fc, fd = f(c), f(d)
    for _ in range(iters):
        if fc > fd:
            b, d, fd = d, c, fc
            c = b - GOLDEN * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + GOLDEN * (b - a)
            fd = f(d)
        if b - a < 1e-14:
            break
    return max(fc, fd)


def containment_check(e: EllipseShape, r: float, delta: float,
                      samples: int = ORACLE_SAMPLES):
    """Certify that the (a+delta, b+delta) ellipse contains ellipse (+) disc(r).

    Samples the sum boundary at `samples` uniform parameters, then refines
    around the worst sample with a golden-section maximization so a violation
    cannot hide between samples.  Returns (passed, worst_violation); the
    check passes when the quadratic form never exceeds 1 + 1e-12.
    """
    if samples < 100:
        raise ValueError("need at least 100 samples")
    theta = np.linspace(0.0, 2.0 * np.pi, samples, endpoint=False)
    v = _violation_at(e, r, delta, theta)
    i = int(np.argmax(v))
    h = 2.0 * np.pi / samples
    worst = _golden_max(lambda t: _violation_at(e, r, delta, t),
                        theta[i] - h, theta[i] + h)
    worst = max(worst, float(v[i]))
    return worst <= CONTAIN_SLACK, worst


def boundary_gap_squared(e: EllipseShape, delta: float):
    """Squared minimal distance between the boundaries of E(a,b) and E(a+d, b+d).

    Smallest positive root of the two-quadric distance polynomial for this
    nested pair; the other candidate roots (delta^2 at the axis gaps and the
    two far-side terms) are never smaller for a != b.
    """
    a, b = e.a, e.b
    num = 4.0 * a * b * delta * delta + 2.0 * (a + b) * delta ** 3
    den = (a + b) ** 2 + 2.0 * delta * (a + b)
    return num / den


def lambda_roots(e: EllipseShape, r: float, delta: float):
    """Candidate roots of the two-quadric distance polynomial, as published.

    Returned in the published order; the first two have multiplicity two.
    Kept verbatim as a cross-check against the containment oracle.
    """
    a, b = e.a, e.b
    if min(a, b, r, delta) <= 0.0:
        raise ValueError("all of a, b, r, delta must be > 0")
    den = a * a + 2.0 * a * b + 2.0 * r * a + b * b + 2.0 * r * b
    if den == 0.0:
        raise ValueError("degenerate denominator")
    rd = r + delta
    l1 = (2.0 * a * rd ** 3 + 2.0 * b * rd ** 3 + 4.0 * a * b * rd * rd) / den
    l2 = rd * rd
    l3 = 4.0 * a * a + 4.0 * a * rd + rd * rd
    l4 = 4.0 * b * b + 4.0 * b * rd + rd * rd
    return l1, l2, l3, l4


def _closed_root_delta(e, r):
    """Solve boundary_gap_squared(delta) = r^2 for delta > 0."""
    f = lambda d: boundary_gap_squared(e, d) - r * r
    hi = max(r, 1e-12)
    it = 0
    while f(hi) < 0.0:
        hi *= 2.0
        it += 1
        if it > 60:
            raise BoundSolverError("no upper bracket for closed root", (0.0, hi))
    return brentq(f, 0.0, hi, xtol=1e-14, rtol=8.881784197001252e-16)


def minimal_enlargement(e: EllipseShape, r: float, tol: float = DEFAULT_TOL,
                        method: str = "bisection",
                        samples: int = ORACLE_SAMPLES) -> BoundResult:
    """Smallest delta >= 0 with the enlarged ellipse containing ellipse (+) disc(r).

    `bisection` (default) brackets delta against the containment oracle; the
    bracket starts at [0, r] and the upper end grows until containment holds
    (for a != b the minimal delta exceeds r).  `closed_root` solves the
    boundary-distance equation directly and verifies the result against the
    oracle, falling back to bisection if verification fails.
    """
    if r < 0.0:
        raise ValueError("disc radius must be >= 0")
    if tol <= 0.0:
        raise ValueError("tolerance must be > 0")
    if r == 0.0:
        return BoundResult(0.0, e.a, e.b, 0, method)

    if method == "closed_root":
        delta = _closed_root_delta(e, r)
        ok, _ = containment_check(e, r, delta + tol, samples)
        if ok:
            return BoundResult(delta, e.a + delta, e.b + delta, 0, "closed_root")
        method = "bisection"  # damaged case; certify the hard way
    elif method != "bisection":
        raise ValueError(f"unknown method {method!r}")

    lo, hi = 0.0, r
    iterations = 0
    while not containment_check(e, r, hi, samples)[0]:
        lo, hi = hi, hi * 2.0
        iterations += 1
        if iterations > MAX_ITERATIONS:
            raise BoundSolverError("containment bracket did not close", (lo, hi))
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if containment_check(e, r, mid, samples)[0]:
            hi = mid
        else:
            lo = mid
        iterations += 1
        if iterations > MAX_ITERATIONS:
            raise BoundSolverError("bisection iteration cap reached", (lo, hi))
    return BoundResult(hi, e.a + hi, e.b + hi, iterations, "bisection")


def point_ellipse_distance(point, center, a: float, b: float, psi: float = 0.0,
                           tol: float = 1e-9) -> float:
    """Signed distance from a point to an ellipse boundary (negative inside).

    Works in the ellipse frame and minimizes the parametric distance over the
    first quadrant, where it is unimodal; accurate to ~tol.
    """
    from scipy.optimize import minimize_scalar

    q = np.asarray(point, dtype=float) - np.asarray(center, dtype=float)
    c, s = np.cos(psi), np.sin(psi)
    x = abs(c * q[0] + s * q[1])
    y = abs(-s * q[0] + c * q[1])

    def sqdist(t):
        return (a * np.cos(t) - x) ** 2 + (b * np.sin(t) - y) ** 2

    res = minimize_scalar(sqdist, bounds=(0.0, np.pi / 2), method="bounded",
                          options={"xatol": tol})
    d = float(np.sqrt(res.fun))
    inside = (x / a) ** 2 + (y / b) ** 2 < 1.0
    return -d if inside else d


def naive_bound_counterexample(a_over_b: float = 5.0, r_over_b: float = 2.5,
                               b: float = 0.2):
    """An (ellipse, r) pair where the naive delta = r enlargement leaks.

    Returns (ellipse, r, theta, excess): at parameter theta the sum boundary
    point exceeds the naive (a+r, b+r) ellipse's quadratic form by `excess`.
    Eccentric shapes leak badly; the defaults give an excess around 0.15.
    """
    e = EllipseShape(a_over_b * b, b)
    r = r_over_b * b
    theta = np.linspace(0.0, 2.0 * np.pi, ORACLE_SAMPLES, endpoint=False)
    v = _violation_at(e, r, r, theta)
    i = int(np.argmax(v))
    h = 2.0 * np.pi / ORACLE_SAMPLES
    worst = _golden_max(lambda t: _violation_at(e, r, r, t),
                        theta[i] - h, theta[i] + h)
    return e, r, float(theta[i]), float(max(worst, v[i]))
