"""Reference path: cubic segments over approximate arc length, blended locally.

Waypoints are joined by a natural cubic spline parameterized by cumulative
chord length.  A local window of segments is blended into one differentiable
curve with paired sigmoid gates per segment, so the tracking problem sees a
smooth map from the progress parameter to position and tangent.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np
from scipy.interpolate import CubicSpline
from scipy.special import expit

BLEND_EPSILON = 0.02       # m, sigmoid sharpness at segment joints
EXTENSION_LENGTH = 10.0    # m, straight continuation past the last waypoint
THETA_SEARCH_STEP = 0.1    # m, coarse grid for progress estimation
THETA_SEARCH_TOL = 1e-4    # m, golden-section refinement tolerance
GOLDEN = (np.sqrt(5.0) - 1.0) / 2.0


@dataclass(frozen=True)
class PathSegment:
    """One cubic piece; coefficients are constant-term-first in the local parameter."""

    coeffs_x: np.ndarray
    coeffs_y: np.ndarray
    s_m: float            # segment length (chord), m
    v_ref: float          # reference speed on this segment, m/s

    def point(self, t):
        t = np.asarray(t, dtype=float)
        cx, cy = self.coeffs_x, self.coeffs_y
        x = cx[0] + t * (cx[1] + t * (cx[2] + t * cx[3]))
        y = cy[0] + t * (cy[1] + t * (cy[2] + t * cy[3]))
        return x, y

    def derivative(self, t):
        t = np.asarray(t, dtype=float)
        cx, cy = self.coeffs_x, self.coeffs_y
        return (cx[1] + t * (2.0 * cx[2] + 3.0 * t * cx[3]),
                cy[1] + t * (2.0 * cy[2] + 3.0 * t * cy[3]))

    def second_derivative(self, t):
        t = np.asarray(t, dtype=float)
        return (2.0 * self.coeffs_x[2] + 6.0 * t * self.coeffs_x[3],
                2.0 * self.coeffs_y[2] + 6.0 * t * self.coeffs_y[3])


class EtaSelection(NamedTuple):
    eta: int
    covered_length: float  # m, reference length over the selected segments
    sufficient: bool       # False when the remaining path cannot cover the horizon


@dataclass
class ReferencePath:
    """Fitted path plus a straight virtual extension used near the goal.

    The extension keeps the blended local reference well defined (and the
    segment-count inequality satisfiable) while the robot closes on the final
    waypoint; reported lengths always refer to the real path.
    """

    waypoints: np.ndarray              # (M, 2)
    segments: list                     # M - 1 fitted PathSegments
    total_length: float                # m, real path only
    _all_segments: list = field(repr=False, default=None)
    _boundaries: np.ndarray = field(repr=False, default=None)   # cumulative, incl. extension

    def __post_init__(self):
        if self._all_segments is None:
            ext = _extension_segment(self.segments[-1])
            self._all_segments = list(self.segments) + [ext]
        if self._boundaries is None:
            lengths = [seg.s_m for seg in self._all_segments]
            self._boundaries = np.concatenate([[0.0], np.cumsum(lengths)])

    @property
    def boundaries(self):
        """Cumulative arc lengths at segment starts/ends, extension included."""
        return self._boundaries

    def segment_index(self, theta: float) -> int:
        idx = int(np.searchsorted(self._boundaries, theta, side="right")) - 1
        return min(max(idx, 0), len(self._all_segments) - 1)

    def segment_at(self, index: int) -> PathSegment:
        return self._all_segments[index]

    @property
    def segment_count(self) -> int:
        """Real segments plus the virtual extension."""
        return len(self._all_segments)

    def point_at(self, theta: float):
        """Piecewise evaluation (no blending); clamps beyond the extension."""
        theta = float(np.clip(theta, 0.0, self._boundaries[-1]))
        i = self.segment_index(theta)
        return self._all_segments[i].point(theta - self._boundaries[i])

    def tangent_at(self, theta: float) -> float:
        theta = float(np.clip(theta, 0.0, self._boundaries[-1]))
        i = self.segment_index(theta)
        dx, dy = self._all_segments[i].derivative(theta - self._boundaries[i])
        return float(np.arctan2(dy, dx))

    def v_ref_at(self, theta: float) -> float:
        return self._all_segments[self.segment_index(theta)].v_ref

    def v_ref_array(self, thetas) -> np.ndarray:
        """Vectorized per-segment reference speed lookup."""
        idx = np.searchsorted(self._boundaries, np.asarray(thetas, float),
                              side="right") - 1
        idx = np.clip(idx, 0, len(self._all_segments) - 1)
        table = np.array([seg.v_ref for seg in self._all_segments])
        return table[idx]


def _extension_segment(last: PathSegment) -> PathSegment:
    dx, dy = last.derivative(last.s_m)
    norm = float(np.hypot(dx, dy))
    if norm < 1e-12:
        dx, dy, norm = 1.0, 0.0, 1.0
    ex, ey = dx / norm, dy / norm
    x0, y0 = last.point(last.s_m)
    return PathSegment(
        coeffs_x=np.array([float(x0), ex, 0.0, 0.0]),
        coeffs_y=np.array([float(y0), ey, 0.0, 0.0]),
        s_m=EXTENSION_LENGTH,
        v_ref=last.v_ref,
    )


def fit_segments(waypoints, v_ref) -> ReferencePath:
    """Natural cubic spline through the waypoints, chord-length parameterized.

    `v_ref` is a scalar or one value per waypoint; each segment carries the
    value at its starting waypoint.
    """
    pts = np.asarray(waypoints, dtype=float)
    if pts.ndim != 2 or pts.shape[1] != 2 or pts.shape[0] < 2:
        raise ValueError("need at least two (x, y) waypoints")
    chords = np.hypot(*np.diff(pts, axis=0).T)
    if np.any(chords < 1e-9):
        raise ValueError("duplicate consecutive waypoints")
    knots = np.concatenate([[0.0], np.cumsum(chords)])
    v = np.asarray(v_ref, dtype=float)
    if v.ndim == 0:
        v = np.full(pts.shape[0], float(v))
    if v.shape[0] != pts.shape[0]:
        raise ValueError("v_ref must be scalar or one value per waypoint")
    if np.any(v <= 0.0):
        raise ValueError("reference speeds must be > 0")

    sx = CubicSpline(knots, pts[:, 0], bc_type="natural")
    sy = CubicSpline(knots, pts[:, 1], bc_type="natural")
    segments = []
    for m in range(len(chords)):
        # CubicSpline stores descending-power coefficients in the local parameter
        cx = sx.c[::-1, m]
        cy = sy.c[::-1, m]
        segments.append(PathSegment(cx.copy(), cy.copy(), float(chords[m]), float(v[m])))
    return ReferencePath(pts, segments, float(knots[-1]))


class LocalReference:
    """Sigmoid-blended reference over segments [m, m + eta].

    Evaluation accepts global progress values; each segment's cubic is gated
    by a pair of logistic activations centered on its arc-length boundaries,
    which keeps the curve and its first two derivatives continuous across
    joints for the solver.
    """

    def __init__(self, path: ReferencePath, m: int, eta: int,
                 epsilon: float = BLEND_EPSILON):
        if eta < 1:
            raise ValueError("eta must be >= 1")
        if epsilon <= 0.0:
            raise ValueError("epsilon must be > 0")
        self.path = path
        self.m = m
        self.eta = min(eta, path.segment_count - 1 - m)
        self.epsilon = epsilon
        hi = m + self.eta + 1
        self._segments = path._all_segments[m:hi]
        self._starts = path.boundaries[m:hi]
        self._ends = path.boundaries[m + 1:hi + 1]

    @property
    def start_length(self) -> float:
        return float(self._starts[0])

    @property
    def end_length(self) -> float:
        return float(self._ends[-1])

    def evaluate(self, theta):
        """Positions and tangents: returns (p, phi) with p shaped (..., 2)."""
        p, dp, _ = self._eval_raw(np.asarray(theta, dtype=float))
        phi = np.arctan2(dp[..., 1], dp[..., 0])
        return p, phi

    def evaluate_full(self, theta):
        """Returns (p, dp, phi, dphi) for gradient assembly."""
        p, dp, ddp = self._eval_raw(np.asarray(theta, dtype=float))
        dx, dy = dp[..., 0], dp[..., 1]
        sq = dx * dx + dy * dy
        phi = np.arctan2(dy, dx)
        dphi = (dx * ddp[..., 1] - dy * ddp[..., 0]) / np.maximum(sq, 1e-12)
        return p, dp, phi, dphi

    def _eval_raw(self, theta):
        th = theta[..., None]                      # broadcast over segments
        eps = self.epsilon
        sig_lo = expit((th - self._starts) / eps)  # opens at the left boundary
        sig_hi = expit((self._ends - th) / eps)    # closes at the right boundary
        # the outermost gates stay open so the window extrapolates its end segments
        sig_lo[..., 0] = 1.0
        sig_hi[..., -1] = 1.0
        w = sig_lo * sig_hi
        dlo = sig_lo * (1.0 - sig_lo) / eps
        dhi = -sig_hi * (1.0 - sig_hi) / eps
        dw = dlo * sig_hi + sig_lo * dhi
        ddlo = dlo * (1.0 - 2.0 * sig_lo) / eps
        ddhi = -dhi * (1.0 - 2.0 * sig_hi) / eps
        ddw = ddlo * sig_hi + 2.0 * dlo * dhi + sig_lo * ddhi

        t_local = th - self._starts
        px = np.empty(t_local.shape)
        py = np.empty(t_local.shape)
        dpx = np.empty(t_local.shape)
        dpy = np.empty(t_local.shape)
        ddpx = np.empty(t_local.shape)
        ddpy = np.empty(t_local.shape)
        for i, seg in enumerate(self._segments):
            t = t_local[..., i]
            px[..., i], py[..., i] = seg.point(t)
            dpx[..., i], dpy[..., i] = seg.derivative(t)
            ddpx[..., i], ddpy[..., i] = seg.second_derivative(t)

        p = np.stack([(w * px).sum(-1), (w * py).sum(-1)], axis=-1)
        dp = np.stack([(dw * px + w * dpx).sum(-1),
                       (dw * py + w * dpy).sum(-1)], axis=-1)
        ddp = np.stack([(ddw * px + 2.0 * dw * dpx + w * ddpx).sum(-1),
                        (ddw * py + 2.0 * dw * dpy + w * ddpy).sum(-1)], axis=-1)
        return p, dp, ddp


def local_reference(path: ReferencePath, m: int, eta: int, theta,
                    epsilon: float = BLEND_EPSILON):
    """Blended local reference point and tangent angle at `theta`."""
    ref = LocalReference(path, m, eta, epsilon)
    p, phi = ref.evaluate(theta)
    return p, phi


def _golden_min(f, lo, hi, tol):
    a, b = lo, hi
    c = b - GOLDEN * (b - a)
    d = a + GOLDEN * (b - a)
    fc, fd = f(c), f(d)
    while b - a > tol:
        if fc < fd:
            b, d, fd = d, c, fc
            c = b - GOLDEN * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + GOLDEN * (b - a)
            fd = f(d)
    return 0.5 * (a + b)


def estimate_theta0(path: ReferencePath, position, previous_theta=None):
    """Progress estimate: distance minimizer near the previous value.

    A warm estimate searches one segment either side of the previous value so
    the projection cannot jump between nearby path lobes; a cold start scans
    the whole path on a coarse grid before refining.
    """
    p = np.asarray(position, dtype=float)

    def dist(theta):
        x, y = path.point_at(theta)
        return float(np.hypot(x - p[0], y - p[1]))

    if previous_theta is None:
        lo, hi = 0.0, path.boundaries[-1]
    else:
        prev = float(np.clip(previous_theta, 0.0, path.boundaries[-1]))
        i = path.segment_index(prev)
        lo = prev - path.segment_at(i).s_m
        nxt = min(i + 1, path.segment_count - 1)
        hi = prev + path.segment_at(nxt).s_m
        lo = max(lo, 0.0)
        hi = min(hi, path.boundaries[-1])

    grid = np.arange(lo, hi + THETA_SEARCH_STEP, THETA_SEARCH_STEP)
    grid = np.clip(grid, lo, hi)
    d = [dist(t) for t in grid]
    k = int(np.argmin(d))
    g_lo = grid[max(k - 1, 0)]
    g_hi = grid[min(k + 1, len(grid) - 1)]
    theta0 = _golden_min(dist, g_lo, g_hi, THETA_SEARCH_TOL) if g_hi > g_lo else g_lo
    return float(theta0), path.segment_index(float(theta0))


def select_eta(path: ReferencePath, m: int, n_steps: int, tau: float,
               v_max: float) -> EtaSelection:
    """Smallest segment count whose length beyond segment m covers the horizon.

    Uses the conservative covered-distance bound tau * N * v_max against the
    summed lengths of segments m+1 .. m+eta, clamped to what remains.
    """
    if v_max <= 0.0:
        raise ValueError("v_max must be > 0")
    need = tau * n_steps * v_max
    last = path.segment_count - 1
    covered = 0.0
    eta = 0
    i = m + 1
    while covered < need and i <= last:
        covered += path.segment_at(i).s_m
        eta += 1
        i += 1
    if covered >= need:
        return EtaSelection(max(eta, 1), covered, True)
    return EtaSelection(max(eta, 1), covered, False)
