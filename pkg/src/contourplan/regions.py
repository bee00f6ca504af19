"""Convex free-space regions: seeded rectangle expansion on the occupancy grid.

Each prediction step gets a rectangle aligned with the seed trajectory,
expanded side by side in fixed increments until an occupied cell or the
search limit stops it, then shrunk by the footprint disc radius and emitted
as four halfspace constraints.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .gridmap import OccupancyGrid

SEARCH_STEP = 0.05        # m, side expansion increment
SEARCH_MAX = 2.0          # m, per-side expansion limit
SIDE_FLOOR = 1e-3         # m, keeps the seed strictly interior pre-reduction
DEGENERATE_HALF_WIDTH = 0.01  # m, point-box fallback when reduction empties the region


class InfeasibleSeedError(ValueError):
    """Rectangle expansion started from an occupied cell."""


@dataclass(frozen=True)
class SeedTrajectory:
    points: np.ndarray   # (N+1, 2) world points

    def __post_init__(self):
        object.__setattr__(self, "points", np.asarray(self.points, dtype=float))
        if self.points.ndim != 2 or self.points.shape[1] != 2:
            raise ValueError("seed trajectory must be (N+1, 2)")


@dataclass(frozen=True)
class ConvexRegion:
    normals: np.ndarray      # (4, 2) unit outward normals, opposite rows anti-parallel
    offsets: np.ndarray      # (4,) halfspace offsets, n . x <= h
    seed: np.ndarray         # (2,)
    orientation: float       # rad
    degenerate: bool = False

    def residuals(self, points):
        """h_l - n_l . p per side; positive inside, shape (..., 4)."""
        p = np.asarray(points, dtype=float)
        return self.offsets - p @ self.normals.T

    def corners(self) -> np.ndarray:
        """Rectangle corners in drawing order, shape (4, 2)."""
        d = self.residuals(self.seed)
        ex, ey = self.normals[0], self.normals[2]
        return np.stack([
            self.seed + d[0] * ex + d[2] * ey,
            self.seed - d[1] * ex + d[2] * ey,
            self.seed - d[1] * ex - d[3] * ey,
            self.seed + d[0] * ex - d[3] * ey,
        ])

    def contains(self, points, margin: float = 0.0):
        return np.all(self.residuals(points) >= margin, axis=-1)


def shift_seed(previous_positions, current_position, n_steps: int) -> SeedTrajectory:
    """Shift last cycle's planned positions one step, extrapolating the tail.

    q_k = p*_{k+1} for k < N and q_N = 2 p*_N - p*_{N-1}; without a previous
    plan every point collapses onto the current position.
    """
    if previous_positions is None:
        pts = np.tile(np.asarray(current_position, float)[:2], (n_steps + 1, 1))
        return SeedTrajectory(pts)
    prev = np.asarray(previous_positions, dtype=float)
    if prev.shape[0] != n_steps + 1:
        raise ValueError("previous plan length mismatch")
    pts = np.empty_like(prev)
    pts[:-1] = prev[1:]
    pts[-1] = 2.0 * prev[-1] - prev[-2]
    return SeedTrajectory(pts)


def seed_orientations(seed: SeedTrajectory, fallback_heading: float):
    """Per-point travel direction along the seed, carrying over degenerate steps."""
    p = seed.points
    d = np.diff(p, axis=0)
    norms = np.hypot(d[:, 0], d[:, 1])
    angles = np.empty(p.shape[0])
    current = float(fallback_heading)
    for k in range(p.shape[0] - 1):
        if norms[k] > 1e-9:
            current = float(np.arctan2(d[k, 1], d[k, 0]))
        angles[k] = current
    angles[-1] = current
    return angles


def _strip_blocked(grid, seed, u, v, lo, hi, span_lo, span_hi):
    """Exact occupied test for the strip seed + t*u + w*v, t in [lo,hi], w in spans.

    Integral-image rejection over the strip's bounding box first, then a
    separating-axis overlap test between each candidate occupied cell and the
    rotated strip, so no cell can slip between samples.
    """
    center = seed + 0.5 * (lo + hi) * u + 0.5 * (span_lo + span_hi) * v
    hu = 0.5 * (hi - lo)
    hv = 0.5 * (span_hi - span_lo)
    rad = np.hypot(hu, hv)
    if not grid.any_occupied_in_aabb(center[0] - rad, center[1] - rad,
                                     center[0] + rad, center[1] + rad):
        return False
    cells = grid.occupied_cells_in_aabb(center[0] - rad, center[1] - rad,
                                        center[0] + rad, center[1] + rad)
    if cells.shape[0] == 0:
        return False
    d = cells - center
    half = 0.5 * grid.resolution
    # SAT over the strip's axes ...
    cond = (np.abs(d @ u) <= hu + half * (abs(u[0]) + abs(u[1])))
    cond &= (np.abs(d @ v) <= hv + half * (abs(v[0]) + abs(v[1])))
    # ... and over the cell's (world) axes
    cond &= (np.abs(d[:, 0]) <= half + hu * abs(u[0]) + hv * abs(v[0]))
    cond &= (np.abs(d[:, 1]) <= half + hu * abs(u[1]) + hv * abs(v[1]))
    return bool(np.any(cond))


def expand_rectangle(grid: OccupancyGrid, seed, orientation: float, r_disc: float,
                     step: float = SEARCH_STEP, max_dist: float = SEARCH_MAX) -> ConvexRegion:
    """Grow a trajectory-aligned rectangle from the seed until cells block it.

    All four sides expand simultaneously in `step` increments; a side that
    meets an occupied cell freezes while the rest keep growing to `max_dist`.
    Final side offsets are reduced by the disc radius; if that empties the
    region a centimeter point box at the seed is returned instead (flagged
    degenerate) so the caller can brake on infeasibility.
    """
    seed = np.asarray(seed, dtype=float)
    if bool(grid.occupied_at(seed[None])[0]):
        raise InfeasibleSeedError(f"seed cell at {seed.tolist()} is occupied")
    c, s = np.cos(orientation), np.sin(orientation)
    ex = np.array([c, s])
    ey = np.array([-s, c])

    # fast path covers the rotated square's whole bounding box
    reach = max_dist * np.sqrt(2.0) + grid.resolution
    if not grid.any_occupied_in_aabb(seed[0] - reach, seed[1] - reach,
                                     seed[0] + reach, seed[1] + reach):
        # nothing occupied within the whole search budget
        offsets = np.full(4, max_dist)
    else:
        # offsets along +ex, -ex, +ey, -ey
        offsets = np.zeros(4)
        frozen = np.zeros(4, dtype=bool)
        axes = (ex, -ex, ey, -ey)
        # orthogonal direction and the offset indices spanning it, per side
        orth = ((ey, 2, 3), (ey, 2, 3), (ex, 0, 1), (ex, 0, 1))
        while not frozen.all():
            candidate = np.minimum(offsets + step, max_dist)
            grow = candidate.copy()
            for i in range(4):
                if frozen[i]:
                    continue
                v, ipos, ineg = orth[i]
                # include this round's candidates orthogonally so swept
                # corners are always covered by one of the strips
                span_hi = candidate[ipos] if not frozen[ipos] else offsets[ipos]
                span_lo = candidate[ineg] if not frozen[ineg] else offsets[ineg]
                if _strip_blocked(grid, seed, axes[i], v,
                                  offsets[i], grow[i], -span_lo, span_hi):
                    frozen[i] = True
                else:
                    offsets[i] = grow[i]
                    if offsets[i] >= max_dist:
                        frozen[i] = True

    offsets = np.maximum(offsets, SIDE_FLOOR)
    reduced = offsets - r_disc
    degenerate = bool(np.min(reduced) <= 0.0)
    if degenerate:
        reduced = np.full(4, DEGENERATE_HALF_WIDTH)
    normals = np.stack([ex, -ex, ey, -ey])
    h = normals @ seed + reduced
    return ConvexRegion(normals, h, seed, float(orientation), degenerate)


def _point_box(seed, orientation: float) -> ConvexRegion:
    c, s = np.cos(orientation), np.sin(orientation)
    normals = np.stack([[c, s], [-c, -s], [-s, c], [s, -c]])
    h = normals @ np.asarray(seed, float) + DEGENERATE_HALF_WIDTH
    return ConvexRegion(normals, h, np.asarray(seed, float), float(orientation), True)


def unreduced_region(grid: OccupancyGrid, seed, orientation: float,
                     step: float = SEARCH_STEP, max_dist: float = SEARCH_MAX) -> ConvexRegion:
    """Expansion result before the disc-radius reduction (for diagnostics)."""
    return expand_rectangle(grid, seed, orientation, 0.0, step, max_dist)


def regions_along_seed(grid: OccupancyGrid, seed: SeedTrajectory, fallback_heading: float,
                       r_disc: float, step: float = SEARCH_STEP,
                       max_dist: float = SEARCH_MAX):
    """One region per horizon step k = 1..N; infeasible seeds fall back.

    A seed point inside an obstacle reuses the previous step's region (or the
    robot's current free cell for k = 1), mirroring how the planner degrades
    when the shifted trajectory clips a freshly observed obstacle.
    """
    angles = seed_orientations(seed, fallback_heading)
    out = []
    prev = None
    for k in range(1, seed.points.shape[0]):
        try:
            region = expand_rectangle(grid, seed.points[k], angles[k], r_disc,
                                      step, max_dist)
        except InfeasibleSeedError:
            if prev is not None:
                region = prev
            else:
                try:
                    region = expand_rectangle(grid, seed.points[0], angles[0], r_disc,
                                              step, max_dist)
                except InfeasibleSeedError:
                    # robot cell itself occupied: emit a point box; the
                    # solver will report infeasible and the robot brakes
                    region = _point_box(seed.points[k], angles[k])
        out.append(region)
        prev = region
    return out


def static_constraint_residuals(region: ConvexRegion, position, heading: float,
                                disc_offsets) -> np.ndarray:
    """Residuals h_l - n_l . (p + R(psi) p_j), shape (4, n_c); positive inside."""
    p = np.asarray(position, dtype=float)
    offs = np.asarray(disc_offsets, dtype=float)
    c, s = np.cos(heading), np.sin(heading)
    rot = np.array([[c, -s], [s, c]])
    centers = p[None, :] + offs @ rot.T
    return region.offsets[:, None] - region.normals @ centers.T
