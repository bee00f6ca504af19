"""Ground-truth collision and clearance checks for simulation scoring.

The referee always works with the true obstacle ellipses (never the enlarged
planning bounds) and the true occupancy grid.  Clearance is the border to
border distance between the closest robot disc and obstacle ellipse.
"""

from __future__ import annotations

import numpy as np

from .bounds import point_ellipse_distance

OVERLAP_SLACK = 1e-6   # tangency within this margin does not count as collision


def disc_hits_grid(grid, center, radius) -> bool:
    """Strict overlap between a disc and any occupied cell."""
    cells = grid.occupied_cells_in_aabb(center[0] - radius, center[1] - radius,
                                        center[0] + radius, center[1] + radius)
    if cells.shape[0] == 0:
        return False
    half = 0.5 * grid.resolution
    # closest point of each cell box to the disc center
    dx = np.maximum(np.abs(cells[:, 0] - center[0]) - half, 0.0)
    dy = np.maximum(np.abs(cells[:, 1] - center[1]) - half, 0.0)
    return bool(np.any(dx * dx + dy * dy < (radius - OVERLAP_SLACK) ** 2))


def check_collision(position, heading, footprint, grid, obstacles) -> bool:
    """True when any robot disc strictly overlaps a cell or a true ellipse."""
    centers = footprint.disc_centers(position, heading)
    for c in centers:
        if grid is not None and disc_hits_grid(grid, c, footprint.r_disc):
            return True
        for ob in obstacles:
            d = point_ellipse_distance(c, ob.position, ob.a, ob.b, ob.orientation)
            if d < footprint.r_disc - OVERLAP_SLACK:
                return True
    return False


def pedestrian_clearance(position, heading, footprint, obstacles) -> float:
    """Smallest border-to-border disc-to-ellipse distance; inf without obstacles."""
    best = float("inf")
    centers = footprint.disc_centers(position, heading)
    for c in centers:
        for ob in obstacles:
            d = point_ellipse_distance(c, ob.position, ob.a, ob.b, ob.orientation)
            best = min(best, d - footprint.r_disc)
    return best
