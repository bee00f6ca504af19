"""Occupancy grid: world/cell mapping, file formats, obstacle erasure.

Grids are immutable snapshots; every mutation helper returns a new grid.
Cell (0, 0) sits at the origin corner, rows grow with y.  Outside the map
counts as free space: arenas that need boundaries carry explicit wall cells.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np


@dataclass
class OccupancyGrid:
    resolution: float            # m per cell
    origin: np.ndarray           # world (x, y) of the grid corner
    occupancy: np.ndarray        # (height, width) uint8, 1 = occupied
    _integral: np.ndarray = field(default=None, repr=False)

    def __post_init__(self):
        if self.resolution <= 0.0:
            raise ValueError("resolution must be > 0")
        self.origin = np.asarray(self.origin, dtype=float)
        self.occupancy = np.ascontiguousarray(self.occupancy, dtype=np.uint8)
        self.occupancy.flags.writeable = False

    @property
    def height(self) -> int:
        return self.occupancy.shape[0]

    @property
    def width(self) -> int:
        return self.occupancy.shape[1]

    @property
    def integral(self) -> np.ndarray:
        """Summed-occupancy table for O(1) any-occupied rectangle queries."""
        if self._integral is None:
            pad = np.zeros((self.height + 1, self.width + 1), dtype=np.int64)
            np.cumsum(np.cumsum(self.occupancy, axis=0), axis=1, out=pad[1:, 1:])
            self._integral = pad
        return self._integral

    def cell_of(self, points):
        """Cell indices (ix, iy) of world points; no bounds clamping."""
        p = np.asarray(points, dtype=float)
        ix = np.floor((p[..., 0] - self.origin[0]) / self.resolution).astype(np.int64)
        iy = np.floor((p[..., 1] - self.origin[1]) / self.resolution).astype(np.int64)
        return ix, iy

    def occupied_at(self, points):
        """Occupancy lookup for world points; outside the map reads as free."""
        ix, iy = self.cell_of(points)
        inside = (ix >= 0) & (ix < self.width) & (iy >= 0) & (iy < self.height)
        out = np.zeros(np.shape(ix), dtype=bool)
        if np.any(inside):
            out[inside] = self.occupancy[iy[inside], ix[inside]] != 0
        return out

    def any_occupied_in_aabb(self, xmin, ymin, xmax, ymax) -> bool:
        """True when any cell intersecting the world-axis box is occupied."""
        i0 = int(np.floor((xmin - self.origin[0]) / self.resolution))
        i1 = int(np.floor((xmax - self.origin[0]) / self.resolution)) + 1
        j0 = int(np.floor((ymin - self.origin[1]) / self.resolution))
        j1 = int(np.floor((ymax - self.origin[1]) / self.resolution)) + 1
        i0, j0 = max(i0, 0), max(j0, 0)
        i1, j1 = min(i1, self.width), min(j1, self.height)
        if i0 >= i1 or j0 >= j1:
            return False
        s = self.integral
        total = s[j1, i1] - s[j0, i1] - s[j1, i0] + s[j0, i0]
        return bool(total > 0)

    def occupied_cells_in_aabb(self, xmin, ymin, xmax, ymax):
        """Centers of occupied cells intersecting the world-axis box, (n, 2)."""
        i0 = max(int(np.floor((xmin - self.origin[0]) / self.resolution)), 0)
        i1 = min(int(np.floor((xmax - self.origin[0]) / self.resolution)) + 1, self.width)
        j0 = max(int(np.floor((ymin - self.origin[1]) / self.resolution)), 0)
        j1 = min(int(np.floor((ymax - self.origin[1]) / self.resolution)) + 1, self.height)
        if i0 >= i1 or j0 >= j1:
            return np.empty((0, 2))
        block = self.occupancy[j0:j1, i0:i1]
        jj, ii = np.nonzero(block)
        xs = self.origin[0] + (ii + i0 + 0.5) * self.resolution
        ys = self.origin[1] + (jj + j0 + 0.5) * self.resolution
        return np.stack([xs, ys], axis=1)

    def free_distance_field(self):
        """Distance (m) from each cell center to the nearest occupied cell."""
        from scipy.ndimage import distance_transform_edt
        return distance_transform_edt(self.occupancy == 0) * self.resolution

    def with_occupancy(self, occupancy) -> "OccupancyGrid":
        return OccupancyGrid(self.resolution, self.origin.copy(), occupancy)


def empty_grid(width_m: float, height_m: float, resolution: float = 0.05,
               origin=(0.0, 0.0)) -> OccupancyGrid:
    w = int(round(width_m / resolution))
    h = int(round(height_m / resolution))
    return OccupancyGrid(resolution, np.asarray(origin, float),
                         np.zeros((h, w), dtype=np.uint8))


def add_rectangle(grid: OccupancyGrid, xmin, ymin, xmax, ymax) -> OccupancyGrid:
    """New grid with cells whose centers fall in the world box marked occupied."""
    occ = grid.occupancy.copy()
    xs = grid.origin[0] + (np.arange(grid.width) + 0.5) * grid.resolution
    ys = grid.origin[1] + (np.arange(grid.height) + 0.5) * grid.resolution
    ci = (xs >= xmin) & (xs <= xmax)
    cj = (ys >= ymin) & (ys <= ymax)
    occ[np.ix_(cj, ci)] = 1
    return grid.with_occupancy(occ)


def add_border_walls(grid: OccupancyGrid, thickness_m: float) -> OccupancyGrid:
    t = max(int(round(thickness_m / grid.resolution)), 1)
    occ = grid.occupancy.copy()
    occ[:t, :] = 1
    occ[-t:, :] = 1
    occ[:, :t] = 1
    occ[:, -t:] = 1
    return grid.with_occupancy(occ)


def clear_ellipses(grid: OccupancyGrid, ellipses) -> OccupancyGrid:
    """Erase cells inside tracked obstacle ellipses (dilated by one cell).

    Keeps static constraints from doubling up on obstacles that are already
    handled by the moving-obstacle constraints.  Returns the same grid object
    when nothing changes.
    """
    occ = None
    for center, a, b, psi in ellipses:
        aa, bb = a + grid.resolution, b + grid.resolution
        xmin, xmax = center[0] - aa, center[0] + aa
        ymin, ymax = center[1] - aa, center[1] + aa
        if not grid.any_occupied_in_aabb(xmin, ymin, xmax, ymax):
            continue
        cells = grid.occupied_cells_in_aabb(xmin, ymin, xmax, ymax)
        d = cells - np.asarray(center, float)
        c, s = np.cos(psi), np.sin(psi)
        lx = c * d[:, 0] + s * d[:, 1]
        ly = -s * d[:, 0] + c * d[:, 1]
        inside = (lx / aa) ** 2 + (ly / bb) ** 2 <= 1.0
        if not np.any(inside):
            continue
        if occ is None:
            occ = grid.occupancy.copy()
        ix, iy = grid.cell_of(cells[inside])
        occ[iy, ix] = 0
    if occ is None:
        return grid
    return grid.with_occupancy(occ)


def parse_grid_text(text: str) -> OccupancyGrid:
    """Plain-text format: resolution / origin / dims header, then 0-1 rows.

    Row 0 is the bottom of the map (lowest y).
    """
    lines = [ln.strip() for ln in text.splitlines() if ln.strip() and not ln.startswith("#")]
    header = {}
    idx = 0
    for idx, ln in enumerate(lines):
        parts = ln.split()
        if parts[0] in ("resolution", "origin", "dims"):
            header[parts[0]] = [float(v) for v in parts[1:]]
        else:
            break
    if set(header) != {"resolution", "origin", "dims"}:
        raise ValueError("grid header must provide resolution, origin, dims")
    w, h = int(header["dims"][0]), int(header["dims"][1])
    rows = lines[idx:]
    if len(rows) != h:
        raise ValueError(f"expected {h} grid rows, found {len(rows)}")
    occ = np.zeros((h, w), dtype=np.uint8)
    for j, row in enumerate(rows):
        if len(row) != w:
            raise ValueError(f"grid row {j} has {len(row)} cells, expected {w}")
        occ[j] = np.frombuffer(row.encode(), dtype=np.uint8) - ord("0")
    if occ.max(initial=0) > 1:
        raise ValueError("grid rows must contain only 0 and 1")
    return OccupancyGrid(header["resolution"][0], np.array(header["origin"]), occ)


def grid_to_text(grid: OccupancyGrid) -> str:
    lines = [
        f"resolution {float(grid.resolution)!r}",
        f"origin {float(grid.origin[0])!r} {float(grid.origin[1])!r}",
        f"dims {grid.width} {grid.height}",
    ]
    for row in grid.occupancy:
        lines.append("".join("1" if v else "0" for v in row))
    return "\n".join(lines) + "\n"


def parse_pgm(data: bytes, resolution: float, origin=(0.0, 0.0)) -> OccupancyGrid:
    """PGM P2/P5 with occupancy at <= 50% of max gray (dark cells occupied)."""
    tokens = []
    pos = 0
    while len(tokens) < 4:
        if data[pos:pos + 1] == b"#":
            pos = data.index(b"\n", pos) + 1
            continue
        end = pos
        while end < len(data) and not data[end:end + 1].isspace():
            end += 1
        if end > pos:
            tokens.append(data[pos:end])
        pos = end + 1
    magic, w, h, maxval = tokens[0], int(tokens[1]), int(tokens[2]), int(tokens[3])
    if magic == b"P2":
        values = np.array(data[pos:].split(), dtype=np.int64)
    elif magic == b"P5":
        if maxval < 256:
            values = np.frombuffer(data, dtype=np.uint8, count=w * h, offset=pos).astype(np.int64)
        else:
            raw = struct.unpack(f">{w * h}H", data[pos:pos + 2 * w * h])
            values = np.array(raw, dtype=np.int64)
    else:
        raise ValueError(f"unsupported PGM magic {magic!r}")
    if values.size != w * h:
        raise ValueError("PGM payload size mismatch")
    img = values.reshape(h, w)
    occ = (img <= 0.5 * maxval).astype(np.uint8)
    return OccupancyGrid(resolution, np.asarray(origin, float), occ[::-1].copy())


def load_grid(path, resolution: float = None, origin=(0.0, 0.0)) -> OccupancyGrid:
    """Dispatch on extension: .pgm needs a resolution, anything else is text."""
    p = Path(path)
    if p.suffix.lower() == ".pgm":
        if resolution is None:
            raise ValueError("PGM grids need an explicit resolution")
        return parse_pgm(p.read_bytes(), resolution, origin)
    return parse_grid_text(p.read_text())
