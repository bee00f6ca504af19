"""Occupancy grid parsing, seeded rectangle expansion, halfspace constraints."""

import numpy as np
import pytest

from contourplan.gridmap import (
    add_border_walls,
    add_rectangle,
    clear_ellipses,
    empty_grid,
    grid_to_text,
    parse_grid_text,
    parse_pgm,
)
from contourplan.regions import (
    InfeasibleSeedError,
    SeedTrajectory,
    expand_rectangle,
    regions_along_seed,
    seed_orientations,
    shift_seed,
    static_constraint_residuals,
    unreduced_region,
)


def test_grid_text_round_trip():
    grid = add_rectangle(empty_grid(1.0, 0.5, 0.05), 0.3, 0.1, 0.5, 0.3)
    again = parse_grid_text(grid_to_text(grid))
    assert again.resolution == grid.resolution
    assert np.array_equal(again.origin, grid.origin)
    assert np.array_equal(again.occupancy, grid.occupancy)


def test_grid_text_rejects_bad_rows():
    with pytest.raises(ValueError):
        parse_grid_text("resolution 0.1\norigin 0 0\ndims 3 1\n0120\n")
    with pytest.raises(ValueError):
        parse_grid_text("resolution 0.1\norigin 0 0\ndims 3 2\n000\n")


def test_pgm_p2_and_p5_threshold():
    header = b"P2\n# comment\n4 2\n255\n"
    body = b"255 255 0 255\n255 100 255 255\n"
    grid = parse_pgm(header + body, 0.1)
    # dark cells occupied; PGM rows are top-down, grid rows bottom-up
    assert grid.occupancy[1, 2] == 1      # top row, third column
    assert grid.occupancy[0, 1] == 1      # bottom row, second column
    assert grid.occupancy.sum() == 2

    p5 = b"P5\n4 2\n255\n" + bytes([255, 255, 0, 255, 255, 100, 255, 255])
    grid5 = parse_pgm(p5, 0.1)
    assert np.array_equal(grid5.occupancy, grid.occupancy)


def test_occupied_lookup_outside_is_free():
    grid = empty_grid(1.0, 1.0, 0.1)
    assert not grid.occupied_at(np.array([[5.0, 5.0], [-3.0, 0.2]])).any()


def test_clear_ellipses_erases_dilated_cells():
    grid = add_rectangle(empty_grid(2.0, 2.0, 0.05), 0.9, 0.9, 1.1, 1.1)
    assert grid.occupancy.sum() > 0
    cleared = clear_ellipses(grid, [((1.0, 1.0), 0.3, 0.2, 0.0)])
    assert cleared.occupancy.sum() == 0
    # untouched grid returns the identical object
    same = clear_ellipses(grid, [((10.0, 10.0), 0.3, 0.2, 0.0)])
    assert same is grid


def test_shift_seed_straight_line_extrapolates():
    prev = np.stack([np.arange(6) * 0.4, np.zeros(6)], axis=1)
    seed = shift_seed(prev, (0.0, 0.0), 5)
    assert np.allclose(seed.points[:-1], prev[1:])
    assert seed.points[-1] == pytest.approx([2.4, 0.0])


def test_shift_seed_cold_start():
    seed = shift_seed(None, (1.5, -2.0), 4)
    assert seed.points.shape == (5, 2)
    assert np.allclose(seed.points, [1.5, -2.0])


def test_shift_seed_arc_reflection():
    t = np.linspace(0.0, 1.0, 6)
    prev = np.stack([np.cos(t), np.sin(t)], axis=1)
    seed = shift_seed(prev, (0.0, 0.0), 5)
    expected = 2.0 * prev[-1] - prev[-2]
    assert seed.points[-1] == pytest.approx(expected, abs=1e-12)


def test_seed_orientations_carry_through_stationary_points():
    pts = np.array([[0.0, 0.0], [0.0, 0.0], [1.0, 0.0], [1.0, 1.0]])
    ang = seed_orientations(SeedTrajectory(pts), 0.3)
    assert ang[0] == pytest.approx(0.3)
    assert ang[1] == pytest.approx(0.0)
    assert ang[2] == pytest.approx(np.pi / 2)
    assert ang[3] == pytest.approx(np.pi / 2)


def test_expand_rectangle_empty_grid_hits_search_limit():
    grid = empty_grid(10.0, 10.0, 0.05)
    region = expand_rectangle(grid, (5.0, 5.0), 0.0, 0.3)
    assert not region.degenerate
    assert np.allclose(region.residuals(np.array([5.0, 5.0])), 2.0 - 0.3)


def test_expand_rectangle_wall_freezes_one_side():
    # wall cells start at x = 6.0 in a 0.05 m grid; expanding from x = 5.475
    # the +x side candidates 0.05k are blocked once the strip reaches the
    # wall: last free step is 0.50, all other sides reach the 2 m limit
    grid = add_rectangle(empty_grid(10.0, 10.0, 0.05), 6.0, 0.0, 6.2, 10.0)
    seed = np.array([5.475, 5.025])
    region = expand_rectangle(grid, seed, 0.0, 0.1)
    r = region.residuals(seed)
    assert r[0] == pytest.approx(0.50 - 0.1, abs=1e-9)   # +x side frozen early
    assert r[1] == pytest.approx(2.0 - 0.1, abs=1e-9)
    assert r[2] == pytest.approx(2.0 - 0.1, abs=1e-9)
    assert r[3] == pytest.approx(2.0 - 0.1, abs=1e-9)


def test_expand_rectangle_seed_inside_obstacle_raises():
    grid = add_rectangle(empty_grid(4.0, 4.0, 0.05), 1.0, 1.0, 3.0, 3.0)
    with pytest.raises(InfeasibleSeedError):
        expand_rectangle(grid, (2.0, 2.0), 0.0, 0.2)


def test_expand_rectangle_degenerates_to_point_box():
    # corridor narrower than twice the disc radius
    grid = add_rectangle(empty_grid(4.0, 4.0, 0.05), 0.0, 2.2, 4.0, 2.4)
    grid = add_rectangle(grid, 0.0, 1.6, 4.0, 1.8)
    region = expand_rectangle(grid, (2.0, 2.0), 0.0, 0.5)
    assert region.degenerate
    assert np.allclose(region.residuals(np.array([2.0, 2.0])), 0.01)


def test_expansion_determinism():
    grid = add_rectangle(empty_grid(6.0, 6.0, 0.05), 3.5, 2.0, 4.0, 4.0)
    a = expand_rectangle(grid, (2.6, 3.0), 0.4, 0.2)
    b = expand_rectangle(grid, (2.6, 3.0), 0.4, 0.2)
    assert np.array_equal(a.offsets, b.offsets)
    assert np.array_equal(a.normals, b.normals)


def test_seed_strictly_inside_unreduced_region():
    rng = np.random.default_rng(7)
    grid = empty_grid(8.0, 8.0, 0.05)
    for _ in range(30):
        x0, y0 = rng.uniform(1.0, 6.5, size=2)
        grid = add_rectangle(grid, x0, y0, x0 + rng.uniform(0.1, 0.8),
                             y0 + rng.uniform(0.1, 0.8))
    for _ in range(40):
        seed = rng.uniform(0.5, 7.5, size=2)
        if grid.occupied_at(seed[None])[0]:
            continue
        region = unreduced_region(grid, seed, rng.uniform(0, 2 * np.pi))
        assert np.all(region.residuals(seed) > 0.0)


def test_region_soundness_on_random_grids():
    # every point satisfying the reduced constraints, inflated back by the
    # disc radius, stays on free cells
    rng = np.random.default_rng(11)
    r_disc = 0.25
    for trial in range(8):
        grid = empty_grid(8.0, 8.0, 0.05)
        for _ in range(25):
            x0, y0 = rng.uniform(0.5, 7.0, size=2)
            grid = add_rectangle(grid, x0, y0, x0 + rng.uniform(0.1, 1.0),
                                 y0 + rng.uniform(0.1, 1.0))
        seed = rng.uniform(1.0, 7.0, size=2)
        if grid.occupied_at(seed[None])[0]:
            continue
        region = expand_rectangle(grid, seed, rng.uniform(0, 2 * np.pi), r_disc)
        if region.degenerate:
            continue
        pts = seed + rng.uniform(-2.0, 2.0, size=(400, 2))
        inside = region.contains(pts)
        ang = np.linspace(0, 2 * np.pi, 24, endpoint=False)
        ring = (r_disc - 1e-9) * np.stack([np.cos(ang), np.sin(ang)], axis=1)
        for q in pts[inside]:
            probes = q[None, :] + ring
            assert not grid.occupied_at(probes).any(), f"trial {trial} leaked at {q}"


def test_regions_along_seed_falls_back_on_occupied_seed():
    grid = add_rectangle(empty_grid(6.0, 6.0, 0.05), 3.0, 0.0, 3.4, 6.0)
    pts = np.stack([np.linspace(2.0, 4.0, 6), np.full(6, 3.0)], axis=1)
    regions = regions_along_seed(grid, SeedTrajectory(pts), 0.0, 0.2)
    assert len(regions) == 5
    # seed point 3 (x = 3.2) sits inside the wall and reuses region 2
    assert np.allclose(regions[2].offsets, regions[1].offsets)


def test_static_residuals_centroid_and_boundary():
    grid = empty_grid(10.0, 10.0, 0.05)
    region = expand_rectangle(grid, (5.0, 5.0), 0.0, 0.0)
    inner = static_constraint_residuals(region, (5.0, 5.0), 0.0, [(0.0, 0.0)])
    assert inner.shape == (4, 1)
    assert np.all(inner > 0.0)
    on_side = static_constraint_residuals(region, (7.0, 5.0), 0.0, [(0.0, 0.0)])
    assert on_side[0, 0] == pytest.approx(0.0, abs=1e-12)


def test_static_residuals_rotate_disc_offsets():
    grid = empty_grid(10.0, 10.0, 0.05)
    region = expand_rectangle(grid, (5.0, 5.0), 0.0, 0.0)
    # heading pi/2 turns the (0.3, 0) body offset into (0, 0.3) in the world
    res = static_constraint_residuals(region, (5.0, 5.0), np.pi / 2, [(0.3, 0.0)])
    direct = region.residuals(np.array([5.0, 5.3]))
    assert np.allclose(res[:, 0], direct, atol=1e-12)
