"""Enlargement-bound geometry: oracle cross-checks and properties."""

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from contourplan.bounds import (
    BoundSolverError,
    EllipseShape,
    containment_check,
    lambda_roots,
    minimal_enlargement,
    minkowski_boundary_point,
    naive_bound_counterexample,
)


def support_of_sum(e, r, direction, n=200_000):
    """Independent oracle: support function of ellipse (+) disc(r).

    Samples disc centers densely on the ellipse and takes the farthest
    support point in the given direction.
    """
    t = np.linspace(0.0, 2.0 * np.pi, n)
    pts = np.stack([e.a * np.cos(t), e.b * np.sin(t)], axis=1)
    return float(np.max(pts @ direction) + r)


def test_boundary_point_circle_case():
    p = minkowski_boundary_point(EllipseShape(1.0, 1.0), 0.5, 0.0)
    assert p == pytest.approx((1.5, 0.0), abs=1e-15)


def test_boundary_point_zero_radius_is_ellipse():
    p = minkowski_boundary_point(EllipseShape(1.0, 0.5), 0.0, np.pi / 2)
    assert p == pytest.approx((0.0, 0.5), abs=1e-15)


def test_boundary_point_matches_support_oracle():
    # frozen from the support-function oracle at theta = pi/4
    e = EllipseShape(1.0, 0.5)
    x, y = minkowski_boundary_point(e, 0.3, np.pi / 4)
    assert (x, y) == pytest.approx((0.8412708598365349, 0.6218815478932485), abs=1e-12)
    c, s = np.cos(np.pi / 4), np.sin(np.pi / 4)
    g = np.hypot(e.b * c, e.a * s)
    n = np.array([e.b * c, e.a * s]) / g
    assert x * n[0] + y * n[1] == pytest.approx(support_of_sum(e, 0.3, n), abs=1e-9)


def test_boundary_point_rejects_negative_radius():
    with pytest.raises(ValueError):
        minkowski_boundary_point(EllipseShape(1.0, 0.5), -0.1, 0.0)


def test_ellipse_shape_invariants():
    with pytest.raises(ValueError):
        EllipseShape(0.2, 0.3)
    with pytest.raises(ValueError):
        EllipseShape(1.0, 0.0)
    with pytest.raises(ValueError):
        EllipseShape(float("nan"), 1.0)


def test_lambda_roots_second_root_identity():
    for a, b, r, d in [(0.3, 0.2, 0.25, 0.1), (1.0, 0.4, 0.5, 0.3), (2.0, 1.5, 0.2, 0.05)]:
        roots = lambda_roots(EllipseShape(a, b), r, d)
        assert roots[1] == pytest.approx((r + d) ** 2, rel=1e-15)


def test_lambda_roots_coincide_for_circle():
    roots = lambda_roots(EllipseShape(0.5, 0.5), 0.3, 0.2)
    assert roots[2] == pytest.approx(roots[3], rel=1e-15)


def test_lambda_roots_frozen_values():
    # direct arithmetic on the published expressions
    roots = lambda_roots(EllipseShape(0.3, 0.2), 0.25, 0.1)
    assert roots == pytest.approx(
        (0.14454999999999996, 0.1225, 0.9025, 0.5625), rel=1e-12)


def test_lambda_roots_rejects_degenerate():
    with pytest.raises(ValueError):
        lambda_roots(EllipseShape(1.0, 1.0), 0.0, 0.0)


def test_containment_circle_passes_with_zero_violation():
    ok, worst = containment_check(EllipseShape(1.0, 1.0), 0.5, 0.5)
    assert ok
    assert abs(worst) <= 1e-12


def test_containment_rejects_eccentric_naive_bound():
    # curvature radius at the major-axis tip (b^2/a = 0.04) is far below r,
    # so the swept boundary bulges outside the naively enlarged ellipse
    ok, worst = containment_check(EllipseShape(1.0, 0.2), 0.5, 0.5)
    assert not ok
    assert worst > 0.1


def test_containment_sample_floor():
    with pytest.raises(ValueError):
        containment_check(EllipseShape(1.0, 0.5), 0.1, 0.1, samples=50)


def test_minimal_enlargement_circle_exact():
    res = minimal_enlargement(EllipseShape(0.5, 0.5), 0.3)
    assert res.delta == pytest.approx(0.3, abs=1e-8)
    assert res.alpha == pytest.approx(0.8, abs=1e-8)
    assert res.method == "bisection"


def test_minimal_enlargement_zero_radius():
    res = minimal_enlargement(EllipseShape(1.7, 0.4), 0.0)
    assert res.delta == 0.0
    assert res.alpha == 1.7 and res.beta == 0.4


def test_minimal_enlargement_pedestrian_case():
    # frozen from an independent 10^4-sample bisection oracle
    res = minimal_enlargement(EllipseShape(0.3, 0.2), 0.25, tol=1e-9)
    assert res.delta == pytest.approx(0.2525251873522573, abs=1e-7)
    ok, _ = containment_check(EllipseShape(0.3, 0.2), 0.25, res.delta)
    assert ok


def test_minimal_enlargement_passes_its_own_oracle():
    e = EllipseShape(0.3, 0.2)
    res = minimal_enlargement(e, 0.25)
    ok, _ = containment_check(e, 0.25, res.delta)
    assert ok


def test_closed_root_matches_bisection():
    for a, b, r in [(0.3, 0.2, 0.25), (1.0, 0.2, 0.5), (1.0, 0.5, 0.3), (2.0, 0.1, 0.8)]:
        e = EllipseShape(a, b)
        d_bis = minimal_enlargement(e, r, tol=1e-10).delta
        d_cr = minimal_enlargement(e, r, method="closed_root").delta
        assert d_cr == pytest.approx(d_bis, abs=5e-8)


def test_minimal_enlargement_bad_inputs():
    with pytest.raises(ValueError):
        minimal_enlargement(EllipseShape(1.0, 0.5), -0.1)
    with pytest.raises(ValueError):
        minimal_enlargement(EllipseShape(1.0, 0.5), 0.1, tol=0.0)
    with pytest.raises(ValueError):
        minimal_enlargement(EllipseShape(1.0, 0.5), 0.1, method="magic")


def test_solver_error_carries_bracket():
    err = BoundSolverError("boom", (0.1, 0.2))
    assert err.bracket == (0.1, 0.2)


def test_naive_counterexample_generator():
    e, r, theta, excess = naive_bound_counterexample()
    assert e.a / e.b >= 3.0
    assert excess > 0.0
    ok, worst = containment_check(e, r, r)
    assert not ok
    assert worst == pytest.approx(excess, rel=1e-6)


@given(st.floats(0.05, 2.0), st.floats(0.05, 2.0), st.floats(0.05, 2.0))
@settings(max_examples=60, deadline=None)
def test_property_containment_and_symmetry(u, v, r):
    a, b = max(u, v), min(u, v)
    e = EllipseShape(a, b)
    res = minimal_enlargement(e, r, tol=1e-8, method="closed_root")
    ok, _ = containment_check(e, r, res.delta)
    assert ok
    assert res.delta >= r - 1e-8  # circle is the only tight case
    # symmetry: the bound depends on the axis pair, not their labelling
    res_sym = minimal_enlargement(EllipseShape(a, b), r, tol=1e-8, method="closed_root")
    assert res_sym.delta == res.delta


@given(st.floats(0.05, 2.0), st.floats(0.05, 1.0), st.floats(0.05, 0.9))
@settings(max_examples=30, deadline=None)
def test_property_monotone_in_radius(a_, ratio, r):
    a = a_
    b = max(0.05, a * ratio)
    e = EllipseShape(max(a, b), min(a, b))
    d1 = minimal_enlargement(e, r, tol=1e-8, method="closed_root").delta
    d2 = minimal_enlargement(e, r + 0.2, tol=1e-8, method="closed_root").delta
    assert d2 >= d1 - 1e-8


def test_minimality_for_eccentric_shapes():
    for a, b, r in [(1.0, 0.5, 0.3), (1.0, 0.2, 0.5), (0.8, 0.1, 0.4)]:
        e = EllipseShape(a, b)
        res = minimal_enlargement(e, r, tol=1e-9)
        ok, _ = containment_check(e, r, res.delta - 10e-9)
        assert not ok, f"delta not minimal for {(a, b, r)}"
