"""SQP contouring solver: error terms, costs, convergence, determinism."""

import numpy as np
import pytest
from scipy.optimize import minimize

from contourplan.dynamics import Footprint, UnicycleModel, step_dynamics
from contourplan.refpath import LocalReference, fit_segments
from contourplan.regions import ConvexRegion
from contourplan.solver import (
    HorizonPlan,
    ProblemSnapshot,
    SolverParams,
    Weights,
    error_vector,
    solve,
    stage_cost,
)
from contourplan.tracking import ObstaclePrediction

TAU = 0.2


def straight_path(length=30.0):
    xs = np.arange(0.0, length + 1.0, 2.5)
    return fit_segments(np.stack([xs, np.zeros_like(xs)], axis=1), 1.25)


def vertical_path():
    ys = np.arange(0.0, 21.0, 2.5)
    return fit_segments(np.stack([np.zeros_like(ys), ys], axis=1), 1.25)


def big_box_region(cx=0.0, cy=0.0, half=50.0):
    normals = np.array([[1.0, 0.0], [-1.0, 0.0], [0.0, 1.0], [0.0, -1.0]])
    offsets = normals @ np.array([cx, cy]) + half
    return ConvexRegion(normals, offsets, np.array([cx, cy]), 0.0)


def default_weights(q_r=0.1):
    # light absolute-speed penalty: the steady state sits at
    # q_v * v_ref / (q_v + q_u[0,0]), within 2% of v_ref here
    return Weights(q_eps=np.diag([5.0, 5.0]), q_v=1.0, q_r=q_r,
                   q_u=np.diag([0.02, 0.2]), gamma=0.01)


def make_snapshot(path=None, state0=(0.0, 0.0, 0.0), theta0=0.0, n_steps=15,
                  predictions=(), regions="boxes", weights=None, v_ref=1.25,
                  params=None, warm=None, tracking_point=None):
    path = path or straight_path()
    ref = LocalReference(path, path.segment_index(theta0), 6)
    if regions == "boxes":
        regions = [big_box_region() for _ in range(n_steps)]
    return ProblemSnapshot(
        model=UnicycleModel(), tau=TAU, n_steps=n_steps,
        state0=np.asarray(state0, float), theta0=theta0, ref=ref,
        regions=list(regions), predictions=list(predictions),
        weights=weights or default_weights(),
        footprint=Footprint([(0.0, 0.0)], r_disc=0.33),
        input_lb=np.array([0.0, -1.5]), input_ub=np.array([1.5, 1.5]),
        v_ref=v_ref, params=params or SolverParams(), warm=warm,
        tracking_point=None if tracking_point is None else np.asarray(tracking_point, float),
    )


def prediction_at(pos, vel=(0.0, 0.0), n_steps=15, alpha=0.8, beta=0.6, psi=0.0, oid=0):
    ks = np.arange(n_steps + 1)[:, None]
    positions = np.asarray(pos, float)[None, :] + ks * TAU * np.asarray(vel, float)
    return ObstaclePrediction(oid, positions, np.full(n_steps + 1, psi), alpha, beta)


def test_error_vector_on_path_is_zero():
    path = straight_path()
    ref = LocalReference(path, 0, 4)
    p, _ = ref.evaluate(3.0)
    assert error_vector(p, 3.0, ref) == pytest.approx([0.0, 0.0], abs=1e-9)


def test_error_vector_lateral_offset_straight_path():
    # heading 0: offset (0, 0.5) gives contour error -0.5, zero lag
    ref = LocalReference(straight_path(), 0, 4)
    p, _ = ref.evaluate(3.0)
    e = error_vector(p + np.array([0.0, 0.5]), 3.0, ref)
    assert e == pytest.approx([-0.5, 0.0], abs=1e-9)


def test_error_vector_vertical_path():
    # heading pi/2: offset (0.3, 0) gives contour error 0.3, zero lag
    ref = LocalReference(vertical_path(), 0, 4)
    p, _ = ref.evaluate(3.0)
    e = error_vector(p + np.array([0.3, 0.0]), 3.0, ref)
    assert e == pytest.approx([0.3, 0.0], abs=1e-9)


def test_stage_cost_zero_on_path():
    path = straight_path()
    ref = LocalReference(path, 0, 4)
    model = UnicycleModel()
    p, _ = ref.evaluate(2.0)
    z = np.array([p[0], p[1], 0.0])
    j = stage_cost(model, z, np.array([1.25, 0.0]), 2.0, ref, default_weights(), 1.25)
    # only the input penalty remains when tracking and speed errors vanish
    assert j == pytest.approx(0.02 * 1.25 ** 2, abs=1e-9)
    j0 = stage_cost(model, z, np.array([0.0, 0.0]), 2.0, ref,
                    Weights(np.diag([5.0, 5.0]), 0.0, 0.0, np.zeros((2, 2))), 1.25)
    assert j0 == pytest.approx(0.0, abs=1e-12)


def test_stage_cost_single_obstacle_term():
    path = straight_path()
    ref = LocalReference(path, 0, 4)
    w = Weights(np.zeros((2, 2)), 0.0, 0.7, np.zeros((2, 2)), gamma=0.01)
    p, _ = ref.evaluate(2.0)
    z = np.array([p[0], p[1], 0.0])
    d = 1.3
    j = stage_cost(UnicycleModel(), z, np.zeros(2), 2.0, ref, w, 0.0,
                   obstacle_positions=np.array([[p[0] + d, p[1]]]))
    assert j == pytest.approx(0.7 / (d ** 2 + 0.01), rel=1e-12)


def test_stage_cost_mixed_hand_summed():
    ref = LocalReference(straight_path(), 0, 4)
    w = default_weights(q_r=0.3)
    theta = 2.0
    p, _ = ref.evaluate(theta)
    z = np.array([p[0] + 0.1, p[1] - 0.2, 0.0])
    u = np.array([0.9, 0.3])
    obst = np.array([[p[0] + 2.0, p[1] + 1.0]])
    # hand sum: e = (0.2, -0.1) for heading 0 offsets (0.1, -0.2)
    expect = 5.0 * 0.2 ** 2 + 5.0 * 0.1 ** 2
    expect += 1.0 * (1.25 - 0.9) ** 2
    d2 = (z[0] - obst[0, 0]) ** 2 + (z[1] - obst[0, 1]) ** 2
    expect += 0.3 / (d2 + 0.01)
    expect += 0.02 * 0.9 ** 2 + 0.2 * 0.3 ** 2
    j = stage_cost(UnicycleModel(), z, u, theta, ref, w, 1.25, obst)
    assert j == pytest.approx(expect, rel=1e-9)


def test_terminal_cost_drops_speed_and_input():
    ref = LocalReference(straight_path(), 0, 4)
    p, _ = ref.evaluate(2.0)
    z = np.array([p[0], p[1], 0.0])
    j = stage_cost(UnicycleModel(), z, np.array([1.0, 1.0]), 2.0, ref,
                   default_weights(), 1.25, terminal=True)
    assert j == pytest.approx(0.0, abs=1e-12)


def test_solve_tracks_straight_path():
    snap = make_snapshot(params=SolverParams(max_iterations=30))
    plan = solve(snap)
    assert plan.status == "optimal"
    ref = snap.ref
    e_terminal = error_vector(plan.positions[-1], plan.thetas[-1], ref)
    assert abs(e_terminal[0]) < 1e-3
    assert plan.inputs[5:, 0] == pytest.approx(1.25, abs=0.07)
    # dynamics residual of the returned plan
    z_next = step_dynamics(snap.model, plan.states[:-1], plan.inputs, TAU)
    assert np.max(np.abs(z_next - plan.states[1:])) < 1e-6


def test_solve_matches_derivative_free_optimizer_small_horizon():
    n = 5
    snap = make_snapshot(n_steps=n, regions=[], params=SolverParams(
        max_iterations=60, kkt_tol=1e-8))
    plan = solve(snap)

    def rollout_cost(u_flat):
        u = np.clip(u_flat.reshape(n, 2), snap.input_lb, snap.input_ub)
        z = np.zeros((n + 1, 3))
        th = np.zeros(n + 1)
        for k in range(n):
            z[k + 1] = step_dynamics(snap.model, z[k], u[k], TAU)
            th[k + 1] = th[k] + TAU * u[k, 0]
        j = 0.0
        for k in range(n):
            j += stage_cost(snap.model, z[k], u[k], th[k], snap.ref,
                            snap.weights, 1.25)
        j += stage_cost(snap.model, z[n], None, th[n], snap.ref,
                        snap.weights, 1.25, terminal=True)
        return j

    res = minimize(rollout_cost, plan.inputs.ravel(), method="Powell",
                   options={"xtol": 1e-10, "ftol": 1e-12, "maxiter": 20000})
    assert plan.cost <= res.fun + 1e-6
    assert plan.cost == pytest.approx(res.fun, abs=1e-4)


def test_solve_single_step_matches_closed_form():
    # on a straight path from the origin the lag/contour errors vanish for any
    # speed, so the optimum balances the speed and input penalties alone
    w = default_weights()
    snap = make_snapshot(n_steps=1, regions=[], weights=w,
                         params=SolverParams(max_iterations=60, kkt_tol=1e-10))
    plan = solve(snap)
    v_expect = w.q_v * 1.25 / (w.q_v + w.q_u[0, 0])
    assert plan.inputs[0, 0] == pytest.approx(v_expect, abs=1e-6)
    assert plan.inputs[0, 1] == pytest.approx(0.0, abs=1e-6)


def test_solve_infeasible_on_unreachable_point_boxes():
    regions = []
    normals = np.array([[1.0, 0.0], [-1.0, 0.0], [0.0, 1.0], [0.0, -1.0]])
    for k in range(15):
        seed = np.array([5.0 + 0.2 * k, 4.0])   # far off to the side
        regions.append(ConvexRegion(normals, normals @ seed + 0.01, seed, 0.0, True))
    snap = make_snapshot(regions=regions)
    plan = solve(snap)
    assert plan.status == "infeasible"
    assert plan.slack_max > 1e-3


def test_solve_avoids_obstacle_and_stays_feasible():
    pred = prediction_at((2.0, 0.0), alpha=0.9, beta=0.9)
    snap = make_snapshot(predictions=[pred], params=SolverParams(max_iterations=30))
    plan = solve(snap)
    assert plan.status == "optimal"
    for k in range(1, 16):
        d = plan.positions[k] - pred.positions[k]
        res = (d[0] / pred.alpha) ** 2 + (d[1] / pred.beta) ** 2
        assert res > 1.0 - 1e-6
    for k, region in enumerate(snap.regions):
        assert np.all(region.residuals(plan.positions[k + 1]) > -1e-6)


def test_warm_start_halves_iterations():
    snap = make_snapshot(params=SolverParams(max_iterations=40))
    cold = solve(snap)
    assert cold.status == "optimal"
    warm_snap = make_snapshot(params=SolverParams(max_iterations=40), warm=cold)
    warm = solve(warm_snap)
    assert warm.status == "optimal"
    assert warm.iterations <= max(cold.iterations // 2, 1)


def test_solve_cost_not_above_standstill():
    snap = make_snapshot(regions=[])
    plan = solve(snap)
    stand = make_snapshot(regions=[])
    standstill = HorizonPlan(
        states=np.tile(stand.state0, (16, 1)), inputs=np.zeros((15, 2)),
        thetas=np.zeros(16), cost=0.0, status="optimal")
    j_stand = 0.0
    for k in range(15):
        j_stand += stage_cost(stand.model, standstill.states[k], standstill.inputs[k],
                              0.0, stand.ref, stand.weights, 1.25)
    assert plan.cost <= j_stand + 1e-9


def test_solve_deterministic():
    pred = prediction_at((2.5, 0.2), vel=(-0.5, 0.0))
    a = solve(make_snapshot(predictions=[pred]))
    b = solve(make_snapshot(predictions=[pred]))
    assert np.array_equal(a.states, b.states)
    assert np.array_equal(a.inputs, b.inputs)
    assert np.array_equal(a.thetas, b.thetas)
    assert a.cost == b.cost and a.status == b.status


def test_point_tracking_mode_zero_command_at_target():
    snap = make_snapshot(tracking_point=(0.0, 0.0), regions=[],
                         params=SolverParams(max_iterations=30))
    plan = solve(snap)
    assert plan.status == "optimal"
    assert np.max(np.abs(plan.inputs)) < 1e-4


def test_point_tracking_mode_moves_toward_target():
    snap = make_snapshot(tracking_point=(1.0, 0.0), regions=[],
                         params=SolverParams(max_iterations=30))
    plan = solve(snap)
    assert plan.positions[-1][0] > 0.5


def test_weights_validation():
    with pytest.raises(ValueError):
        Weights(np.array([[1.0, 2.0], [2.0, 1.0]]), 1.0, 0.1, np.eye(2))
    with pytest.raises(ValueError):
        Weights(np.eye(2), -1.0, 0.1, np.eye(2))
