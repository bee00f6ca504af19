"""Deterministic scenario engine: one fixed-step control loop per run.

Detections are ground-truth pedestrian positions with seeded Gaussian noise;
the planner sees Kalman estimates and the referee sees the truth.  A fixed
seed reproduces the whole run, including every random draw, exactly.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from .baselines import DynamicWindowPlanner, PointTrackingController
from .config import ScenarioConfig
from .controller import ContouringController, ControllerConfig
from .dynamics import make_model, step_dynamics, wrap_angle
from .refpath import estimate_theta0, fit_segments
from .referee import check_collision, pedestrian_clearance
from .social import Pedestrian, SocialForcesParams, social_forces_step
from .tracking import EllipseObstacle, kalman_update, start_track

STUCK_WINDOW = 10.0        # s, no-progress window
STUCK_DISPLACEMENT = 0.05  # m, displacement below this counts as no progress

TRAJECTORY_HEADER = "t,x,y,psi,v,omega,theta,solve_ms,status,clearance"


@dataclass
class RunMetrics:
    outcome: str                      # success | collision | stuck
    min_clearance: float              # m, border to border; inf without obstacles
    mean_clearance: float
    traveled_distance: float          # m
    duration: float                   # s
    solve_times: list = field(default_factory=list)     # s per cycle
    braking_cycles: int = 0
    eta_ok: bool = True               # window-length inequality held every cycle
    cycles: int = 0


@dataclass
class RunResult:
    metrics: RunMetrics
    trajectory_csv: str
    plot_data: str
    config_echo: dict


def _fmt(x):
    return format(float(x), ".9g")


def _build_pedestrians(cfg: ScenarioConfig, rng) -> list:
    specs = list(cfg.pedestrians)
    if cfg.pedestrian_sampling is not None:
        specs += cfg.pedestrian_sampling.sample(rng)
    peds = []
    for i, s in enumerate(specs):
        peds.append(Pedestrian(
            id=i, position=np.array(s.start), velocity=np.zeros(2),
            goal=np.array(s.goal), desired_speed=s.speed, a=s.a, b=s.b,
            orientation=0.0, depart_time=s.depart))
    return peds


def _observed_obstacles(peds, tracks, prev):
    """Planner-side obstacle list from the Kalman estimates."""
    out = []
    for ped in peds:
        tr = tracks.get(ped.id)
        if tr is None:
            continue
        speed = float(np.hypot(*tr.velocity))
        if speed >= 0.05:
            psi = float(np.arctan2(tr.velocity[1], tr.velocity[0])) + np.pi / 2.0
        else:
            psi = prev.get(ped.id, 0.0)
        prev[ped.id] = psi
        out.append(EllipseObstacle(ped.id, tr.position.copy(), tr.velocity.copy(),
                                   ped.a, ped.b, psi))
    return out


def run_scenario(cfg: ScenarioConfig, base_dir=None,
                 timer=time.perf_counter) -> RunResult:
    """Run one scenario to completion and return metrics plus artifacts.

    `timer` feeds the solver's wall-clock measurements; tests inject a stub
    to make trajectory logs byte-reproducible.
    """
    rng = np.random.default_rng(cfg.seed)
    grid = cfg.grid.build(base_dir)
    path = fit_segments(np.asarray(cfg.waypoints, float), cfg.v_ref)
    footprint = cfg.footprint.build()
    weights = cfg.weights.build()
    model = make_model(cfg.robot.model, cfg.robot.wheelbase)
    goal = np.asarray(cfg.waypoints[-1], float)
    peds = _build_pedestrians(cfg, rng)
    social = SocialForcesParams(
        relaxation=cfg.social.relaxation, repulsion_gain=cfg.social.repulsion_gain,
        repulsion_range=cfg.social.repulsion_range, speed_cap=cfg.social.speed_cap,
        cooperative=cfg.social.cooperative)

    start = list(cfg.robot.start)
    if model.nz == 4 and len(start) == 3:
        start.append(0.0)
    state = np.asarray(start, float)

    ctrl_cfg = ControllerConfig(
        model_name=cfg.robot.model, wheelbase=cfg.robot.wheelbase,
        tau=cfg.horizon.tau, n_steps=cfg.horizon.n_steps,
        control_period=cfg.control_period, footprint=footprint, weights=weights,
        input_lb=np.array(cfg.limits.input_lb), input_ub=np.array(cfg.limits.input_ub),
        v_max=cfg.limits.v_max, alignment=cfg.alignment,
        clearance_margin=cfg.clearance_margin, solver=cfg.solver.build())

    lmpcc = dw = tracker = None
    if cfg.planner == "lmpcc":
        lmpcc = ContouringController(path, grid, ctrl_cfg)
    elif cfg.planner == "dw":
        dw = DynamicWindowPlanner(grid, cfg.waypoints, cfg.limits.v_max,
                                  cfg.limits.input_ub[1], footprint.r_disc)
    else:
        tracker = PointTrackingController(path, model, cfg.horizon.tau,
                                          cfg.horizon.n_steps, weights,
                                          cfg.limits.input_lb, cfg.limits.input_ub,
                                          ctrl_cfg.solver)

    tracks = {}
    psi_memory = {}
    rows = [TRAJECTORY_HEADER]
    executed = []
    ped_paths = {p.id: [] for p in peds}
    region_snapshots = []

    metrics = RunMetrics(outcome="stuck", min_clearance=float("inf"),
                         mean_clearance=float("inf"), traveled_distance=0.0,
                         duration=0.0)
    clearances = []
    traveled = 0.0
    history = []
    outcome = None
    t = 0.0
    dt = cfg.control_period
    n_cycles = int(round(cfg.time_budget / dt))
    theta_prev = None
    theta_log = 0.0
    # closed loops revisit the goal point at the start: require progress too
    progress_needed = max(path.total_length - max(1.0, 2.0 * cfg.goal_tolerance), 0.0)

    for cycle in range(n_cycles):
        active = [p for p in peds if t >= p.depart_time]
        for ped in active:
            z = ped.position + rng.normal(0.0, cfg.tracker.detection_noise_std, 2)
            if ped.id not in tracks:
                tracks[ped.id] = start_track(z, cfg.tracker.accel_std,
                                             cfg.tracker.meas_std)
            else:
                tracks[ped.id] = kalman_update(tracks[ped.id], z, dt)
        observed = _observed_obstacles(peds, tracks, psi_memory)

        solve_s = 0.0
        status = "-"
        if lmpcc is not None:
            res = lmpcc.cycle(state, observed, tracks, timer=timer)
            command = res.command
            solve_s = res.plan.solve_time
            status = res.plan.status
            theta_log = res.theta0
            metrics.braking_cycles += int(res.braking)
            if not res.eta.sufficient:
                metrics.eta_ok = False
            if cycle % 20 == 0:
                region_snapshots.append([r.corners() for r in lmpcc.last_regions])
        elif dw is not None:
            t0 = timer()
            command = dw.step(state, observed)
            solve_s = timer() - t0
            status = "reactive"
            theta_log, _ = estimate_theta0(path, state[:2], theta_prev)
        else:
            command, plan, theta_log = tracker.cycle(state, timer=timer)
            solve_s = plan.solve_time
            status = plan.status
        theta_prev = theta_log

        prev_pos = state[:2].copy()
        state = step_dynamics(model, state, command, dt)
        state[2] = float(wrap_angle(state[2]))
        traveled += float(np.hypot(*(state[:2] - prev_pos)))
        t += dt

        peds = social_forces_step(peds, state[:2], footprint.r_disc, dt,
                                  social, now=t, alignment=cfg.alignment)
        truth = [EllipseObstacle(p.id, p.position, p.velocity, p.a, p.b,
                                 p.orientation)
                 for p in peds if t >= p.depart_time]

        clearance = pedestrian_clearance(state[:2], state[2], footprint, truth)
        if np.isfinite(clearance):
            clearances.append(clearance)
        executed.append((t, state[0], state[1]))
        for p in peds:
            ped_paths[p.id].append((p.position[0], p.position[1]))

        v_log = command[0] if model.nz == 3 else state[3]
        rows.append(",".join([
            _fmt(t), _fmt(state[0]), _fmt(state[1]), _fmt(state[2]),
            _fmt(v_log), _fmt(command[1]), _fmt(theta_log),
            format(solve_s * 1e3, ".3f"), status, _fmt(clearance)]))
        metrics.solve_times.append(solve_s)
        metrics.cycles += 1

        if check_collision(state[:2], state[2], footprint, grid, truth):
            outcome = "collision"
            break
        if (float(np.hypot(*(state[:2] - goal))) <= cfg.goal_tolerance
                and theta_log >= progress_needed):
            outcome = "success"
            break
        history.append((t, state[0], state[1]))
        while history and history[0][0] < t - STUCK_WINDOW - 1e-9:
            history.pop(0)
        if history and t - history[0][0] >= STUCK_WINDOW - 1e-9:
            ref_t, rx, ry = history[0]
            if float(np.hypot(state[0] - rx, state[1] - ry)) < STUCK_DISPLACEMENT:
                outcome = "stuck"
                break

    metrics.outcome = outcome or "stuck"
    metrics.duration = t
    metrics.traveled_distance = traveled
    if clearances:
        metrics.min_clearance = float(np.min(clearances))
        metrics.mean_clearance = float(np.mean(clearances))
    plot = _plot_data(path, executed, ped_paths, region_snapshots)
    return RunResult(metrics=metrics, trajectory_csv="\n".join(rows) + "\n",
                     plot_data=plot, config_echo=cfg.model_dump(mode="json"))


def _plot_data(path, executed, ped_paths, region_snapshots) -> str:
    """Gnuplot-style blocks: reference path, executed path, pedestrian
    tracks, and sampled free-space rectangles (closed polygons)."""
    out = ["# reference path (x y)"]
    thetas = np.linspace(0.0, path.total_length, 400)
    for th in thetas:
        x, y = path.point_at(float(th))
        out.append(f"{_fmt(x)} {_fmt(y)}")
    out.append("")
    out.append("# executed trajectory (t x y)")
    for t, x, y in executed:
        out.append(f"{_fmt(t)} {_fmt(x)} {_fmt(y)}")
    out.append("")
    for pid, pts in sorted(ped_paths.items()):
        out.append(f"# pedestrian {pid} (x y)")
        for x, y in pts:
            out.append(f"{_fmt(x)} {_fmt(y)}")
        out.append("")
    for i, regions in enumerate(region_snapshots):
        out.append(f"# regions sample {i} (x y, blank-separated rectangles)")
        for corners in regions:
            for x, y in np.vstack([corners, corners[:1]]):
                out.append(f"{_fmt(x)} {_fmt(y)}")
            out.append("")
    return "\n".join(out) + "\n"
