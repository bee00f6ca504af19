"""Baseline planners: reactive velocity sampling and plain point tracking."""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np

from .refpath import LocalReference, ReferencePath, estimate_theta0
from .solver import HorizonPlan, ProblemSnapshot, SolverParams, Weights, solve

WAYPOINT_SWITCH_DIST = 1.0   # m, advance to the next waypoint inside this radius


@dataclass
class DynamicWindowParams:
    accel: float = 1.0           # m/s^2 reachable speed window
    alpha: float = 2.0           # rad/s^2 reachable turn-rate window
    window_time: float = 0.5     # s, accel window span
    horizon: float = 1.5         # s, arc rollout length
    dt: float = 0.15             # s, rollout step
    n_v: int = 7
    n_omega: int = 15
    w_heading: float = 0.8
    w_clearance: float = 0.3
    w_velocity: float = 0.3
    clearance_sat: float = 1.0   # m, clearance normalization
    margin: float = 0.02         # m, collision margin over the disc radius


class DynamicWindowPlanner:
    """Samples reachable (v, omega) pairs, rolls out arcs, scores by heading
    to the active waypoint, clearance, and speed.  Purely reactive: obstacles
    are taken at their current positions."""

    def __init__(self, grid, waypoints, v_max: float, omega_max: float,
                 r_disc: float, params: DynamicWindowParams = None):
        self.grid = grid
        self.waypoints = np.asarray(waypoints, dtype=float)
        self.v_max = v_max
        self.omega_max = omega_max
        self.r_disc = r_disc
        self.p = params or DynamicWindowParams()
        self._dist = grid.free_distance_field()
        self._wp_index = 0
        self._cmd = np.zeros(2)

    def _grid_clearance(self, pts):
        ix, iy = self.grid.cell_of(pts)
        ix = np.clip(ix, 0, self.grid.width - 1)
        iy = np.clip(iy, 0, self.grid.height - 1)
        return self._dist[iy, ix]

    def active_waypoint(self, position):
        while (self._wp_index < len(self.waypoints) - 1
               and np.hypot(*(self.waypoints[self._wp_index] - position)) < WAYPOINT_SWITCH_DIST):
            self._wp_index += 1
        return self.waypoints[self._wp_index]

    def step(self, state, obstacles):
        p = self.p
        pos = np.asarray(state[:2], float)
        psi = float(state[2])
        target = self.active_waypoint(pos)

        v0, w0 = self._cmd
        vs = np.linspace(max(0.0, v0 - p.accel * p.window_time),
                         min(self.v_max, v0 + p.accel * p.window_time), p.n_v)
        ws = np.linspace(max(-self.omega_max, w0 - p.alpha * p.window_time),
                         min(self.omega_max, w0 + p.alpha * p.window_time), p.n_omega)
        vv, ww = np.meshgrid(vs, ws, indexing="ij")
        vv = vv.ravel()
        ww = ww.ravel()

        n_steps = max(int(round(p.horizon / p.dt)), 1)
        x = np.full(vv.shape, pos[0])
        y = np.full(vv.shape, pos[1])
        h = np.full(vv.shape, psi)
        clear = np.full(vv.shape, np.inf)
        ped_pos = np.array([o.position for o in obstacles]) if obstacles else None
        ped_rad = np.array([o.a for o in obstacles]) if obstacles else None
        for _ in range(n_steps):
            x = x + vv * np.cos(h) * p.dt
            y = y + vv * np.sin(h) * p.dt
            h = h + ww * p.dt
            pts = np.stack([x, y], axis=1)
            c = self._grid_clearance(pts) - self.r_disc
            if ped_pos is not None:
                d = np.linalg.norm(pts[:, None, :] - ped_pos[None, :, :], axis=2)
                c = np.minimum(c, (d - ped_rad[None, :]).min(axis=1) - self.r_disc)
            clear = np.minimum(clear, c)

        valid = clear > p.margin
        if not np.any(valid):
            self._cmd = np.zeros(2)
            return self._cmd.copy()
        angle_to = np.arctan2(target[1] - y, target[0] - x)
        err = np.abs((angle_to - h + np.pi) % (2 * np.pi) - np.pi)
        heading_score = 1.0 - err / np.pi
        clearance_score = np.clip(clear / p.clearance_sat, 0.0, 1.0)
        velocity_score = vv / self.v_max
        score = (p.w_heading * heading_score + p.w_clearance * clearance_score
                 + p.w_velocity * velocity_score)
        score[~valid] = -np.inf
        best = int(np.argmax(score))
        self._cmd = np.array([vv[best], ww[best]])
        return self._cmd.copy()

    def reset(self):
        self._wp_index = 0
        self._cmd = np.zeros(2)


LOOKAHEAD = 1.0   # m, tracking target sits this far ahead on the path


class PointTrackingController:
    """Reference tracker on the same SQP machinery, without collision rows.

    Minimizes the squared distance of the horizon positions to the path
    point one meter ahead of the robot's projection.  Blind to obstacles by
    design: it demonstrates what contouring control adds.
    """

    def __init__(self, path: ReferencePath, model, tau: float, n_steps: int,
                 weights: Weights, input_lb, input_ub,
                 solver_params: SolverParams = None):
        self.path = path
        self.model = model
        self.tau = tau
        self.n_steps = n_steps
        self.weights = weights
        self.input_lb = np.asarray(input_lb, float)
        self.input_ub = np.asarray(input_ub, float)
        self.params = solver_params or SolverParams()
        self._plan = None
        self._theta_prev = None
        self._last_command = np.zeros(2)

    def cycle(self, state, timer=time.perf_counter):
        pos = np.asarray(state[:2], float)
        theta0, seg = estimate_theta0(self.path, pos, self._theta_prev)
        target = np.array(self.path.point_at(theta0 + LOOKAHEAD))
        ref = LocalReference(self.path, seg, 1)
        snap = ProblemSnapshot(
            model=self.model, tau=self.tau, n_steps=self.n_steps,
            state0=np.asarray(state, float), theta0=theta0, ref=ref,
            regions=[], predictions=[], weights=self.weights,
            footprint=None, input_lb=self.input_lb, input_ub=self.input_ub,
            v_ref=0.0, params=self.params, warm=self._plan,
            tracking_point=target,
        )
        plan = solve(snap, timer=timer)
        self._plan = plan
        self._theta_prev = theta0
        if plan.status == "optimal":
            self._last_command = plan.inputs[0].copy()
        else:
            self._last_command = np.array([0.8 * self._last_command[0],
                                           self._last_command[1]])
        return self._last_command.copy(), plan, theta0

    def reset(self):
        self._plan = None
        self._theta_prev = None
        self._last_command = np.zeros(2)
