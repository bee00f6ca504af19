"""Per-cycle planning pipeline: progress estimate, window build, regions,
forecasts, solve, and the deceleration fallback."""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from .dynamics import Footprint, make_model
from .gridmap import OccupancyGrid, clear_ellipses
from .refpath import EtaSelection, LocalReference, ReferencePath, estimate_theta0, select_eta
from .regions import regions_along_seed, shift_seed
from .solver import HorizonPlan, ProblemSnapshot, SolverParams, Weights, solve
from .tracking import predict_horizon, select_nearest

BRAKE_FACTOR = 0.8          # commanded speed shrinks by this on non-optimal cycles
NEAREST_LIMIT = 6           # obstacles kept per cycle


@dataclass
class ControllerConfig:
    model_name: str = "unicycle"
    wheelbase: float = 2.7
    tau: float = 0.2                  # s, horizon step
    n_steps: int = 15
    control_period: float = 0.05      # s
    footprint: Footprint = field(default_factory=lambda: Footprint([(0.0, 0.0)], 0.33))
    weights: Weights = field(default_factory=lambda: Weights(
        np.diag([5.0, 5.0]), 1.0, 0.1, np.diag([0.02, 0.2])))
    input_lb: np.ndarray = field(default_factory=lambda: np.array([0.0, -1.5]))
    input_ub: np.ndarray = field(default_factory=lambda: np.array([1.5, 1.5]))
    v_max: float = 1.5                # m/s, for the window-length inequality
    alignment: str = "minor"
    clearance_margin: float = 0.1     # m, planning-only inflation of the disc
    solver: SolverParams = field(default_factory=SolverParams)


@dataclass
class CycleResult:
    command: np.ndarray               # first input applied this cycle
    plan: HorizonPlan
    theta0: float
    segment_index: int
    eta: EtaSelection
    required_length: float            # tau * N * v_max
    braking: bool


class ContouringController:
    """Receding-horizon planner bound to one path and map.

    Every call to `cycle` runs the full pipeline on immutable snapshots and
    applies either the fresh first input or, when the solve does not reach
    optimality, a decelerating fallback that keeps the previous heading rate.
    The newest plan (whatever its status) seeds the next warm start.
    """

    def __init__(self, path: ReferencePath, grid: OccupancyGrid,
                 config: ControllerConfig):
        self.path = path
        self.grid = grid
        self.cfg = config
        self.model = make_model(config.model_name, config.wheelbase)
        self._plan = None
        self._theta_prev = None
        self._last_command = np.zeros(2)
        self.last_regions = []

    def _warm_start(self):
        """Previous plan shifted by the elapsed control period.

        The control period is a fraction of the horizon step, so the shift
        interpolates between plan knots instead of discarding a full step.
        """
        if self._plan is None:
            return None
        frac = min(self.cfg.control_period / self.cfg.tau, 1.0)
        p = self._plan
        u = (1.0 - frac) * p.inputs + frac * np.vstack([p.inputs[1:], p.inputs[-1]])
        z = (1.0 - frac) * p.states + frac * np.vstack([p.states[1:], p.states[-1]])
        th = (1.0 - frac) * p.thetas + frac * np.concatenate([p.thetas[1:], [p.thetas[-1]]])
        return HorizonPlan(states=z, inputs=u, thetas=th, cost=p.cost, status=p.status)

    def cycle(self, state, obstacles, tracks, timer=time.perf_counter) -> CycleResult:
        """One planning cycle.

        `state` is the model state array, `obstacles` the true ellipse
        parameters (id, a, b, orientation), and `tracks` maps obstacle id to
        its Kalman track.  Returns the applied command and diagnostics.
        """
        cfg = self.cfg
        position = np.asarray(state, float)[:2]
        heading = float(state[2])

        theta0, seg = estimate_theta0(self.path, position, self._theta_prev)
        eta = select_eta(self.path, seg, cfg.n_steps, cfg.tau, cfg.v_max)
        ref = LocalReference(self.path, seg, eta.eta)

        near = select_nearest(obstacles, position, NEAREST_LIMIT)
        grid = clear_ellipses(self.grid, [
            (o.position, o.a, o.b, o.orientation) for o in near])

        prev_positions = self._plan.positions if self._plan is not None else None
        seed = shift_seed(prev_positions, position, cfg.n_steps)
        regions = regions_along_seed(grid, seed, heading, cfg.footprint.r_disc)

        # the forecast ellipses are enlarged for an inflated disc, which buys
        # a guaranteed clearance floor; the referee uses the true radius
        r_plan = cfg.footprint.r_disc + cfg.clearance_margin
        predictions = [
            predict_horizon(tracks[o.id], o, cfg.n_steps, cfg.tau,
                            r_plan, cfg.alignment)
            for o in near if o.id in tracks
        ]

        snap = ProblemSnapshot(
            model=self.model, tau=cfg.tau, n_steps=cfg.n_steps,
            state0=np.asarray(state, float), theta0=theta0, ref=ref,
            regions=regions, predictions=predictions, weights=cfg.weights,
            footprint=cfg.footprint, input_lb=cfg.input_lb, input_ub=cfg.input_ub,
            v_ref=self.path.v_ref_array,
            params=cfg.solver, warm=self._warm_start(),
        )
        plan = solve(snap, timer=timer)
        self.last_regions = regions

        braking = plan.status != "optimal"
        if braking:
            command = self._brake_command(state)
        else:
            command = plan.inputs[0].copy()
        self._plan = plan
        self._theta_prev = theta0
        self._last_command = command
        return CycleResult(
            command=command, plan=plan, theta0=theta0, segment_index=seg,
            eta=eta, required_length=cfg.tau * cfg.n_steps * cfg.v_max,
            braking=braking,
        )

    def _brake_command(self, state):
        if self.model.name == "unicycle":
            return np.array([BRAKE_FACTOR * self._last_command[0],
                             self._last_command[1]])
        # bicycle: command a deceleration toward the scaled speed
        v = float(state[3])
        accel = (BRAKE_FACTOR - 1.0) * v / self.cfg.control_period
        accel = float(np.clip(accel, self.cfg.input_lb[0], 0.0))
        return np.array([accel, self._last_command[1]])

    def reset(self):
        self._plan = None
        self._theta_prev = None
        self._last_command = np.zeros(2)
