"""Scenario configuration: the JSON schema shared by config files, the
service API, and the benchmark harness.  All units are SI."""

from __future__ import annotations

from pathlib import Path
from typing import List, Literal, Optional, Tuple

import numpy as np
from pydantic import BaseModel, Field, model_validator

from .dynamics import Footprint
from .gridmap import OccupancyGrid, empty_grid, load_grid, parse_grid_text
from .solver import SolverParams, Weights


class GridSpec(BaseModel):
    file: Optional[str] = None
    resolution: Optional[float] = None     # required for PGM files and inline rows
    origin: Tuple[float, float] = (0.0, 0.0)
    rows: Optional[List[str]] = None       # inline 0/1 rows, bottom row first
    empty_size: Optional[Tuple[float, float]] = None   # width, height in meters

    @model_validator(mode="after")
    def _one_source(self):
        if sum(x is not None for x in (self.file, self.rows, self.empty_size)) != 1:
            raise ValueError("grid needs exactly one of file, rows, empty_size")
        return self

    def build(self, base_dir: Optional[Path] = None) -> OccupancyGrid:
        if self.file is not None:
            path = Path(self.file)
            if not path.is_absolute() and base_dir is not None:
                path = base_dir / path
            if not path.exists():
                raise FileNotFoundError(f"grid not found: {path}")
            return load_grid(path, self.resolution, self.origin)
        if self.rows is not None:
            if self.resolution is None:
                raise ValueError("inline grids need a resolution")
            header = (f"resolution {self.resolution}\n"
                      f"origin {self.origin[0]} {self.origin[1]}\n"
                      f"dims {len(self.rows[0])} {len(self.rows)}\n")
            return parse_grid_text(header + "\n".join(self.rows))
        return empty_grid(self.empty_size[0], self.empty_size[1],
                          self.resolution or 0.05, self.origin)


class FootprintSpec(BaseModel):
    discs: List[Tuple[float, float]] = [(0.0, 0.0)]
    r_disc: float = 0.33
    rect_length: Optional[float] = 0.5
    rect_width: Optional[float] = 0.43

    def build(self) -> Footprint:
        return Footprint(self.discs, self.r_disc, self.rect_length, self.rect_width)


class LimitsSpec(BaseModel):
    input_lb: Tuple[float, float] = (0.0, -1.5)
    input_ub: Tuple[float, float] = (1.5, 1.5)
    v_max: float = 1.5


class WeightsSpec(BaseModel):
    contour: float = 5.0
    lag: float = 5.0
    speed: float = 1.0
    repulsive: float = 0.1
    input_first: float = 0.02
    input_second: float = 0.2
    gamma: float = 0.01

    def build(self) -> Weights:
        return Weights(np.diag([self.contour, self.lag]), self.speed,
                       self.repulsive, np.diag([self.input_first, self.input_second]),
                       self.gamma)


class HorizonSpec(BaseModel):
    n_steps: int = 15
    tau: float = 0.2


class SolverSpec(BaseModel):
    max_iterations: int = 10
    kkt_tol: float = 1e-4
    penalty: float = 1e4

    def build(self) -> SolverParams:
        return SolverParams(max_iterations=self.max_iterations,
                            kkt_tol=self.kkt_tol, penalty=self.penalty)


class PedestrianSpec(BaseModel):
    start: Tuple[float, float]
    goal: Tuple[float, float]
    speed: float = 1.2
    a: float = 0.3
    b: float = 0.2
    depart: float = 0.0


class PedestrianSampling(BaseModel):
    """Seeded random walkers: lateral offsets, speeds, and departures are
    drawn uniformly; direction alternates unless the area is a crossing."""

    mode: Literal["corridor", "crossing"] = "corridor"
    count: int = 2
    x_range: Tuple[float, float] = (3.0, 12.0)
    y_range: Tuple[float, float] = (-1.2, 1.2)
    speed_range: Tuple[float, float] = (0.8, 1.3)
    depart_range: Tuple[float, float] = (0.0, 3.0)
    a: float = 0.3
    b: float = 0.2

    def sample(self, rng: np.random.Generator) -> List[PedestrianSpec]:
        peds = []
        for i in range(self.count):
            x = float(rng.uniform(*self.x_range))
            y = float(rng.uniform(*self.y_range))
            speed = float(rng.uniform(*self.speed_range))
            depart = float(rng.uniform(*self.depart_range))
            if self.mode == "corridor":
                heads_left = bool(rng.uniform() < 0.5)
                gx = self.x_range[0] - 1.5 if heads_left else self.x_range[1] + 1.5
                gy = float(rng.uniform(*self.y_range))
                start, goal = (x, y), (gx, gy)
            else:
                gx = float(rng.uniform(*self.x_range))
                y0, y1 = self.y_range
                if bool(rng.uniform() < 0.5):
                    start, goal = (x, y0), (gx, y1)
                else:
                    start, goal = (x, y1), (gx, y0)
            peds.append(PedestrianSpec(start=start, goal=goal, speed=speed,
                                       a=self.a, b=self.b, depart=depart))
        return peds


class SocialSpec(BaseModel):
    relaxation: float = 0.5
    repulsion_gain: float = 2.0
    repulsion_range: float = 0.4
    speed_cap: float = 1.4
    cooperative: bool = True


class TrackerSpec(BaseModel):
    accel_std: float = 0.5
    meas_std: float = 0.05
    detection_noise_std: float = 0.05


class RobotSpec(BaseModel):
    model: Literal["unicycle", "bicycle"] = "unicycle"
    wheelbase: float = 2.7
    start: List[float] = [0.0, 0.0, 0.0]    # x, y, psi (+ v for bicycle)


class ScenarioConfig(BaseModel):
    name: str = "scenario"
    seed: int = 0
    grid: GridSpec
    waypoints: List[Tuple[float, float]]
    v_ref: float = 1.25
    robot: RobotSpec = RobotSpec()
    footprint: FootprintSpec = FootprintSpec()
    limits: LimitsSpec = LimitsSpec()
    weights: WeightsSpec = WeightsSpec()
    horizon: HorizonSpec = HorizonSpec()
    solver: SolverSpec = SolverSpec()
    control_period: float = 0.05
    time_budget: float = 60.0
    goal_tolerance: float = 0.4
    clearance_margin: float = 0.1
    planner: Literal["lmpcc", "dw", "mpc_track"] = "lmpcc"
    pedestrians: List[PedestrianSpec] = []
    pedestrian_sampling: Optional[PedestrianSampling] = None
    social: SocialSpec = SocialSpec()
    tracker: TrackerSpec = TrackerSpec()
    alignment: Literal["minor", "major"] = "minor"

    @model_validator(mode="after")
    def _check(self):
        if len(self.waypoints) < 2:
            raise ValueError("need at least two waypoints")
        if self.control_period <= 0 or self.horizon.tau <= 0:
            raise ValueError("time steps must be positive")
        return self


def load_config(path) -> tuple[ScenarioConfig, Path]:
    """Parse a config file; returns the model and its directory for
    resolving relative grid paths."""
    p = Path(path)
    try:
        text = p.read_text()
    except OSError as exc:
        raise FileNotFoundError(f"config not found: {p}") from exc
    try:
        cfg = ScenarioConfig.model_validate_json(text)
    except ValueError as exc:
        raise ValueError(f"config parse error in {p}: {exc}") from exc
    return cfg, p.parent
