"""Request/response models for the planning service."""

from __future__ import annotations

from typing import Dict, List, Literal, Optional, Tuple

from pydantic import BaseModel, Field

from ..config import ScenarioConfig


class HealthResponse(BaseModel):
    status: str
    version: str


class BoundRequest(BaseModel):
    a: float = Field(gt=0)
    b: float = Field(gt=0)
    r: float = Field(ge=0)
    tol: float = 1e-9
    method: Literal["bisection", "closed_root"] = "bisection"


class BoundResponse(BaseModel):
    delta: float
    alpha: float
    beta: float
    iterations: int
    method: str


class RunRequest(BaseModel):
    config: ScenarioConfig
    config_dir: Optional[str] = None   # resolves relative grid paths


class MetricsModel(BaseModel):
    outcome: str
    min_clearance: Optional[float] = None    # None without obstacles
    mean_clearance: Optional[float] = None
    traveled_distance: float
    duration: float
    braking_cycles: int
    eta_ok: bool
    cycles: int
    solve_ms_median: float
    solve_ms_p99: float


class RunResponse(BaseModel):
    metrics: MetricsModel
    trajectory_csv: str
    plot_data: str
    config_echo: dict
    solve_times_ms: List[float]


class BenchRequest(BaseModel):
    config: ScenarioConfig
    config_dir: Optional[str] = None
    planners: List[Literal["lmpcc", "dw", "mpc_track"]] = ["lmpcc"]
    agents: List[int] = [2]
    runs: int = Field(default=1, ge=1)
    seed: int = 0


class BenchRowModel(BaseModel):
    planner: str
    agents: int
    runs: int
    clearance_mean: Optional[float] = None   # None when no run succeeded
    clearance_p1: Optional[float] = None
    failure_pct: float
    collision_pct: float
    stuck_pct: float
    distance_mean: Optional[float] = None
    distance_std: Optional[float] = None


class BenchResponse(BaseModel):
    report_csv: str
    report_text: str
    rows: List[BenchRowModel]
    solve_stats: Dict[str, dict]
    config_echo: dict


class SweepRequest(BaseModel):
    config: ScenarioConfig
    config_dir: Optional[str] = None
    v_refs: List[float] = [1.0, 1.25, 1.5]
    horizons: List[float] = [1.0, 3.0, 5.0]
    runs: int = Field(default=3, ge=1)
    seed: int = 0


class SweepCellModel(BaseModel):
    horizon_s: float
    v_ref: float
    clearance_mean: Optional[float] = None
    clearance_p1: Optional[float] = None
    success_pct: float
    solve_median_ms: Optional[float] = None
    solve_p25_ms: Optional[float] = None
    solve_p75_ms: Optional[float] = None
    solve_p99_ms: Optional[float] = None
    reference_clearance: Optional[Tuple[float, float]] = None


class SweepResponse(BaseModel):
    csv: str
    text: str
    cells: List[SweepCellModel]
    config_echo: dict
