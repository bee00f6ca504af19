"""Planning service: geometry queries, single runs, benchmarks, sweeps.

The service wraps the core package; heavy work happens in-process (batch
endpoints fan out to a worker pool).  The CLI drives this app over an
in-process transport by default, or over HTTP against a deployed instance.
"""

from __future__ import annotations

import math
from importlib.metadata import version as pkg_version
from pathlib import Path

import numpy as np
from fastapi import FastAPI, HTTPException

from .. import bench as bench_mod
from ..bounds import BoundSolverError, EllipseShape, minimal_enlargement
from ..scenario import run_scenario
from .schemas import (
    BenchRequest,
    BenchResponse,
    BenchRowModel,
    BoundRequest,
    BoundResponse,
    HealthResponse,
    MetricsModel,
    RunRequest,
    RunResponse,
    SweepCellModel,
    SweepRequest,
    SweepResponse,
)


def _finite(x: float):
    return x if math.isfinite(x) else None


def create_app() -> FastAPI:
    app = FastAPI(title="contourplan", docs_url="/docs")

    @app.get("/health", response_model=HealthResponse)
    def health():
        try:
            ver = pkg_version("contourplan")
        except Exception:
            ver = "unknown"
        return HealthResponse(status="ok", version=ver)

    @app.post("/bound", response_model=BoundResponse)
    def bound(req: BoundRequest):
        if req.b > req.a:
            raise HTTPException(400, detail="require a >= b > 0")
        try:
            res = minimal_enlargement(EllipseShape(req.a, req.b), req.r,
                                      tol=req.tol, method=req.method)
        except (ValueError, BoundSolverError) as exc:
            raise HTTPException(400, detail=str(exc))
        return BoundResponse(delta=res.delta, alpha=res.alpha, beta=res.beta,
                             iterations=res.iterations, method=res.method)

    @app.post("/run", response_model=RunResponse)
    def run(req: RunRequest):
        base = Path(req.config_dir) if req.config_dir else None
        try:
            result = run_scenario(req.config, base)
        except FileNotFoundError as exc:
            raise HTTPException(400, detail=str(exc))
        except ValueError as exc:
            raise HTTPException(400, detail=str(exc))
        m = result.metrics
        ms = np.asarray(m.solve_times) * 1e3
        return RunResponse(
            metrics=MetricsModel(
                outcome=m.outcome, min_clearance=_finite(m.min_clearance),
                mean_clearance=_finite(m.mean_clearance),
                traveled_distance=m.traveled_distance, duration=m.duration,
                braking_cycles=m.braking_cycles, eta_ok=m.eta_ok, cycles=m.cycles,
                solve_ms_median=float(np.median(ms)) if ms.size else 0.0,
                solve_ms_p99=float(np.percentile(ms, 99)) if ms.size else 0.0,
            ),
            trajectory_csv=result.trajectory_csv,
            plot_data=result.plot_data,
            config_echo=result.config_echo,
            solve_times_ms=[float(x) for x in ms],
        )

    @app.post("/bench", response_model=BenchResponse)
    def bench(req: BenchRequest):
        base = Path(req.config_dir) if req.config_dir else None
        try:
            report = bench_mod.run_bench(req.config, req.planners, req.agents,
                                         req.runs, req.seed, base)
        except FileNotFoundError as exc:
            raise HTTPException(400, detail=str(exc))
        except ValueError as exc:
            raise HTTPException(400, detail=str(exc))
        rows = [BenchRowModel(**{
            "planner": r.planner, "agents": r.agents, "runs": r.runs,
            "clearance_mean": _finite(r.clearance_mean),
            "clearance_p1": _finite(r.clearance_p1),
            "failure_pct": r.failure_pct, "collision_pct": r.collision_pct,
            "stuck_pct": r.stuck_pct,
            "distance_mean": _finite(r.distance_mean),
            "distance_std": _finite(r.distance_std),
        }) for r in report.rows]
        return BenchResponse(
            report_csv=bench_mod.report_csv(report),
            report_text=bench_mod.report_text(report),
            rows=rows, solve_stats=report.solve_stats,
            config_echo=report.config_echo,
        )

    @app.post("/sweep", response_model=SweepResponse)
    def sweep(req: SweepRequest):
        base = Path(req.config_dir) if req.config_dir else None
        try:
            cells = bench_mod.run_sweep(req.config, req.v_refs, req.horizons,
                                        req.runs, req.seed, base)
        except FileNotFoundError as exc:
            raise HTTPException(400, detail=str(exc))
        except ValueError as exc:
            raise HTTPException(400, detail=str(exc))
        models = [SweepCellModel(
            horizon_s=c.horizon_s, v_ref=c.v_ref,
            clearance_mean=_finite(c.clearance_mean),
            clearance_p1=_finite(c.clearance_p1),
            success_pct=c.success_pct,
            solve_median_ms=_finite(c.solve_median_ms),
            solve_p25_ms=_finite(c.solve_p25_ms),
            solve_p75_ms=_finite(c.solve_p75_ms),
            solve_p99_ms=_finite(c.solve_p99_ms),
            reference_clearance=c.reference_clearance,
        ) for c in cells]
        return SweepResponse(csv=bench_mod.sweep_csv(cells),
                             text=bench_mod.sweep_text(cells),
                             cells=models,
                             config_echo=req.config.model_dump(mode="json"))

    return app


app = create_app()
