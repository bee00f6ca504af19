"""Seeded batch benchmarks, parameter sweeps, and report shaping.

Reports separate deterministic content (outcome statistics shaped like the
published comparison table) from wall-clock solve-time statistics, which are
emitted as a sidecar so identical seeds produce byte-identical reports.
"""

from __future__ import annotations

import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .config import ScenarioConfig
from .scenario import run_scenario

# full-scale hardware reference: clearance mean (1st percentile) per
# (horizon s, v_ref m/s) cell, kept in sweep reports for comparison
REFERENCE_CLEARANCE = {
    (1.0, 1.0): (1.54, 0.077), (1.0, 1.25): (1.60, 0.025), (1.0, 1.5): (1.69, 0.003),
    (3.0, 1.0): (1.66, 0.077), (3.0, 1.25): (1.69, 0.072), (3.0, 1.5): (1.82, 0.065),
    (5.0, 1.0): (1.69, 0.062), (5.0, 1.25): (1.68, 0.055), (5.0, 1.5): (1.92, 0.043),
}


def worker_count() -> int:
    env = os.environ.get("CONTOUR_THREADS")
    if env:
        return max(int(env), 1)
    return max(os.cpu_count() or 1, 1)


@dataclass
class BenchRow:
    planner: str
    agents: int
    runs: int
    clearance_mean: float        # over successful runs
    clearance_p1: float          # 1st percentile of per-run minima
    failure_pct: float
    collision_pct: float
    stuck_pct: float
    distance_mean: float         # over successful runs
    distance_std: float


@dataclass
class BenchReport:
    rows: list = field(default_factory=list)
    solve_stats: dict = field(default_factory=dict)   # per planner, wall-clock
    config_echo: dict = field(default_factory=dict)


def _run_one(payload):
    cfg_json, base_dir, planner, agents, seed = payload
    cfg = ScenarioConfig.model_validate_json(cfg_json)
    update = {"planner": planner, "seed": seed}
    if cfg.pedestrian_sampling is not None:
        update["pedestrian_sampling"] = cfg.pedestrian_sampling.model_copy(
            update={"count": agents})
    cfg = cfg.model_copy(update=update)
    try:
        result = run_scenario(cfg, base_dir)
    except Exception as exc:   # a crashed run scores as a failure
        return {"outcome": "crash", "error": str(exc), "min_clearance": 0.0,
                "traveled": 0.0, "solve_times": []}
    m = result.metrics
    return {"outcome": m.outcome, "min_clearance": m.min_clearance,
            "traveled": m.traveled_distance, "solve_times": m.solve_times}


def _aggregate(planner, agents, outcomes):
    runs = len(outcomes)
    succ = [o for o in outcomes if o["outcome"] == "success"]
    collided = sum(1 for o in outcomes if o["outcome"] in ("collision", "crash"))
    stuck = sum(1 for o in outcomes if o["outcome"] == "stuck")
    minima = [o["min_clearance"] for o in succ if np.isfinite(o["min_clearance"])]
    dists = [o["traveled"] for o in succ]
    return BenchRow(
        planner=planner, agents=agents, runs=runs,
        clearance_mean=float(np.mean(minima)) if minima else float("nan"),
        clearance_p1=float(np.percentile(minima, 1)) if minima else float("nan"),
        failure_pct=100.0 * (collided + stuck) / runs,
        collision_pct=100.0 * collided / runs,
        stuck_pct=100.0 * stuck / runs,
        distance_mean=float(np.mean(dists)) if dists else float("nan"),
        distance_std=float(np.std(dists)) if dists else float("nan"),
    )


def run_bench(cfg: ScenarioConfig, planners, agent_counts, runs: int, seed: int,
              base_dir=None, max_workers: int = None) -> BenchReport:
    """Batch benchmark: `runs` seeded scenarios per (planner, agents) cell.

    Scenario draws depend only on (seed, agents, run index), so every planner
    faces the identical pedestrian layouts; outcomes are aggregated in a
    fixed order regardless of worker scheduling.
    """
    if runs < 1:
        raise ValueError("runs must be >= 1")
    cfg_json = cfg.model_dump_json()
    jobs = []
    for planner in planners:
        for agents in agent_counts:
            for r in range(runs):
                run_seed = int(np.random.SeedSequence(
                    entropy=(seed, agents, r)).generate_state(1)[0])
                jobs.append((cfg_json, base_dir, planner, agents, run_seed))
    workers = max_workers or worker_count()
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            outcomes = list(pool.map(_run_one, jobs, chunksize=1))
    else:
        outcomes = [_run_one(j) for j in jobs]

    report = BenchReport(config_echo=cfg.model_dump(mode="json"))
    idx = 0
    per_planner_times = {p: [] for p in planners}
    for planner in planners:
        for agents in agent_counts:
            cell = outcomes[idx:idx + runs]
            idx += runs
            report.rows.append(_aggregate(planner, agents, cell))
            for o in cell:
                per_planner_times[planner].extend(o["solve_times"])
    for planner, times in per_planner_times.items():
        if times:
            ms = np.asarray(times) * 1e3
            report.solve_stats[planner] = {
                "median_ms": float(np.median(ms)),
                "p25_ms": float(np.percentile(ms, 25)),
                "p75_ms": float(np.percentile(ms, 75)),
                "p99_ms": float(np.percentile(ms, 99)),
                "max_ms": float(np.max(ms)),
                "samples": int(ms.size),
            }
    return report


def report_csv(report: BenchReport) -> str:
    lines = ["planner,agents,runs,clearance_mean,clearance_p1,"
             "failure_pct,collision_pct,stuck_pct,distance_mean,distance_std"]
    for r in report.rows:
        lines.append(",".join([
            r.planner, str(r.agents), str(r.runs),
            format(r.clearance_mean, ".4f"), format(r.clearance_p1, ".4f"),
            format(r.failure_pct, ".2f"), format(r.collision_pct, ".2f"),
            format(r.stuck_pct, ".2f"),
            format(r.distance_mean, ".3f"), format(r.distance_std, ".3f")]))
    return "\n".join(lines) + "\n"


def report_text(report: BenchReport) -> str:
    head = (f"{'planner':10s} {'agents':>6s} {'clearance mean (p1) [m]':>24s} "
            f"{'failures % (col/stuck)':>24s} {'distance mean (std) [m]':>24s}")
    lines = [head, "-" * len(head)]
    for r in report.rows:
        lines.append(
            f"{r.planner:10s} {r.agents:6d} "
            f"{r.clearance_mean:10.2f} ({r.clearance_p1:.3f})"
            f"{'':>4s}{r.failure_pct:8.0f} ({r.collision_pct:.0f} / {r.stuck_pct:.0f})"
            f"{'':>6s}{r.distance_mean:8.2f} ({r.distance_std:.2f})")
    return "\n".join(lines) + "\n"


@dataclass
class SweepCell:
    horizon_s: float
    v_ref: float
    clearance_mean: float
    clearance_p1: float
    success_pct: float
    solve_median_ms: float
    solve_p25_ms: float
    solve_p75_ms: float
    solve_p99_ms: float
    reference_clearance: tuple = None


def run_sweep(cfg: ScenarioConfig, v_refs, horizons_s, runs: int, seed: int,
              base_dir=None, max_workers: int = None):
    """Clearance/solve-time matrix over reference speeds and horizon lengths."""
    if not v_refs or not horizons_s:
        raise ValueError("sweep lists must be nonempty")
    cells = []
    for horizon in horizons_s:
        n_steps = max(int(round(horizon / cfg.horizon.tau)), 1)
        for v_ref in v_refs:
            sub = cfg.model_copy(update={
                "v_ref": v_ref,
                "horizon": cfg.horizon.model_copy(update={"n_steps": n_steps}),
            })
            report = run_bench(sub, [cfg.planner], [
                cfg.pedestrian_sampling.count if cfg.pedestrian_sampling else 0],
                runs, seed, base_dir, max_workers)
            row = report.rows[0]
            stats = report.solve_stats.get(cfg.planner, {})
            cells.append(SweepCell(
                horizon_s=horizon, v_ref=v_ref,
                clearance_mean=row.clearance_mean, clearance_p1=row.clearance_p1,
                success_pct=100.0 - row.failure_pct,
                solve_median_ms=stats.get("median_ms", float("nan")),
                solve_p25_ms=stats.get("p25_ms", float("nan")),
                solve_p75_ms=stats.get("p75_ms", float("nan")),
                solve_p99_ms=stats.get("p99_ms", float("nan")),
                reference_clearance=REFERENCE_CLEARANCE.get((horizon, v_ref)),
            ))
    return cells


def sweep_csv(cells) -> str:
    lines = ["horizon_s,v_ref,clearance_mean,clearance_p1,success_pct,"
             "solve_median_ms,solve_p25_ms,solve_p75_ms,solve_p99_ms,"
             "reference_mean,reference_p1"]
    for c in cells:
        ref = c.reference_clearance or (float("nan"), float("nan"))
        lines.append(",".join([
            format(c.horizon_s, ".3g"), format(c.v_ref, ".3g"),
            format(c.clearance_mean, ".4f"), format(c.clearance_p1, ".4f"),
            format(c.success_pct, ".1f"),
            format(c.solve_median_ms, ".2f"), format(c.solve_p25_ms, ".2f"),
            format(c.solve_p75_ms, ".2f"), format(c.solve_p99_ms, ".2f"),
            format(ref[0], ".2f"), format(ref[1], ".3f")]))
    return "\n".join(lines) + "\n"


def sweep_text(cells) -> str:
    head = (f"{'T [s]':>6s} {'v_ref':>6s} {'clearance mean (p1)':>20s} "
            f"{'reference':>14s} {'solve ms med [q1 q3 p99]':>26s}")
    lines = [head, "-" * len(head)]
    for c in cells:
        ref = (f"{c.reference_clearance[0]:.2f} ({c.reference_clearance[1]:.3f})"
               if c.reference_clearance else "-")
        lines.append(
            f"{c.horizon_s:6.1f} {c.v_ref:6.2f} "
            f"{c.clearance_mean:10.2f} ({c.clearance_p1:.3f}) {ref:>14s} "
            f"{c.solve_median_ms:8.1f} [{c.solve_p25_ms:.1f} {c.solve_p75_ms:.1f} "
            f"{c.solve_p99_ms:.1f}]")
    return "\n".join(lines) + "\n"
