"""Command-line client for the planning service.

By default commands drive the service in-process (no daemon required); pass
--server to target a running instance instead.  Batch work happens service
side; artifacts are written locally from the response payloads.

Exit codes: 0 success, 1 planner failure in single-run mode, 2 usage or I/O
errors.
"""

from __future__ import annotations

import json
import sys
from pathlib import Path

import click

from .config import load_config
from .scenarios import available, scenario_path

USAGE_ERROR = 2
PLANNER_FAILURE = 1


def _client(server: str | None):
    if server:
        import httpx
        return httpx.Client(base_url=server, timeout=None)
    import warnings
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", DeprecationWarning)
        from starlette.testclient import TestClient

        from .service.app import create_app
        return TestClient(create_app(), raise_server_exceptions=False)


def _post(client, path, payload):
    resp = client.post(path, json=payload)
    if resp.status_code != 200:
        try:
            detail = resp.json().get("detail", resp.text)
        except Exception:
            detail = resp.text
        click.echo(f"error: {detail}", err=True)
        sys.exit(USAGE_ERROR)
    return resp.json()


def _load(config: str):
    path = Path(config)
    if not path.exists() and config in available():
        path = scenario_path(config)
    try:
        cfg, base = load_config(path)
    except (FileNotFoundError, ValueError) as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(USAGE_ERROR)
    return cfg, base


def _apply_overrides(cfg, seed, planner, agents, v_ref, horizon):
    update = {}
    if seed is not None:
        update["seed"] = seed
    if planner is not None:
        update["planner"] = planner
    if v_ref is not None:
        update["v_ref"] = v_ref
    if horizon is not None:
        n_steps = max(int(round(horizon / cfg.horizon.tau)), 1)
        update["horizon"] = cfg.horizon.model_copy(update={"n_steps": n_steps})
    if agents is not None:
        if cfg.pedestrian_sampling is None:
            click.echo("error: --agents needs a config with pedestrian_sampling",
                       err=True)
            sys.exit(USAGE_ERROR)
        update["pedestrian_sampling"] = cfg.pedestrian_sampling.model_copy(
            update={"count": agents})
    return cfg.model_copy(update=update)


def _write(out_dir: Path, name: str, content: str):
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / name).write_text(content)


@click.group()
@click.option("--server", default=None, metavar="URL",
              help="Target a running service instead of in-process execution.")
@click.pass_context
def main(ctx, server):
    """Contouring-control planner: runs, benchmarks, sweeps, geometry."""
    ctx.obj = {"server": server}


@main.command()
@click.option("--a", "a", type=float, required=True, help="Semi-major axis [m].")
@click.option("--b", "b", type=float, required=True, help="Semi-minor axis [m].")
@click.option("--r", "r", type=float, required=True, help="Disc radius [m].")
@click.option("--tol", type=float, default=1e-9, show_default=True)
@click.option("--method", type=click.Choice(["bisection", "closed_root"]),
              default="bisection", show_default=True)
@click.pass_context
def bound(ctx, a, b, r, tol, method):
    """Minimal ellipse enlargement containing the ellipse-disc sum."""
    with _client(ctx.obj["server"]) as client:
        data = _post(client, "/bound", {"a": a, "b": b, "r": r,
                                        "tol": tol, "method": method})
    click.echo(f"delta {data['delta']:.9f}")
    click.echo(f"alpha {data['alpha']:.9f}")
    click.echo(f"beta {data['beta']:.9f}")


@main.command()
@click.option("--config", required=True,
              help="Config path or packaged name (straight, figure8, corridor, corridor_blocked).")
@click.option("--seed", type=int, default=None)
@click.option("--planner", type=click.Choice(["lmpcc", "dw", "mpc_track"]), default=None)
@click.option("--agents", type=int, default=None)
@click.option("--v-ref", type=float, default=None)
@click.option("--horizon", type=float, default=None, help="Horizon length [s].")
@click.option("--out-dir", default="out", show_default=True)
@click.pass_context
def run(ctx, config, seed, planner, agents, v_ref, horizon, out_dir):
    """Run one scenario; writes trajectory.csv, metrics.json, plot.dat."""
    cfg, base = _load(config)
    cfg = _apply_overrides(cfg, seed, planner, agents, v_ref, horizon)
    with _client(ctx.obj["server"]) as client:
        data = _post(client, "/run", {"config": cfg.model_dump(mode="json"),
                                      "config_dir": str(base)})
    out = Path(out_dir)
    _write(out, "trajectory.csv", data["trajectory_csv"])
    _write(out, "plot.dat", data["plot_data"])
    metrics = dict(data["metrics"])
    metrics["config"] = data["config_echo"]
    metrics["solve_times_ms"] = data["solve_times_ms"]
    _write(out, "metrics.json", json.dumps(metrics, indent=2) + "\n")
    m = data["metrics"]
    clr = "n/a" if m["min_clearance"] is None else f"{m['min_clearance']:.3f} m"
    click.echo(f"outcome {m['outcome']}  traveled {m['traveled_distance']:.2f} m  "
               f"duration {m['duration']:.2f} s  min clearance {clr}")
    if m["outcome"] != "success":
        sys.exit(PLANNER_FAILURE)


@main.command()
@click.option("--config", required=True)
@click.option("--planners", default="lmpcc", show_default=True,
              help="Comma-separated subset of lmpcc,dw,mpc_track.")
@click.option("--agents", default="2", show_default=True,
              help="Comma-separated pedestrian counts.")
@click.option("--runs", type=int, default=1, show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--out-dir", default="out", show_default=True)
@click.pass_context
def bench(ctx, config, planners, agents, runs, seed, out_dir):
    """Seeded batch benchmark; writes report.csv/report.txt/bench.json
    (deterministic) plus timings.json (wall clock)."""
    cfg, base = _load(config)
    planner_list = [p.strip() for p in planners.split(",") if p.strip()]
    agent_list = [int(x) for x in agents.split(",") if x.strip()]
    with _client(ctx.obj["server"]) as client:
        data = _post(client, "/bench", {
            "config": cfg.model_dump(mode="json"), "config_dir": str(base),
            "planners": planner_list, "agents": agent_list,
            "runs": runs, "seed": seed})
    out = Path(out_dir)
    _write(out, "report.csv", data["report_csv"])
    _write(out, "report.txt", data["report_text"])
    _write(out, "bench.json", json.dumps(
        {"rows": data["rows"], "config": data["config_echo"],
         "seed": seed, "runs": runs}, indent=2) + "\n")
    _write(out, "timings.json", json.dumps(data["solve_stats"], indent=2) + "\n")
    click.echo(data["report_text"], nl=False)


@main.command()
@click.option("--config", required=True)
@click.option("--v-refs", default="1.0,1.25,1.5", show_default=True)
@click.option("--horizons", default="1.0,3.0,5.0", show_default=True,
              help="Horizon lengths [s].")
@click.option("--runs", type=int, default=3, show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--out-dir", default="out", show_default=True)
@click.pass_context
def sweep(ctx, config, v_refs, horizons, runs, seed, out_dir):
    """Speed/horizon parameter sweep; writes sweep.csv/sweep.txt/sweep.json."""
    cfg, base = _load(config)
    v_list = [float(x) for x in v_refs.split(",") if x.strip()]
    h_list = [float(x) for x in horizons.split(",") if x.strip()]
    with _client(ctx.obj["server"]) as client:
        data = _post(client, "/sweep", {
            "config": cfg.model_dump(mode="json"), "config_dir": str(base),
            "v_refs": v_list, "horizons": h_list, "runs": runs, "seed": seed})
    out = Path(out_dir)
    _write(out, "sweep.csv", data["csv"])
    _write(out, "sweep.txt", data["text"])
    _write(out, "sweep.json", json.dumps(
        {"cells": data["cells"], "config": data["config_echo"],
         "seed": seed, "runs": runs}, indent=2) + "\n")
    click.echo(data["text"], nl=False)


@main.command()
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--port", type=int, default=8080, show_default=True)
def serve(host, port):
    """Run the planning service with uvicorn."""
    import uvicorn

    from .service.app import app
    uvicorn.run(app, host=host, port=port)


if __name__ == "__main__":
    main()
