"""Command-line mission runner and result export.

``covmpc run scenario.json --out results`` executes the mission and
writes the result bundle: trajectory/coverage/solver CSV tables, a
summary JSON recomputable from those tables, and (unless --no-plots)
the SVG figure set.  ``--batch DIR`` runs every ``*.json`` scenario in
a directory and adds an aggregate timing table.

Outputs are deterministic for a fixed seed, except the wall-clock
solve-time columns.
"""
from __future__ import annotations

import argparse
import json
import sys
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from .scenario_io import ScenarioError, load_scenario
from .sim import MissionAbortError, MissionLog, Scenario, run_mission


def _fmt(x: float) -> str:
    return format(float(x), ".17g")


@dataclass(frozen=True)
class ResultBundle:
    """Paths and summary of one exported mission."""

    out_dir: Path
    summary: dict
    tables: tuple[Path, ...]
    plot_files: tuple[Path, ...]


def write_tables(log: MissionLog, scenario: Scenario, out_dir: Path) -> list[Path]:
    """Write trajectory.csv, coverage.csv, and solver.csv."""
    out_dir.mkdir(parents=True, exist_ok=True)
    positions = log.positions()
    velocities = log.velocities()
    n_states = len(log.states)

    traj = out_dir / "trajectory.csv"
    with traj.open("w") as f:
        f.write("t,x,y,vx,vy,ux,uy\n")
        for k in range(n_states):
            u = log.inputs[k] if k < log.inputs.shape[0] else (0.0, 0.0)
            f.write(
                ",".join(
                    _fmt(v)
                    for v in (
                        log.times[k], positions[k, 0], positions[k, 1],
                        velocities[k, 0], velocities[k, 1], u[0], u[1],
                    )
                )
                + "\n"
            )

    cov = out_dir / "coverage.csv"
    with cov.open("w") as f:
        f.write("t,H\n")
        for k in range(n_states):
            f.write(f"{_fmt(log.times[k])},{_fmt(log.coverage_series[k])}\n")

    solver = out_dir / "solver.csv"
    with solver.open("w") as f:
        f.write("k,iterations,kkt_residual,solve_ms,flag\n")
        for rec in log.solve_stats:
            f.write(
                f"{rec.step},{rec.iterations},{_fmt(rec.kkt_residual)},"
                f"{_fmt(1000.0 * rec.solve_time)},{rec.flag}\n"
            )
    return [traj, cov, solver]


def summarize(log: MissionLog, scenario: Scenario) -> dict:
    """Summary statistics; every value is recomputable from the tables."""
    velocities = log.velocities()
    v_max = scenario.planner.limits.v_max
    a_max = scenario.planner.limits.a_max
    vel_viol = float(np.max(np.linalg.norm(velocities, axis=1)) - v_max)
    in_viol = (
        float(np.max(np.linalg.norm(log.inputs, axis=1)) - a_max)
        if log.inputs.size
        else 0.0
    )
    solve_ms = [1000.0 * rec.solve_time for rec in log.solve_stats]
    return {
        "final_coverage": float(log.coverage_series[-1]),
        "mean_solve_ms": float(np.mean(solve_ms)) if solve_ms else 0.0,
        "max_solve_ms": float(np.max(solve_ms)) if solve_ms else 0.0,
        "constraint_max_violation": max(vel_viol, in_viol, 0.0),
        "n_steps": int(log.inputs.shape[0]),
        "n_solves": len(log.solve_stats),
        "seed": int(log.seed),
    }


def run_bundle(scenario: Scenario, out_dir, make_plots: bool = True) -> ResultBundle:
    """Run one mission and export its result bundle."""
    out_dir = Path(out_dir)
    log = run_mission(scenario)
    tables = write_tables(log, scenario, out_dir)
    summary = summarize(log, scenario)
    (out_dir / "summary.json").write_text(json.dumps(summary, indent=2) + "\n")
    plot_files: list[Path] = []
    if make_plots:
        from .plots import render_plots

        plot_files = render_plots(log, scenario, out_dir)
    return ResultBundle(
        out_dir=out_dir,
        summary=summary,
        tables=tuple(tables),
        plot_files=tuple(plot_files),
    )


def _apply_overrides(scenario: Scenario, args) -> Scenario:
    if args.seed is not None:
        scenario = replace(scenario, seed=args.seed)
    if args.grid_cell is not None:
        scenario = replace(scenario, grid_cell_size=args.grid_cell)
    return scenario


def _run_single(path: Path, out_dir: Path, args) -> int:
    try:
        scenario = load_scenario(path)
    except ScenarioError as exc:
        print(f"error: {path}: {exc}", file=sys.stderr)
        return 1
    scenario = _apply_overrides(scenario, args)
    try:
        bundle = run_bundle(scenario, out_dir, make_plots=not args.no_plots)
    except MissionAbortError as exc:
        print(f"error: mission aborted: {exc}", file=sys.stderr)
        return 2
    print(
        f"{path.name}: final coverage {bundle.summary['final_coverage']:.6f}, "
        f"{bundle.summary['n_solves']} solves, "
        f"mean {bundle.summary['mean_solve_ms']:.2f} ms -> {bundle.out_dir}"
    )
    return 0


def _run_batch(batch_dir: Path, out_dir: Path, args) -> int:
    files = sorted(batch_dir.glob("*.json"))
    if not files:
        print(f"error: no scenario files in {batch_dir}", file=sys.stderr)
        return 1
    rows = []
    worst = 0
    for path in files:
        code = _run_single(path, out_dir / path.stem, args)
        worst = max(worst, code)
        if code == 0:
            summary = json.loads((out_dir / path.stem / "summary.json").read_text())
            rows.append((path.stem, summary))
    out_dir.mkdir(parents=True, exist_ok=True)
    with (out_dir / "timing.csv").open("w") as f:
        f.write("scenario,n_solves,mean_solve_ms,max_solve_ms,final_coverage\n")
        for name, s in rows:
            f.write(
                f"{name},{s['n_solves']},{_fmt(s['mean_solve_ms'])},"
                f"{_fmt(s['max_solve_ms'])},{_fmt(s['final_coverage'])}\n"
            )
    return worst


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="covmpc", description="Coverage trajectory planner"
    )
    sub = parser.add_subparsers(dest="command", required=True)
    run_p = sub.add_parser("run", help="run a scenario (or a directory of them)")
    run_p.add_argument("scenario", nargs="?", type=Path,
                       help="scenario JSON file (omit when using --batch)")
    run_p.add_argument("--out", type=Path, default=Path("out"),
                       help="output directory (default: ./out)")
    run_p.add_argument("--seed", type=int, default=None,
                       help="override the scenario seed")
    run_p.add_argument("--no-plots", action="store_true",
                       help="write tables only, skip SVG figures")
    run_p.add_argument("--batch", type=Path, default=None,
                       help="run every *.json scenario in this directory")
    run_p.add_argument("--grid-cell", type=float, default=None,
                       help="override the metric grid cell size")
    args = parser.parse_args(argv)

    if args.command == "run":
        if args.batch is not None:
            return _run_batch(args.batch, args.out, args)
        if args.scenario is None:
            run_p.error("a scenario file or --batch DIR is required")
        return _run_single(args.scenario, args.out, args)
    return 1


if __name__ == "__main__":
    sys.exit(main())
