"""Static SVG figures for a finished mission."""
from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .sim import MissionLog, Scenario


def _density_grid(scenario: Scenario, positions: np.ndarray, n: int = 200):
    lo, hi = scenario.umap.bounding_box(3.5)
    lo = np.minimum(lo, positions.min(axis=0) - 1.0)
    hi = np.maximum(hi, positions.max(axis=0) + 1.0)
    xs = np.linspace(lo[0], hi[0], n)
    ys = np.linspace(lo[1], hi[1], n)
    gx, gy = np.meshgrid(xs, ys)
    pts = np.stack([gx.ravel(), gy.ravel()], axis=1)
    return xs, ys, scenario.umap.density(pts).reshape(n, n)


def render_plots(log: MissionLog, scenario: Scenario, out_dir) -> list[Path]:
    """Write the mission figure set as SVG files; returns the paths."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    positions = log.positions()
    velocities = log.velocities()
    times = log.times
    r = scenario.planner.penalty.radius
    written: list[Path] = []

    def save(fig, name):
        path = out_dir / name
        fig.savefig(path, format="svg", bbox_inches="tight")
        plt.close(fig)
        written.append(path)

    xs, ys, dens = _density_grid(scenario, positions)

    fig, ax = plt.subplots(figsize=(5, 5))
    ax.contour(xs, ys, dens, levels=12, cmap="viridis", linewidths=0.8)
    ax.plot(positions[:, 0], positions[:, 1], "k-", lw=1.2)
    ax.plot(*positions[0], "go", ms=6, label="start")
    ax.plot(*positions[-1], "rs", ms=6, label="end")
    ax.set_xlabel("x [m]")
    ax.set_ylabel("y [m]")
    ax.set_title("Trajectory over map level curves")
    ax.legend(loc="best", fontsize=8)
    ax.set_aspect("equal")
    save(fig, "trajectory.svg")

    fig, ax = plt.subplots(figsize=(5, 5))
    stride = max(1, len(positions) // 150)
    for p in positions[::stride]:
        ax.add_patch(plt.Circle(p, r, fill=True, alpha=0.08, color="tab:blue", lw=0))
    ax.plot(positions[:, 0], positions[:, 1], "k-", lw=0.8)
    ax.set_xlabel("x [m]")
    ax.set_ylabel("y [m]")
    ax.set_title("Sensor footprint")
    ax.set_aspect("equal")
    ax.autoscale_view()
    save(fig, "footprint.svg")

    fig, ax = plt.subplots(figsize=(6, 3))
    ax.plot(times, positions[:, 0], label="x")
    ax.plot(times, positions[:, 1], label="y")
    ax.set_xlabel("t [s]")
    ax.set_ylabel("position [m]")
    ax.set_title("Position")
    ax.legend(fontsize=8)
    save(fig, "position.svg")

    fig, ax = plt.subplots(figsize=(6, 3))
    ax.plot(times, velocities[:, 0], label="vx")
    ax.plot(times, velocities[:, 1], label="vy")
    speed = np.linalg.norm(velocities, axis=1)
    ax.plot(times, speed, "k--", lw=0.8, label="speed")
    ax.axhline(scenario.planner.limits.v_max, color="r", lw=0.8, ls=":")
    ax.set_xlabel("t [s]")
    ax.set_ylabel("velocity [m/s]")
    ax.set_title("Velocity")
    ax.legend(fontsize=8)
    save(fig, "velocity.svg")

    fig, ax = plt.subplots(figsize=(6, 3))
    ax.plot(times, log.coverage_series)
    ax.set_xlabel("t [s]")
    ax.set_ylabel("covered volume")
    ax.set_title("Uncertainty reduction")
    save(fig, "coverage.svg")

    fig, ax = plt.subplots(figsize=(6, 3))
    if log.solve_stats:
        steps = [s.step for s in log.solve_stats]
        ms = [1000.0 * s.solve_time for s in log.solve_stats]
        ax.plot(steps, ms, ".-", ms=3)
    ax.set_xlabel("step")
    ax.set_ylabel("solve time [ms]")
    ax.set_title("Computation times")
    save(fig, "solve_times.svg")

    return written
