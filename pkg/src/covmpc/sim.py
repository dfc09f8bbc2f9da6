"""Receding-horizon mission loop.

The simulated plant is exactly the planner's double integrator (no
disturbances, no inner-loop tracking error): at each sampling instant
the current position joins the visited history, a new horizon is solved
every ``n_apply`` steps (warm-started by shifting the previous plan),
and the stored inputs are applied in between.  Solver failures abort
the mission but hand back the partial log.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .coverage import GridSpec, coverage_series, grid_for_mission
from .dynamics import VehicleState, discretize
from .gmm_map import UncertaintyMap
from .planner import HistoryBuffer, Planner, PlannerConfig


@dataclass(frozen=True)
class Scenario:
    """Everything one mission needs: map, start, duration, tunables."""

    umap: UncertaintyMap
    x0: VehicleState
    mission_time: float
    planner: PlannerConfig
    grid_cell_size: float | None = None
    seed: int = 0
    description: str = ""

    def __post_init__(self):
        if self.mission_time < self.planner.Ts:
            raise ValueError(
                f"mission_time {self.mission_time} is shorter than one "
                f"sampling period {self.planner.Ts}"
            )
        speed = float(np.linalg.norm(self.x0.velocity))
        if speed > self.planner.limits.v_max:
            raise ValueError(
                f"initial speed {speed:.6g} exceeds v_max "
                f"{self.planner.limits.v_max:.6g}"
            )
        if self.grid_cell_size is not None and self.grid_cell_size <= 0.0:
            raise ValueError("grid_cell_size must be > 0")

    def cell_size(self) -> float:
        """Metric grid resolution; defaults to a tenth of the disk radius."""
        if self.grid_cell_size is not None:
            return self.grid_cell_size
        return self.planner.penalty.radius / 10.0


@dataclass(frozen=True)
class SolveRecord:
    """Per-solve diagnostics logged at the step the solve happened."""

    step: int
    iterations: int
    kkt_residual: float
    solve_time: float
    flag: str


@dataclass
class MissionLog:
    """Time-indexed mission history.

    ``states`` has one more entry than ``inputs`` (the terminal state);
    coverage_series[k] integrates the density over the union of the
    first k+1 observation disks.
    """

    times: np.ndarray = field(default_factory=lambda: np.empty(0))
    states: list[VehicleState] = field(default_factory=list)
    inputs: np.ndarray = field(default_factory=lambda: np.empty((0, 2)))
    solve_stats: list[SolveRecord] = field(default_factory=list)
    coverage_series: np.ndarray = field(default_factory=lambda: np.empty(0))
    grid: GridSpec | None = None
    seed: int = 0

    def positions(self) -> np.ndarray:
        return np.array([s.position for s in self.states])

    def velocities(self) -> np.ndarray:
        return np.array([s.velocity for s in self.states])


class MissionAbortError(RuntimeError):
    """Solver failure mid-mission; carries the partial log."""

    def __init__(self, message: str, partial_log: MissionLog):
        super().__init__(message)
        self.partial_log = partial_log


def run_mission(scenario: Scenario) -> MissionLog:
    """Execute the receding-horizon loop for the whole mission time.

    Deterministic for a fixed scenario seed (wall-clock solve times in
    the log are the one exception).
    """
    config = scenario.planner
    model = discretize(config.Ts)
    rng = np.random.default_rng(scenario.seed)
    planner = Planner(scenario.umap, config, rng=rng)
    history = HistoryBuffer(config.backward_horizon)

    n_steps = math.ceil(scenario.mission_time / config.Ts)
    state = scenario.x0
    states = [state]
    inputs = np.empty((n_steps, 2))
    solve_stats: list[SolveRecord] = []
    pending: list[np.ndarray] = []

    for k in range(n_steps):
        history.append(state.position)
        if not pending:
            try:
                sol = planner.plan(state, history)
            except Exception as exc:
                partial = _finish_log(
                    scenario, states, inputs[:k], solve_stats, k
                )
                raise MissionAbortError(
                    f"solver failed at step {k}: {exc}", partial
                ) from exc
            pending = [sol.u_seq[i] for i in range(config.n_apply)]
            solve_stats.append(
                SolveRecord(
                    step=k,
                    iterations=sol.iterations,
                    kkt_residual=sol.kkt_residual,
                    solve_time=sol.solve_time,
                    flag=sol.flag,
                )
            )
        u = pending.pop(0)
        inputs[k] = u
        state = model.step(state, u)
        states.append(state)

    return _finish_log(scenario, states, inputs, solve_stats, n_steps)


def _finish_log(scenario, states, inputs, solve_stats, n_steps) -> MissionLog:
    config = scenario.planner
    positions = np.array([s.position for s in states])
    grid = grid_for_mission(
        scenario.umap, positions, config.penalty.radius, scenario.cell_size()
    )
    series = coverage_series(positions, scenario.umap, grid, config.penalty.radius)
    return MissionLog(
        times=np.arange(len(states)) * config.Ts,
        states=list(states),
        inputs=np.array(inputs, dtype=float).reshape(-1, 2),
        solve_stats=list(solve_stats),
        coverage_series=series,
        grid=grid,
        seed=scenario.seed,
    )


@dataclass(frozen=True)
class ReplayReport:
    """Outcome of re-simulating a log from its initial state and inputs."""

    ok: bool
    max_state_error: float
    max_input_violation: float
    max_velocity_violation: float
    messages: tuple[str, ...]


def replay(log: MissionLog, scenario: Scenario, state_tol: float = 1e-9,
           constraint_tol: float = 1e-6) -> ReplayReport:
    """Check that the log is reproducible and constraint-satisfying.

    Re-runs the dynamics from the scenario's initial state under the
    logged inputs and compares against the logged states; also checks
    both norm balls at every step.
    """
    config = scenario.planner
    model = discretize(config.Ts)
    messages: list[str] = []

    state = scenario.x0
    max_err = 0.0
    for k, u in enumerate(log.inputs):
        logged = log.states[k]
        err = max(
            float(np.max(np.abs(state.position - logged.position))),
            float(np.max(np.abs(state.velocity - logged.velocity))),
        )
        max_err = max(max_err, err)
        state = model.step(state, u)
    if log.states:
        final = log.states[-1]
        err = max(
            float(np.max(np.abs(state.position - final.position))),
            float(np.max(np.abs(state.velocity - final.velocity))),
        )
        max_err = max(max_err, err)
    if max_err > state_tol:
        messages.append(f"state mismatch {max_err:.3g} exceeds {state_tol:.1e}")

    a_max = config.limits.a_max
    v_max = config.limits.v_max
    input_viol = 0.0
    if log.inputs.size:
        input_viol = float(np.max(np.linalg.norm(log.inputs, axis=1)) - a_max)
    vel_viol = float(
        np.max([np.linalg.norm(s.velocity) for s in log.states]) - v_max
    )
    if input_viol > constraint_tol:
        messages.append(f"input ball violated by {input_viol:.3g}")
    if vel_viol > constraint_tol:
        messages.append(f"velocity ball violated by {vel_viol:.3g}")

    return ReplayReport(
        ok=not messages,
        max_state_error=max_err,
        max_input_violation=max(input_viol, 0.0),
        max_velocity_violation=max(vel_viol, 0.0),
        messages=tuple(messages),
    )
