"""Coverage trajectory planning over Gaussian-mixture uncertainty maps.

A receding-horizon planner steers a planar double-integrator vehicle so
that its circular observation footprint swallows as much of the map's
uncertainty volume as possible, while exponential penalties between
observation disks keep it from re-covering ground.  The package also
ships the grid-based coverage metric, a mission simulator, and a CLI
for scenario files.
"""
from .coverage import CoverageMask, GridSpec, coverage_series, coverage_volume, stamp_disk
from .dynamics import DiscreteModel, InputLimits, VehicleState, discretize
from .gmm_map import GaussianComponent, InvalidMapError, UncertaintyMap, validate
from .penalty import PenaltyParams, lens_overlap_area, pair_penalty, pair_penalty_grad
from .planner import (
    HistoryBuffer,
    HorizonSolution,
    InfeasibleStateError,
    Planner,
    PlannerConfig,
    SolverDivergenceError,
    SolverSettings,
    backward_penalty,
    horizon_penalty,
    objective,
    objective_gradient,
    shift_warm_start,
    solve,
    stage_reward,
)
from .scenario_io import ScenarioError, load_scenario, scenario_from_dict, write_scenario
from .sim import MissionAbortError, MissionLog, ReplayReport, Scenario, replay, run_mission

__all__ = [
    "CoverageMask",
    "DiscreteModel",
    "GaussianComponent",
    "GridSpec",
    "HistoryBuffer",
    "HorizonSolution",
    "InfeasibleStateError",
    "InputLimits",
    "InvalidMapError",
    "MissionAbortError",
    "MissionLog",
    "Planner",
    "PlannerConfig",
    "PenaltyParams",
    "ReplayReport",
    "Scenario",
    "ScenarioError",
    "SolverDivergenceError",
    "SolverSettings",
    "UncertaintyMap",
    "VehicleState",
    "backward_penalty",
    "coverage_series",
    "coverage_volume",
    "discretize",
    "horizon_penalty",
    "lens_overlap_area",
    "load_scenario",
    "objective",
    "objective_gradient",
    "pair_penalty",
    "pair_penalty_grad",
    "replay",
    "run_mission",
    "scenario_from_dict",
    "shift_warm_start",
    "solve",
    "stage_reward",
    "stamp_disk",
    "validate",
    "write_scenario",
]

__version__ = "0.1.0"
