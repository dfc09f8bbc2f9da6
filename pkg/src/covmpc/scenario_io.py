"""Scenario files: strict JSON loading, validation, and round-tripping.

A scenario file fully describes one mission.  Unknown keys are
rejected and every validation error names the offending field path so
bad files fail loudly and precisely.  Missing optional fields take the
documented defaults (see DEFAULTS below and the README schema table).
"""
from __future__ import annotations

import json
import re
from pathlib import Path

import numpy as np

from .dynamics import InputLimits, VehicleState
from .gmm_map import GaussianComponent, InvalidMapError, UncertaintyMap, validate
from .penalty import PenaltyParams
from .planner import PlannerConfig, SolverSettings
from .sim import Scenario

SCHEMA_VERSION = 1

DEFAULTS = {
    "x0.pos": (1.0, 1.0),
    "x0.vel": (0.0, 0.0),
    "mission_time": 30.0,
    "planner.N": 15,
    "planner.N_B": None,
    "planner.lambda": 1.0 / 7000.0,
    "planner.alpha": 0.4,
    "planner.radius": 1.0,
    "planner.Ts": 0.1,
    "planner.n_apply": 1,
    "planner.v_max": 4.0,
    "planner.a_max": 4.0,
    "planner.stage_reward_mode": "approx",
    "seed": 0,
}

_QUADRATURE_RE = re.compile(r"^quadrature\((\d+)\)$")


class ScenarioError(ValueError):
    """Scenario file failed to parse or validate; message names the field."""


def _check_keys(obj: dict, path: str, allowed: set[str]) -> None:
    unknown = set(obj) - allowed
    if unknown:
        name = sorted(unknown)[0]
        where = f"{path}.{name}" if path else name
        raise ScenarioError(f"{where}: unknown field")


def _require(obj: dict, key: str, path: str):
    if key not in obj:
        where = f"{path}.{key}" if path else key
        raise ScenarioError(f"{where}: missing required field")
    return obj[key]


def _number(value, where: str, minimum=None, strict_min=None) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ScenarioError(f"{where}: expected a number, got {value!r}")
    value = float(value)
    if strict_min is not None and value <= strict_min:
        raise ScenarioError(f"{where}: must be > {strict_min}, got {value}")
    if minimum is not None and value < minimum:
        raise ScenarioError(f"{where}: must be >= {minimum}, got {value}")
    return value


def _integer(value, where: str, minimum=None) -> int:
    if isinstance(value, bool) or not isinstance(value, int):
        raise ScenarioError(f"{where}: expected an integer, got {value!r}")
    if minimum is not None and value < minimum:
        raise ScenarioError(f"{where}: must be >= {minimum}, got {value}")
    return int(value)


def _vector2(value, where: str) -> np.ndarray:
    if (
        not isinstance(value, (list, tuple))
        or len(value) != 2
        or any(isinstance(v, bool) or not isinstance(v, (int, float)) for v in value)
    ):
        raise ScenarioError(f"{where}: expected a pair of numbers, got {value!r}")
    return np.asarray(value, dtype=float)


def _parse_map(obj, path: str = "map") -> UncertaintyMap:
    if not isinstance(obj, dict):
        raise ScenarioError(f"{path}: expected an object")
    _check_keys(obj, path, {"components", "normalize"})
    comps = _require(obj, "components", path)
    if not isinstance(comps, list) or not comps:
        raise ScenarioError(f"{path}.components: expected a non-empty array")
    entries = []
    for i, comp in enumerate(comps):
        where = f"{path}.components[{i}]"
        if not isinstance(comp, dict):
            raise ScenarioError(f"{where}: expected an object")
        _check_keys(comp, where, {"weight", "mean", "cov"})
        weight = _require(comp, "weight", where)
        mean = _vector2(_require(comp, "mean", where), f"{where}.mean")
        cov = _require(comp, "cov", where)
        if (
            not isinstance(cov, list)
            or len(cov) != 2
            or any(not isinstance(row, list) or len(row) != 2 for row in cov)
        ):
            raise ScenarioError(f"{where}.cov: expected a 2x2 matrix")
        entries.append((weight, mean, np.asarray(cov, dtype=float)))
    violations = validate(entries)
    if violations:
        raise ScenarioError(f"{path}.{violations[0]}")
    umap = UncertaintyMap(
        GaussianComponent(float(w), m, c) for w, m, c in entries
    )
    normalize = obj.get("normalize", False)
    if not isinstance(normalize, bool):
        raise ScenarioError(f"{path}.normalize: expected true or false")
    return umap.normalized() if normalize else umap


def _parse_stage_mode(value, where: str) -> tuple[str, int]:
    if value == "approx":
        return "approx", 8
    if isinstance(value, str):
        m = _QUADRATURE_RE.match(value)
        if m:
            order = int(m.group(1))
            if order < 1:
                raise ScenarioError(f"{where}: quadrature order must be >= 1")
            return "quadrature", order
    raise ScenarioError(
        f"{where}: expected 'approx' or 'quadrature(<order>)', got {value!r}"
    )


def _parse_solver(obj, path: str = "planner.solver") -> SolverSettings:
    if not isinstance(obj, dict):
        raise ScenarioError(f"{path}: expected an object")
    allowed = {
        "max_iterations",
        "kkt_tolerance",
        "constraint_tolerance",
        "symmetry_jitter",
        "deterministic_seed",
    }
    _check_keys(obj, path, allowed)
    base = SolverSettings()
    kwargs = {}
    if "max_iterations" in obj:
        kwargs["max_iterations"] = _integer(obj["max_iterations"], f"{path}.max_iterations", 1)
    if "kkt_tolerance" in obj:
        kwargs["kkt_tolerance"] = _number(obj["kkt_tolerance"], f"{path}.kkt_tolerance", strict_min=0.0)
    if "constraint_tolerance" in obj:
        kwargs["constraint_tolerance"] = _number(
            obj["constraint_tolerance"], f"{path}.constraint_tolerance", strict_min=0.0
        )
    if "symmetry_jitter" in obj:
        kwargs["symmetry_jitter"] = _number(obj["symmetry_jitter"], f"{path}.symmetry_jitter", minimum=0.0)
    if "deterministic_seed" in obj:
        kwargs["deterministic_seed"] = _integer(obj["deterministic_seed"], f"{path}.deterministic_seed")
    try:
        return SolverSettings(
            max_iterations=kwargs.get("max_iterations", base.max_iterations),
            kkt_tolerance=kwargs.get("kkt_tolerance", base.kkt_tolerance),
            constraint_tolerance=kwargs.get("constraint_tolerance", base.constraint_tolerance),
            symmetry_jitter=kwargs.get("symmetry_jitter", base.symmetry_jitter),
            deterministic_seed=kwargs.get("deterministic_seed", base.deterministic_seed),
        )
    except ValueError as exc:
        raise ScenarioError(f"{path}: {exc}") from exc


def _parse_planner(obj, path: str = "planner") -> PlannerConfig:
    if not isinstance(obj, dict):
        raise ScenarioError(f"{path}: expected an object")
    allowed = {
        "N", "N_B", "lambda", "alpha", "radius", "Ts", "n_apply",
        "v_max", "a_max", "stage_reward_mode", "solver",
    }
    _check_keys(obj, path, allowed)
    n = _integer(obj.get("N", DEFAULTS["planner.N"]), f"{path}.N", 2)
    n_b = obj.get("N_B", DEFAULTS["planner.N_B"])
    if n_b is not None:
        n_b = _integer(n_b, f"{path}.N_B", 0)
    lam = _number(obj.get("lambda", DEFAULTS["planner.lambda"]), f"{path}.lambda", minimum=0.0)
    alpha = _number(obj.get("alpha", DEFAULTS["planner.alpha"]), f"{path}.alpha", strict_min=0.0)
    radius = _number(obj.get("radius", DEFAULTS["planner.radius"]), f"{path}.radius", strict_min=0.0)
    ts = _number(obj.get("Ts", DEFAULTS["planner.Ts"]), f"{path}.Ts", strict_min=0.0)
    n_apply = _integer(obj.get("n_apply", DEFAULTS["planner.n_apply"]), f"{path}.n_apply", 1)
    v_max = _number(obj.get("v_max", DEFAULTS["planner.v_max"]), f"{path}.v_max", strict_min=0.0)
    a_max = _number(obj.get("a_max", DEFAULTS["planner.a_max"]), f"{path}.a_max", strict_min=0.0)
    mode, order = _parse_stage_mode(
        obj.get("stage_reward_mode", DEFAULTS["planner.stage_reward_mode"]),
        f"{path}.stage_reward_mode",
    )
    solver = _parse_solver(obj.get("solver", {}), f"{path}.solver")
    try:
        return PlannerConfig(
            horizon=n,
            Ts=ts,
            penalty=PenaltyParams(alpha=alpha, radius=radius),
            limits=InputLimits(v_max=v_max, a_max=a_max),
            overlap_weight=lam,
            backward_horizon=n_b,
            n_apply=n_apply,
            stage_reward_mode=mode,
            quadrature_order=order,
            solver=solver,
        )
    except ValueError as exc:
        raise ScenarioError(f"{path}: {exc}") from exc


def scenario_from_dict(data: dict) -> Scenario:
    """Build and validate a Scenario from parsed JSON data."""
    if not isinstance(data, dict):
        raise ScenarioError("scenario: expected a JSON object")
    allowed = {
        "schema_version", "description", "map", "x0", "mission_time",
        "planner", "grid", "seed",
    }
    _check_keys(data, "", allowed)

    version = data.get("schema_version", SCHEMA_VERSION)
    if version != SCHEMA_VERSION:
        raise ScenarioError(
            f"schema_version: expected {SCHEMA_VERSION}, got {version!r}"
        )
    description = data.get("description", "")
    if not isinstance(description, str):
        raise ScenarioError("description: expected a string")

    umap = _parse_map(_require(data, "map", ""))

    x0_obj = data.get("x0", {})
    if not isinstance(x0_obj, dict):
        raise ScenarioError("x0: expected an object")
    _check_keys(x0_obj, "x0", {"pos", "vel"})
    pos = _vector2(x0_obj.get("pos", list(DEFAULTS["x0.pos"])), "x0.pos")
    vel = _vector2(x0_obj.get("vel", list(DEFAULTS["x0.vel"])), "x0.vel")

    mission_time = _number(
        data.get("mission_time", DEFAULTS["mission_time"]), "mission_time", strict_min=0.0
    )
    planner = _parse_planner(data.get("planner", {}))

    grid_obj = data.get("grid", {})
    if not isinstance(grid_obj, dict):
        raise ScenarioError("grid: expected an object")
    _check_keys(grid_obj, "grid", {"cell_size"})
    cell = grid_obj.get("cell_size")
    if cell is not None:
        cell = _number(cell, "grid.cell_size", strict_min=0.0)

    seed = _integer(data.get("seed", DEFAULTS["seed"]), "seed")

    try:
        return Scenario(
            umap=umap,
            x0=VehicleState(pos, vel),
            mission_time=mission_time,
            planner=planner,
            grid_cell_size=cell,
            seed=seed,
            description=description,
        )
    except (ValueError, InvalidMapError) as exc:
        raise ScenarioError(str(exc)) from exc


def load_scenario(path) -> Scenario:
    """Parse and validate one scenario file."""
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ScenarioError(f"cannot read {path}: {exc}") from exc
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ScenarioError(f"{path}: invalid JSON ({exc})") from exc
    return scenario_from_dict(data)


def scenario_to_dict(scenario: Scenario) -> dict:
    """Serialize a Scenario back into its file representation."""
    planner = scenario.planner
    mode = (
        "approx"
        if planner.stage_reward_mode == "approx"
        else f"quadrature({planner.quadrature_order})"
    )
    out = {
        "schema_version": SCHEMA_VERSION,
        "map": {
            "components": [
                {
                    "weight": c.weight,
                    "mean": [float(c.mean[0]), float(c.mean[1])],
                    "cov": [[float(c.cov[0, 0]), float(c.cov[0, 1])],
                            [float(c.cov[1, 0]), float(c.cov[1, 1])]],
                }
                for c in scenario.umap.components
            ],
        },
        "x0": {
            "pos": [float(v) for v in scenario.x0.position],
            "vel": [float(v) for v in scenario.x0.velocity],
        },
        "mission_time": scenario.mission_time,
        "planner": {
            "N": planner.horizon,
            "N_B": planner.backward_horizon,
            "lambda": planner.overlap_weight,
            "alpha": planner.penalty.alpha,
            "radius": planner.penalty.radius,
            "Ts": planner.Ts,
            "n_apply": planner.n_apply,
            "v_max": planner.limits.v_max,
            "a_max": planner.limits.a_max,
            "stage_reward_mode": mode,
            "solver": {
                "max_iterations": planner.solver.max_iterations,
                "kkt_tolerance": planner.solver.kkt_tolerance,
                "constraint_tolerance": planner.solver.constraint_tolerance,
                "symmetry_jitter": planner.solver.symmetry_jitter,
                "deterministic_seed": planner.solver.deterministic_seed,
            },
        },
        "seed": scenario.seed,
    }
    if scenario.description:
        out["description"] = scenario.description
    if scenario.grid_cell_size is not None:
        out["grid"] = {"cell_size": scenario.grid_cell_size}
    return out


def write_scenario(scenario: Scenario, path) -> None:
    """Write a scenario file that ``load_scenario`` round-trips."""
    path = Path(path)
    path.write_text(json.dumps(scenario_to_dict(scenario), indent=2) + "\n")
