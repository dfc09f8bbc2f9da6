"""Receding-horizon coverage planner.

Each planning step maximizes, over the next N inputs,

    J = (sum of per-step disk masses along the predicted path)
        - overlap_weight * (backward penalty + horizon penalty)

subject to per-step norm balls on commanded acceleration and on
velocity.  The backward penalty couples predicted positions to the
visited history; the horizon penalty couples predicted positions to
each other.  States are eliminated by single shooting: the decision
variable is the input sequence alone and predicted positions are an
affine function of it, so the only constraints left are the two ball
families.

The solver is projected gradient ascent on the inputs (exact projection
onto the acceleration balls) with an augmented-Lagrangian outer loop
for the velocity balls and Armijo backtracking on Barzilai-Borwein
trial steps.  Symmetric maps create exact stationary saddles (all
pairwise penalty gradients vanish when predicted positions coincide
with history); a seeded curvature probe detects those and escapes along
an improving direction, so the behavior stays deterministic per seed.
"""
from __future__ import annotations

import math
import time
from dataclasses import dataclass, field

import numpy as np

from .dynamics import InputLimits, VehicleState, discretize
from .gmm_map import UncertaintyMap
from .penalty import PenaltyParams

STATIONARY_GRAD_TOL = 1e-10


class InfeasibleStateError(ValueError):
    """Initial state violates the velocity ball."""


class SolverDivergenceError(RuntimeError):
    """Objective or gradient became non-finite during a solve."""


@dataclass(frozen=True)
class SolverSettings:
    """Iteration budget, tolerances, and the symmetry-breaking jitter."""

    max_iterations: int = 300
    kkt_tolerance: float = 1e-6
    constraint_tolerance: float = 1e-6
    symmetry_jitter: float = 1e-6
    deterministic_seed: int = 0

    def __post_init__(self):
        if self.kkt_tolerance <= 0.0 or self.constraint_tolerance <= 0.0:
            raise ValueError("solver tolerances must be > 0")
        if self.symmetry_jitter < 0.0:
            raise ValueError("symmetry_jitter must be >= 0")


@dataclass(frozen=True)
class PlannerConfig:
    """All planner tunables.

    ``backward_horizon`` is the number of most recent visited positions
    kept in the backward penalty; ``None`` keeps the whole history.
    ``overlap_weight`` scales the penalty terms against the coverage
    reward.  ``stage_reward_mode`` is "approx" (pi r^2 h at the disk
    center) or "quadrature" (fixed product rule over the disk, for maps
    with structure narrower than the disk).
    """

    horizon: int
    Ts: float
    penalty: PenaltyParams
    limits: InputLimits
    overlap_weight: float = 1.0 / 7000.0
    backward_horizon: int | None = None
    n_apply: int = 1
    stage_reward_mode: str = "approx"
    quadrature_order: int = 8
    solver: SolverSettings = field(default_factory=SolverSettings)

    def __post_init__(self):
        if self.horizon < 2:
            raise ValueError(f"horizon must be >= 2, got {self.horizon}")
        if self.Ts <= 0.0:
            raise ValueError(f"Ts must be > 0, got {self.Ts}")
        if self.overlap_weight < 0.0:
            raise ValueError(f"overlap_weight must be >= 0, got {self.overlap_weight}")
        if self.backward_horizon is not None and self.backward_horizon < 0:
            raise ValueError("backward_horizon must be >= 0 or None")
        if not (1 <= self.n_apply <= self.horizon):
            raise ValueError(
                f"n_apply must be in [1, {self.horizon}], got {self.n_apply}"
            )
        if self.stage_reward_mode not in ("approx", "quadrature"):
            raise ValueError(
                f"stage_reward_mode must be 'approx' or 'quadrature', "
                f"got {self.stage_reward_mode!r}"
            )
        if self.quadrature_order < 1:
            raise ValueError("quadrature_order must be >= 1")


class HistoryBuffer:
    """Chronological record of visited positions feeding the backward penalty.

    When ``max_length`` is set the buffer keeps only the most recent
    entries; older positions simply stop contributing (the constant-size
    allocation trick of dropping old terms to zero weight).
    """

    def __init__(self, max_length: int | None = None):
        if max_length is not None and max_length < 0:
            raise ValueError("max_length must be >= 0 or None")
        self.max_length = max_length
        self._positions: list[tuple[float, float]] = []

    def append(self, position) -> None:
        p = np.asarray(position, dtype=float)
        self._positions.append((float(p[0]), float(p[1])))
        if self.max_length is not None and len(self._positions) > self.max_length:
            del self._positions[: len(self._positions) - self.max_length]

    def window(self) -> np.ndarray:
        """Positions currently in the penalty window, shape (H, 2)."""
        if not self._positions:
            return np.empty((0, 2))
        return np.asarray(self._positions, dtype=float)

    def __len__(self) -> int:
        return len(self._positions)


@dataclass(frozen=True)
class HorizonSolution:
    """One solved horizon: inputs, predicted states, and diagnostics.

    ``multipliers`` are the final velocity-constraint multipliers, kept
    so the next solve of a mission can warm-start them.
    """

    u_seq: np.ndarray
    x_seq: list[VehicleState]
    objective: float
    stage_reward: float
    penalty_backward: float
    penalty_horizon: float
    iterations: int
    kkt_residual: float
    solve_time: float
    flag: str
    multipliers: np.ndarray
    step_hint: float | None = None
    rho_hint: float = 10.0


def project_ball(u: np.ndarray, radius: float) -> np.ndarray:
    """Project each row of u onto the closed 2-D ball of given radius."""
    u = np.atleast_2d(np.asarray(u, dtype=float))
    norms = np.linalg.norm(u, axis=1)
    scale = np.ones_like(norms)
    over = norms > radius
    scale[over] = radius / norms[over]
    return u * scale[:, None]


def shift_warm_start(u_seq, n_shift: int, a_max: float) -> np.ndarray:
    """Advance a previous input plan by ``n_shift`` steps.

    Drops the first ``n_shift`` inputs, repeats the last one to keep the
    length, and projects every row onto the acceleration ball so the
    result is always feasible.
    """
    if isinstance(u_seq, HorizonSolution):
        u_seq = u_seq.u_seq
    u = np.atleast_2d(np.asarray(u_seq, dtype=float))
    n = u.shape[0]
    if not (1 <= n_shift <= n):
        raise ValueError(f"n_shift must be in [1, {n}], got {n_shift}")
    shifted = np.vstack([u[n_shift:], np.repeat(u[-1:], n_shift, axis=0)])
    return project_ball(shifted, a_max)


def _disk_rule(r: float, order: int):
    """Product quadrature nodes over the radius-r disk, centered frame.

    ``order`` Gauss-Legendre radial nodes (with the polar Jacobian
    folded into the weights) times 4 * order uniformly spaced angles.
    Returns (offsets (K, 2), weights (K,)); weights sum to pi r^2.
    """
    x, w = np.polynomial.legendre.leggauss(order)
    rho = 0.5 * r * (x + 1.0)
    w_rho = 0.5 * r * w * rho
    n_angles = 4 * order
    theta = (np.arange(n_angles) + 0.5) * (2.0 * math.pi / n_angles)
    dirs = np.stack([np.cos(theta), np.sin(theta)], axis=1)
    offsets = (rho[:, None, None] * dirs[None, :, :]).reshape(-1, 2)
    weights = np.repeat(w_rho, n_angles) * (2.0 * math.pi / n_angles)
    return offsets, weights


class _Objective:
    """Fused value/gradient evaluation of the horizon objective.

    Bound to one (map, config, x0, history window) tuple; the solver
    calls it many times per solve with different input sequences.
    """

    def __init__(self, umap: UncertaintyMap, x0: VehicleState, history, config: PlannerConfig):
        self.umap = umap
        self.config = config
        self.model = discretize(config.Ts)
        self.p0 = np.asarray(x0.position, dtype=float)
        self.v0 = np.asarray(x0.velocity, dtype=float)
        self.hist = _history_window(history, config.backward_horizon)
        self.pos_coeff = self.model.position_coefficients(config.horizon)  # (N+1, N)
        self.pos_coeff_t = np.ascontiguousarray(self.pos_coeff.T)
        if config.stage_reward_mode == "quadrature":
            self._offsets, self._node_w = _disk_rule(
                config.penalty.radius, config.quadrature_order
            )
        else:
            self._offsets = None

    def _stage(self, positions: np.ndarray):
        """Stage reward and its gradient w.r.t. every predicted position."""
        r = self.config.penalty.radius
        if self._offsets is None:
            vals, grads = self.umap.density_and_gradient(positions)
            area = math.pi * r * r
            return area * float(vals.sum()), area * grads
        pts = (positions[:, None, :] + self._offsets[None, :, :]).reshape(-1, 2)
        vals, grads = self.umap.density_and_gradient(pts)
        k = self._node_w.shape[0]
        vals = vals.reshape(-1, k)
        grads = grads.reshape(-1, k, 2)
        gpos = np.einsum("k,pki->pi", self._node_w, grads)
        return float((vals * self._node_w).sum()), gpos

    def _penalties(self, positions: np.ndarray):
        """Backward and horizon penalty values with position gradients."""
        params = self.config.penalty
        alpha = params.alpha
        four_r2 = 4.0 * params.radius * params.radius
        pred = positions[1:]  # decision positions n = 1..N
        n = pred.shape[0]
        gx = np.zeros(n)
        gy = np.zeros(n)

        pb = 0.0
        if self.hist.shape[0] > 0:
            dx = pred[:, 0:1] - self.hist[None, :, 0]
            dy = pred[:, 1:2] - self.hist[None, :, 1]
            e = np.exp(alpha * (four_r2 - dx * dx - dy * dy))
            pb = float(e.sum()) - e.size
            gx += (e * dx).sum(axis=1)
            gy += (e * dy).sum(axis=1)

        dx = pred[:, 0:1] - pred[None, :, 0]
        dy = pred[:, 1:2] - pred[None, :, 1]
        e = np.exp(alpha * (four_r2 - dx * dx - dy * dy))
        # Each unordered pair counts once in the value; the gradient sums
        # over every partner (the diagonal contributes zero through diff).
        ph = 0.5 * (float(e.sum()) - n * math.exp(alpha * four_r2)) - 0.5 * (n * n - n)
        gx += (e * dx).sum(axis=1)
        gy += (e * dy).sum(axis=1)

        gpos = np.zeros((n + 1, 2))
        gpos[1:, 0] = -2.0 * alpha * gx
        gpos[1:, 1] = -2.0 * alpha * gy
        return pb, ph, gpos

    def rollout(self, u: np.ndarray):
        return self.model.rollout_arrays(self.p0, self.v0, u)

    def terms(self, u: np.ndarray):
        """(J, dJ/du, stage, pb, ph, velocities) at the input sequence u."""
        positions, velocities = self.rollout(u)
        stage, g_stage = self._stage(positions)
        pb, ph, g_pen = self._penalties(positions)
        lam = self.config.overlap_weight
        value = stage - lam * (pb + ph)
        gpos = g_stage - lam * g_pen
        gpos[0] = 0.0  # current position is not a decision
        grad_u = self.pos_coeff_t @ gpos
        return value, grad_u, stage, pb, ph, velocities

    def value(self, u: np.ndarray) -> float:
        return self.terms(u)[0]


def _history_window(history, backward_horizon: int | None) -> np.ndarray:
    if isinstance(history, HistoryBuffer):
        window = history.window()
    else:
        window = np.asarray(history, dtype=float)
        if window.size == 0:
            window = np.empty((0, 2))
        window = np.atleast_2d(window)
    if backward_horizon is not None and window.shape[0] > backward_horizon:
        window = window[window.shape[0] - backward_horizon:]
    return window


# -- spec-level operations --------------------------------------------


def stage_reward(umap: UncertaintyMap, positions, config: PlannerConfig) -> float:
    """Sum of per-position disk masses over the prediction horizon."""
    positions = np.atleast_2d(np.asarray(positions, dtype=float))
    r = config.penalty.radius
    if config.stage_reward_mode == "approx":
        return math.pi * r * r * float(np.sum(umap.density(positions)))
    offsets, weights = _disk_rule(r, config.quadrature_order)
    pts = (positions[:, None, :] + offsets[None, :, :]).reshape(-1, 2)
    vals = umap.density(pts).reshape(positions.shape[0], -1)
    return float((vals * weights).sum())


def backward_penalty(predicted, history, params: PenaltyParams,
                     backward_horizon: int | None = None) -> float:
    """Overlap penalty between predicted positions (n >= 1) and history."""
    predicted = np.atleast_2d(np.asarray(predicted, dtype=float))
    hist = _history_window(history, backward_horizon)
    if hist.shape[0] == 0 or predicted.shape[0] <= 1:
        return 0.0
    pred = predicted[1:]
    diff = pred[:, None, :] - hist[None, :, :]
    d2 = np.einsum("nhk,nhk->nh", diff, diff)
    e = np.exp(params.alpha * (4.0 * params.radius ** 2 - d2))
    return float(e.sum()) - e.size


def horizon_penalty(predicted, params: PenaltyParams) -> float:
    """Overlap penalty among predicted positions (pairs with 1 <= i < n)."""
    predicted = np.atleast_2d(np.asarray(predicted, dtype=float))
    pred = predicted[1:]
    n = pred.shape[0]
    if n < 2:
        return 0.0
    diff = pred[:, None, :] - pred[None, :, :]
    d2 = np.einsum("nik,nik->ni", diff, diff)
    e = np.exp(params.alpha * (4.0 * params.radius ** 2 - d2))
    return 0.5 * (float(e.sum()) - n * math.exp(params.alpha * 4.0 * params.radius ** 2)) \
        - 0.5 * (n * n - n)


def objective(umap, x0: VehicleState, u_seq, history, config: PlannerConfig) -> float:
    """Relaxed horizon objective evaluated on the rollout of ``u_seq``."""
    work = _Objective(umap, x0, history, config)
    return work.value(np.atleast_2d(np.asarray(u_seq, dtype=float)))


def objective_gradient(umap, x0: VehicleState, u_seq, history, config: PlannerConfig) -> np.ndarray:
    """Gradient of ``objective`` with respect to the input sequence."""
    work = _Objective(umap, x0, history, config)
    return work.terms(np.atleast_2d(np.asarray(u_seq, dtype=float)))[1]


# -- solver ------------------------------------------------------------


def solve(umap: UncertaintyMap, x0: VehicleState, history, config: PlannerConfig,
          warm_start=None, multiplier_start=None, rng=None,
          step_hint: float | None = None, rho_hint: float | None = None) -> HorizonSolution:
    """Maximize the horizon objective subject to both ball constraints.

    Returns the best velocity-feasible iterate encountered, so the
    objective never falls below a feasible warm start.  Raises
    ``InfeasibleStateError`` when the initial velocity already violates
    its ball and ``SolverDivergenceError`` on non-finite objectives.
    ``step_hint``/``rho_hint`` seed the line search and the constraint
    penalty weight from a previous solve of the same mission.
    """
    t_start = time.perf_counter()
    settings = config.solver
    limits = config.limits
    n = config.horizon
    v0_norm = float(np.linalg.norm(x0.velocity))
    if v0_norm > limits.v_max + settings.constraint_tolerance:
        raise InfeasibleStateError(
            f"initial speed {v0_norm:.6g} exceeds v_max {limits.v_max:.6g}"
        )
    if rng is None:
        rng = np.random.default_rng(settings.deterministic_seed)

    work = _Objective(umap, x0, history, config)
    if warm_start is None:
        u = np.zeros((n, 2))
    else:
        u = project_ball(np.asarray(warm_start, dtype=float).reshape(n, 2), limits.a_max)
    mu = (
        np.zeros(n)
        if multiplier_start is None
        else np.maximum(np.asarray(multiplier_start, dtype=float).reshape(n), 0.0)
    )
    rho = 10.0 if rho_hint is None else float(rho_hint)

    v_max2 = limits.v_max * limits.v_max

    def eval_point(u_cur):
        # Velocity balls are handled in squared form ||v||^2 <= v_max^2:
        # same feasible set, smooth gradient 2 Ts v everywhere.
        value, grad_u, stage, pb, ph, velocities = work.terms(u_cur)
        if not math.isfinite(value):
            raise SolverDivergenceError(
                f"objective became non-finite (stage={stage}, pb={pb}, ph={ph})"
            )
        v = velocities[1:]
        sq = v[:, 0] * v[:, 0] + v[:, 1] * v[:, 1]
        c = sq - v_max2
        s = np.maximum(0.0, mu + rho * c)
        aug = float((s * s - mu * mu).sum()) / (2.0 * rho)
        lagr = value - aug
        # d||v[n]||^2/du[m] = 2 Ts v[n] for m < n: reversed cumulative sum.
        tail = np.cumsum((s[::-1, None] * v[::-1]), axis=0)[::-1]
        grad_l = grad_u - (2.0 * config.Ts) * tail
        viol = float(np.sqrt(max(np.max(sq), 0.0))) - limits.v_max
        return lagr, grad_l, value, viol, (stage, pb, ph)

    def residual(u_cur, grad_cur):
        return float(np.max(np.abs(project_ball(u_cur + grad_cur, limits.a_max) - u_cur)))

    best_u = None
    best_value = -math.inf

    def consider(u_cur, value, violation):
        nonlocal best_u, best_value
        if violation <= settings.constraint_tolerance and value > best_value:
            best_value = value
            best_u = u_cur.copy()

    lagr, grad_l, value, violation, _ = eval_point(u)
    consider(u, value, violation)

    # Stationary starts on symmetric maps can be saddles: every pairwise
    # penalty gradient vanishes when predicted positions coincide with
    # history.  Probe curvature along seeded directions and escape by an
    # expanding search when an improving direction exists.
    if float(np.max(np.abs(grad_l))) < STATIONARY_GRAD_TOL and settings.symmetry_jitter > 0.0:
        u_esc = _saddle_escape(work, eval_point, u, lagr, settings, limits, rng)
        if u_esc is not None:
            u = u_esc
            lagr, grad_l, value, violation, _ = eval_point(u)
            consider(u, value, violation)

    iterations = 0
    flag = "converged"
    step = None
    final_step = step_hint
    prev_u = None
    prev_grad = None

    converged = False
    prev_violation = math.inf
    for outer in range(20):
        # Early multiplier rounds only need a crude inner solve; the
        # tolerance tightens geometrically down to the requested one.
        inner_tol = max(settings.kkt_tolerance, 1e-3 * 0.2**outer)
        inner_converged = False
        plateau = False
        # Nonmonotone (GLL-style) spectral projected gradient: Barzilai-
        # Borwein trial steps accepted against the worst of the last few
        # values, which avoids the creeping behavior of monotone Armijo.
        recent: list[float] = [lagr]
        res_best = math.inf
        since_res_best = 0
        while iterations < settings.max_iterations:
            res = residual(u, grad_l)
            if res <= inner_tol:
                inner_converged = True
                break
            if res < 0.99 * res_best:
                res_best = res
                since_res_best = 0
            else:
                since_res_best += 1
            # At an active velocity ball the augmented gradient kinks on
            # the boundary; iterates can chatter across it with the
            # residual pinned above tolerance although the value is fully
            # converged.  A flat residual floor marks that plateau.
            if since_res_best >= 15:
                plateau = True
                break
            if step is None:
                gmax = float(np.max(np.abs(grad_l)))
                step = limits.a_max / max(gmax, 1e-12)
            elif prev_u is not None:
                du = (u - prev_u).ravel()
                dg = (grad_l - prev_grad).ravel()
                curv = -float(du @ dg)
                if curv > 1e-18:
                    step = float(du @ du) / curv
                else:
                    step = step * 2.0
                step = min(max(step, 1e-12), 1e12)

            prev_u = u
            prev_grad = grad_l
            accepted = False
            t = step
            ref = min(recent)
            for _bt in range(40):
                u_new = project_ball(u + t * grad_l, limits.a_max)
                move = u_new - u
                if not np.any(move):
                    break
                gain_ref = float((grad_l * move).sum())
                lagr_new, grad_new, value_new, violation_new, _ = eval_point(u_new)
                if lagr_new >= ref + 1e-4 * gain_ref:
                    u, lagr, grad_l = u_new, lagr_new, grad_new
                    value, violation = value_new, violation_new
                    consider(u, value, violation)
                    recent.append(lagr)
                    if len(recent) > 8:
                        recent.pop(0)
                    accepted = True
                    final_step = t
                    break
                t *= 0.5
            iterations += 1
            if not accepted:
                plateau = True  # line search pinned at stationarity
                break

        feasible = violation <= settings.constraint_tolerance
        if feasible and inner_converged and inner_tol <= settings.kkt_tolerance:
            converged = True
            break
        if feasible and plateau:
            converged = True
            flag = "stalled"
            break
        if iterations >= settings.max_iterations:
            flag = "iteration_cap"
            break
        # Multiplier update; stiffen rho only when the violation stalls.
        vel = work.rollout(u)[1][1:]
        c = vel[:, 0] * vel[:, 0] + vel[:, 1] * vel[:, 1] - v_max2
        mu = np.maximum(0.0, mu + rho * c)
        if violation > settings.constraint_tolerance:
            if violation > 0.25 * prev_violation:
                rho = min(rho * 5.0, 1e7)
            prev_violation = violation
        lagr, grad_l, value, violation, _ = eval_point(u)
        prev_u = None  # curvature estimate is stale after the mu/rho change
    if not converged and flag == "converged":
        flag = "iteration_cap"

    if best_u is None:
        # No feasible iterate seen; fall back to the zero sequence, which
        # keeps the (feasible) initial velocity.
        best_u = np.zeros((n, 2))
        lagr, grad_l, value, violation, _ = eval_point(best_u)
        flag = "iteration_cap"

    lagr, grad_l, value, violation, (stage, pb, ph) = eval_point(best_u)
    res = residual(best_u, grad_l)
    positions, velocities = work.rollout(best_u)
    x_seq = [
        VehicleState(positions[i], velocities[i]) for i in range(n + 1)
    ]
    return HorizonSolution(
        u_seq=best_u,
        x_seq=x_seq,
        objective=value,
        stage_reward=stage,
        penalty_backward=pb,
        penalty_horizon=ph,
        iterations=iterations,
        kkt_residual=res,
        solve_time=time.perf_counter() - t_start,
        flag=flag,
        multipliers=mu.copy(),
        step_hint=final_step,
        rho_hint=rho,
    )


def _saddle_escape(work, eval_point, u, lagr0, settings: SolverSettings,
                   limits: InputLimits, rng) -> np.ndarray | None:
    """Find an improving direction at a stationary point, if one exists.

    Probes seeded random directions at jitter scale and tests curvature
    through the directional derivative; at a genuine local maximum every
    probe curves down and the routine returns None.  Otherwise it runs
    an expanding search along the best direction until the augmented
    objective stops improving.
    """
    n = u.shape[0]
    best_dir = None
    best_curv = 0.0
    for _ in range(8):
        d = rng.standard_normal((n, 2))
        d /= np.linalg.norm(d)
        probe = project_ball(u + settings.symmetry_jitter * d, limits.a_max)
        delta = probe - u
        if not np.any(delta):
            continue
        _, grad_p, _, _, _ = eval_point(probe)
        curv = float((grad_p * delta).sum())
        if curv > best_curv:
            best_curv = curv
            best_dir = d
    if best_dir is None:
        return None
    best_u = None
    best_l = lagr0
    step = settings.symmetry_jitter
    declines = 0
    for _ in range(60):
        cand = project_ball(u + step * best_dir, limits.a_max)
        lagr_c = eval_point(cand)[0]
        if lagr_c > best_l:
            best_l = lagr_c
            best_u = cand
            declines = 0
        else:
            declines += 1
            if declines >= 2 and best_u is not None:
                break
        step *= 2.0
    return best_u


class Planner:
    """Stateful per-mission planner carrying warm starts between solves.

    One instance per mission (the warm-start state is mutable); distinct
    instances are independent and may run concurrently.
    """

    def __init__(self, umap: UncertaintyMap, config: PlannerConfig, rng=None):
        self.umap = umap
        self.config = config
        self.rng = (
            np.random.default_rng(config.solver.deterministic_seed)
            if rng is None
            else rng
        )
        self._warm: np.ndarray | None = None
        self._mu: np.ndarray | None = None
        self._step_hint: float | None = None
        self._rho_hint: float | None = None

    def plan(self, x0: VehicleState, history) -> HorizonSolution:
        sol = solve(
            self.umap, x0, history, self.config,
            warm_start=self._warm, multiplier_start=self._mu, rng=self.rng,
            step_hint=self._step_hint, rho_hint=self._rho_hint,
        )
        shift = self.config.n_apply
        self._warm = shift_warm_start(sol.u_seq, shift, self.config.limits.a_max)
        mu = sol.multipliers
        self._mu = np.concatenate([mu[shift:], np.repeat(mu[-1:], shift)])
        self._step_hint = sol.step_hint
        self._rho_hint = sol.rho_hint
        return sol
