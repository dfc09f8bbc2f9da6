"""Discrete planar double-integrator vehicle model.

State is position and velocity on the horizontal plane, input is the
commanded acceleration.  Exact zero-order-hold discretization:

    A = [[I, Ts I], [0, I]],   B = [[Ts^2/2 I], [Ts I]]

Because the dynamics are linear, rollout sensitivities have the closed
form d gamma[n] / d u[m] = (Ts^2/2 + (n-1-m) Ts^2) I for m < n; the
planner uses these blocks directly instead of storing matrix powers.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class VehicleState:
    """Planar position (m) and velocity (m/s)."""

    position: np.ndarray
    velocity: np.ndarray

    def __post_init__(self):
        pos = np.asarray(self.position, dtype=float).reshape(2)
        vel = np.asarray(self.velocity, dtype=float).reshape(2)
        if not (np.all(np.isfinite(pos)) and np.all(np.isfinite(vel))):
            raise ValueError("state entries must be finite")
        pos.setflags(write=False)
        vel.setflags(write=False)
        object.__setattr__(self, "position", pos)
        object.__setattr__(self, "velocity", vel)

    def as_vector(self) -> np.ndarray:
        return np.concatenate([self.position, self.velocity])

    @classmethod
    def from_vector(cls, x) -> "VehicleState":
        x = np.asarray(x, dtype=float).reshape(4)
        return cls(x[:2], x[2:])


@dataclass(frozen=True)
class InputLimits:
    """Norm bounds on velocity (m/s) and commanded acceleration (m/s^2)."""

    v_max: float
    a_max: float

    def __post_init__(self):
        if not (self.v_max > 0.0):
            raise ValueError(f"v_max must be > 0, got {self.v_max}")
        if not (self.a_max > 0.0):
            raise ValueError(f"a_max must be > 0, got {self.a_max}")


@dataclass(frozen=True)
class DiscreteModel:
    """Zero-order-hold double integrator with sampling period Ts."""

    Ts: float
    A: np.ndarray
    B: np.ndarray

    def step(self, x: VehicleState, u) -> VehicleState:
        """One step of x+ = A x + B u."""
        u = np.asarray(u, dtype=float).reshape(2)
        pos = x.position + self.Ts * x.velocity + 0.5 * self.Ts * self.Ts * u
        vel = x.velocity + self.Ts * u
        return VehicleState(pos, vel)

    def rollout(self, x0: VehicleState, u_seq) -> list[VehicleState]:
        """States visited from x0 under the input sequence (length N+1)."""
        u_seq = np.atleast_2d(np.asarray(u_seq, dtype=float))
        states = [x0]
        for u in u_seq:
            states.append(self.step(states[-1], u))
        return states

    def rollout_arrays(self, pos0, vel0, u_seq):
        """Vectorized rollout returning (positions, velocities) arrays.

        positions has shape (N+1, 2), velocities (N+1, 2).  Equivalent
        to composing ``step`` but without per-step object construction.
        """
        u_seq = np.atleast_2d(np.asarray(u_seq, dtype=float))
        n = u_seq.shape[0]
        vel = np.empty((n + 1, 2))
        vel[0] = vel0
        np.cumsum(u_seq, axis=0, out=vel[1:])
        vel[1:] *= self.Ts
        vel[1:] += vel0
        pos = np.empty((n + 1, 2))
        pos[0] = pos0
        # gamma[k+1] = gamma[k] + Ts v[k] + Ts^2/2 u[k]
        incr = self.Ts * vel[:-1] + 0.5 * self.Ts * self.Ts * u_seq
        np.cumsum(incr, axis=0, out=pos[1:])
        pos[1:] += pos0
        return pos, vel

    def position_jacobian(self, n: int, m: int) -> np.ndarray:
        """Sensitivity block d gamma[n] / d u[m], a 2x2 matrix."""
        coeff = self.position_coefficient(n, m)
        return coeff * np.eye(2)

    def position_coefficient(self, n: int, m: int) -> float:
        """Scalar c with d gamma[n] / d u[m] = c I (zero for m >= n)."""
        if n < 0 or m < 0:
            raise IndexError(f"indices must be nonnegative, got n={n}, m={m}")
        if m >= n:
            return 0.0
        return self.Ts * self.Ts * (0.5 + (n - 1 - m))

    def position_coefficients(self, n_steps: int) -> np.ndarray:
        """Lower-triangular (N+1, N) array of position sensitivities."""
        n = np.arange(n_steps + 1)[:, None]
        m = np.arange(n_steps)[None, :]
        coeff = self.Ts * self.Ts * (0.5 + (n - 1 - m))
        return np.where(m < n, coeff, 0.0)


def discretize(Ts: float) -> DiscreteModel:
    """Exact zero-order-hold model for sampling period Ts (s)."""
    if not (Ts > 0.0):
        raise ValueError(f"Ts must be > 0, got {Ts}")
    eye = np.eye(2)
    zero = np.zeros((2, 2))
    A = np.block([[eye, Ts * eye], [zero, eye]])
    B = np.vstack([0.5 * Ts * Ts * eye, Ts * eye])
    A.setflags(write=False)
    B.setflags(write=False)
    return DiscreteModel(Ts=float(Ts), A=A, B=B)
