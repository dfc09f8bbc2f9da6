"""Pairwise overlap penalties between equal observation disks.

Two disks of radius r stop overlapping once their centers are 2r apart.
The objective penalizes proximity smoothly with

    p(c1, c2) = exp(alpha ((2r)^2 - ||c1 - c2||^2)) - 1

which is zero exactly at separation 2r, grows exponentially as the
disks interpenetrate, and tends to -1 as they move apart.  The negative
tail is kept as is: it still slopes away from overlap and so keeps
pushing disks apart near the 2r boundary.

The exact lens (circle-intersection) area is provided as a diagnostic
only; it never enters the objective.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class PenaltyParams:
    """Overlap penalty tuning: exponent alpha (1/m^2) and disk radius r (m)."""

    alpha: float
    radius: float

    def __post_init__(self):
        if not (self.alpha > 0.0):
            raise ValueError(f"alpha must be > 0, got {self.alpha}")
        if not (self.radius > 0.0):
            raise ValueError(f"radius must be > 0, got {self.radius}")


def pair_penalty(c1, c2, params: PenaltyParams) -> float:
    """Smooth overlap penalty between disks centered at c1 and c2."""
    d = np.asarray(c1, float) - np.asarray(c2, float)
    d2 = float(d @ d)
    four_r2 = 4.0 * params.radius * params.radius
    return math.exp(params.alpha * (four_r2 - d2)) - 1.0


def pair_penalty_grad(c1, c2, params: PenaltyParams):
    """Gradients of ``pair_penalty`` w.r.t. both centers.

    d p / d c1 = -2 alpha exp(alpha ((2r)^2 - d^2)) (c1 - c2), and the
    c2 gradient is its negation (the penalty depends on c1 - c2 only).
    """
    c1 = np.asarray(c1, float)
    c2 = np.asarray(c2, float)
    diff = c1 - c2
    d2 = float(diff @ diff)
    four_r2 = 4.0 * params.radius * params.radius
    g1 = -2.0 * params.alpha * math.exp(params.alpha * (four_r2 - d2)) * diff
    return g1, -g1


def pairwise_penalty_matrix(a: np.ndarray, b: np.ndarray, params: PenaltyParams) -> np.ndarray:
    """Penalty for every pair (a[i], b[j]); shape (len(a), len(b))."""
    diff = a[:, None, :] - b[None, :, :]
    d2 = np.einsum("ijk,ijk->ij", diff, diff)
    four_r2 = 4.0 * params.radius * params.radius
    return np.exp(params.alpha * (four_r2 - d2)) - 1.0


def lens_overlap_area(d: float, r: float) -> float:
    """Exact intersection area of two radius-r circles with centers d apart.

    Diagnostic only.  For d <= 2r the lens area is
    2 r^2 arccos(d / 2r) - (d / 2) sqrt(4 r^2 - d^2); zero beyond 2r.
    """
    if d < 0.0:
        raise ValueError(f"distance must be >= 0, got {d}")
    if r <= 0.0:
        raise ValueError(f"radius must be > 0, got {r}")
    if d >= 2.0 * r:
        return 0.0
    return 2.0 * r * r * math.acos(d / (2.0 * r)) - 0.5 * d * math.sqrt(4.0 * r * r - d * d)
