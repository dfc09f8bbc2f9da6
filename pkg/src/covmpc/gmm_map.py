"""Gaussian-mixture uncertainty maps.

The map assigns to every point of the plane a nonnegative importance
density h(p) built as a weighted sum of 2-D Gaussian kernels:

    h(p) = sum_i  w_i / (2 pi sqrt(det S_i)) * exp(-0.5 (p-mu_i)^T S_i^-1 (p-mu_i))

Covariance inverses and normalization constants are computed once at
construction because density evaluation sits in the planner's innermost
loop.  Maps are immutable after construction; normalization produces a
new map.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import erf

TWO_PI = 2.0 * math.pi

# Construction limits: covariances must be symmetric, positive definite
# and numerically invertible.
SYMMETRY_TOL = 1e-12
MAX_CONDITION = 1e12
NORMALIZED_TOL = 1e-9


class InvalidMapError(ValueError):
    """Raised when map data violates a construction invariant."""

    def __init__(self, violations: list[str]):
        self.violations = list(violations)
        super().__init__("; ".join(self.violations))


def component_violations(weight, mean, cov, label: str = "component") -> list[str]:
    """Check one raw (weight, mean, cov) triple and report every violation.

    Returns an empty list when the triple is a valid Gaussian component.
    ``label`` prefixes each message so callers can report field paths.
    """
    out: list[str] = []
    mean = np.asarray(mean, dtype=float)
    cov = np.asarray(cov, dtype=float)

    if not np.isfinite(weight):
        out.append(f"{label}.weight: not finite")
    elif weight <= 0.0:
        out.append(f"{label}.weight: must be > 0, got {weight}")

    if mean.shape != (2,):
        out.append(f"{label}.mean: expected 2-vector, got shape {mean.shape}")
    elif not np.all(np.isfinite(mean)):
        out.append(f"{label}.mean: not finite")

    if cov.shape != (2, 2):
        out.append(f"{label}.cov: expected 2x2 matrix, got shape {cov.shape}")
        return out
    if not np.all(np.isfinite(cov)):
        out.append(f"{label}.cov: not finite")
        return out
    if abs(cov[0, 1] - cov[1, 0]) > SYMMETRY_TOL:
        out.append(f"{label}.cov: not symmetric (|a01-a10| = {abs(cov[0, 1] - cov[1, 0]):.3g})")
        return out
    eigvals = np.linalg.eigvalsh(cov)
    if eigvals[0] <= 0.0:
        out.append(f"{label}.cov: not positive definite (eigenvalues {eigvals})")
    elif eigvals[1] / eigvals[0] > MAX_CONDITION:
        out.append(
            f"{label}.cov: condition number {eigvals[1] / eigvals[0]:.3g} "
            f"exceeds {MAX_CONDITION:.0e}"
        )
    return out


@dataclass(frozen=True)
class GaussianComponent:
    """One weighted Gaussian kernel of the uncertainty map.

    The precision matrix (covariance inverse) and the normalization
    constant are cached at construction; evaluation never inverts.
    """

    weight: float
    mean: np.ndarray
    cov: np.ndarray
    prec: np.ndarray = field(init=False, repr=False)
    norm: float = field(init=False, repr=False)

    def __post_init__(self):
        violations = component_violations(self.weight, self.mean, self.cov)
        if violations:
            raise InvalidMapError(violations)
        mean = np.array(self.mean, dtype=float)
        cov = np.array(self.cov, dtype=float)
        # Symmetrize to kill sub-tolerance asymmetry before inverting.
        cov = 0.5 * (cov + cov.T)
        det = cov[0, 0] * cov[1, 1] - cov[0, 1] * cov[1, 0]
        prec = np.array(
            [[cov[1, 1], -cov[0, 1]], [-cov[1, 0], cov[0, 0]]], dtype=float
        ) / det
        for arr in (mean, cov, prec):
            arr.setflags(write=False)
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "cov", cov)
        object.__setattr__(self, "prec", prec)
        object.__setattr__(self, "norm", float(self.weight) / (TWO_PI * math.sqrt(det)))


class UncertaintyMap:
    """Immutable weighted mixture of 2-D Gaussian components.

    Thread-safe for concurrent reads: all state is fixed at construction
    and the backing arrays are marked read-only.
    """

    def __init__(self, components):
        comps = tuple(components)
        if not comps:
            raise InvalidMapError(["map must contain at least one component"])
        self.components: tuple[GaussianComponent, ...] = comps
        self._weights = np.array([c.weight for c in comps])
        self._means = np.array([c.mean for c in comps])
        self._precs = np.array([c.prec for c in comps])
        self._norms = np.array([c.norm for c in comps])
        for arr in (self._weights, self._means, self._precs, self._norms):
            arr.setflags(write=False)
        self.total_weight = float(self._weights.sum())
        self.normalized_flag = abs(self.total_weight - 1.0) <= NORMALIZED_TOL

    @classmethod
    def from_arrays(cls, weights, means, covs) -> "UncertaintyMap":
        return cls(
            GaussianComponent(float(w), np.asarray(m, float), np.asarray(c, float))
            for w, m, c in zip(weights, means, covs)
        )

    def __len__(self) -> int:
        return len(self.components)

    def normalized(self) -> "UncertaintyMap":
        """New map with weights rescaled so they sum to one."""
        scale = 1.0 / self.total_weight
        return UncertaintyMap(
            GaussianComponent(c.weight * scale, c.mean, c.cov) for c in self.components
        )

    def scaled(self, factor: float) -> "UncertaintyMap":
        """New map with every weight multiplied by ``factor`` (> 0)."""
        return UncertaintyMap(
            GaussianComponent(c.weight * factor, c.mean, c.cov) for c in self.components
        )

    # -- evaluation ----------------------------------------------------
    #
    # The 2x2 quadratic forms are expanded by hand: density evaluation is
    # the planner's innermost call and elementwise arithmetic beats
    # general einsum contractions at these sizes by a wide margin.

    def _kernels(self, points: np.ndarray) -> np.ndarray:
        """Per-component kernel values norm_i * exp(-q/2), shape (K, M)."""
        dx = points[:, 0:1] - self._means[None, :, 0]
        dy = points[:, 1:2] - self._means[None, :, 1]
        p = self._precs
        q = p[:, 0, 0] * dx * dx + 2.0 * p[:, 0, 1] * dx * dy + p[:, 1, 1] * dy * dy
        return self._norms * np.exp(-0.5 * q)

    def density(self, p) -> float | np.ndarray:
        """Map density h(p).  Accepts one point (2,) or a batch (K, 2)."""
        p = np.asarray(p, dtype=float)
        single = p.ndim == 1
        vals = self._kernels(np.atleast_2d(p)).sum(axis=1)
        return float(vals[0]) if single else vals

    def gradient(self, p) -> np.ndarray:
        """Spatial gradient of the density, matching central differences."""
        p = np.asarray(p, dtype=float)
        single = p.ndim == 1
        grads = self.density_and_gradient(np.atleast_2d(p))[1]
        return grads[0] if single else grads

    def density_and_gradient(self, points: np.ndarray):
        """Fused batch evaluation of (h, grad h); one kernel pass."""
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        dx = pts[:, 0:1] - self._means[None, :, 0]
        dy = pts[:, 1:2] - self._means[None, :, 1]
        p = self._precs
        p00, p01, p11 = p[:, 0, 0], p[:, 0, 1], p[:, 1, 1]
        q = p00 * dx * dx + 2.0 * p01 * dx * dy + p11 * dy * dy
        k = self._norms * np.exp(-0.5 * q)
        grads = np.empty((pts.shape[0], 2))
        # grad h = sum_i k_i * P_i (mu_i - p)
        np.sum(-k * (p00 * dx + p01 * dy), axis=1, out=grads[:, 0])
        np.sum(-k * (p01 * dx + p11 * dy), axis=1, out=grads[:, 1])
        return k.sum(axis=1), grads

    # -- disk masses ---------------------------------------------------

    def disk_mass_approx(self, center, r: float) -> float:
        """Small-radius disk mass estimate pi r^2 h(center)."""
        if r <= 0.0:
            raise ValueError(f"radius must be > 0, got {r}")
        return math.pi * r * r * self.density(center)

    def disk_mass_quadrature(self, center, r: float, order: int = 8) -> float:
        """Mass of the map inside the disk of radius r about ``center``.

        Polar integration: the radial direction is integrated in closed
        form along each ray (per component the integrand is
        rho * exp(-(a rho^2 + b rho + c)), which reduces to erf terms),
        so only the angular direction is discretized, with 4 * order
        uniformly spaced nodes.  The uniform rule on a smooth periodic
        integrand converges faster than geometrically in ``order``.
        """
        if r <= 0.0:
            raise ValueError(f"radius must be > 0, got {r}")
        if order < 1:
            raise ValueError(f"order must be >= 1, got {order}")
        center = np.asarray(center, dtype=float)
        n_angles = 4 * int(order)
        theta = (np.arange(n_angles) + 0.5) * (TWO_PI / n_angles)
        u = np.stack([np.cos(theta), np.sin(theta)], axis=1)  # (n, 2)
        v = center[None, :] - self._means  # (M, 2)

        a = 0.5 * np.einsum("ni,mij,nj->nm", u, self._precs, u)  # (n, M)
        b = np.einsum("ni,mij,mj->nm", u, self._precs, v)
        c0 = 0.5 * np.einsum("mi,mij,mj->m", v, self._precs, v)[None, :]

        sqrt_a = np.sqrt(a)
        t0 = b / (2.0 * sqrt_a)
        t1 = sqrt_a * r + t0
        # b^2/(4a) - c0 <= 0 by Cauchy-Schwarz, so this never overflows.
        gauss_int = (
            np.exp(t0 * t0 - c0)
            * (math.sqrt(math.pi) / 2.0)
            / sqrt_a
            * (erf(t1) - erf(t0))
        )
        f0 = np.exp(-c0) * np.ones_like(a)
        f1 = np.exp(-(a * r * r + b * r + c0))
        radial = (f0 - f1) / (2.0 * a) - b / (2.0 * a) * gauss_int  # (n, M)

        total = float((radial * self._norms[None, :]).sum()) * (TWO_PI / n_angles)
        return max(total, 0.0)

    # -- geometry helpers ----------------------------------------------

    def bounding_box(self, n_sigma: float = 4.0):
        """Axis-aligned box covering every mean +- n_sigma * sigma_max."""
        lo = np.full(2, np.inf)
        hi = np.full(2, -np.inf)
        for c in self.components:
            sigma_max = math.sqrt(float(np.linalg.eigvalsh(c.cov)[1]))
            lo = np.minimum(lo, c.mean - n_sigma * sigma_max)
            hi = np.maximum(hi, c.mean + n_sigma * sigma_max)
        return lo, hi


def validate(entries) -> list[str]:
    """Report every invariant violation in raw component data.

    ``entries`` is an iterable of (weight, mean, cov) triples; messages
    are prefixed ``components[i]`` so they can be surfaced verbatim by
    file loaders.  Returns an empty list when everything is valid.
    """
    entries = list(entries)
    out: list[str] = []
    if not entries:
        return ["components: must contain at least one component"]
    for i, (w, mean, cov) in enumerate(entries):
        out.extend(component_violations(w, mean, cov, label=f"components[{i}]"))
    return out
