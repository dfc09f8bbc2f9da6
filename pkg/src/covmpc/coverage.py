"""Grid-based coverage evaluation.

The quality of a mission is the uncertainty volume swallowed by the
union of all observation disks visited so far.  The union integral has
no closed form, so it is evaluated on a raster: a cell counts as
covered once its center falls strictly inside any visited disk, and the
covered volume is the sum of cell-center densities times cell area.

Masks only ever gain cells, so the covered-volume series is monotone by
construction and can be maintained incrementally (one disk stamp per
step instead of recomputing the union).
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .gmm_map import UncertaintyMap


@dataclass(frozen=True)
class GridSpec:
    """Uniform raster: lower-left origin, square cells, width x height."""

    origin: np.ndarray
    cell_size: float
    width: int
    height: int

    def __post_init__(self):
        if self.cell_size <= 0.0:
            raise ValueError(f"cell_size must be > 0, got {self.cell_size}")
        if self.width < 1 or self.height < 1:
            raise ValueError("grid must contain at least one cell")
        origin = np.asarray(self.origin, dtype=float).reshape(2)
        origin.setflags(write=False)
        object.__setattr__(self, "origin", origin)

    @classmethod
    def cover(cls, lo, hi, cell_size: float, margin: float = 0.0) -> "GridSpec":
        """Smallest grid of the given cell size containing [lo, hi] + margin."""
        lo = np.asarray(lo, dtype=float) - margin
        hi = np.asarray(hi, dtype=float) + margin
        span = np.maximum(hi - lo, cell_size)
        width = int(np.ceil(span[0] / cell_size))
        height = int(np.ceil(span[1] / cell_size))
        return cls(origin=lo, cell_size=cell_size, width=width, height=height)

    def cell_centers(self) -> np.ndarray:
        """All cell centers, shape (width * height, 2), x-major order."""
        ix = np.arange(self.width)
        iy = np.arange(self.height)
        cx = self.origin[0] + (ix + 0.5) * self.cell_size
        cy = self.origin[1] + (iy + 0.5) * self.cell_size
        gx, gy = np.meshgrid(cx, cy, indexing="ij")
        return np.stack([gx.ravel(), gy.ravel()], axis=1)


def grid_for_mission(umap: UncertaintyMap, trajectory, r: float,
                     cell_size: float, n_sigma: float = 4.0) -> GridSpec:
    """Grid covering the map's mass and the flown disks.

    The box is the union of every component mean +- n_sigma * sigma_max
    and the trajectory extent inflated by the observation radius, padded
    by one extra cell.
    """
    lo, hi = umap.bounding_box(n_sigma)
    trajectory = np.atleast_2d(np.asarray(trajectory, dtype=float))
    if trajectory.size:
        lo = np.minimum(lo, trajectory.min(axis=0) - r)
        hi = np.maximum(hi, trajectory.max(axis=0) + r)
    return GridSpec.cover(lo, hi, cell_size, margin=cell_size)


class CoverageMask:
    """Boolean raster of covered cells over a GridSpec.

    Bits only flip False -> True; ``stamp`` returns the newly covered
    cell centers so the covered volume can be updated incrementally.
    """

    def __init__(self, grid: GridSpec):
        self.grid = grid
        self.covered = np.zeros((grid.width, grid.height), dtype=bool)

    def count(self) -> int:
        return int(self.covered.sum())

    def stamp(self, center, r: float) -> np.ndarray:
        """Mark every cell whose center lies strictly within r of ``center``.

        Idempotent.  Returns the centers of newly covered cells, shape
        (K, 2); warns and does nothing when the disk misses the grid.
        """
        if r <= 0.0:
            raise ValueError(f"radius must be > 0, got {r}")
        g = self.grid
        center = np.asarray(center, dtype=float)
        ix0 = int(np.floor((center[0] - r - g.origin[0]) / g.cell_size - 0.5))
        ix1 = int(np.ceil((center[0] + r - g.origin[0]) / g.cell_size - 0.5))
        iy0 = int(np.floor((center[1] - r - g.origin[1]) / g.cell_size - 0.5))
        iy1 = int(np.ceil((center[1] + r - g.origin[1]) / g.cell_size - 0.5))
        ix0, ix1 = max(ix0, 0), min(ix1, g.width - 1)
        iy0, iy1 = max(iy0, 0), min(iy1, g.height - 1)
        if ix0 > ix1 or iy0 > iy1:
            warnings.warn(
                f"observation disk at {center} lies outside the coverage grid",
                stacklevel=2,
            )
            return np.empty((0, 2))
        cx = g.origin[0] + (np.arange(ix0, ix1 + 1) + 0.5) * g.cell_size
        cy = g.origin[1] + (np.arange(iy0, iy1 + 1) + 0.5) * g.cell_size
        dx2 = (cx - center[0]) ** 2
        dy2 = (cy - center[1]) ** 2
        inside = dx2[:, None] + dy2[None, :] < r * r
        window = self.covered[ix0:ix1 + 1, iy0:iy1 + 1]
        fresh = inside & ~window
        window |= inside
        if not fresh.any():
            return np.empty((0, 2))
        fx, fy = np.nonzero(fresh)
        return np.stack([cx[fx], cy[fy]], axis=1)

    def covered_centers(self) -> np.ndarray:
        fx, fy = np.nonzero(self.covered)
        g = self.grid
        return np.stack(
            [
                g.origin[0] + (fx + 0.5) * g.cell_size,
                g.origin[1] + (fy + 0.5) * g.cell_size,
            ],
            axis=1,
        )


def stamp_disk(mask: CoverageMask, center, r: float) -> CoverageMask:
    """Stamp one observation disk into the mask (in place) and return it."""
    mask.stamp(center, r)
    return mask


def coverage_volume(mask: CoverageMask, umap: UncertaintyMap) -> float:
    """Uncertainty volume over the covered cells: sum h(center) * cell^2."""
    centers = mask.covered_centers()
    if centers.shape[0] == 0:
        return 0.0
    cell_area = mask.grid.cell_size ** 2
    return float(np.sum(umap.density(centers))) * cell_area


def coverage_series(positions, umap: UncertaintyMap, grid: GridSpec, r: float) -> np.ndarray:
    """Covered volume after each visited position (prefix unions).

    ``positions`` is the sequence of vehicle positions, one per sampling
    instant; element k of the result integrates the density over the
    union of the first k+1 disks.  Monotone non-decreasing.
    """
    positions = np.atleast_2d(np.asarray(positions, dtype=float))
    mask = CoverageMask(grid)
    cell_area = grid.cell_size ** 2
    out = np.empty(positions.shape[0])
    total = 0.0
    for k, p in enumerate(positions):
        fresh = mask.stamp(p, r)
        if fresh.shape[0]:
            total += float(np.sum(umap.density(fresh))) * cell_area
        out[k] = total
    return out
