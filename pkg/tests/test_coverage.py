"""Tests for the grid-based coverage metric."""
import math

import numpy as np
import pytest

from covmpc import (
    CoverageMask,
    GaussianComponent,
    GridSpec,
    UncertaintyMap,
    coverage_series,
    coverage_volume,
    stamp_disk,
)
from covmpc.coverage import grid_for_mission


def unit_map(sigma=1.0, mean=(0.0, 0.0)) -> UncertaintyMap:
    return UncertaintyMap(
        [GaussianComponent(1.0, np.asarray(mean, float), sigma**2 * np.eye(2))]
    )


def centered_grid(half_extent: float, cell: float) -> GridSpec:
    return GridSpec.cover([-half_extent, -half_extent], [half_extent, half_extent], cell)


class TestStampDisk:
    def test_tiny_disk_at_most_one_cell(self):
        grid = centered_grid(2.0, 0.5)
        mask = CoverageMask(grid)
        mask.stamp([0.3, 0.3], 0.05)
        assert mask.count() <= 1

    def test_cell_count_approximates_disk_area(self):
        cell = 0.1
        r = 1.0  # spans 10 cells per side
        grid = centered_grid(2.0, cell)
        mask = CoverageMask(grid)
        mask.stamp([0.0, 0.0], r)
        expected = math.pi * r * r / cell**2
        assert mask.count() == pytest.approx(expected, rel=0.05)

    def test_idempotent(self):
        grid = centered_grid(2.0, 0.1)
        mask = CoverageMask(grid)
        fresh1 = mask.stamp([0.2, -0.1], 0.7)
        count1 = mask.count()
        fresh2 = mask.stamp([0.2, -0.1], 0.7)
        assert mask.count() == count1
        assert fresh1.shape[0] == count1
        assert fresh2.shape[0] == 0

    def test_disk_outside_grid_warns_and_noop(self):
        grid = centered_grid(1.0, 0.1)
        mask = CoverageMask(grid)
        with pytest.warns(UserWarning, match="outside"):
            mask.stamp([50.0, 50.0], 0.5)
        assert mask.count() == 0

    def test_module_level_wrapper_returns_mask(self):
        grid = centered_grid(1.0, 0.1)
        mask = CoverageMask(grid)
        out = stamp_disk(mask, [0.0, 0.0], 0.3)
        assert out is mask
        assert mask.count() > 0

    def test_strict_interior_membership(self):
        # A cell center exactly at distance r is not covered.
        grid = GridSpec(origin=np.array([0.0, 0.0]), cell_size=1.0, width=3, height=1)
        mask = CoverageMask(grid)
        # centers at x = 0.5, 1.5, 2.5; disk at (0.5, 0.5) with r = 1.0
        mask.stamp([0.5, 0.5], 1.0)
        assert mask.covered[0, 0]
        assert not mask.covered[1, 0]


class TestCoverageVolume:
    def test_empty_mask(self):
        mask = CoverageMask(centered_grid(2.0, 0.1))
        assert coverage_volume(mask, unit_map()) == 0.0

    def test_full_grid_captures_total_mass(self):
        umap = unit_map(sigma=1.0)
        grid = centered_grid(6.0, 0.05)
        mask = CoverageMask(grid)
        mask.covered[:, :] = True
        assert coverage_volume(mask, umap) == pytest.approx(1.0, abs=1e-3)

    def test_three_sigma_disk_mass(self):
        sigma = 0.5
        umap = unit_map(sigma=sigma)
        r = 3.0 * sigma
        grid = centered_grid(2.0, r / 100.0)
        mask = CoverageMask(grid)
        mask.stamp([0.0, 0.0], r)
        expected = 1.0 - math.exp(-4.5)
        assert coverage_volume(mask, umap) == pytest.approx(expected, abs=2e-3)

    def test_weight_scaling(self):
        umap = unit_map()
        grid = centered_grid(3.0, 0.1)
        mask = CoverageMask(grid)
        mask.stamp([0.4, 0.0], 0.8)
        base = coverage_volume(mask, umap)
        assert coverage_volume(mask, umap.scaled(2.5)) == pytest.approx(
            2.5 * base, rel=1e-12
        )


class TestCoverageSeries:
    def test_stationary_trajectory_constant_after_first(self):
        umap = unit_map()
        grid = centered_grid(3.0, 0.05)
        positions = np.tile([0.3, 0.2], (20, 1))
        series = coverage_series(positions, umap, grid, r=0.5)
        assert series[0] > 0.0
        assert np.all(series[1:] == series[0])

    def test_monotone_nondecreasing(self):
        rng = np.random.default_rng(5)
        umap = unit_map(sigma=2.0)
        positions = np.cumsum(rng.uniform(-0.4, 0.5, size=(60, 2)), axis=0)
        grid = grid_for_mission(umap, positions, r=0.5, cell_size=0.05)
        series = coverage_series(positions, umap, grid, r=0.5)
        assert np.all(np.diff(series) >= 0.0)

    def test_end_matches_final_mask_volume(self):
        rng = np.random.default_rng(6)
        umap = unit_map(sigma=1.5)
        positions = rng.uniform(-2, 2, size=(25, 2))
        grid = centered_grid(8.0, 0.1)
        series = coverage_series(positions, umap, grid, r=0.6)
        mask = CoverageMask(grid)
        for p in positions:
            mask.stamp(p, 0.6)
        assert series[-1] == pytest.approx(coverage_volume(mask, umap), rel=1e-9)

    def test_bounded_by_total_weight(self):
        rng = np.random.default_rng(7)
        umap = unit_map(sigma=0.8)
        positions = rng.uniform(-3, 3, size=(80, 2))
        grid = centered_grid(6.0, 0.05)
        series = coverage_series(positions, umap, grid, r=1.0)
        assert np.all(series <= umap.total_weight + 1e-3)

    def test_grid_refinement_converges(self):
        rng = np.random.default_rng(8)
        umap = unit_map(sigma=1.5)
        steps = rng.uniform(-0.3, 0.4, size=(60, 2))
        positions = np.cumsum(steps, axis=0)
        r = 0.8
        vals = []
        for cell in (r / 10.0, r / 20.0):
            grid = grid_for_mission(umap, positions, r, cell)
            vals.append(coverage_series(positions, umap, grid, r)[-1])
        assert abs(vals[1] - vals[0]) / vals[1] < 0.005

    def test_translation_invariance(self):
        rng = np.random.default_rng(9)
        positions = rng.uniform(-1, 1, size=(30, 2))
        umap = unit_map(sigma=1.2, mean=(0.3, -0.2))
        shift = np.array([250.0, -40.0])
        moved_map = UncertaintyMap(
            [
                GaussianComponent(c.weight, c.mean + shift, c.cov)
                for c in umap.components
            ]
        )
        grid = centered_grid(4.0, 0.1)
        moved_grid = GridSpec(
            origin=grid.origin + shift,
            cell_size=grid.cell_size,
            width=grid.width,
            height=grid.height,
        )
        base = coverage_series(positions, umap, grid, r=0.7)
        moved = coverage_series(positions + shift, moved_map, moved_grid, r=0.7)
        assert np.allclose(moved, base, rtol=1e-12)


class TestGridSpec:
    def test_cover_contains_box(self):
        g = GridSpec.cover([-1.2, 0.3], [4.5, 2.2], 0.25)
        assert g.origin[0] <= -1.2 and g.origin[1] <= 0.3
        assert g.origin[0] + g.width * g.cell_size >= 4.5
        assert g.origin[1] + g.height * g.cell_size >= 2.2

    def test_mission_grid_covers_map_and_path(self):
        umap = unit_map(sigma=2.0, mean=(10.0, 10.0))
        trajectory = np.array([[0.0, 0.0], [20.0, 5.0]])
        g = grid_for_mission(umap, trajectory, r=1.0, cell_size=0.2)
        assert g.origin[0] <= -1.0
        assert g.origin[0] + g.width * g.cell_size >= 21.0
        lo, hi = umap.bounding_box(4.0)
        assert g.origin[0] <= lo[0] and g.origin[1] <= lo[1]

    def test_validation(self):
        with pytest.raises(ValueError):
            GridSpec(origin=np.zeros(2), cell_size=0.0, width=5, height=5)
        with pytest.raises(ValueError):
            GridSpec(origin=np.zeros(2), cell_size=0.1, width=0, height=5)
