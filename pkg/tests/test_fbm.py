import math

import numpy as np
import pytest

from fbmgame.fbm import (
    CovarianceSpec,
    FbmPath,
    HurstExponent,
    TimeGrid,
    autocov,
    coarsen_increments,
    generate_from_covariance,
    generate_increment_matrix,
    generate_paths,
    increments,
    memory_kernel,
)


class TestHurstExponent:
    def test_accepts_open_interval(self):
        assert float(HurstExponent(0.75)) == 0.75

    @pytest.mark.parametrize("bad", [0.5, 1.0, 0.2, 1.3])
    def test_rejects_outside(self, bad):
        with pytest.raises(ValueError):
            HurstExponent(bad)


class TestTimeGrid:
    def test_points_and_delta(self):
        grid = TimeGrid(2.0, 4)
        assert grid.delta == 0.5
        assert np.allclose(grid.points, [0.0, 0.5, 1.0, 1.5, 2.0])

    def test_index_snapping(self):
        grid = TimeGrid(1.0, 256)
        assert grid.index_of(0.25) == 64
        assert grid.index_of(0.25 + 1e-12) == 64

    def test_index_rejects_off_grid(self):
        grid = TimeGrid(1.0, 256)
        with pytest.raises(ValueError):
            grid.index_of(0.2501)

    def test_refine_doubles(self):
        grid = TimeGrid(1.0, 8)
        assert grid.refine().cells == 16
        assert grid.refine().horizon == 1.0

    def test_validation(self):
        with pytest.raises(ValueError):
            TimeGrid(0.0, 8)
        with pytest.raises(ValueError):
            TimeGrid(1.0, 0)


class TestAutocov:
    def test_variance_is_power_law(self):
        assert autocov(1.0, 1.0, 0.75) == 1.0
        assert math.isclose(autocov(0.5, 0.5, 0.75), 0.5**1.5)

    def test_frozen_interior_value(self):
        # evaluated from the covariance power law by hand
        assert math.isclose(autocov(0.25, 1.0, 0.75), 0.2377404735808355, rel_tol=1e-15)

    def test_brownian_case_is_minimum(self):
        assert math.isclose(autocov(0.3, 0.8, 0.5), 0.3)

    def test_symmetry(self):
        assert autocov(0.2, 0.9, 0.8) == autocov(0.9, 0.2, 0.8)


class TestMemoryKernel:
    def test_value(self):
        h = 0.75
        expected = h * (2 * h - 1) * 0.5 ** (2 * h - 2)
        assert math.isclose(memory_kernel(0.25, 0.75, h), expected)

    def test_diagonal_diverges(self):
        with pytest.raises(ValueError):
            memory_kernel(0.5, 0.5, 0.75)


class TestGeneration:
    @pytest.mark.parametrize("method", ["cholesky", "circulant"])
    def test_deterministic(self, method):
        grid = TimeGrid(1.0, 64)
        a = generate_increment_matrix(grid, 0.75, 8, seed=7, method=method)
        b = generate_increment_matrix(grid, 0.75, 8, seed=7, method=method)
        assert np.array_equal(a, b)

    def test_streams_differ(self):
        grid = TimeGrid(1.0, 64)
        a = generate_increment_matrix(grid, 0.75, 4, seed=7, base_stream=0)
        b = generate_increment_matrix(grid, 0.75, 4, seed=7, base_stream=1)
        assert not np.array_equal(a, b)

    @pytest.mark.parametrize("method", ["cholesky", "circulant"])
    def test_covariance_within_mc_error(self, method):
        grid = TimeGrid(1.0, 32)
        incr = generate_increment_matrix(grid, 0.75, 4000, seed=11, method=method)
        values = np.cumsum(incr, axis=1)
        i, j = grid.index_of(0.5) - 1, grid.index_of(1.0) - 1
        prods = values[:, i] * values[:, j]
        target = autocov(0.5, 1.0, 0.75)
        stderr = prods.std() / math.sqrt(len(prods))
        assert abs(prods.mean() - target) <= 4 * stderr

    def test_brownian_exponent_supported_for_synthesis(self):
        grid = TimeGrid(1.0, 32)
        incr = generate_increment_matrix(grid, 0.5, 2000, seed=5)
        values = np.cumsum(incr, axis=1)
        prods = values[:, 15] * values[:, 31]
        stderr = prods.std() / math.sqrt(len(prods))
        assert abs(prods.mean() - grid.points[16]) <= 4 * stderr

    def test_paths_start_at_zero(self):
        grid = TimeGrid(1.0, 16)
        paths = generate_paths(grid, 0.75, 3, seed=1)
        assert len(paths) == 3
        for p in paths:
            assert p.values[0] == 0.0
            assert p.values.shape == (17,)

    def test_increments_roundtrip(self):
        grid = TimeGrid(1.0, 16)
        (path,) = generate_paths(grid, 0.75, 1, seed=1)
        assert np.allclose(np.cumsum(increments(path)), path.values[1:])

    def test_coarsening_preserves_path_values(self):
        grid = TimeGrid(1.0, 64)
        fine = generate_increment_matrix(grid, 0.75, 6, seed=3)
        coarse = coarsen_increments(fine)
        assert coarse.shape == (6, 32)
        # the coarse path visits exactly the fine path's even-index values
        assert np.allclose(np.cumsum(coarse, axis=1), np.cumsum(fine, axis=1)[:, 1::2])

    def test_path_shape_validation(self):
        grid = TimeGrid(1.0, 8)
        with pytest.raises(ValueError):
            FbmPath(grid=grid, hurst=0.75, values=np.zeros(5), seed=0, stream=0)


class TestGeneralCovariance:
    def test_brownian_spec(self):
        spec = CovarianceSpec(fn=lambda s, t: np.minimum(s, t), label="brownian")
        grid = TimeGrid(1.0, 16)
        paths = generate_from_covariance(spec, grid, 2000, seed=13)
        values = np.stack([p.values for p in paths])
        est = (values[:, 8] * values[:, 16]).mean()
        assert abs(est - 0.5) < 0.1

    def test_indefinite_covariance_rejected(self):
        # covariance of opposite sign off the diagonal with zero diagonal
        # cannot be a Gram matrix
        spec = CovarianceSpec(fn=lambda s, t: -np.abs(s - t), label="bad")
        grid = TimeGrid(1.0, 4)
        with pytest.raises(ValueError, match="not positive semidefinite"):
            generate_from_covariance(spec, grid, 2, seed=1)
