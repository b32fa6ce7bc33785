import numpy as np
import pytest

from volterra_lab.errors import ParameterError
from volterra_lab.noise import (GENERATOR_TAG, BrownianPath, TimeGrid,
                                coarsen_path, derive_path_seed,
                                sample_brownian_increments,
                                sample_increment_block)


def test_generator_tag_frozen():
    assert GENERATOR_TAG == "philox4x64-10/numpy/v1"


def test_time_grid_basics():
    grid = TimeGrid(2.0, 8)
    assert grid.dt == pytest.approx(0.25)
    nodes = grid.nodes()
    assert nodes.shape == (9,)
    assert nodes[0] == 0.0 and nodes[-1] == pytest.approx(2.0)
    with pytest.raises(ParameterError):
        TimeGrid(0.0, 8)
    with pytest.raises(ParameterError):
        TimeGrid(1.0, 0)


def test_derive_path_seed_deterministic_and_spread():
    seeds = [derive_path_seed(42, i) for i in range(1000)]
    assert seeds == [derive_path_seed(42, i) for i in range(1000)]
    assert len(set(seeds)) == 1000
    assert derive_path_seed(42, 0) != derive_path_seed(43, 0)


def test_same_seed_same_path():
    grid = TimeGrid(1.0, 64)
    a = sample_brownian_increments(grid, 7)
    b = sample_brownian_increments(grid, 7)
    assert np.array_equal(a.increments, b.increments)
    c = sample_brownian_increments(grid, 8)
    assert not np.array_equal(a.increments, c.increments)


def test_block_matches_individual_paths():
    grid = TimeGrid(1.0, 32)
    block = sample_increment_block(grid, 42, 5, 6)
    for i in range(6):
        solo = sample_brownian_increments(grid, derive_path_seed(42, 5 + i))
        assert np.array_equal(block[i], solo.increments)


def test_block_chunking_invariance():
    grid = TimeGrid(1.0, 16)
    whole = sample_increment_block(grid, 9, 0, 20)
    parts = np.vstack([sample_increment_block(grid, 9, k, 4)
                       for k in range(0, 20, 4)])
    assert np.array_equal(whole, parts)


def test_increment_moments():
    grid = TimeGrid(1.0, 1024)
    path = sample_brownian_increments(grid, 123)
    var = np.var(path.increments)
    assert abs(var - grid.dt) < 5.0 * grid.dt / np.sqrt(grid.n_steps)


def test_coarsen_sums_increments():
    grid = TimeGrid(1.0, 16)
    path = sample_brownian_increments(grid, 3)
    coarse = coarsen_path(path, 4)
    assert coarse.grid.n_steps == 4
    assert np.allclose(coarse.increments,
                       path.increments.reshape(4, 4).sum(axis=1))
    # total displacement is preserved
    assert coarse.increments.sum() == pytest.approx(path.increments.sum())
    assert coarsen_path(path, 1) is path
    with pytest.raises(ParameterError):
        coarsen_path(path, 3)


def test_brownian_path_shape_check():
    grid = TimeGrid(1.0, 8)
    with pytest.raises(ParameterError):
        BrownianPath(grid=grid, increments=np.zeros(7), seed=0)
