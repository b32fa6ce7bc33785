"""Seeded Brownian increments on uniform grids.

Reproducibility contract (tag: ``philox4x64-10/numpy/v1``): increments are
drawn from ``numpy.random.Generator`` backed by the counter-based Philox
bit generator, keyed directly by a 64-bit seed, so a (seed, grid) pair
yields the same bytes on every platform and run for a fixed numpy major
version.  Per-path seeds are derived from a master seed with a splitmix64
mix, which is bijective in the path index, hence collision-free.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ParameterError

__all__ = [
    "GENERATOR_TAG",
    "TimeGrid",
    "BrownianPath",
    "sample_brownian_increments",
    "derive_path_seed",
    "sample_increment_block",
    "coarsen_path",
]

GENERATOR_TAG = "philox4x64-10/numpy/v1"

_MASK64 = (1 << 64) - 1
_GOLDEN = 0x9E3779B97F4A7C15


@dataclass(frozen=True)
class TimeGrid:
    """Uniform grid on ``[0, t_end]`` with ``n_steps`` steps."""

    t_end: float
    n_steps: int

    def __post_init__(self):
        if not (isinstance(self.n_steps, (int, np.integer)) and self.n_steps >= 1):
            raise ParameterError(f"n_steps must be a positive integer; got {self.n_steps!r}")
        if not float(self.t_end) > 0.0:
            raise ParameterError(f"t_end must be positive; got {self.t_end!r}")
        object.__setattr__(self, "t_end", float(self.t_end))
        object.__setattr__(self, "n_steps", int(self.n_steps))

    @property
    def dt(self) -> float:
        return self.t_end / self.n_steps

    def nodes(self) -> np.ndarray:
        return np.linspace(0.0, self.t_end, self.n_steps + 1)


@dataclass(frozen=True)
class BrownianPath:
    """Brownian increments over a grid, tagged with the seed that made them."""

    grid: TimeGrid
    increments: np.ndarray
    seed: int

    def __post_init__(self):
        inc = np.asarray(self.increments, dtype=float)
        if inc.shape != (self.grid.n_steps,):
            raise ParameterError(
                f"increments must have shape ({self.grid.n_steps},); got {inc.shape}"
            )
        inc = inc.copy()
        inc.setflags(write=False)
        object.__setattr__(self, "increments", inc)

    def values(self) -> np.ndarray:
        """Path values at the grid nodes (starting from 0)."""
        out = np.empty(self.grid.n_steps + 1)
        out[0] = 0.0
        np.cumsum(self.increments, out=out[1:])
        return out


def derive_path_seed(master_seed: int, path_index: int) -> int:
    """Derive a per-path 64-bit seed from a master seed.

    splitmix64 mix of ``master + (index + 1) * golden``; bijective in the
    index for a fixed master seed, so derived seeds never collide.
    """
    if path_index < 0:
        raise ParameterError(f"path_index must be >= 0; got {path_index!r}")
    z = (int(master_seed) + (int(path_index) + 1) * _GOLDEN) & _MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    return (z ^ (z >> 31)) & _MASK64


def _generator(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(key=int(seed) & _MASK64))


def sample_brownian_increments(grid: TimeGrid, seed: int) -> BrownianPath:
    """Draw ``N(0, dt)`` increments for ``grid`` from the Philox stream ``seed``."""
    rng = _generator(seed)
    inc = rng.standard_normal(grid.n_steps) * np.sqrt(grid.dt)
    return BrownianPath(grid=grid, increments=inc, seed=int(seed) & _MASK64)


def sample_increment_block(grid: TimeGrid, master_seed: int,
                           first_path: int, n_paths: int) -> np.ndarray:
    """Increments for paths ``first_path .. first_path + n_paths - 1``.

    Row ``i`` equals ``sample_brownian_increments(grid,
    derive_path_seed(master_seed, first_path + i)).increments``: block
    boundaries never change what any individual path looks like.
    """
    if n_paths < 1:
        raise ParameterError(f"n_paths must be >= 1; got {n_paths!r}")
    out = np.empty((n_paths, grid.n_steps))
    root = np.sqrt(grid.dt)
    for i in range(n_paths):
        rng = _generator(derive_path_seed(master_seed, first_path + i))
        out[i] = rng.standard_normal(grid.n_steps)
    out *= root
    return out


def coarsen_path(path: BrownianPath, factor: int) -> BrownianPath:
    """Restrict a path to a grid coarser by ``factor`` by summing increments.

    The result is the same Brownian path seen on the coarser grid, which is
    what shared-noise refinement comparisons require.
    """
    if factor < 1 or path.grid.n_steps % factor != 0:
        raise ParameterError(
            f"factor must divide n_steps = {path.grid.n_steps}; got {factor!r}"
        )
    if factor == 1:
        return path
    coarse = TimeGrid(path.grid.t_end, path.grid.n_steps // factor)
    inc = path.increments.reshape(-1, factor).sum(axis=1)
    return BrownianPath(grid=coarse, increments=inc, seed=path.seed)
