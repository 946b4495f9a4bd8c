"""World distributions: training sampler, the valid-execution rejection
heuristic, and the tiny-grid space the brute-force input search enumerates."""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from .machine import FACINGS, MAX_MARKERS, WALL, KarelWorld, execute, coverage_score

ORACLE_MAX_SIDE = 4  # 3 cell states ** 16 cells is the enumeration ceiling


@dataclass(frozen=True)
class WorldConfig:
    grid_side: int = 8
    wall_density: float = 0.15
    marker_density: float = 0.1
    max_marker_count: int = 3

    def validate(self):
        if self.grid_side < 1:
            raise ValueError(f"grid_side must be >= 1, got {self.grid_side}")
        if not (0.0 <= self.wall_density < 1.0):
            raise ValueError(f"wall_density must be in [0, 1), got {self.wall_density}")
        if not (0.0 <= self.marker_density <= 1.0):
            raise ValueError(f"marker_density must be in [0, 1], got {self.marker_density}")
        if not (1 <= self.max_marker_count <= MAX_MARKERS):
            raise ValueError(
                f"max_marker_count must be in 1..{MAX_MARKERS}, got {self.max_marker_count}"
            )
        return self


def sample_world(config, seed):
    """Random world: iid walls, iid marker piles on open cells, hero uniform
    over open cells (its cell is cleared of markers so every sampled world is
    exactly representable as grid tokens)."""
    config.validate()
    rng = np.random.default_rng(seed)
    side = config.grid_side
    grid = np.where(rng.random((side, side)) < config.wall_density, WALL, 0).astype(np.int8)
    if (grid == WALL).all():
        # a hero cell must exist; improbable draw, forced open
        grid[rng.integers(side), rng.integers(side)] = 0
    open_cells = np.argwhere(grid != WALL)
    marker_roll = rng.random(len(open_cells)) < config.marker_density
    counts = rng.integers(1, config.max_marker_count + 1, size=len(open_cells))
    for (r, c), has, k in zip(open_cells, marker_roll, counts):
        if has:
            grid[r, c] = k
    hr, hc = open_cells[rng.integers(len(open_cells))]
    grid[hr, hc] = 0
    facing = FACINGS[rng.integers(4)]
    return KarelWorld(grid, (int(hr), int(hc)), facing)


def valid_execution_heuristic(program, config, seed, max_tries=50):
    """Resample worlds until one executes without a runtime fault; if none of
    max_tries does, return the try with the best single-input coverage."""
    if max_tries < 1:
        raise ValueError(f"max_tries must be >= 1, got {max_tries}")
    rng = np.random.default_rng(seed)
    best = None
    best_score = -1.0
    for _ in range(max_tries):
        world = sample_world(config, rng.integers(2**62))
        report = execute(program, world)
        if report.error is None:
            return world
        score = coverage_score(report)
        if score > best_score:
            best, best_score = world, score
    return best


class _WorldSpace:
    """All worlds on a tiny grid with cells in {wall, empty, one marker}, the
    hero on any open cell, any facing. `size` is the 3**cells * cells * 4
    upper bound; the generator skips hero-on-wall placements."""

    def __init__(self, side):
        self.side = side
        self.size = (3 ** (side * side)) * side * side * 4

    def all_worlds(self):
        side = self.side
        cells = side * side
        for values in itertools.product((WALL, 0, 1), repeat=cells):
            grid = np.array(values, dtype=np.int8).reshape(side, side)
            for idx in range(cells):
                r, c = divmod(idx, side)
                if grid[r, c] == WALL:
                    continue
                for facing in FACINGS:
                    yield KarelWorld(grid, (r, c), facing)


def enumerate_worlds(grid_side):
    if not (1 <= grid_side <= ORACLE_MAX_SIDE):
        raise ValueError(
            f"grid_side must be in 1..{ORACLE_MAX_SIDE} to enumerate, got {grid_side}"
        )
    return _WorldSpace(grid_side)


def sample_oracle_world(grid_side, rng):
    """One draw from the enumeration space: per-cell wall 0.2 / marker 0.25 /
    empty 0.55, hero uniform over open cells."""
    side = grid_side
    roll = rng.random((side, side))
    grid = np.zeros((side, side), dtype=np.int8)
    grid[roll < 0.2] = WALL
    grid[(roll >= 0.2) & (roll < 0.45)] = 1
    if (grid == WALL).all():
        grid[rng.integers(side), rng.integers(side)] = 0
    open_cells = np.argwhere(grid != WALL)
    r, c = open_cells[rng.integers(len(open_cells))]
    return KarelWorld(grid, (int(r), int(c)), FACINGS[rng.integers(4)])
