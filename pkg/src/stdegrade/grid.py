"""Regular-grid geometry, time axis, and field containers.

Sites live on a uniform nx-by-ny grid.  Site indices are row-major:
``index = row * nx + col`` with ``x = origin[0] + col * spacing`` and
``y = origin[1] + row * spacing``.  Field values are stored time-major as
``(n_times, ny, nx)`` so per-slice operations touch contiguous memory.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ArgumentError

# 17 significant digits round-trips any IEEE-754 double exactly.
FLOAT_FMT = "%.17g"


@dataclass(frozen=True)
class SpatialGrid:
    """Uniform rectangular grid of nx * ny sites."""

    nx: int
    ny: int
    spacing: float = 1.0
    origin: tuple[float, float] = (0.0, 0.0)

    def __post_init__(self):
        if self.nx < 1 or self.ny < 1:
            raise ArgumentError(f"grid dimensions must be >= 1, got {self.nx}x{self.ny}")
        if not self.spacing > 0:
            raise ArgumentError(f"grid spacing must be > 0, got {self.spacing}")

    @property
    def n_sites(self) -> int:
        return self.nx * self.ny

    def site_index(self, row: int, col: int) -> int:
        if not (0 <= row < self.ny and 0 <= col < self.nx):
            raise ArgumentError(f"(row, col)=({row}, {col}) outside {self.ny}x{self.nx} grid")
        return row * self.nx + col

    def row_col(self, index: int) -> tuple[int, int]:
        if not 0 <= index < self.n_sites:
            raise ArgumentError(f"site index {index} outside [0, {self.n_sites})")
        return divmod(index, self.nx)

    def site_xy(self, index: int) -> tuple[float, float]:
        row, col = self.row_col(index)
        return (self.origin[0] + col * self.spacing, self.origin[1] + row * self.spacing)

    def x_coords(self) -> np.ndarray:
        return self.origin[0] + np.arange(self.nx) * self.spacing

    def y_coords(self) -> np.ndarray:
        return self.origin[1] + np.arange(self.ny) * self.spacing


@dataclass(frozen=True)
class TimeAxis:
    """Discrete, equally spaced sampling times t0, t0+delta, ..."""

    n_times: int
    delta: float = 1.0
    t0: float = 0.0

    def __post_init__(self):
        if self.n_times < 1:
            raise ArgumentError(f"n_times must be >= 1, got {self.n_times}")
        if not self.delta > 0:
            raise ArgumentError(f"time step must be > 0, got {self.delta}")

    def times(self) -> np.ndarray:
        return self.t0 + np.arange(self.n_times) * self.delta


@dataclass(frozen=True)
class FieldSeries:
    """Field values on a grid over discrete times, shape (n_times, ny, nx)."""

    grid: SpatialGrid
    times: TimeAxis
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        expected = (self.times.n_times, self.grid.ny, self.grid.nx)
        if values.shape != expected:
            raise ArgumentError(f"field shape {values.shape} != expected {expected}")
        if not np.all(np.isfinite(values)):
            raise ArgumentError("field values must be finite")
        object.__setattr__(self, "values", values)

    @property
    def n_times(self) -> int:
        return self.times.n_times


def site_distance(grid: SpatialGrid, i: int, j: int) -> float:
    """Euclidean distance between sites i and j."""
    xi, yi = grid.site_xy(i)
    xj, yj = grid.site_xy(j)
    return math.hypot(xj - xi, yj - yi)


def displacement_vector(grid: SpatialGrid, i: int, j: int) -> tuple[float, float]:
    """Displacement s_j - s_i as an (x, y) pair."""
    xi, yi = grid.site_xy(i)
    xj, yj = grid.site_xy(j)
    return (xj - xi, yj - yi)


def distance_matrix(grid: SpatialGrid) -> np.ndarray:
    """Dense n_sites x n_sites matrix of pairwise site distances."""
    cols = np.arange(grid.n_sites) % grid.nx
    rows = np.arange(grid.n_sites) // grid.nx
    dx = (cols[:, None] - cols[None, :]) * grid.spacing
    dy = (rows[:, None] - rows[None, :]) * grid.spacing
    return np.hypot(dx, dy)


def write_field_csv(series: FieldSeries, path) -> None:
    """Write a field as CSV rows ``t,x,y,value`` in row-major site order per slice."""
    grid, times = series.grid, series.times
    xs = grid.x_coords()
    ys = grid.y_coords()
    with open(path, "w") as fh:
        fh.write("t,x,y,value\n")
        for k, t in enumerate(times.times()):
            slab = series.values[k]
            for r in range(grid.ny):
                for c in range(grid.nx):
                    fh.write(
                        f"{FLOAT_FMT % t},{FLOAT_FMT % xs[c]},{FLOAT_FMT % ys[r]},"
                        f"{FLOAT_FMT % slab[r, c]}\n"
                    )


def read_field_csv(path) -> FieldSeries:
    """Read a ``t,x,y,value`` CSV back into a FieldSeries.

    The grid and time axis are inferred from the unique coordinates; the file
    must contain every site at every time exactly once.
    """
    raw = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    if raw.shape[1] != 4:
        raise ArgumentError(f"expected 4 columns t,x,y,value in {path}")
    t_vals = np.unique(raw[:, 0])
    x_vals = np.unique(raw[:, 1])
    y_vals = np.unique(raw[:, 2])
    grid = _grid_from_coords(x_vals, y_vals)
    times = _axis_from_times(t_vals)
    values = np.full((times.n_times, grid.ny, grid.nx), np.nan)
    ti = np.searchsorted(t_vals, raw[:, 0])
    ci = np.searchsorted(x_vals, raw[:, 1])
    ri = np.searchsorted(y_vals, raw[:, 2])
    values[ti, ri, ci] = raw[:, 3]
    if np.any(np.isnan(values)):
        raise ArgumentError(f"{path} does not cover every site at every time")
    return FieldSeries(grid, times, values)


def _grid_from_coords(x_vals: np.ndarray, y_vals: np.ndarray) -> SpatialGrid:
    spacing = _uniform_step(np.concatenate([np.diff(x_vals), np.diff(y_vals)]))
    if spacing is None:
        spacing = 1.0
    return SpatialGrid(len(x_vals), len(y_vals), spacing, (float(x_vals[0]), float(y_vals[0])))


def _axis_from_times(t_vals: np.ndarray) -> TimeAxis:
    delta = _uniform_step(np.diff(t_vals))
    if delta is None:
        delta = 1.0
    return TimeAxis(len(t_vals), delta, float(t_vals[0]))


def _uniform_step(diffs: np.ndarray):
    if diffs.size == 0:
        return None
    step = float(diffs[0])
    if not np.allclose(diffs, step, rtol=1e-9, atol=0.0):
        raise ArgumentError("coordinates are not on a uniform grid")
    return step
