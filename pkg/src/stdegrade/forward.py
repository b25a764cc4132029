"""Forward simulation of the degradation field and its linear representation.

The recursion advances one step at a time:

    Y(., t) = g(., t) + zeta * (omega * Y(., t - delta)) + eps(., t)

with g the covariate-driven generation x0(s,t) beta^T, omega the propagation
kernel, zeta = exp(-lam*delta) and eps a white-in-time Gaussian field.  The
truncated series mean and the convolved design matrix unroll the same
recursion into a linear form in beta.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .covariance import SpatialCovModel, build_cov_matrix, sample_field
from .errors import ArgumentError, DomainError
from .grid import FLOAT_FMT, FieldSeries, SpatialGrid, TimeAxis
from .kernel import (
    BoundaryMode,
    DiscreteKernel,
    KernelSpec,
    PropagationParams,
    convolve_stack,
    discretize,
    kernel_spec,
)

TAIL_TOLERANCE = 1e-6  # default series truncation keeps exp(-n*lam*delta) below this
TRUNCATION_CAP_FACTOR = 10  # ... capped at this multiple of the number of times


@dataclass(frozen=True)
class ModelParams:
    """Full parameter set: propagation, spatial covariance, and coefficients."""

    prop: PropagationParams
    spat: SpatialCovModel
    beta: np.ndarray

    def __post_init__(self):
        beta = np.atleast_1d(np.asarray(self.beta, dtype=float))
        if beta.ndim != 1:
            raise ArgumentError("beta must be a coefficient vector")
        object.__setattr__(self, "beta", beta)

    @property
    def k(self) -> int:
        return self.beta.size


@dataclass(frozen=True)
class CovariateSeries:
    """Covariate fields x0(s, t), stored as (n_times, k, ny, nx)."""

    grid: SpatialGrid
    times: TimeAxis
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        if values.ndim != 4:
            raise ArgumentError(f"covariates must be (n_times, k, ny, nx), got {values.shape}")
        expected = (self.times.n_times, values.shape[1], self.grid.ny, self.grid.nx)
        if values.shape != expected:
            raise ArgumentError(f"covariate shape {values.shape} != expected {expected}")
        if not np.all(np.isfinite(values)):
            raise ArgumentError("covariate values must be finite")
        object.__setattr__(self, "values", values)

    @property
    def k(self) -> int:
        return self.values.shape[1]

    @property
    def n_times(self) -> int:
        return self.times.n_times


def constant_covariates(grid: SpatialGrid, times: TimeAxis, value: float = 1.0) -> CovariateSeries:
    """Single covariate identically equal to ``value`` everywhere."""
    vals = np.full((times.n_times, 1, grid.ny, grid.nx), float(value))
    return CovariateSeries(grid, times, vals)


@dataclass(frozen=True)
class DesignMatrix:
    """Convolved covariates stacked t-major, site-minor: (Ns*Nt, k)."""

    values: np.ndarray = field(repr=False)
    n_terms: int
    grid: SpatialGrid
    times: TimeAxis


def _generation(cov: CovariateSeries, beta: np.ndarray, t_index: int) -> np.ndarray:
    """x0(., t) beta^T as a (ny, nx) slice."""
    return np.einsum("kyx,k->yx", cov.values[t_index], beta)


def _grid_kernel(
    prop: PropagationParams,
    delta: float,
    grid: SpatialGrid,
    truncation_sigmas: float,
) -> DiscreteKernel:
    # cap runaway windows at 4x the grid extent; the floor keeps ordinary
    # kernels usable on very small grids (convolution clips taps exactly)
    cap = max(4 * max(grid.nx, grid.ny), 33)
    spec = kernel_spec(prop, delta)
    return discretize(spec, grid.spacing, truncation_sigmas, max_size=cap)


def simulate(
    params: ModelParams,
    cov: CovariateSeries,
    grid: SpatialGrid,
    times: TimeAxis,
    initial: np.ndarray,
    rng: np.random.Generator,
    boundary: BoundaryMode | str = BoundaryMode.ZERO,
    truncation_sigmas: float = 4.0,
) -> FieldSeries:
    """Simulate the field forward from an initial slice.

    The first slice of the output is the initial condition; each later slice
    adds generation, propagated previous state, and a fresh noise draw.
    """
    initial = np.asarray(initial, dtype=float)
    if initial.shape != (grid.ny, grid.nx):
        raise ArgumentError(f"initial shape {initial.shape} != {(grid.ny, grid.nx)}")
    if not np.all(np.isfinite(initial)):
        raise ArgumentError("initial slice must be finite")
    if cov.k != params.k:
        raise ArgumentError(f"{cov.k} covariates but {params.k} coefficients")
    if cov.n_times < times.n_times:
        raise ArgumentError("covariate series shorter than the requested time axis")
    kern = _grid_kernel(params.prop, times.delta, grid, truncation_sigmas)
    weight = params.prop.weight(times.delta)
    noise = build_cov_matrix(params.spat, grid, times.delta)
    values = np.empty((times.n_times, grid.ny, grid.nx))
    values[0] = initial
    for t in range(1, times.n_times):
        propagated = convolve_stack(values[t - 1 : t], kern, boundary)[0]
        values[t] = _generation(cov, params.beta, t) + weight * propagated + sample_field(noise, rng)
    return FieldSeries(grid, times, values)


def default_truncation(prop: PropagationParams, delta: float, n_times: int) -> int:
    """Smallest n with exp(-n*lam*delta) below tolerance, capped."""
    cap = TRUNCATION_CAP_FACTOR * n_times
    if prop.lam * delta <= 0:
        return cap
    n = math.ceil(-math.log(TAIL_TOLERANCE) / (prop.lam * delta))
    return min(n, cap)


def _transformed_covariates(
    params: ModelParams,
    cov: CovariateSeries,
    grid: SpatialGrid,
    times: TimeAxis,
    n: int,
    boundary: BoundaryMode | str,
    truncation_sigmas: float,
    snapshots: list[int] | None = None,
):
    """Accumulate sum_i Psi_i * x(., t - i*delta) for every covariate and time.

    Returns the (n_times, k, ny, nx) accumulated array; if ``snapshots`` is
    given, also returns copies of the accumulator after each listed depth.
    """
    if n < 0:
        raise ArgumentError(f"truncation depth must be >= 0, got {n}")
    delta = times.delta
    n_t, k = times.n_times, cov.k
    stack = cov.values[:n_t].reshape(n_t * k, grid.ny, grid.nx)
    acc = stack.copy().reshape(n_t, k, grid.ny, grid.nx)  # i = 0: Dirac term
    snaps = {}
    if snapshots is not None and 0 in snapshots:
        snaps[0] = acc.copy()
    base = kernel_spec(params.prop, delta)
    for i in range(1, n + 1):
        # depth i reaches covariate slices t - i; those before the first sample
        # time are zero, so only i < n_t contributes
        w_i = math.exp(-i * params.prop.lam * delta)
        if i < n_t and w_i > 0.0:
            spec_i = KernelSpec(mean=i * base.mean, cov=i * base.cov, weight=1.0)
            kern_i = discretize(spec_i, grid.spacing, truncation_sigmas)
            smoothed = convolve_stack(stack[: (n_t - i) * k], kern_i, boundary)
            acc[i:] += w_i * smoothed.reshape(n_t - i, k, grid.ny, grid.nx)
        if snapshots is not None and i in snapshots:
            snaps[i] = acc.copy()
    if snapshots is not None:
        return acc, snaps
    return acc


def truncated_series_mean(
    params: ModelParams,
    cov: CovariateSeries,
    grid: SpatialGrid,
    times: TimeAxis,
    n: int,
    t_index: int | None = None,
    boundary: BoundaryMode | str = BoundaryMode.ZERO,
    truncation_sigmas: float = 4.0,
) -> np.ndarray:
    """Truncated-series approximation of E[Y(., t)] at one time index.

    Covariate slices before the first sample time are taken as zero, so depth
    terms reaching past the start contribute nothing.
    """
    if t_index is None:
        t_index = times.n_times - 1
    if not 0 <= t_index < times.n_times:
        raise ArgumentError(f"t_index {t_index} outside [0, {times.n_times})")
    acc = _transformed_covariates(params, cov, grid, times, n, boundary, truncation_sigmas)
    return np.einsum("kyx,k->yx", acc[t_index], params.beta)


def build_design_matrix(
    params: ModelParams,
    cov: CovariateSeries,
    grid: SpatialGrid,
    times: TimeAxis,
    n: int | None = None,
    boundary: BoundaryMode | str = BoundaryMode.ZERO,
    truncation_sigmas: float = 4.0,
) -> DesignMatrix:
    """Stack the convolved covariates into the (Ns*Nt, k) linear-model matrix."""
    if n is None:
        n = default_truncation(params.prop, times.delta, times.n_times)
    acc = _transformed_covariates(params, cov, grid, times, n, boundary, truncation_sigmas)
    cols = acc.reshape(times.n_times, cov.k, grid.n_sites)
    values = np.ascontiguousarray(np.moveaxis(cols, 1, 2).reshape(-1, cov.k))
    return DesignMatrix(values=values, n_terms=n, grid=grid, times=times)


def truncation_error_curve(
    params: ModelParams,
    cov: CovariateSeries,
    grid: SpatialGrid,
    times: TimeAxis,
    n_values: list[int],
    t_index: int | None = None,
    boundary: BoundaryMode | str = BoundaryMode.ZERO,
    truncation_sigmas: float = 4.0,
    n_ref: int | None = None,
) -> np.ndarray:
    """Max-norm gap between a deep reference mean and each truncated mean.

    The reference depth defaults to the default truncation rule but at least
    max(n_values) + 20, so requested depths sit well inside the tail.
    """
    if params.prop.lam <= 0:
        raise DomainError("truncation analysis needs lam > 0 (geometric tail)")
    if t_index is None:
        t_index = times.n_times - 1
    n_values = [int(n) for n in n_values]
    if any(n < 0 for n in n_values):
        raise ArgumentError("truncation depths must be >= 0")
    if n_ref is None:
        n_ref = max(
            default_truncation(params.prop, times.delta, times.n_times),
            max(n_values) + 20,
        )
    wanted = sorted(set(n_values) | {n_ref})
    _, snaps = _transformed_covariates(
        params, cov, grid, times, n_ref, boundary, truncation_sigmas, snapshots=wanted
    )
    ref = np.einsum("kyx,k->yx", snaps[n_ref][t_index], params.beta)
    errors = []
    for n in n_values:
        mean_n = np.einsum("kyx,k->yx", snaps[min(n, n_ref)][t_index], params.beta)
        errors.append(float(np.max(np.abs(ref - mean_n))))
    return np.asarray(errors)


def write_covariates_csv(cov: CovariateSeries, path) -> None:
    """Write covariates as CSV rows ``t,p,x,y,value`` (p is the covariate index)."""
    grid, times = cov.grid, cov.times
    xs, ys = grid.x_coords(), grid.y_coords()
    with open(path, "w") as fh:
        fh.write("t,p,x,y,value\n")
        for kt, t in enumerate(times.times()):
            for p in range(cov.k):
                slab = cov.values[kt, p]
                for r in range(grid.ny):
                    for c in range(grid.nx):
                        fh.write(
                            f"{FLOAT_FMT % t},{p},{FLOAT_FMT % xs[c]},{FLOAT_FMT % ys[r]},"
                            f"{FLOAT_FMT % slab[r, c]}\n"
                        )


def read_covariates_csv(path) -> CovariateSeries:
    """Read a ``t,p,x,y,value`` CSV back into a CovariateSeries."""
    from .grid import _axis_from_times, _grid_from_coords

    raw = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    if raw.shape[1] != 5:
        raise ArgumentError(f"expected 5 columns t,p,x,y,value in {path}")
    t_vals = np.unique(raw[:, 0])
    p_vals = np.unique(raw[:, 1]).astype(int)
    x_vals = np.unique(raw[:, 2])
    y_vals = np.unique(raw[:, 3])
    if not np.array_equal(p_vals, np.arange(len(p_vals))):
        raise ArgumentError("covariate indices p must be 0..k-1")
    grid = _grid_from_coords(x_vals, y_vals)
    times = _axis_from_times(t_vals)
    values = np.full((times.n_times, len(p_vals), grid.ny, grid.nx), np.nan)
    ti = np.searchsorted(t_vals, raw[:, 0])
    pi = raw[:, 1].astype(int)
    ci = np.searchsorted(x_vals, raw[:, 2])
    ri = np.searchsorted(y_vals, raw[:, 3])
    values[ti, pi, ri, ci] = raw[:, 4]
    if np.any(np.isnan(values)):
        raise ArgumentError(f"{path} does not cover every covariate at every site-time")
    return CovariateSeries(grid, times, values)
