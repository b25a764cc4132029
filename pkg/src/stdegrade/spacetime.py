"""Closed-form space-time covariance of the stationary degradation field.

For sites separated by d and an integer lag j (in steps of length delta), the
covariance is a geometric mixture of Gaussian-smoothed copies of the spatial
noise covariance c:

    cov(d, j) = 1_{j=0} c_delta(d)
              + sum_{i >= 0, 2i+j > 0} e^{-(2i+j) lam delta}
                    (phi(.; j mu_delta, (2i+j) Sigma_delta) * c_delta)(d)

The i = 0, j = 0 summand is the instantaneous noise term (a Dirac pair), which
is exactly the indicator contribution.  When c is the Gaussian family the
smoothing collapses analytically; otherwise it is evaluated by adaptive 2-D
quadrature.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import integrate

from .covariance import CovFamily, cov_value
from .errors import ArgumentError, DomainError, NumericalError
from .forward import ModelParams
from .grid import SpatialGrid, TimeAxis
from .kernel import gaussian_pdf2, kernel_spec

SERIES_TOLERANCE = 1e-8  # default depth keeps exp(-2 n lam delta) below this
QUADRATURE_ABS_TOL = 1e-10


@dataclass(frozen=True)
class StCovQuery:
    """One covariance evaluation: displacement, integer time lag, step length."""

    d: tuple[float, float]
    lag: int
    delta: float
    n_terms: int | None = None

    def __post_init__(self):
        if int(self.lag) != self.lag or self.lag < 0:
            raise ArgumentError(f"time lag must be a non-negative integer, got {self.lag}")
        if not self.delta > 0:
            raise ArgumentError(f"delta must be > 0, got {self.delta}")
        if self.n_terms is not None and self.n_terms < 1:
            raise ArgumentError(f"n_terms must be >= 1, got {self.n_terms}")
        object.__setattr__(self, "lag", int(self.lag))
        object.__setattr__(self, "d", (float(self.d[0]), float(self.d[1])))


def default_n_terms(lam: float, delta: float) -> int:
    """Smallest depth with exp(-2 n lam delta) below the series tolerance."""
    if lam * delta <= 0:
        raise DomainError("the covariance series needs lam > 0 to converge")
    return max(1, math.ceil(-math.log(SERIES_TOLERANCE) / (2.0 * lam * delta)))


def st_covariance(params: ModelParams, q: StCovQuery) -> float:
    """Covariance between Y(s, t) and Y(s + d, t + lag*delta)."""
    vals = st_covariance_grid(
        params, np.asarray([q.d], dtype=float), q.lag, q.delta, q.n_terms
    )
    return float(vals[0])


def st_covariance_grid(
    params: ModelParams,
    displacements: np.ndarray,
    lag: int,
    delta: float,
    n_terms: int | None = None,
) -> np.ndarray:
    """Vectorized covariance at an (M, 2) array of displacement vectors."""
    prop = params.prop
    if prop.lam <= 0:
        raise DomainError("the covariance series needs lam > 0 to converge")
    if int(lag) != lag or lag < 0:
        raise ArgumentError(f"time lag must be a non-negative integer, got {lag}")
    lag = int(lag)
    disp = np.atleast_2d(np.asarray(displacements, dtype=float))
    if n_terms is None:
        n_terms = default_n_terms(prop.lam, delta)
    base = kernel_spec(prop, delta)
    mean = lag * base.mean
    dist = np.hypot(disp[:, 0], disp[:, 1])
    out = np.zeros(len(disp))
    if lag == 0:
        out += delta * cov_value(params.spat, dist)
    counts = 2 * np.arange(0, n_terms + 1) + lag
    counts = counts[counts > 0]
    weights = np.exp(-counts * prop.lam * delta)
    if params.spat.family is CovFamily.GAUSSIAN:
        theta1, theta2 = params.spat.theta[:2]
        sigc2 = theta2 / 2.0
        for m, w in zip(counts, weights):
            smoothed = gaussian_pdf2(disp, mean, m * base.cov + sigc2 * np.eye(2))
            out += w * delta * theta1 * 2.0 * math.pi * sigc2 * smoothed
    else:
        for row in range(len(disp)):
            out[row] += _smoothed_cov_quadrature(
                params, disp[row], mean, base.cov, counts, weights, delta
            )
    return out


def _smoothed_cov_quadrature(params, d, mean, step_cov, counts, weights, delta):
    """Adaptive quadrature of the Gaussian-mixture smoothing of c_delta."""
    covs = [m * step_cov for m in counts]
    sigma_max = math.sqrt(max(np.max(np.linalg.eigvalsh(c)) for c in covs))
    half = 6.0 * sigma_max

    def integrand(y, x):
        pt = np.array([x, y])
        mix = 0.0
        for w, cov in zip(weights, covs):
            mix += w * gaussian_pdf2(pt, mean, cov)
        r = math.hypot(d[0] - x, d[1] - y)
        return mix * delta * cov_value(params.spat, r)

    val, abserr = integrate.dblquad(
        integrand,
        mean[0] - half,
        mean[0] + half,
        mean[1] - half,
        mean[1] + half,
        epsabs=QUADRATURE_ABS_TOL,
        epsrel=1e-8,
    )
    if abserr > max(1e-8, 1e-6 * abs(val)):
        raise NumericalError(
            f"covariance quadrature did not converge (estimate {val:.3e}, error {abserr:.3e})"
        )
    return val


@dataclass(frozen=True)
class CovSurface:
    """Covariance evaluated over a displacement window at one time lag."""

    dx_values: np.ndarray
    dy_values: np.ndarray
    lag: int
    values: np.ndarray

    def to_rows(self):
        """Plot-ready (dx, dy, lag, cov) rows."""
        for a, dy in enumerate(self.dy_values):
            for b, dx in enumerate(self.dx_values):
                yield (float(dx), float(dy), self.lag, float(self.values[a, b]))


def st_cov_surface(
    params: ModelParams,
    lag: int,
    delta: float,
    half_width: int,
    spacing: float = 1.0,
    n_terms: int | None = None,
) -> CovSurface:
    """Evaluate the covariance over a (2w+1)^2 displacement window."""
    offs = np.arange(-half_width, half_width + 1) * spacing
    disp = np.stack(np.meshgrid(offs, offs, indexing="xy"), axis=-1).reshape(-1, 2)
    vals = st_covariance_grid(params, disp, lag, delta, n_terms)
    side = 2 * half_width + 1
    return CovSurface(
        dx_values=offs, dy_values=offs, lag=int(lag), values=vals.reshape(side, side)
    )


def assemble_st_cov_matrix(
    params: ModelParams,
    grid: SpatialGrid,
    times: TimeAxis,
    n_terms: int | None = None,
) -> np.ndarray:
    """Full (Ns*Nt) x (Ns*Nt) covariance over the stacked site-time points.

    Row/column order is t-major, site-minor, matching the linear-model
    stacking.  Blocks are Toeplitz in the lag; within a block the entry (i, j)
    evaluates the displacement s_j - s_i of the later time toward the earlier.
    """
    ns, nt = grid.n_sites, times.n_times
    offs_x = np.arange(-(grid.nx - 1), grid.nx) * grid.spacing
    offs_y = np.arange(-(grid.ny - 1), grid.ny) * grid.spacing
    disp = np.stack(np.meshgrid(offs_x, offs_y, indexing="xy"), axis=-1).reshape(-1, 2)
    cols = np.arange(ns) % grid.nx
    rows = np.arange(ns) // grid.nx
    ix = (cols[None, :] - cols[:, None]) + (grid.nx - 1)
    iy = (rows[None, :] - rows[:, None]) + (grid.ny - 1)
    flat = iy * (2 * grid.nx - 1) + ix
    out = np.empty((ns * nt, ns * nt))
    for lag in range(nt):
        table = st_covariance_grid(params, disp, lag, times.delta, n_terms)
        block = table[flat]  # (i, j): displacement s_j - s_i at this lag
        for a in range(nt - lag):
            b = a + lag
            out[b * ns : (b + 1) * ns, a * ns : (a + 1) * ns] = block.T
            out[a * ns : (a + 1) * ns, b * ns : (b + 1) * ns] = block
    return out
