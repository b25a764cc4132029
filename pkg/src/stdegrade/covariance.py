"""Stationary spatial covariance families and Gaussian field sampling.

Three isotropic families are supported for the white-in-time generation noise:

* Exponential: c(d) = theta1 * exp(-d / theta2)
* Gaussian:    c(d) = theta1 * exp(-d^2 / theta2)
* Matern:      c(d) = theta1 / (2^(t3-1) Gamma(t3)) * z^t3 * K_t3(z),
               z = sqrt(2*t3) * d / theta2, with c(0) = theta1 by continuity.

theta1 is the sill, theta2 the range, theta3 the Matern smoothness.  The
Matern family reduces exactly to the Exponential one at theta3 = 1/2.
"""

from __future__ import annotations

import functools
import math
from dataclasses import dataclass, field
from enum import Enum

import numpy as np
from scipy.special import gamma as gamma_fn
from scipy.special import kv

from .errors import ArgumentError, NumericalError
from .grid import SpatialGrid, distance_matrix

# Relative nugget added to the diagonal before factorization, escalated x10 on
# failure up to the max.  The Gaussian family is ill-conditioned at practical
# range values, and the model itself never constrains the matrix this far.
NUGGET_START = 1e-8
NUGGET_MAX = 1e-4


class CovFamily(str, Enum):
    EXPONENTIAL = "exponential"
    GAUSSIAN = "gaussian"
    MATERN = "matern"


@dataclass(frozen=True)
class SpatialCovModel:
    family: CovFamily
    theta: tuple[float, ...]

    def __post_init__(self):
        try:
            family = CovFamily(self.family)
        except ValueError:
            raise ArgumentError(f"unknown covariance family {self.family!r}") from None
        theta = tuple(float(t) for t in self.theta)
        n_expected = 3 if family is CovFamily.MATERN else 2
        if len(theta) != n_expected:
            raise ArgumentError(
                f"{family.value} covariance takes {n_expected} parameters, got {len(theta)}"
            )
        if any(t <= 0 for t in theta):
            raise ArgumentError(f"covariance parameters must be > 0, got {theta}")
        object.__setattr__(self, "family", family)
        object.__setattr__(self, "theta", theta)

    @property
    def sill(self) -> float:
        return self.theta[0]


def cov_value(m: SpatialCovModel, d) -> float | np.ndarray:
    """Evaluate c(d) at scalar or array distances d >= 0."""
    d_arr = np.asarray(d, dtype=float)
    if np.any(d_arr < 0):
        raise ArgumentError("distances must be >= 0")
    t1, t2 = m.theta[0], m.theta[1]
    if m.family is CovFamily.EXPONENTIAL:
        out = t1 * np.exp(-d_arr / t2)
    elif m.family is CovFamily.GAUSSIAN:
        out = t1 * np.exp(-(d_arr**2) / t2)
    else:
        t3 = m.theta[2]
        z = math.sqrt(2.0 * t3) * d_arr / t2
        out = np.empty_like(d_arr)
        pos = z > 0
        zp = z[pos] if z.ndim else (z if pos else None)
        if z.ndim == 0:
            if z > 0:
                out = np.asarray(_matern_scaled(float(z), t3) * t1)
            else:
                out = np.asarray(t1)
        else:
            out[~pos] = t1
            out[pos] = t1 * _matern_scaled(zp, t3)
    if np.ndim(d) == 0:
        return float(out)
    return out


def _matern_scaled(z, t3: float):
    """(z^t3 K_t3(z)) / (2^(t3-1) Gamma(t3)); tends to 1 as z -> 0."""
    with np.errstate(over="ignore", invalid="ignore"):
        val = (z**t3) * kv(t3, z) / (2.0 ** (t3 - 1.0) * gamma_fn(t3))
    # kv underflows to 0 for large z; 0 * finite is the right limit there
    return np.nan_to_num(val, nan=0.0, posinf=0.0)


@dataclass(frozen=True)
class CovMatrix:
    """Dense covariance matrix of the noise field plus its Cholesky factor."""

    matrix: np.ndarray = field(repr=False)
    factor: np.ndarray = field(repr=False)
    nugget: float
    grid: SpatialGrid

    @property
    def n(self) -> int:
        return self.matrix.shape[0]

    def log_det(self) -> float:
        return 2.0 * float(np.sum(np.log(np.diag(self.factor))))


@functools.lru_cache(maxsize=16)
def _cached_distances(grid: SpatialGrid) -> np.ndarray:
    d = distance_matrix(grid)
    d.setflags(write=False)
    return d


@functools.lru_cache(maxsize=16)
def _cached_unique_distances(grid: SpatialGrid):
    uniq, inverse = np.unique(_cached_distances(grid), return_inverse=True)
    uniq.setflags(write=False)
    inverse.setflags(write=False)
    return uniq, inverse


def build_cov_matrix(m: SpatialCovModel, grid: SpatialGrid, scale: float) -> CovMatrix:
    """Assemble scale * c(||s_i - s_j||) and factor it, escalating the nugget.

    The nugget starts at 1e-8 * theta1 * scale and is multiplied by 10 until
    the factorization succeeds, up to 1e-4 * theta1 * scale.
    """
    if not scale > 0:
        raise ArgumentError(f"scale must be > 0, got {scale}")
    dist = _cached_distances(grid)
    # grids repeat few distinct distances; evaluate each once (Bessel K is slow)
    uniq, inverse = _cached_unique_distances(grid)
    base = (scale * cov_value(m, uniq))[inverse].reshape(dist.shape)
    nugget = NUGGET_START * m.sill * scale
    nugget_max = NUGGET_MAX * m.sill * scale
    while True:
        mat = base.copy()
        mat[np.diag_indices_from(mat)] += nugget
        try:
            factor = np.linalg.cholesky(mat)
            return CovMatrix(matrix=mat, factor=factor, nugget=nugget, grid=grid)
        except np.linalg.LinAlgError:
            if nugget >= nugget_max:
                eigs = np.linalg.eigvalsh(mat)
                raise NumericalError(
                    "covariance factorization failed at max nugget "
                    f"{nugget:.3e}; eigenvalue range [{eigs[0]:.3e}, {eigs[-1]:.3e}]"
                )
            nugget *= 10.0


def sample_field(cm: CovMatrix, rng: np.random.Generator) -> np.ndarray:
    """Draw one zero-mean field with covariance cm, shaped (ny, nx)."""
    z = rng.standard_normal(cm.n)
    return (cm.factor @ z).reshape(cm.grid.ny, cm.grid.nx)
