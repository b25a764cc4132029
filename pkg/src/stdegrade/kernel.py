"""Anisotropic Gaussian propagation kernel and discrete 2-D convolution.

One propagation step spreads the field with a bivariate Gaussian kernel whose
mean is the drift v*delta and whose principal axes carry variance rates rho1
(along the propagation direction) and rho2 (across it), then attenuates the
result by exp(-lam*delta).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view
from scipy.signal import fftconvolve

from .errors import ArgumentError, ConfigurationError

DIRECT_STENCIL_MAX = 15  # direct path for kernels up to 15x15 taps, FFT beyond


class BoundaryMode(str, Enum):
    ZERO = "zero"      # degradation exits the domain (infinite-plane window)
    RENORM = "renorm"  # taps renormalized over in-domain cells; preserves mass


@dataclass(frozen=True)
class PropagationParams:
    """Decay rate plus Gaussian kernel geometry of the propagation step."""

    lam: float
    v: tuple[float, float]
    rho1: float
    rho2: float

    def __post_init__(self):
        if self.lam < 0:
            raise ArgumentError(f"decay rate must be >= 0, got {self.lam}")
        if not (self.rho1 > 0 and self.rho2 > 0):
            raise ArgumentError(f"variance rates must be > 0, got ({self.rho1}, {self.rho2})")
        object.__setattr__(self, "v", (float(self.v[0]), float(self.v[1])))

    def weight(self, delta: float) -> float:
        """Per-step scaling factor exp(-lam*delta), in (0, 1]."""
        return math.exp(-self.lam * delta)


@dataclass(frozen=True)
class KernelSpec:
    """Continuous kernel: Gaussian density phi(.; mean, cov) scaled by weight."""

    mean: np.ndarray
    cov: np.ndarray
    weight: float

    def __post_init__(self):
        mean = np.asarray(self.mean, dtype=float).reshape(2)
        cov = np.asarray(self.cov, dtype=float).reshape(2, 2)
        if not np.allclose(cov, cov.T, atol=1e-12):
            raise ArgumentError("kernel covariance must be symmetric")
        if np.any(np.linalg.eigvalsh(cov) <= 0):
            raise ArgumentError("kernel covariance must be positive definite")
        if not 0 < self.weight <= 1:
            raise ArgumentError(f"kernel weight must be in (0, 1], got {self.weight}")
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "cov", cov)


@dataclass(frozen=True)
class DiscreteKernel:
    """Grid realization of a kernel: non-negative taps summing to one.

    ``taps[a, b]`` weights the source displacement
    ``((offset[0] - hx + b) * spacing, (offset[1] - hy + a) * spacing)``
    where ``(2*hy+1, 2*hx+1) = taps.shape`` and ``offset`` locates the stencil
    center (in cells) relative to the target cell.
    """

    taps: np.ndarray = field(repr=False)
    offset: tuple[int, int]
    spacing: float = 1.0

    def __post_init__(self):
        taps = np.asarray(self.taps, dtype=float)
        if taps.ndim != 2 or taps.shape[0] % 2 == 0 or taps.shape[1] % 2 == 0:
            raise ArgumentError("taps must be a 2-D odd-sided stencil")
        if np.any(taps < 0):
            raise ArgumentError("taps must be non-negative")
        object.__setattr__(self, "taps", taps)

    @property
    def half_size(self) -> tuple[int, int]:
        """(hx, hy) half-extents of the stencil."""
        return (self.taps.shape[1] // 2, self.taps.shape[0] // 2)

    def reach(self) -> tuple[int, int]:
        """Largest (|dx|, |dy|) cell displacement with a tap, for interior masks."""
        hx, hy = self.half_size
        return (abs(self.offset[0]) + hx, abs(self.offset[1]) + hy)


def rotation_matrix(v: tuple[float, float]) -> np.ndarray:
    """Proper rotation through the counter-clockwise angle of v.

    The angle is atan2(v2, v1) wrapped to [0, 2*pi); v = (0, 0) maps to the
    identity (anisotropy is meaningless without a propagation direction).
    """
    v1, v2 = float(v[0]), float(v[1])
    if v1 == 0.0 and v2 == 0.0:
        return np.eye(2)
    alpha = math.atan2(v2, v1) % (2 * math.pi)
    c, s = math.cos(alpha), math.sin(alpha)
    return np.array([[c, -s], [s, c]])


def kernel_spec(p: PropagationParams, delta: float) -> KernelSpec:
    """Kernel of one propagation step of length delta.

    mean = v*delta; cov has eigenvalues rho1*delta along the direction of v
    and rho2*delta across it; weight = exp(-lam*delta).
    """
    if not delta > 0:
        raise ArgumentError(f"delta must be > 0, got {delta}")
    rot = rotation_matrix(p.v)
    diag = np.diag([p.rho1 * delta, p.rho2 * delta])
    cov = rot @ diag @ rot.T
    mean = np.array([p.v[0] * delta, p.v[1] * delta])
    return KernelSpec(mean=mean, cov=cov, weight=p.weight(delta))


def _mahalanobis_sq(points: np.ndarray, mean: np.ndarray, cov: np.ndarray) -> np.ndarray:
    det = cov[0, 0] * cov[1, 1] - cov[0, 1] * cov[1, 0]
    inv = np.array([[cov[1, 1], -cov[0, 1]], [-cov[1, 0], cov[0, 0]]]) / det
    d = np.asarray(points, dtype=float) - mean
    return (
        inv[0, 0] * d[..., 0] ** 2
        + 2 * inv[0, 1] * d[..., 0] * d[..., 1]
        + inv[1, 1] * d[..., 1] ** 2
    )


def gaussian_pdf2(points: np.ndarray, mean: np.ndarray, cov: np.ndarray) -> np.ndarray:
    """Bivariate Gaussian density at an (..., 2) array of points."""
    det = cov[0, 0] * cov[1, 1] - cov[0, 1] * cov[1, 0]
    quad = _mahalanobis_sq(points, mean, cov)
    return np.exp(-0.5 * quad) / (2 * math.pi * math.sqrt(det))


def discretize(
    spec: KernelSpec,
    spacing: float,
    truncation_sigmas: float = 4.0,
    max_size: int | None = None,
) -> DiscreteKernel:
    """Sample the kernel density at cell centers and renormalize to sum one.

    The stencil is centered on the cell nearest the kernel mean and extends
    truncation_sigmas standard deviations (of the largest principal axis) on
    each side.  The decay weight is not applied here; it stays on the spec.
    """
    if truncation_sigmas < 3:
        raise ArgumentError(f"truncation_sigmas must be >= 3, got {truncation_sigmas}")
    if not spacing > 0:
        raise ArgumentError(f"spacing must be > 0, got {spacing}")
    sigma_max = math.sqrt(float(np.max(np.linalg.eigvalsh(spec.cov))))
    half = max(1, math.ceil(truncation_sigmas * sigma_max / spacing))
    if max_size is not None and 2 * half + 1 > max_size:
        raise ConfigurationError(
            f"kernel window {2 * half + 1} exceeds the allowed size {max_size}"
        )
    ox = round(float(spec.mean[0]) / spacing)
    oy = round(float(spec.mean[1]) / spacing)
    dx = (ox + np.arange(-half, half + 1)) * spacing
    dy = (oy + np.arange(-half, half + 1)) * spacing
    pts = np.stack(np.meshgrid(dx, dy, indexing="xy"), axis=-1)  # (2h+1, 2h+1, 2)
    # normalize in log space: the density scale cancels, and near-Dirac kernels
    # with an off-lattice mean would otherwise underflow to zero mass
    quad = _mahalanobis_sq(pts, spec.mean, spec.cov)
    taps = np.exp(-0.5 * (quad - quad.min()))
    return DiscreteKernel(taps=taps / taps.sum(), offset=(ox, oy), spacing=spacing)


def convolve(
    field_slice: np.ndarray,
    k: DiscreteKernel,
    boundary: BoundaryMode | str = BoundaryMode.ZERO,
) -> np.ndarray:
    """Convolve one field slice with a discrete kernel.

    out(s) = sum_x taps(x) * field(s - x).  Under ``zero`` the field is zero
    outside the domain; under ``renorm`` taps are renormalized over in-domain
    cells so a constant field maps to the same constant.
    """
    out = convolve_stack(np.asarray(field_slice, dtype=float)[None], k, boundary)
    return out[0]


def convolve_stack(
    stack: np.ndarray,
    k: DiscreteKernel,
    boundary: BoundaryMode | str = BoundaryMode.ZERO,
) -> np.ndarray:
    """Convolve a (T, ny, nx) stack of slices with a shared kernel."""
    stack = np.asarray(stack, dtype=float)
    if stack.ndim != 3:
        raise ArgumentError(f"expected a (T, ny, nx) stack, got shape {stack.shape}")
    if not np.all(np.isfinite(stack)):
        raise ArgumentError("field must be finite")
    boundary = BoundaryMode(boundary)
    ny, nx = stack.shape[1:]
    clipped = _clip_to_reachable(k, ny, nx)
    if clipped is None:
        return np.zeros_like(stack)
    taps, dy0, dx0 = clipped
    out = _apply_taps(stack, taps, dy0, dx0)
    if boundary is BoundaryMode.RENORM:
        mass = _apply_taps(np.ones((1, ny, nx)), taps, dy0, dx0)[0]
        with np.errstate(invalid="ignore", divide="ignore"):
            out = np.where(mass > 1e-300, out / mass, 0.0)
    return out


def _clip_to_reachable(k: DiscreteKernel, ny: int, nx: int):
    """Drop taps whose source cell is off-grid for every target cell.

    Displacements beyond +-(n-1) cells never intersect the domain, so removing
    them changes neither boundary mode (they contribute zero to the output and
    to the in-domain mass).  Returns (taps, dy0, dx0) or None if nothing
    reaches the grid; (dy0, dx0) is the displacement of taps[0, 0] in cells.
    """
    hx, hy = k.half_size
    ox, oy = k.offset
    a_lo = max(0, -(ny - 1) - (oy - hy))
    a_hi = min(2 * hy, (ny - 1) - (oy - hy))
    b_lo = max(0, -(nx - 1) - (ox - hx))
    b_hi = min(2 * hx, (nx - 1) - (ox - hx))
    if a_lo > a_hi or b_lo > b_hi:
        return None
    taps = k.taps[a_lo : a_hi + 1, b_lo : b_hi + 1]
    return taps, oy - hy + a_lo, ox - hx + b_lo


def _apply_taps(stack: np.ndarray, taps: np.ndarray, dy0: int, dx0: int) -> np.ndarray:
    """out[t, r, c] = sum_{a,b} taps[a, b] * stack[t, r - dy0 - a, c - dx0 - b]."""
    if max(taps.shape) <= DIRECT_STENCIL_MAX:
        return _apply_taps_direct(stack, taps, dy0, dx0)
    return _apply_taps_fft(stack, taps, dy0, dx0)


def _apply_taps_direct(stack: np.ndarray, taps: np.ndarray, dy0: int, dx0: int) -> np.ndarray:
    """Direct stencil evaluation via padded sliding windows."""
    na, nb = taps.shape
    ny, nx = stack.shape[1:]
    my, mx = na + abs(dy0), nb + abs(dx0)
    padded = np.pad(stack, ((0, 0), (my, my), (mx, mx)))
    windows = sliding_window_view(padded, (na, nb), axis=(1, 2))
    r0 = my - dy0 - na + 1
    c0 = mx - dx0 - nb + 1
    windows = windows[:, r0 : r0 + ny, c0 : c0 + nx]
    return np.einsum("tyxab,ab->tyx", windows, taps[::-1, ::-1])


def _apply_taps_fft(stack: np.ndarray, taps: np.ndarray, dy0: int, dx0: int) -> np.ndarray:
    """Frequency-domain evaluation of the same zero-padded convolution."""
    na, nb = taps.shape
    ny, nx = stack.shape[1:]
    full = fftconvolve(stack, taps[None], mode="full", axes=(1, 2))
    out = np.zeros_like(stack)
    r_lo, r_hi = max(0, dy0), min(ny - 1, dy0 + ny + na - 2)
    c_lo, c_hi = max(0, dx0), min(nx - 1, dx0 + nx + nb - 2)
    if r_lo > r_hi or c_lo > c_hi:
        return out
    out[:, r_lo : r_hi + 1, c_lo : c_hi + 1] = full[
        :, r_lo - dy0 : r_hi - dy0 + 1, c_lo - dx0 : c_hi - dx0 + 1
    ]
    return out
