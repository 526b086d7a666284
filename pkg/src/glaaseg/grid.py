"""Discrete calculus on rectangular grids.

Fields are 2-D float arrays indexed ``[row, col]``. The ``x`` axis runs along
columns (numpy axis 1) and ``y`` along rows (numpy axis 0). All boundaries
are Neumann: forward differences vanish on the last column/row and the
Laplacian replicates out-of-range neighbours, so ``forward_diff`` and
``adjoint_diff`` form an exact adjoint pair and

    laplacian_central(u) == -(Dx^T Dx + Dy^T Dy) u

holds on the whole grid, boundary included.
"""

import math

import numpy as np
from scipy import ndimage

__all__ = [
    "ParameterError",
    "ShapeMismatchError",
    "INTENSITY_FLOOR_FRACTION",
    "as_field",
    "intensity_floor",
    "clamp_to_floor",
    "forward_diff",
    "adjoint_diff",
    "laplacian_central",
    "edge_gradient",
    "edge_divergence",
    "gaussian_kernel",
    "gaussian_convolve",
]

# Intensities are clamped to this fraction of max(f) before any log or division.
INTENSITY_FLOOR_FRACTION = 1e-6

_AXES = {"x": 1, "y": 0}


class ParameterError(ValueError):
    """Raised for out-of-range scalar parameters."""


class ShapeMismatchError(ValueError):
    """Raised when two grids that must align have different shapes."""


def as_field(data, name="field"):
    """Return ``data`` as a finite 2-D float64 array (copying only if needed)."""
    arr = np.asarray(data, dtype=np.float64)
    if arr.ndim != 2:
        raise ParameterError(f"{name} must be 2-D, got shape {arr.shape}")
    if arr.size == 0:
        raise ParameterError(f"{name} is empty")
    if not np.all(np.isfinite(arr)):
        raise ParameterError(f"{name} contains NaN or Inf")
    return arr


def intensity_floor(f):
    """Smallest admissible intensity for image ``f``."""
    peak = float(np.max(f))
    return INTENSITY_FLOOR_FRACTION * peak if peak > 0 else INTENSITY_FLOOR_FRACTION


def clamp_to_floor(f, floor=None):
    f = np.asarray(f, dtype=np.float64)
    if floor is None:
        floor = intensity_floor(f)
    return np.maximum(f, floor)


def _axis(axis):
    try:
        return _AXES[axis]
    except KeyError:
        raise ParameterError(f"axis must be 'x' or 'y', got {axis!r}") from None


def forward_diff(field, axis):
    """Forward difference ``u[k+1] - u[k]`` along ``axis``; last entry is 0."""
    u = np.asarray(field, dtype=np.float64)
    ax = _axis(axis)
    out = np.zeros_like(u)
    if ax == 1:
        out[:, :-1] = u[:, 1:] - u[:, :-1]
    else:
        out[:-1, :] = u[1:, :] - u[:-1, :]
    return out


def adjoint_diff(field, axis):
    """Matrix transpose of :func:`forward_diff` along ``axis``.

    ``(D^T v)[0] = -v[0]``, ``(D^T v)[k] = v[k-1] - v[k]`` for interior ``k``
    and ``(D^T v)[n-1] = v[n-2]``. The last entry of ``v`` is ignored because
    the matching row of ``D`` is zero. This is minus the backward-difference
    divergence.
    """
    v = np.asarray(field, dtype=np.float64)
    ax = _axis(axis)
    out = np.zeros_like(v)
    n = v.shape[ax]
    if n == 1:
        return out
    if ax == 1:
        out[:, 0] = -v[:, 0]
        out[:, 1:-1] = v[:, :-2] - v[:, 1:-1]
        out[:, -1] = v[:, -2]
    else:
        out[0, :] = -v[0, :]
        out[1:-1, :] = v[:-2, :] - v[1:-1, :]
        out[-1, :] = v[-2, :]
    return out


def edge_gradient(field):
    """Forward differences without the zero boundary entries.

    Returns ``(gx, gy)`` of shapes ``(h, w-1)`` and ``(h-1, w)``; padding each
    with a trailing zero column/row gives ``forward_diff(field, "x"/"y")``.
    """
    u = np.asarray(field, dtype=np.float64)
    return u[:, 1:] - u[:, :-1], u[1:, :] - u[:-1, :]


def edge_divergence(px, py):
    """``Dx^T px + Dy^T py`` for edge-shaped fields from :func:`edge_gradient`.

    Equals ``adjoint_diff`` applied to the zero-padded full-size fields.
    """
    h, w = py.shape[0] + 1, px.shape[1] + 1
    out = np.zeros((h, w))
    out[:, :-1] -= px
    out[:, 1:] += px
    out[:-1, :] -= py
    out[1:, :] += py
    return out


def neighbour_sum(field):
    """Sum of the four axis neighbours with replicated (Neumann) edges."""
    u = np.asarray(field, dtype=np.float64)
    out = np.empty_like(u)
    # left + right neighbours, then up + down; edges see themselves
    out[:, 1:-1] = u[:, :-2] + u[:, 2:]
    out[:, 0] = u[:, 0] + u[:, 1]
    out[:, -1] = u[:, -2] + u[:, -1]
    out[1:-1, :] += u[:-2, :] + u[2:, :]
    out[0, :] += u[0, :] + u[1, :]
    out[-1, :] += u[-2, :] + u[-1, :]
    return out


def laplacian_central(field):
    """Five-point Laplacian with replicated out-of-range neighbours."""
    u = np.asarray(field, dtype=np.float64)
    return neighbour_sum(u) - 4.0 * u


def gaussian_kernel(sigma):
    """Normalized 1-D Gaussian truncated at radius ``ceil(4 * sigma)``."""
    if not sigma > 0:
        raise ParameterError(f"sigma must be positive, got {sigma}")
    radius = int(math.ceil(4.0 * sigma))
    x = np.arange(-radius, radius + 1, dtype=np.float64)
    k = np.exp(-0.5 * (x / sigma) ** 2)
    return k / k.sum()


def gaussian_convolve(field, sigma, mode="nearest"):
    """Separable Gaussian convolution.

    Parameters
    ----------
    field : array_like
        2-D input.
    sigma : float
        Standard deviation in pixels, must be positive.
    mode : {"nearest", "constant"}
        ``"nearest"`` replicates edge pixels, so constants are preserved.
        ``"constant"`` pads with zeros, which turns the convolution into an
        integral restricted to the image domain.
    """
    k = gaussian_kernel(sigma)
    if mode not in ("nearest", "constant"):
        raise ParameterError(f"unsupported padding mode {mode!r}")
    u = np.asarray(field, dtype=np.float64)
    tmp = ndimage.convolve1d(u, k, axis=0, mode=mode, cval=0.0)
    return ndimage.convolve1d(tmp, k, axis=1, mode=mode, cval=0.0)
