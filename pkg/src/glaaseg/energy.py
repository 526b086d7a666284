"""Ingredients of the hybrid global/local gamma-fitting energy.

The data term for a pixel is the gamma log-likelihood ``log c + f / c`` of
its intensity under region constant ``c``. The global part uses one constant
per region; the local part uses kernel-weighted local constants ``f1(x)``,
``f2(x)``. ``data_term_eta`` returns their difference (region 1 minus region
2), so ``eta < 0`` means a pixel prefers region 1.

Region weights come either from the smoothed Heaviside of a level set (the
level-set solver) or from a hard mask ``phi > gamma`` (the convex solvers);
the ``*_weighted`` variants take the weight field directly.
"""

import logging
import math
from dataclasses import dataclass

import numpy as np

from .grid import (
    ParameterError,
    ShapeMismatchError,
    as_field,
    clamp_to_floor,
    forward_diff,
    gaussian_convolve,
    intensity_floor,
)

log = logging.getLogger(__name__)

__all__ = [
    "RegionStats",
    "LocalFits",
    "EnergyParams",
    "heaviside_eps",
    "delta_eps",
    "edge_indicator",
    "default_beta",
    "region_means",
    "region_means_weighted",
    "region_stats_from_sums",
    "local_fits",
    "local_fits_weighted",
    "data_term_eta",
    "gcs_objective",
]

_DEGENERATE_MASS = 1e-12
_FIT_DENOM_MIN = 1e-12


@dataclass(frozen=True)
class RegionStats:
    c1: float
    c2: float
    degenerate: bool = False


@dataclass(frozen=True)
class LocalFits:
    f1: np.ndarray
    f2: np.ndarray


@dataclass(frozen=True)
class EnergyParams:
    mu: float = 20.0
    epsilon: float = 1.0
    sigma: float = 3.0
    omega: float = 1.0
    beta: float | None = None

    def __post_init__(self):
        if not self.mu > 0:
            raise ParameterError(f"mu must be > 0, got {self.mu}")
        if not self.epsilon > 0:
            raise ParameterError(f"epsilon must be > 0, got {self.epsilon}")
        if not self.sigma > 0:
            raise ParameterError(f"sigma must be > 0, got {self.sigma}")
        if not 0.0 <= self.omega <= 1.0:
            raise ParameterError(f"omega must lie in [0, 1], got {self.omega}")
        if self.beta is not None and not self.beta > 0:
            raise ParameterError(f"beta must be > 0, got {self.beta}")


def heaviside_eps(phi, epsilon):
    """Smoothed Heaviside ``0.5 * (1 + (2/pi) * arctan(phi / eps))``."""
    if not epsilon > 0:
        raise ParameterError(f"epsilon must be > 0, got {epsilon}")
    return 0.5 * (1.0 + (2.0 / np.pi) * np.arctan(np.asarray(phi, dtype=np.float64) / epsilon))


def delta_eps(phi, epsilon):
    """Derivative of :func:`heaviside_eps`: ``eps / (pi * (eps**2 + phi**2))``."""
    if not epsilon > 0:
        raise ParameterError(f"epsilon must be > 0, got {epsilon}")
    phi = np.asarray(phi, dtype=np.float64)
    return (epsilon / np.pi) / (epsilon**2 + phi**2)


def default_beta(f):
    """Edge-indicator contrast ``1 / (range(f) / 10)**2``; 1.0 for flat images."""
    rng = float(np.max(f) - np.min(f))
    return 1.0 if rng == 0 else 1.0 / (rng / 10.0) ** 2


def edge_indicator(f, sigma, beta=None):
    """Edge stopping function ``1 / (1 + beta * |grad(K_sigma * f)|**2)``.

    Close to 1 on flat areas and small across strong edges. The gradient uses
    forward differences on the replicate-padded smoothed image.
    """
    f = as_field(f, "image")
    if beta is None:
        beta = default_beta(f)
    if not beta > 0:
        raise ParameterError(f"beta must be > 0, got {beta}")
    smooth = gaussian_convolve(f, sigma)
    grad2 = forward_diff(smooth, "x") ** 2 + forward_diff(smooth, "y") ** 2
    return 1.0 / (1.0 + beta * grad2)


def region_means_weighted(f, weight):
    """Weighted means of ``f`` under ``weight`` and ``1 - weight``.

    When either side carries less than 1e-12 total weight its constant falls
    back to the global mean and ``degenerate`` is set.
    """
    f = np.asarray(f, dtype=np.float64)
    w = np.asarray(weight, dtype=np.float64)
    if f.shape != w.shape:
        raise ShapeMismatchError(f"image {f.shape} and weight {w.shape} differ")
    fr = f.ravel()
    wr = w.ravel()
    return region_stats_from_sums(
        float(np.dot(fr, wr)), float(wr.sum()), float(fr.sum()), f.size,
        float(fr.min()), float(fr.max()))


def region_stats_from_sums(s1, m1, total, n, lo, hi):
    """Region constants from ``s1 = sum(w f)``, ``m1 = sum(w)`` and ``total = sum(f)``.

    ``n`` is the pixel count and ``[lo, hi]`` the intensity range used to
    clamp the result against rounding.
    """
    m2 = n - m1
    mean = total / n
    degenerate = False
    if m1 < _DEGENERATE_MASS:
        c1, degenerate = mean, True
    else:
        c1 = s1 / m1
    if m2 < _DEGENERATE_MASS:
        c2, degenerate = mean, True
    else:
        c2 = (total - s1) / m2
    if degenerate:
        log.warning("degenerate region: constant set to global mean %.6g", mean)
    return RegionStats(min(max(c1, lo), hi), min(max(c2, lo), hi), degenerate)


def region_means(f, phi, epsilon):
    """Region constants with weights ``H_eps(phi)`` and ``1 - H_eps(phi)``."""
    return region_means_weighted(f, heaviside_eps(phi, epsilon))


def local_fits_weighted(f, weight, sigma, fallback=None):
    """Local region fits ``K * (w f) / K * w`` and ``K * ((1-w) f) / K * (1-w)``.

    Convolutions are zero padded so they integrate over the image domain only.
    Where a denominator drops below 1e-12 (a region absent from the kernel's
    support) the fit takes the matching constant from ``fallback``
    (a :class:`RegionStats`) if given. Results are clamped to
    ``[floor, max f]``.
    """
    f = np.asarray(f, dtype=np.float64)
    w = np.asarray(weight, dtype=np.float64)
    if f.shape != w.shape:
        raise ShapeMismatchError(f"image {f.shape} and weight {w.shape} differ")
    floor = intensity_floor(f)
    hi = float(f.max())
    fits = []
    for wi, c in ((w, None if fallback is None else fallback.c1),
                  (1.0 - w, None if fallback is None else fallback.c2)):
        num = gaussian_convolve(wi * f, sigma, mode="constant")
        den = gaussian_convolve(wi, sigma, mode="constant")
        small = den < _FIT_DENOM_MIN
        fit = num / np.maximum(den, _FIT_DENOM_MIN)
        if c is not None:
            fit = np.where(small, c, fit)
        fits.append(np.clip(fit, floor, max(hi, floor)))
    return LocalFits(fits[0], fits[1])


def local_fits(f, phi, epsilon, sigma):
    """Local fits with weights ``H_eps(phi)``."""
    if not sigma > 0:
        raise ParameterError(f"sigma must be > 0, got {sigma}")
    return local_fits_weighted(f, heaviside_eps(phi, epsilon), sigma)


def data_term_eta(f, stats, fits, params):
    """Pointwise data term ``eta = eta_global + eta_local``.

    ``eta_global = omega * [(log C1 + f/C1) - (log C2 + f/C2)]``

    ``eta_local = (1 - omega) * [K*log f1 + f * K*(1/f1) - K*log f2 - f * K*(1/f2)]``

    The local part is the kernel integral over the image domain of
    ``log f_i(y) + f(x) / f_i(y)``, split into two zero-padded convolutions
    because ``f(x)`` does not depend on ``y``. ``fits`` may be ``None`` when
    ``omega == 1``.
    """
    f = clamp_to_floor(f)
    omega = params.omega
    c1, c2 = stats.c1, stats.c2
    if not (c1 > 0 and c2 > 0):
        raise ParameterError(f"region constants must be > 0, got {stats}")
    # (log C1 + f/C1) - (log C2 + f/C2), collected as a + b f
    eta = (omega * math.log(c1 / c2)) + (omega * (1.0 / c1 - 1.0 / c2)) * f
    if omega < 1.0:
        if fits is None:
            raise ParameterError("local fits required when omega < 1")
        f1, f2 = fits.f1, fits.f2
        if np.any(f1 <= 0) or np.any(f2 <= 0):
            raise ParameterError("local fits must be strictly positive")
        s = params.sigma
        local = (
            gaussian_convolve(np.log(f1), s, mode="constant")
            + f * gaussian_convolve(1.0 / f1, s, mode="constant")
            - gaussian_convolve(np.log(f2), s, mode="constant")
            - f * gaussian_convolve(1.0 / f2, s, mode="constant")
        )
        eta = eta + (1.0 - omega) * local
    return eta


def gcs_objective(phi, eta, mu):
    """Anisotropic-TV convex objective ``|Dx phi|_1 + |Dy phi|_1 + mu <phi, eta>``."""
    phi = np.asarray(phi, dtype=np.float64)
    eta = np.asarray(eta, dtype=np.float64)
    if phi.shape != eta.shape:
        raise ShapeMismatchError(f"phi {phi.shape} and eta {eta.shape} differ")
    if phi.min() < 0 or phi.max() > 1:
        raise ParameterError("phi must lie in [0, 1]")
    return objective_unchecked(phi, eta, mu)


def objective_unchecked(phi, eta, mu):
    tv = np.abs(np.diff(phi, axis=1)).sum() + np.abs(np.diff(phi, axis=0)).sum()
    return float(tv + mu * np.dot(phi.ravel(), eta.ravel()))
