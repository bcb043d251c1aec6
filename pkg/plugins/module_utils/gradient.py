from __future__ import absolute_import, division, print_function
__metaclass__ = type

import math
from dataclasses import dataclass
from typing import Tuple

import numpy as np
from scipy import ndimage

try:
    from ansible_collections.gvof.denoise.plugins.module_utils.gvof_common import FWHM_PER_SIGMA, ConfigError, VolumeError
except ImportError:
    from module_utils.gvof_common import FWHM_PER_SIGMA, ConfigError, VolumeError

DEFAULT_WINDOW = (3, 3)


@dataclass(frozen=True, eq=False)
class GradientField:
    gx: np.ndarray
    gy: np.ndarray
    spacing: Tuple[float, float]

    @property
    def magnitude(self) -> np.ndarray:
        return np.sqrt(self.gx ** 2 + self.gy ** 2)


@dataclass(frozen=True, eq=False)
class CoherenceField:
    alpha: np.ndarray
    window: Tuple[int, int] = DEFAULT_WINDOW


def gaussian_kernel_1d(fwhm: float, spacing: float) -> np.ndarray:
    '''
    Sampled Gaussian of the given FWHM (mm) on a grid of the given pitch (mm),
    truncated at 3 sigma (at least one tap each side) and normalised to sum 1
    '''

    if fwhm <= 0 or spacing <= 0:
        raise ConfigError('kernel fwhm and spacing must be positive, got fwhm={} spacing={}'.format(fwhm, spacing))

    sigma = fwhm / FWHM_PER_SIGMA / spacing
    radius = max(1, int(math.ceil(3.0 * sigma)))
    k = np.arange(-radius, radius + 1, dtype=np.float64)
    weights = np.exp(-k ** 2 / (2.0 * sigma ** 2))
    return weights / weights.sum()


def smooth_axes(array: np.ndarray, fwhm: float, spacing: Tuple[float, ...], axes: Tuple[int, ...]) -> np.ndarray:
    '''
    Separable Gaussian along the given array axes, replicating edge values;
    spacing[i] is the pitch of axes[i]
    '''

    out = np.asarray(array, dtype=np.float64)
    for axis, pitch in zip(axes, spacing):
        out = ndimage.convolve1d(out, gaussian_kernel_1d(fwhm, pitch), axis=axis, mode='nearest')
    return out


def gaussian_smooth_slice(image: np.ndarray, fwhm: float, spacing: Tuple[float, float]) -> np.ndarray:
    '''
    x pass then y pass over a (ny, nx) slice; spacing is (sx, sy)
    '''

    sx, sy = spacing
    return smooth_axes(image, fwhm, (sx, sy), axes=(-1, -2))


def gradient_2d(image: np.ndarray, spacing: Tuple[float, float]) -> GradientField:
    '''
    Central differences inside the slice, one-sided differences on its border
    '''

    if image.ndim != 2 or min(image.shape) < 3:
        raise VolumeError('gradient needs a slice of at least 3x3, got shape {}'.format(image.shape))

    sx, sy = spacing
    gy, gx = np.gradient(np.asarray(image, dtype=np.float64), sy, sx)
    return GradientField(gx=gx, gy=gy, spacing=(sx, sy))


def orientation_sum(field: GradientField, window: Tuple[int, int] = DEFAULT_WINDOW) -> np.ndarray:
    '''
    Sum over a (p, q) window of the cosines between each pixel's gradient and
    its neighbours' gradients; the window is clipped at the slice border.
    Directionless gradients (below 1e-12 of the slice maximum) contribute 0.
    '''

    p, q = window
    if p < 1 or q < 1 or p % 2 == 0 or q % 2 == 0:
        raise ConfigError('window extents must be odd and >= 1, got {}'.format(window))

    magnitude = field.magnitude
    peak = float(magnitude.max())
    eps = 1e-12 * peak if peak > 0 else 1e-300
    directed = magnitude >= eps

    ux = np.zeros_like(magnitude)
    uy = np.zeros_like(magnitude)
    np.divide(field.gx, magnitude, out=ux, where=directed)
    np.divide(field.gy, magnitude, out=uy, where=directed)

    hx, hy = p // 2, q // 2
    ny, nx = magnitude.shape
    pad = ((hy, hy), (hx, hx))
    ux_pad = np.pad(ux, pad)
    uy_pad = np.pad(uy, pad)

    raw = np.zeros_like(magnitude)
    for dy in range(q):
        for dx in range(p):
            raw += ux * ux_pad[dy:dy + ny, dx:dx + nx] + uy * uy_pad[dy:dy + ny, dx:dx + nx]
    return raw


def normalize_minmax(raw: np.ndarray) -> np.ndarray:
    low = float(raw.min())
    high = float(raw.max())
    spread = high - low
    if spread < 1e-12 * max(abs(high), 1.0):
        return np.ones_like(raw, dtype=np.float64)

    alpha = (raw - low) / spread
    # pin the extremes against rounding in the division
    alpha[raw == low] = 0.0
    alpha[raw == high] = 1.0
    return alpha


def orientation_coherence(field: GradientField, window: Tuple[int, int] = DEFAULT_WINDOW) -> CoherenceField:
    return CoherenceField(alpha=normalize_minmax(orientation_sum(field, window)), window=tuple(window))
