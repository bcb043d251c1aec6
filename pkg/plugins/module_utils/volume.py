from __future__ import absolute_import, division, print_function
__metaclass__ = type

from dataclasses import dataclass
from typing import Sequence, Tuple

import numpy as np
from scipy import ndimage

try:
    from ansible_collections.gvof.denoise.plugins.module_utils.gvof_common import VolumeError
except ImportError:
    from module_utils.gvof_common import VolumeError

AXES = ('x', 'y', 'z')
DEFAULT_SPACING = (2.67, 2.67, 2.0)


@dataclass(frozen=True)
class VolumeGeometry:
    dims: Tuple[int, int, int]
    spacing: Tuple[float, float, float] = DEFAULT_SPACING

    def __post_init__(self) -> None:
        object.__setattr__(self, 'dims', tuple(int(n) for n in self.dims))
        object.__setattr__(self, 'spacing', tuple(float(s) for s in self.spacing))
        if len(self.dims) != 3 or min(self.dims) < 1:
            raise VolumeError('dims must be three counts >= 1, got {}'.format(self.dims))
        if len(self.spacing) != 3 or min(self.spacing) <= 0:
            raise VolumeError('spacing must be three positive lengths, got {}'.format(self.spacing))

    @property
    def shape(self) -> Tuple[int, int, int]:
        nx, ny, nz = self.dims
        return nz, ny, nx

    @property
    def voxel_volume_ml(self) -> float:
        sx, sy, sz = self.spacing
        return sx * sy * sz / 1000.0

    @property
    def center_mm(self) -> Tuple[float, float, float]:
        return tuple(0.5 * (n - 1) * s for n, s in zip(self.dims, self.spacing))

    def coordinates(self) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
        '''
        Broadcastable voxel centre coordinates in mm, ordered (z, y, x)
        '''

        nx, ny, nz = self.dims
        sx, sy, sz = self.spacing
        z = (np.arange(nz) * sz)[:, None, None]
        y = (np.arange(ny) * sy)[None, :, None]
        x = (np.arange(nx) * sx)[None, None, :]
        return z, y, x


@dataclass(frozen=True, eq=False)
class Volume:
    '''
    Activity map in kBq/ml, stored as an array of shape (nz, ny, nx)
    '''

    data: np.ndarray
    spacing: Tuple[float, float, float] = DEFAULT_SPACING

    def __post_init__(self) -> None:
        data = np.asarray(self.data, dtype=np.float64)
        if data.ndim != 3 or min(data.shape) < 1:
            raise VolumeError('volume data must be a non-empty 3D array, got shape {}'.format(data.shape))
        if not np.all(np.isfinite(data)):
            raise VolumeError('volume contains NaN or infinite values')
        object.__setattr__(self, 'data', data)
        object.__setattr__(self, 'spacing', tuple(float(s) for s in self.spacing))
        VolumeGeometry(self.dims, self.spacing)

    @property
    def dims(self) -> Tuple[int, int, int]:
        nz, ny, nx = self.data.shape
        return nx, ny, nz

    @property
    def geometry(self) -> VolumeGeometry:
        return VolumeGeometry(self.dims, self.spacing)

    def with_data(self, data: np.ndarray) -> "Volume":
        return Volume(data, self.spacing)


@dataclass(frozen=True, eq=False)
class Profile:
    positions: np.ndarray
    values: np.ndarray


def sphere_mask(geometry: VolumeGeometry, center: Sequence[float], diameter: float) -> np.ndarray:
    '''
    Voxels whose centre lies within diameter/2 of center (mm)
    '''

    if diameter <= 0:
        raise VolumeError('sphere diameter must be positive, got {}'.format(diameter))

    cx, cy, cz = center
    z, y, x = geometry.coordinates()
    radius = 0.5 * diameter
    mask = (x - cx) ** 2 + (y - cy) ** 2 + (z - cz) ** 2 <= radius ** 2

    if not mask.any():
        raise VolumeError('sphere at {} with diameter {} mm has no voxel inside the grid'.format(
            tuple(center), diameter))

    return mask


def erode_mask_2d(mask: np.ndarray) -> np.ndarray:
    '''
    Per-slice erosion with a full 3x3 element; outside the grid counts as false
    '''

    structure = np.ones((1, 3, 3), dtype=bool)
    return ndimage.binary_erosion(mask, structure=structure, border_value=0)


def dilate_mask_2d(mask: np.ndarray, iterations: int = 1) -> np.ndarray:
    if iterations < 1:
        return mask.copy()
    structure = np.ones((1, 3, 3), dtype=bool)
    return ndimage.binary_dilation(mask, structure=structure, iterations=iterations)


def line_profile(vol: Volume, axis: str, fixed: Tuple[int, int]) -> Profile:
    '''
    Sample every voxel along an axis. fixed is (y, z) for x, (x, z) for y and (x, y) for z.
    '''

    if axis not in AXES:
        raise VolumeError("axis must be one of {}, got '{}'".format(AXES, axis))

    nx, ny, nz = vol.dims
    a, b = fixed
    if axis == 'x':
        limits = (ny, nz)
        index = (b, a, slice(None))
    elif axis == 'y':
        limits = (nx, nz)
        index = (b, slice(None), a)
    else:
        limits = (nx, ny)
        index = (slice(None), b, a)

    for value, limit in zip((a, b), limits):
        if not 0 <= value < limit:
            raise VolumeError('profile index {} out of range [0, {})'.format(value, limit))

    values = vol.data[index].copy()
    spacing = vol.spacing[AXES.index(axis)]
    return Profile(positions=np.arange(values.size) * spacing, values=values)


def roi_stats(vol: Volume, mask: np.ndarray) -> Tuple[float, float, int]:
    '''
    Mean, sample standard deviation and voxel count over a mask
    '''

    if mask.shape != vol.data.shape:
        raise VolumeError('mask shape {} does not match volume shape {}'.format(mask.shape, vol.data.shape))

    values = vol.data[mask]
    count = values.size
    if count == 0:
        raise VolumeError('ROI mask is empty')

    mean = float(values.mean())
    sd = float(values.std(ddof=1)) if count > 1 else 0.0
    return mean, sd, count
