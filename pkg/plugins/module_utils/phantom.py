from __future__ import absolute_import, division, print_function
__metaclass__ = type

import dataclasses
import logging
import math
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple

import numpy as np

try:
    from ansible_collections.gvof.denoise.plugins.module_utils.gvof_common import ConfigError, GvofError, VolumeError
    from ansible_collections.gvof.denoise.plugins.module_utils.volume import Volume, VolumeGeometry
    from ansible_collections.gvof.denoise.plugins.module_utils.gradient import smooth_axes
except ImportError:
    from module_utils.gvof_common import ConfigError, GvofError, VolumeError
    from module_utils.volume import Volume, VolumeGeometry
    from module_utils.gradient import smooth_axes

logger = logging.getLogger(__name__)

# (sphere, background) activity concentration in kBq/ml
CONTRAST_PRESETS = {
    '2:1': (1668.0, 838.0),
    '4:1': (2775.0, 697.0),
}
NEMA_DIAMETERS = (10.0, 13.0, 17.0, 22.0, 28.0, 37.0)
SPHERE_RING_RADIUS = 57.2
BODY_SEMI_AXES = (147.0, 114.5)
BODY_HEIGHT = 180.0

FULL_DIMS = (256, 256, 109)
STUDY_DIMS = (128, 128, 32)
DURATIONS = (900.0, 1200.0, 2000.0, 4000.0)

# expected counts per kBq/ml per second per voxel; the background SNR of an
# unfiltered acquisition is 10*log10(activity * sensitivity * duration), which
# puts 838 kBq/ml over 900 s at 9.59 dB
DEFAULT_SENSITIVITY = 1.2065e-05
DEFAULT_PSF_FWHM = 4.5
DEFAULT_SUPERSAMPLE = 4
MAX_EXPECTED_COUNTS = 2.0 ** 63


@dataclass(frozen=True)
class Sphere:
    center: Tuple[float, float, float]
    diameter: float
    activity: float

    def __post_init__(self) -> None:
        object.__setattr__(self, 'center', tuple(float(c) for c in self.center))
        if self.diameter <= 0:
            raise ConfigError('sphere diameter must be positive, got {}'.format(self.diameter))
        if self.activity < 0:
            raise ConfigError('sphere activity must be >= 0, got {}'.format(self.activity))

    @property
    def radius(self) -> float:
        return 0.5 * self.diameter


@dataclass(frozen=True)
class PhantomSpec:
    '''
    Spheres of uniform activity inside an elliptical cylinder of background
    activity, with nothing outside the cylinder. Positions are in mm from the
    centre of voxel (0, 0, 0).
    '''

    geometry: VolumeGeometry
    background_activity: float
    spheres: Tuple[Sphere, ...] = ()
    body_center: Optional[Tuple[float, float, float]] = None
    body_semi_axes: Tuple[float, float] = BODY_SEMI_AXES
    body_height: float = BODY_HEIGHT

    def __post_init__(self) -> None:
        object.__setattr__(self, 'spheres', tuple(self.spheres))
        if self.body_center is None:
            object.__setattr__(self, 'body_center', self.geometry.center_mm)
        object.__setattr__(self, 'body_center', tuple(float(c) for c in self.body_center))
        object.__setattr__(self, 'body_semi_axes', tuple(float(a) for a in self.body_semi_axes))

        if self.background_activity < 0:
            raise ConfigError('background activity must be >= 0, got {}'.format(self.background_activity))
        if min(self.body_semi_axes) <= 0 or self.body_height <= 0:
            raise ConfigError('body semi-axes and height must be positive')
        for sphere in self.spheres:
            if not self.contains(sphere):
                raise ConfigError('sphere of {} mm at {} is not inside the body'.format(sphere.diameter, sphere.center))

    def contains(self, sphere: Sphere) -> bool:
        bx, by, bz = self.body_center
        a, b = self.body_semi_axes
        dx, dy, dz = (c - o for c, o in zip(sphere.center, self.body_center))
        if abs(dz) + sphere.radius > 0.5 * self.body_height:
            return False
        theta = np.linspace(0.0, 2.0 * np.pi, 721)
        rim = ((dx + sphere.radius * np.cos(theta)) / a) ** 2 + ((dy + sphere.radius * np.sin(theta)) / b) ** 2
        return bool(rim.max() <= 1.0)


@dataclass(frozen=True)
class AcquisitionModel:
    duration: float = DURATIONS[0]
    sensitivity: float = DEFAULT_SENSITIVITY
    psf_fwhm: float = DEFAULT_PSF_FWHM
    seed: int = 0

    def __post_init__(self) -> None:
        if self.duration <= 0:
            raise ConfigError('duration must be positive, got {}'.format(self.duration))
        if self.sensitivity <= 0:
            raise ConfigError('sensitivity must be positive, got {}'.format(self.sensitivity))
        if self.psf_fwhm < 0:
            raise ConfigError('psf_fwhm must be >= 0, got {}'.format(self.psf_fwhm))


def sphere_ring(center: Sequence[float],
                activity: float,
                diameters: Sequence[float] = NEMA_DIAMETERS,
                ring_radius: float = SPHERE_RING_RADIUS) -> List[Sphere]:
    '''
    Spheres at equal angular steps on a circle in the plane through center,
    the first one on the +x axis
    '''

    cx, cy, cz = center
    step = 2.0 * math.pi / len(diameters)
    return [Sphere(center=(cx + ring_radius * math.cos(k * step), cy + ring_radius * math.sin(k * step), cz),
                   diameter=diameter,
                   activity=activity)
            for k, diameter in enumerate(diameters)]


def nema_phantom(contrast: str = '2:1',
                 geometry: Optional[VolumeGeometry] = None,
                 diameters: Sequence[float] = NEMA_DIAMETERS,
                 ring_radius: float = SPHERE_RING_RADIUS,
                 body_semi_axes: Tuple[float, float] = BODY_SEMI_AXES,
                 body_height: float = BODY_HEIGHT) -> PhantomSpec:
    if contrast not in CONTRAST_PRESETS:
        raise ConfigError("unknown contrast preset '{}', expected one of {}".format(
            contrast, ', '.join(CONTRAST_PRESETS)))
    if geometry is None:
        geometry = VolumeGeometry(FULL_DIMS)

    sphere_activity, background = CONTRAST_PRESETS[contrast]
    center = geometry.center_mm
    return PhantomSpec(geometry=geometry,
                       background_activity=background,
                       spheres=tuple(sphere_ring(center, sphere_activity, diameters, ring_radius)),
                       body_center=center,
                       body_semi_axes=body_semi_axes,
                       body_height=body_height)


def _check_overlaps(spheres: Sequence[Sphere]) -> None:
    for i, first in enumerate(spheres):
        for second in spheres[i + 1:]:
            if math.dist(first.center, second.center) < first.radius + second.radius:
                raise ConfigError('spheres of {} mm and {} mm overlap'.format(first.diameter, second.diameter))


def _sphere_fraction(geometry: VolumeGeometry, sphere: Sphere, offsets: np.ndarray):
    '''
    Bounding-box slices of a sphere and the fraction of each voxel inside it
    '''

    box = []
    bounds = []
    for center, pitch, count in zip(sphere.center, geometry.spacing, geometry.dims):
        low = max(int(math.floor((center - sphere.radius) / pitch)) - 1, 0)
        high = min(int(math.ceil((center + sphere.radius) / pitch)) + 2, count)
        if low >= high:
            return None, None
        box.append(np.arange(low, high) * pitch)
        bounds.append(slice(low, high))

    xs, ys, zs = box
    cx, cy, cz = sphere.center
    sx, sy, sz = geometry.spacing
    inside = np.zeros((zs.size, ys.size, xs.size))
    for oz in offsets:
        dz2 = ((zs + oz * sz - cz) ** 2)[:, None, None]
        for oy in offsets:
            dy2 = ((ys + oy * sy - cy) ** 2)[None, :, None]
            for ox in offsets:
                dx2 = ((xs + ox * sx - cx) ** 2)[None, None, :]
                inside += dx2 + dy2 + dz2 <= sphere.radius ** 2

    index = tuple(reversed(bounds))
    return index, inside / offsets.size ** 3


def rasterize_phantom(spec: PhantomSpec, supersample: int = DEFAULT_SUPERSAMPLE) -> Volume:
    '''
    Ground-truth activity: each voxel mixes the activities of the regions it
    covers, weighted by the share of supersample**3 sub-voxel points in each
    '''

    if supersample < 1:
        raise ConfigError('supersample must be >= 1, got {}'.format(supersample))
    _check_overlaps(spec.spheres)

    geometry = spec.geometry
    offsets = (np.arange(supersample) + 0.5) / supersample - 0.5
    z, y, x = geometry.coordinates()
    sx, sy, sz = geometry.spacing
    bx, by, bz = spec.body_center
    a, b = spec.body_semi_axes

    plane = np.zeros(geometry.shape[1:])
    for oy in offsets:
        for ox in offsets:
            plane += ((x[0] + ox * sx - bx) / a) ** 2 + ((y[0] + oy * sy - by) / b) ** 2 <= 1.0
    plane /= supersample ** 2

    axial = np.zeros(geometry.shape[0])
    for oz in offsets:
        axial += np.abs(z[:, 0, 0] + oz * sz - bz) <= 0.5 * spec.body_height
    axial /= supersample

    data = spec.background_activity * axial[:, None, None] * plane[None, :, :]
    for sphere in spec.spheres:
        index, fraction = _sphere_fraction(geometry, sphere, offsets)
        if index is not None:
            data[index] += (sphere.activity - spec.background_activity) * fraction

    return Volume(data, geometry.spacing)


def psf_blur(truth: Volume, psf_fwhm: float) -> Volume:
    if psf_fwhm == 0:
        return truth
    return truth.with_data(smooth_axes(truth.data, psf_fwhm, truth.spacing, axes=(2, 1, 0)))


def simulate_acquisition(truth: Volume, model: AcquisitionModel) -> Volume:
    '''
    Blur with the PSF, scale to expected counts, draw Poisson counts with the
    model's seed and convert the counts back to activity
    '''

    if truth.data.min() < 0:
        raise VolumeError('ground truth must be non-negative')

    scale = model.sensitivity * model.duration
    expected = psf_blur(truth, model.psf_fwhm).data * scale
    if expected.max() > MAX_EXPECTED_COUNTS:
        raise GvofError('expected counts {:g} exceed 2**63'.format(expected.max()))

    counts = np.random.default_rng(model.seed).poisson(expected)
    return truth.with_data(counts / scale)


def generate_realizations(spec: PhantomSpec,
                          model: AcquisitionModel,
                          n: int,
                          base_seed: int,
                          truth: Optional[Volume] = None,
                          supersample: int = DEFAULT_SUPERSAMPLE) -> List[Volume]:
    if n < 1:
        raise ConfigError('number of realizations must be >= 1, got {}'.format(n))
    if truth is None:
        truth = rasterize_phantom(spec, supersample)

    logger.info('simulating %d realizations of %g s from seed %d', n, model.duration, base_seed)
    return [simulate_acquisition(truth, dataclasses.replace(model, seed=base_seed + k)) for k in range(n)]

