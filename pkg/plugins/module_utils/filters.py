from __future__ import absolute_import, division, print_function
__metaclass__ = type

import dataclasses
import logging
from dataclasses import dataclass
from typing import Any, Callable, ClassVar, Dict, Iterator, Optional, Tuple, Union

import numpy as np

try:
    from ansible_collections.gvof.denoise.plugins.module_utils.gvof_common import FWHM_PER_SIGMA, ConfigError
    from ansible_collections.gvof.denoise.plugins.module_utils.volume import Volume
    from ansible_collections.gvof.denoise.plugins.module_utils.gradient import (
        CoherenceField, GradientField, gaussian_smooth_slice, gradient_2d, orientation_coherence, smooth_axes)
except ImportError:
    from module_utils.gvof_common import FWHM_PER_SIGMA, ConfigError
    from module_utils.volume import Volume
    from module_utils.gradient import (
        CoherenceField, GradientField, gaussian_smooth_slice, gradient_2d, orientation_coherence, smooth_axes)

logger = logging.getLogger(__name__)

MAX_DT = 0.25
# gradients feeding a diffusion coefficient are taken per voxel, on the same
# lattice as diffusion_step
UNIT_LATTICE = (1.0, 1.0)
NDF_SCHEDULES = ('frozen', 'recompute')

Coefficient = Callable[[np.ndarray], np.ndarray]
Coherence = Callable[[GradientField, Tuple[int, int]], CoherenceField]


def _require(condition: bool, message: str) -> None:
    if not condition:
        raise ConfigError(message)


def _check_diffusion(kappa: float, iterations: int, dt: float, convergence_tol: Optional[float]) -> None:
    _require(kappa > 0, 'kappa must be positive, got {}'.format(kappa))
    _require(iterations >= 1, 'iterations must be >= 1, got {}'.format(iterations))
    _require(0 < dt <= MAX_DT, 'dt must be in (0, {}], got {}'.format(MAX_DT, dt))
    _require(convergence_tol is None or convergence_tol > 0,
             'convergence_tol must be positive when set, got {}'.format(convergence_tol))


@dataclass(frozen=True)
class NoFilterConfig:
    kind: ClassVar[str] = 'none'


@dataclass(frozen=True)
class GaussianConfig:
    kind: ClassVar[str] = 'gf'
    fwhm: float = 4.0

    def __post_init__(self) -> None:
        _require(self.fwhm > 0, 'fwhm must be positive, got {}'.format(self.fwhm))


@dataclass(frozen=True)
class BilateralConfig:
    kind: ClassVar[str] = 'bf'
    spatial_fwhm: float = 4.0
    intensity_width: float = 0.20
    radius: int = 2

    def __post_init__(self) -> None:
        _require(self.spatial_fwhm > 0, 'spatial_fwhm must be positive, got {}'.format(self.spatial_fwhm))
        _require(self.intensity_width > 0, 'intensity_width must be positive, got {}'.format(self.intensity_width))
        _require(self.radius >= 1, 'radius must be >= 1, got {}'.format(self.radius))


@dataclass(frozen=True)
class NdfConfig:
    kind: ClassVar[str] = 'ndf'
    kappa: float = 0.5
    iterations: int = 10
    dt: float = 0.20
    smooth_fwhm: float = 4.0
    schedule: str = 'frozen'
    convergence_tol: Optional[float] = None

    def __post_init__(self) -> None:
        _check_diffusion(self.kappa, self.iterations, self.dt, self.convergence_tol)
        _require(self.smooth_fwhm > 0, 'smooth_fwhm must be positive, got {}'.format(self.smooth_fwhm))
        _require(self.schedule in NDF_SCHEDULES,
                 'schedule must be one of {}, got {}'.format(NDF_SCHEDULES, self.schedule))


@dataclass(frozen=True)
class GvofConfig:
    kind: ClassVar[str] = 'gvof'
    kappa: float = 0.1
    iterations: int = 60
    smooth_fwhm: float = 4.0
    window: Tuple[int, int] = (3, 3)
    dt: float = 0.20
    convergence_tol: Optional[float] = None

    def __post_init__(self) -> None:
        window = (self.window,) if isinstance(self.window, int) else tuple(int(w) for w in self.window)
        if len(window) == 1:
            window = window * 2
        object.__setattr__(self, 'window', window)
        _check_diffusion(self.kappa, self.iterations, self.dt, self.convergence_tol)
        _require(self.smooth_fwhm > 0, 'smooth_fwhm must be positive, got {}'.format(self.smooth_fwhm))
        _require(len(self.window) == 2 and all(w >= 1 and w % 2 == 1 for w in self.window),
                 'window extents must be two odd integers >= 1, got {}'.format(self.window))


FilterConfig = Union[NoFilterConfig, GaussianConfig, BilateralConfig, NdfConfig, GvofConfig]
FILTER_CONFIGS = {cls.kind: cls for cls in (NoFilterConfig, GaussianConfig, BilateralConfig, NdfConfig, GvofConfig)}
FILTER_NAMES = tuple(FILTER_CONFIGS)


def filter_config(kind: str, **params: Any) -> FilterConfig:
    '''
    Build a filter configuration from its name, ignoring parameters set to None
    '''

    if kind not in FILTER_CONFIGS:
        raise ConfigError("unknown filter '{}', expected one of {}".format(kind, ', '.join(FILTER_NAMES)))

    cls = FILTER_CONFIGS[kind]
    names = {f.name for f in dataclasses.fields(cls)}
    unknown = sorted(k for k, v in params.items() if v is not None and k not in names)
    if unknown:
        raise ConfigError("unsupported parameters for filter '{}': {}".format(kind, ', '.join(unknown)))

    return cls(**{k: v for k, v in params.items() if k in names and v is not None})


def filter_params(config: FilterConfig) -> Dict[str, Any]:
    params = dataclasses.asdict(config)
    if 'window' in params:
        params['window'] = list(params['window'])
    return params


def filter_defaults(kind: str) -> Dict[str, Any]:
    return filter_params(FILTER_CONFIGS[kind]())


@dataclass(frozen=True)
class ScaleInfo:
    low: float
    high: float
    degenerate: bool = False


def normalize_intensity(vol: Volume) -> Tuple[Volume, ScaleInfo]:
    '''
    Map the volume affinely onto [0, 1] using its global extremes
    '''

    low = float(vol.data.min())
    high = float(vol.data.max())
    if high <= low:
        logger.warning('constant volume (%g); intensity normalisation skipped', low)
        return vol, ScaleInfo(low=0.0, high=1.0, degenerate=True)

    return vol.with_data((vol.data - low) / (high - low)), ScaleInfo(low=low, high=high)


def denormalize_intensity(vol: Volume, scale: ScaleInfo) -> Volume:
    if scale.degenerate:
        return vol
    return vol.with_data(vol.data * (scale.high - scale.low) + scale.low)


def coeff_pm(magnitude: np.ndarray, kappa: float) -> np.ndarray:
    return np.exp(-(magnitude / kappa) ** 2)


def coeff_gvof(magnitude: np.ndarray, alpha: np.ndarray, kappa: float) -> np.ndarray:
    return np.exp(-((magnitude * alpha) / kappa) ** 2)


def diffusion_step(image: np.ndarray, coefficient: np.ndarray, dt: float) -> np.ndarray:
    '''
    One explicit step of dI/dt = div(c grad I) on the unit lattice with
    face-averaged coefficients and zero flux across the slice border
    '''

    if not 0 < dt <= MAX_DT:
        raise ConfigError('dt must be in (0, {}], got {}'.format(MAX_DT, dt))
    if coefficient.shape != image.shape:
        raise ConfigError('coefficient shape {} does not match slice shape {}'.format(coefficient.shape, image.shape))

    update = np.zeros_like(image, dtype=np.float64)

    flux = 0.5 * (coefficient[:, 1:] + coefficient[:, :-1]) * (image[:, 1:] - image[:, :-1])
    update[:, :-1] += flux
    update[:, 1:] -= flux

    flux = 0.5 * (coefficient[1:, :] + coefficient[:-1, :]) * (image[1:, :] - image[:-1, :])
    update[:-1, :] += flux
    update[1:, :] -= flux

    return image + dt * update


def iterate_diffusion(image: np.ndarray,
                      coefficient: Coefficient,
                      dt: float,
                      iterations: int,
                      convergence_tol: Optional[float] = None) -> Iterator[np.ndarray]:
    '''
    Yield successive diffusion iterates; the coefficient field is re-evaluated
    on the current iterate before every step
    '''

    current = np.asarray(image, dtype=np.float64)
    for _ in range(iterations):
        following = diffusion_step(current, coefficient(current), dt)
        yield following
        if convergence_tol is not None:
            norm = float(np.abs(current).sum())
            change = float(np.abs(following - current).sum())
            if norm == 0.0 or change / norm < convergence_tol:
                return
        current = following


def diffuse_slice(image: np.ndarray,
                  coefficient: Coefficient,
                  dt: float,
                  iterations: int,
                  convergence_tol: Optional[float] = None) -> Tuple[np.ndarray, int]:
    result = np.asarray(image, dtype=np.float64)
    steps = 0
    for steps, result in enumerate(iterate_diffusion(image, coefficient, dt, iterations, convergence_tol), start=1):
        pass
    return result, steps


def pm_coefficient(kappa: float, lattice: Tuple[float, float] = UNIT_LATTICE) -> Coefficient:
    def coefficient(image: np.ndarray) -> np.ndarray:
        return coeff_pm(gradient_2d(image, lattice).magnitude, kappa)
    return coefficient


def gvof_coefficient(kappa: float,
                     window: Tuple[int, int],
                     coherence: Coherence = orientation_coherence,
                     lattice: Tuple[float, float] = UNIT_LATTICE) -> Coefficient:
    def coefficient(image: np.ndarray) -> np.ndarray:
        field = gradient_2d(image, lattice)
        return coeff_gvof(field.magnitude, coherence(field, window).alpha, kappa)
    return coefficient


def _frozen(field: np.ndarray) -> Coefficient:
    return lambda image: field


def run_ndf(vol: Volume, config: NdfConfig) -> Volume:
    logger.info('ndf: kappa=%g iterations=%d dt=%g schedule=%s', config.kappa, config.iterations, config.dt,
                config.schedule)

    normalized, scale = normalize_intensity(vol)
    spacing = vol.spacing[:2]
    out = np.empty_like(normalized.data)

    for z, image in enumerate(normalized.data):
        if config.schedule == 'frozen':
            smoothed = gaussian_smooth_slice(image, config.smooth_fwhm, spacing)
            coefficient = _frozen(coeff_pm(gradient_2d(smoothed, UNIT_LATTICE).magnitude, config.kappa))
        else:
            coefficient = pm_coefficient(config.kappa)
        out[z], steps = diffuse_slice(image, coefficient, config.dt, config.iterations, config.convergence_tol)
        logger.debug('ndf: slice %d stopped after %d iterations', z, steps)

    return denormalize_intensity(normalized.with_data(out), scale)


def run_gvof(vol: Volume, config: GvofConfig, coherence: Coherence = orientation_coherence) -> Volume:
    '''
    Slice by slice: smooth the normalised slice once, then diffuse the smoothed
    slice with coefficients from its current gradient magnitude and orientation
    coherence, and stack the slices back into a volume
    '''

    logger.info('gvof: kappa=%g iterations=%d window=%s dt=%g smooth_fwhm=%g', config.kappa, config.iterations,
                config.window, config.dt, config.smooth_fwhm)

    normalized, scale = normalize_intensity(vol)
    spacing = vol.spacing[:2]
    coefficient = gvof_coefficient(config.kappa, config.window, coherence)
    out = np.empty_like(normalized.data)

    for z, image in enumerate(normalized.data):
        smoothed = gaussian_smooth_slice(image, config.smooth_fwhm, spacing)
        out[z], steps = diffuse_slice(smoothed, coefficient, config.dt, config.iterations, config.convergence_tol)
        logger.debug('gvof: slice %d stopped after %d iterations', z, steps)

    return denormalize_intensity(normalized.with_data(out), scale)


def run_gaussian(vol: Volume, config: GaussianConfig) -> Volume:
    logger.info('gf: fwhm=%g', config.fwhm)
    sx, sy = vol.spacing[:2]
    return vol.with_data(smooth_axes(vol.data, config.fwhm, (sx, sy), axes=(2, 1)))


def bilateral_slice(image: np.ndarray, config: BilateralConfig, spacing: Tuple[float, float]) -> np.ndarray:
    low = float(image.min())
    high = float(image.max())
    if high <= low:
        return np.array(image, dtype=np.float64)

    sx, sy = spacing
    r = config.radius
    sigma_s = config.spatial_fwhm / FWHM_PER_SIGMA
    sigma_i = config.intensity_width * (high - low)
    ny, nx = image.shape

    padded = np.pad(image, r, mode='edge')
    inside = np.pad(np.ones(image.shape, dtype=bool), r, mode='constant', constant_values=False)
    numerator = np.zeros(image.shape)
    denominator = np.zeros(image.shape)

    for dy in range(-r, r + 1):
        for dx in range(-r, r + 1):
            spatial = np.exp(-((dx * sx) ** 2 + (dy * sy) ** 2) / (2.0 * sigma_s ** 2))
            neighbour = padded[r + dy:r + dy + ny, r + dx:r + dx + nx]
            weight = spatial * np.exp(-(neighbour - image) ** 2 / (2.0 * sigma_i ** 2))
            weight = np.where(inside[r + dy:r + dy + ny, r + dx:r + dx + nx], weight, 0.0)
            numerator += weight * neighbour
            denominator += weight

    return numerator / denominator


def run_bilateral(vol: Volume, config: BilateralConfig) -> Volume:
    logger.info('bf: spatial_fwhm=%g intensity_width=%g radius=%d', config.spatial_fwhm, config.intensity_width,
                config.radius)
    spacing = vol.spacing[:2]
    return vol.with_data(np.stack([bilateral_slice(image, config, spacing) for image in vol.data]))


def run_none(vol: Volume, config: NoFilterConfig) -> Volume:
    return vol


RUNNERS = {
    NoFilterConfig: run_none,
    GaussianConfig: run_gaussian,
    BilateralConfig: run_bilateral,
    NdfConfig: run_ndf,
    GvofConfig: run_gvof,
}


def apply_filter(vol: Volume, config: FilterConfig) -> Volume:
    try:
        runner = RUNNERS[type(config)]
    except KeyError:
        raise ConfigError('not a filter configuration: {!r}'.format(config))
    return runner(vol, config)
