from __future__ import absolute_import, division, print_function
__metaclass__ = type

import dataclasses
import logging
import math
from collections import OrderedDict
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
from scipy import linalg

try:
    from ansible_collections.gvof.denoise.plugins.module_utils.gvof_common import (
        FWHM_PER_SIGMA, ConfigError, FitError, InfiniteSnrError, MetricError, SphereTooSmallError)
    from ansible_collections.gvof.denoise.plugins.module_utils.volume import (
        AXES, Volume, dilate_mask_2d, erode_mask_2d, roi_stats, sphere_mask)
    from ansible_collections.gvof.denoise.plugins.module_utils.phantom import PhantomSpec, Sphere
except ImportError:
    from module_utils.gvof_common import (
        FWHM_PER_SIGMA, ConfigError, FitError, InfiniteSnrError, MetricError, SphereTooSmallError)
    from module_utils.volume import AXES, Volume, dilate_mask_2d, erode_mask_2d, roi_stats, sphere_mask
    from module_utils.phantom import PhantomSpec, Sphere

logger = logging.getLogger(__name__)

AC_MAX_DILATION = 1
RESOLUTION_SPHERE_MM = 37.0
RESOLUTION_BAND = 0.5
SMALL_SPHERE_LIMIT_MM = 20.0
REPRO_MIN_DIAMETER_MM = 17.0
COV_DECIMALS = 4

FIT_TOLERANCE = 1e-8
FIT_MAX_ITERATIONS = 200

REPORT_COLUMNS = ('contrast', 'duration_s', 'filter', 'realization', 'sphere_mm',
                  'snr_db', 'cnr', 'fwhm_mm', 'ac_max', 'bias_pct', 'repro_pct', 'cov_snr')
SUMMARY_COLUMNS = ('contrast', 'duration_s', 'filter', 'snr_db', 'snr_gain_pct', 'cov_snr', 'cnr_mean',
                   'fwhm_mm', 'fwhm_sd_mm', 'bias_small_pct', 'bias_large_pct', 'repro_pct')
AGGREGATE = 'agg'


@dataclass(frozen=True)
class GaussianFitResult:
    amplitude: float
    center: float
    sigma: float
    residual_rms: float
    iterations: int = 0

    @property
    def fwhm(self) -> float:
        return FWHM_PER_SIGMA * self.sigma


@dataclass(frozen=True)
class EdgeSpec:
    '''
    Rising edge of a sphere along one axis, profiled along the grid lines
    near its centre
    '''

    center: Tuple[float, float, float]
    diameter: float
    axis: str = 'x'


@dataclass(frozen=True)
class BackgroundRoi:
    '''
    Spherical background ROI placed in the sphere plane at distance mm from
    the phantom centre, at angle degrees counter-clockwise from +x
    '''

    distance: float = 103.0
    angle: float = 150.0
    diameter: float = 37.0
    min_clearance: float = 30.0


@dataclass(frozen=True)
class MetricsRow:
    contrast: str
    duration_s: float
    filter: str
    realization: Union[int, str]
    sphere_mm: float
    snr_db: Optional[float] = None
    cnr: Optional[float] = None
    fwhm_mm: Optional[float] = None
    ac_max: Optional[float] = None
    bias_pct: Optional[float] = None
    repro_pct: Optional[float] = None
    cov_snr: Optional[float] = None

    def record(self) -> Dict[str, Any]:
        return OrderedDict((column, getattr(self, column)) for column in REPORT_COLUMNS)


@dataclass
class MetricsReport:
    rows: List[MetricsRow] = field(default_factory=list)
    metadata: Dict[str, Any] = field(default_factory=dict)


@dataclass(frozen=True)
class SummaryRow:
    contrast: str
    duration_s: float
    filter: str
    snr_db: Optional[float] = None
    snr_gain_pct: Optional[float] = None
    cov_snr: Optional[float] = None
    cnr_mean: Optional[float] = None
    fwhm_mm: Optional[float] = None
    fwhm_sd_mm: Optional[float] = None
    bias_small_pct: Optional[float] = None
    bias_large_pct: Optional[float] = None
    repro_pct: Optional[float] = None

    def record(self) -> Dict[str, Any]:
        return OrderedDict((column, getattr(self, column)) for column in SUMMARY_COLUMNS)


def snr_db(vol: Volume, bg_mask: np.ndarray) -> float:
    mean, sd, _ = roi_stats(vol, bg_mask)
    if sd == 0:
        raise InfiniteSnrError('infinite SNR: background ROI is constant')
    if mean <= 0:
        raise MetricError('SNR needs a positive background mean, got {:g}'.format(mean))
    return 20.0 * math.log10(mean / sd)


def cnr(vol: Volume, eroded_mask: np.ndarray, bg_mask: np.ndarray) -> float:
    if not eroded_mask.any():
        raise SphereTooSmallError('sphere too small after erosion')
    sphere_mean = roi_stats(vol, eroded_mask)[0]
    bg_mean, bg_sd, _ = roi_stats(vol, bg_mask)
    if bg_sd == 0:
        raise MetricError('CNR undefined: background ROI is constant')
    return (sphere_mean - bg_mean) / bg_sd


def eroded_sphere_mask(vol_geometry, center: Sequence[float], diameter: float) -> np.ndarray:
    eroded = erode_mask_2d(sphere_mask(vol_geometry, center, diameter))
    if not eroded.any():
        raise SphereTooSmallError('sphere of {} mm too small after erosion'.format(diameter))
    return eroded


def _gaussian(x: np.ndarray, params: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    amplitude, center, sigma = params
    shape = np.exp(-(x - center) ** 2 / (2.0 * sigma ** 2))
    return amplitude * shape, shape


def fit_gaussian_1d(positions: Sequence[float],
                    values: Sequence[float],
                    subtract_min: bool = False,
                    signed: bool = False) -> GaussianFitResult:
    '''
    Least-squares fit of A*exp(-(x-mu)**2/(2*sigma**2)) started from the
    profile moments and refined by damped Gauss-Newton steps until the
    parameters move by less than 1e-8 (centre and width relative to sigma).
    Sigma is kept within the span of the positions. With signed, values may
    carry zero-mean noise below zero; positions may repeat and the moments
    use the positive part only.
    '''

    x = np.asarray(positions, dtype=np.float64)
    y = np.asarray(values, dtype=np.float64)
    if x.shape != y.shape or x.ndim != 1:
        raise MetricError('positions and values must be 1D arrays of equal length')
    if x.size < 5:
        raise MetricError('gaussian fit needs at least 5 samples, got {}'.format(x.size))
    if not (np.all(np.isfinite(x)) and np.all(np.isfinite(y))):
        raise MetricError('profile contains NaN or infinite values')
    if subtract_min:
        y = y - y.min()
    if not signed and y.min() < 0:
        raise MetricError('profile values must be non-negative')

    weights = np.clip(y, 0.0, None)
    peak = int(np.argmax(weights))
    if weights[peak] <= 0 or (not signed and peak in (0, x.size - 1)):
        raise MetricError('profile has no interior maximum')

    span = float(x.max() - x.min())
    if span <= 0:
        raise MetricError('positions must cover a nonzero range')
    total = weights.sum()
    center = float((x * weights).sum() / total)
    variance = float(((x - center) ** 2 * weights).sum() / total)
    sigma = math.sqrt(variance) if variance > 0 else float(np.min(np.diff(np.unique(x))))
    if signed:
        shape = _gaussian(x, np.array([1.0, center, sigma]))[1]
        amplitude = float((y * shape).sum() / (shape ** 2).sum())
    else:
        amplitude = y[peak]
    params = np.array([amplitude, center, sigma])

    def cost(p: np.ndarray) -> float:
        return float(np.sum((y - _gaussian(x, p)[0]) ** 2))

    current = cost(params)
    for iteration in range(1, FIT_MAX_ITERATIONS + 1):
        model, shape = _gaussian(x, params)
        amplitude, center, sigma = params
        offset = x - center
        jacobian = np.column_stack([shape,
                                    model * offset / sigma ** 2,
                                    model * offset ** 2 / sigma ** 3])
        step = linalg.lstsq(jacobian, y - model)[0]

        damping = 1.0
        while damping > 1e-6:
            trial = params + damping * step
            if 0 < trial[2] <= span and cost(trial) <= current:
                break
            damping *= 0.5
        else:
            break

        change = np.abs(damping * step) / np.array([max(abs(amplitude), 1e-300), sigma, sigma])
        params = trial
        current = cost(params)
        if change.max() < FIT_TOLERANCE:
            break
    else:
        raise FitError('gaussian fit did not converge in {} iterations'.format(FIT_MAX_ITERATIONS),
                       math.sqrt(current / x.size))

    if params[0] <= 0:
        raise FitError('gaussian fit found no positive peak', math.sqrt(current / x.size))

    return GaussianFitResult(amplitude=float(params[0]),
                             center=float(params[1]),
                             sigma=float(abs(params[2])),
                             residual_rms=math.sqrt(current / x.size),
                             iterations=iteration)


def edge_fwhm(offsets: np.ndarray, gradient: np.ndarray, half_width: float, steps: np.ndarray) -> float:
    '''
    FWHM of an edge from gradient samples placed at their signed distance from
    the edge, pooled over every sample within half_width. The gradient is
    oriented so the edge peak is positive. A forward difference over a step h
    widens the peak by a box of width h, so the fitted variance loses the mean
    h**2/12 of the pooled samples.
    '''

    steps = np.broadcast_to(np.asarray(steps, dtype=np.float64), np.shape(offsets)).ravel()
    offsets = np.asarray(offsets, dtype=np.float64).ravel()
    gradient = np.asarray(gradient, dtype=np.float64).ravel()

    keep = np.abs(offsets) <= half_width
    if keep.sum() < 5:
        raise MetricError('edge segment of +/-{:g} mm holds fewer than 5 samples'.format(half_width))

    total = float(gradient[keep].sum())
    if total == 0:
        raise MetricError('edge segment is flat')

    order = np.argsort(offsets[keep], kind='stable')
    fit = fit_gaussian_1d(offsets[keep][order], np.sign(total) * gradient[keep][order], signed=True)
    variance = fit.sigma ** 2 - float(np.mean(steps[keep] ** 2)) / 12.0
    sigma = math.sqrt(variance) if variance > 0 else fit.sigma
    return FWHM_PER_SIGMA * sigma


def chord_lines(vol: Volume, axis: str, center: Sequence[float], band: float) -> Tuple[np.ndarray, np.ndarray]:
    '''
    Every grid line along axis passing within band mm of center, as rows of an
    (L, n) array, and the distance of each line from center
    '''

    along = 2 - AXES.index(axis)
    lines = np.moveaxis(vol.data, along, -1)
    across = [a for a in range(3) if a != along]
    first, second = (np.arange(vol.data.shape[a]) * vol.spacing[2 - a] - center[2 - a] for a in across)
    distance = np.hypot(first[:, None], second[None, :])
    chosen = distance <= band
    return lines[chosen], distance[chosen]


def resolution_fwhm(vol: Volume, edge: EdgeSpec, band: float = RESOLUTION_BAND) -> float:
    '''
    Rising-edge FWHM of a sphere, pooled over the grid lines along the edge
    axis that pass within band radii of its centre. Each line is aligned on
    the point where it crosses the sphere surface, and its samples are rescaled
    to distances along the surface normal.
    '''

    if edge.axis not in AXES:
        raise MetricError("edge axis must be one of {}, got '{}'".format(AXES, edge.axis))
    if not 0 < band < 1:
        raise MetricError('resolution band must be in (0, 1) radii, got {}'.format(band))

    axis = AXES.index(edge.axis)
    pitch = vol.spacing[axis]
    if edge.diameter < 4 * pitch:
        raise MetricError('sphere of {} mm spans fewer than 4 voxels along {}'.format(edge.diameter, edge.axis))

    radius = 0.5 * edge.diameter
    lines, distance = chord_lines(vol, edge.axis, edge.center, band * radius)
    if lines.shape[0] == 0 or lines.shape[1] < 2:
        raise MetricError('no grid line along {} passes within {:g} mm of the sphere centre'.format(
            edge.axis, band * radius))

    # cosine of the angle between each line and the surface normal where it crosses
    cosine = np.sqrt(radius ** 2 - distance ** 2) / radius
    crossing = edge.center[axis] - radius * cosine
    midpoints = (np.arange(lines.shape[1] - 1) + 0.5) * pitch

    offsets = (midpoints[None, :] - crossing[:, None]) * cosine[:, None]
    gradient = np.diff(lines, axis=1) / (pitch * cosine[:, None])
    steps = np.broadcast_to((pitch * cosine)[:, None], offsets.shape)
    logger.debug('resolution: %d lines within %g mm of the %g mm sphere centre', lines.shape[0], band * radius,
                 edge.diameter)

    return edge_fwhm(offsets, gradient, half_width=max(0.5 * radius, 3 * pitch), steps=steps)


def ac_max(vol: Volume, mask: np.ndarray, dilation: int = AC_MAX_DILATION) -> float:
    search = dilate_mask_2d(mask, dilation)
    if not search.any():
        raise MetricError('AC_max search region is empty')
    return float(vol.data[search].max())


def percent_bias(ac_max_mean: float, tac: float) -> float:
    if tac <= 0:
        raise MetricError('true activity must be positive, got {:g}'.format(tac))
    return 100.0 * (ac_max_mean - tac) / tac


def percent_difference(high: float, low: float) -> float:
    if high + low <= 0:
        raise MetricError('percent difference needs a positive sum, got {:g} and {:g}'.format(high, low))
    return 200.0 * abs(high - low) / (high + low)


def cov(values: Sequence[float]) -> float:
    data = np.asarray(values, dtype=np.float64)
    if data.size < 2:
        raise MetricError('coefficient of variation needs at least 2 values, got {}'.format(data.size))
    mean = float(data.mean())
    if mean == 0:
        raise MetricError('coefficient of variation undefined for zero mean')
    return float(data.std(ddof=1)) / mean


def percent_improvement(value: float, reference: float) -> float:
    if reference == 0:
        raise MetricError('improvement undefined against a zero reference')
    return 100.0 * (value - reference) / abs(reference)


def background_roi_center(spec: PhantomSpec, roi: BackgroundRoi) -> Tuple[float, float, float]:
    bx, by, bz = spec.body_center
    if spec.spheres:
        bz = spec.spheres[0].center[2]
    theta = math.radians(roi.angle)
    return bx + roi.distance * math.cos(theta), by + roi.distance * math.sin(theta), bz


def background_roi_mask(spec: PhantomSpec, roi: BackgroundRoi) -> np.ndarray:
    '''
    Background ROI mask after checking it clears every hot sphere by
    min_clearance (surface to surface) and lies inside the body and the grid
    '''

    center = background_roi_center(spec, roi)
    radius = 0.5 * roi.diameter
    for sphere in spec.spheres:
        clearance = math.dist(center, sphere.center) - radius - sphere.radius
        if clearance < roi.min_clearance:
            raise ConfigError('background ROI clears the {} mm sphere by {:.1f} mm, need {:g} mm'.format(
                sphere.diameter, clearance, roi.min_clearance))

    if not spec.contains(Sphere(center=center, diameter=roi.diameter, activity=0.0)):
        raise ConfigError('background ROI at {} is not inside the body'.format(tuple(round(c, 2) for c in center)))

    extent = [(n - 1) * s for n, s in zip(spec.geometry.dims, spec.geometry.spacing)]
    if any(c - radius < 0 or c + radius > e for c, e in zip(center, extent)):
        raise ConfigError('background ROI does not fit in a {}x{}x{} grid'.format(*spec.geometry.dims))

    return sphere_mask(spec.geometry, center, roi.diameter)


@dataclass(frozen=True, eq=False)
class SphereTarget:
    sphere: Sphere
    eroded: Optional[np.ndarray]
    geometric: np.ndarray


@dataclass(frozen=True, eq=False)
class MeasurementPlan:
    '''
    Masks and edge of one phantom, built once and applied to every volume
    simulated from it
    '''

    background: np.ndarray
    targets: Tuple[SphereTarget, ...]
    edge: Optional[EdgeSpec]
    dilation: int = AC_MAX_DILATION


@dataclass(frozen=True)
class VolumeMetrics:
    snr_db: Optional[float]
    fwhm_mm: Optional[float]
    cnr: Tuple[Optional[float], ...]
    ac_max: Tuple[float, ...]


def measurement_plan(spec: PhantomSpec,
                     roi: BackgroundRoi = BackgroundRoi(),
                     resolution_sphere: float = RESOLUTION_SPHERE_MM,
                     dilation: int = AC_MAX_DILATION) -> MeasurementPlan:
    background = background_roi_mask(spec, roi)

    targets = []
    for sphere in spec.spheres:
        geometric = sphere_mask(spec.geometry, sphere.center, sphere.diameter)
        eroded = erode_mask_2d(geometric)
        if not eroded.any():
            logger.warning('sphere of %g mm is empty after erosion, its CNR is left undefined', sphere.diameter)
            eroded = None
        targets.append(SphereTarget(sphere=sphere, eroded=eroded, geometric=geometric))

    edge = None
    for sphere in spec.spheres:
        if sphere.diameter == resolution_sphere:
            edge = EdgeSpec(center=sphere.center, diameter=sphere.diameter)
    if edge is None:
        logger.warning('no %g mm sphere in the phantom, resolution is left undefined', resolution_sphere)

    return MeasurementPlan(background=background, targets=tuple(targets), edge=edge, dilation=dilation)


def measure_volume(vol: Volume, plan: MeasurementPlan) -> VolumeMetrics:
    try:
        snr = snr_db(vol, plan.background)
    except MetricError as e:
        logger.warning('SNR undefined: %s', e)
        snr = None

    fwhm = None
    if plan.edge is not None:
        try:
            fwhm = resolution_fwhm(vol, plan.edge)
        except MetricError as e:
            logger.warning('resolution undefined: %s', e)

    contrasts = []
    for target in plan.targets:
        value = None
        if target.eroded is not None:
            try:
                value = cnr(vol, target.eroded, plan.background)
            except MetricError as e:
                logger.warning('CNR of the %g mm sphere undefined: %s', target.sphere.diameter, e)
        contrasts.append(value)

    maxima = tuple(ac_max(vol, target.geometric, plan.dilation) for target in plan.targets)
    return VolumeMetrics(snr_db=snr, fwhm_mm=fwhm, cnr=tuple(contrasts), ac_max=maxima)


def _mean(values: Sequence[Optional[float]]) -> Optional[float]:
    defined = [v for v in values if v is not None]
    return float(np.mean(defined)) if defined else None


def cell_rows(contrast: str,
              duration: float,
              filter_kind: str,
              measured: Sequence[VolumeMetrics],
              plan: MeasurementPlan) -> List[MetricsRow]:
    '''
    Per-realization rows followed by one aggregate row per sphere
    '''

    rows = []
    for realization, metrics in enumerate(measured):
        for k, target in enumerate(plan.targets):
            rows.append(MetricsRow(contrast=contrast,
                                   duration_s=duration,
                                   filter=filter_kind,
                                   realization=realization,
                                   sphere_mm=target.sphere.diameter,
                                   snr_db=metrics.snr_db,
                                   cnr=metrics.cnr[k],
                                   fwhm_mm=metrics.fwhm_mm,
                                   ac_max=metrics.ac_max[k]))

    snrs = [m.snr_db for m in measured if m.snr_db is not None]
    cov_snr = None
    if len(snrs) >= 2:
        try:
            cov_snr = round(cov(snrs), COV_DECIMALS)
        except MetricError as e:
            logger.warning('CoV of SNR undefined: %s', e)

    for k, target in enumerate(plan.targets):
        maxima = [m.ac_max[k] for m in measured]
        repro = None
        if len(maxima) >= 2:
            repro = percent_difference(max(maxima), min(maxima))
        bias = None
        if target.sphere.activity > 0:
            bias = percent_bias(float(np.mean(maxima)), target.sphere.activity)
        rows.append(MetricsRow(contrast=contrast,
                               duration_s=duration,
                               filter=filter_kind,
                               realization=AGGREGATE,
                               sphere_mm=target.sphere.diameter,
                               snr_db=_mean(snrs),
                               cnr=_mean([m.cnr[k] for m in measured]),
                               fwhm_mm=_mean([m.fwhm_mm for m in measured]),
                               ac_max=float(np.mean(maxima)),
                               bias_pct=bias,
                               repro_pct=repro,
                               cov_snr=cov_snr))
    return rows


def summarize_report(report: MetricsReport) -> List[SummaryRow]:
    '''
    One row per (contrast, duration, filter) in report order, with size-grouped
    bias and the SNR gain over the unfiltered cell of the same acquisition
    '''

    cells = OrderedDict()
    for row in report.rows:
        cells.setdefault((row.contrast, row.duration_s, row.filter), []).append(row)

    summaries = []
    for (contrast, duration, filter_kind), rows in cells.items():
        aggregates = [r for r in rows if r.realization == AGGREGATE]
        first_sphere = rows[0].sphere_mm
        fwhms = [r.fwhm_mm for r in rows
                 if r.realization != AGGREGATE and r.sphere_mm == first_sphere and r.fwhm_mm is not None]

        summaries.append(SummaryRow(
            contrast=contrast,
            duration_s=duration,
            filter=filter_kind,
            snr_db=aggregates[0].snr_db if aggregates else None,
            cov_snr=aggregates[0].cov_snr if aggregates else None,
            cnr_mean=_mean([r.cnr for r in aggregates]),
            fwhm_mm=_mean(fwhms),
            fwhm_sd_mm=float(np.std(fwhms, ddof=1)) if len(fwhms) >= 2 else None,
            bias_small_pct=_mean([r.bias_pct for r in aggregates if r.sphere_mm < SMALL_SPHERE_LIMIT_MM]),
            bias_large_pct=_mean([r.bias_pct for r in aggregates if r.sphere_mm >= SMALL_SPHERE_LIMIT_MM]),
            repro_pct=_mean([r.repro_pct for r in aggregates if r.sphere_mm >= REPRO_MIN_DIAMETER_MM]),
        ))

    reference = {(s.contrast, s.duration_s): s.snr_db for s in summaries if s.filter == 'none'}
    for i, summary in enumerate(summaries):
        base = reference.get((summary.contrast, summary.duration_s))
        if base is None or summary.snr_db is None or base == 0:
            continue
        summaries[i] = dataclasses.replace(summary, snr_gain_pct=percent_improvement(summary.snr_db, base))
    return summaries
