from __future__ import absolute_import, division, print_function
__metaclass__ = type

import dataclasses
import functools
import itertools
import logging
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import Any, Dict, List, Optional, Sequence, Tuple

try:
    from ansible_collections.gvof.denoise.plugins.module_utils.gvof_common import (
        COLLECTION_VERSION, ConfigError, GvofError, validate_section)
    from ansible_collections.gvof.denoise.plugins.module_utils.volume import (
        DEFAULT_SPACING, Volume, VolumeGeometry, line_profile)
    from ansible_collections.gvof.denoise.plugins.module_utils.filters import (
        FILTER_CONFIGS, FILTER_NAMES, NDF_SCHEDULES, FilterConfig, apply_filter, filter_config, filter_params)
    from ansible_collections.gvof.denoise.plugins.module_utils.phantom import (
        BODY_HEIGHT, BODY_SEMI_AXES, CONTRAST_PRESETS, DEFAULT_PSF_FWHM, DEFAULT_SENSITIVITY, DEFAULT_SUPERSAMPLE,
        DURATIONS, NEMA_DIAMETERS, SPHERE_RING_RADIUS, STUDY_DIMS, AcquisitionModel, PhantomSpec,
        generate_realizations, nema_phantom, rasterize_phantom)
    from ansible_collections.gvof.denoise.plugins.module_utils.metrics import (
        AC_MAX_DILATION, RESOLUTION_SPHERE_MM, BackgroundRoi, MetricsReport, MetricsRow, background_roi_center,
        cell_rows, measure_volume, measurement_plan, summarize_report)
    from ansible_collections.gvof.denoise.plugins.module_utils import io_formats
except ImportError:
    from module_utils.gvof_common import COLLECTION_VERSION, ConfigError, GvofError, validate_section
    from module_utils.volume import DEFAULT_SPACING, Volume, VolumeGeometry, line_profile
    from module_utils.filters import (
        FILTER_CONFIGS, FILTER_NAMES, NDF_SCHEDULES, FilterConfig, apply_filter, filter_config, filter_params)
    from module_utils.phantom import (
        BODY_HEIGHT, BODY_SEMI_AXES, CONTRAST_PRESETS, DEFAULT_PSF_FWHM, DEFAULT_SENSITIVITY, DEFAULT_SUPERSAMPLE,
        DURATIONS, NEMA_DIAMETERS, SPHERE_RING_RADIUS, STUDY_DIMS, AcquisitionModel, PhantomSpec,
        generate_realizations, nema_phantom, rasterize_phantom)
    from module_utils.metrics import (
        AC_MAX_DILATION, RESOLUTION_SPHERE_MM, BackgroundRoi, MetricsReport, MetricsRow, background_roi_center,
        cell_rows, measure_volume, measurement_plan, summarize_report)
    from module_utils import io_formats

logger = logging.getLogger(__name__)

DEFAULT_CONTRASTS = tuple(CONTRAST_PRESETS)
DEFAULT_REALIZATIONS = 5
DEFAULT_ROI = BackgroundRoi()

REPORT_FILE = 'report.csv'
SUMMARY_FILE = 'summary.csv'
PROFILES_FILE = 'profiles.csv'
MANIFEST_FILE = 'manifest.json'
VOLUMES_DIR = 'volumes'

FILTER_PARAM_TYPES = {
    'fwhm': 'float',
    'spatial_fwhm': 'float',
    'intensity_width': 'float',
    'radius': 'int',
    'kappa': 'float',
    'iterations': 'int',
    'dt': 'float',
    'smooth_fwhm': 'float',
    'schedule': 'str',
    'window': 'list',
    'convergence_tol': 'float',
}


@dataclass(frozen=True)
class StudyConfig:
    '''
    The factorial grid contrasts x durations x filters x realizations over
    one phantom geometry
    '''

    dims: Tuple[int, int, int] = STUDY_DIMS
    spacing: Tuple[float, float, float] = DEFAULT_SPACING
    supersample: int = DEFAULT_SUPERSAMPLE
    diameters: Tuple[float, ...] = NEMA_DIAMETERS
    ring_radius: float = SPHERE_RING_RADIUS
    body_semi_axes: Tuple[float, float] = BODY_SEMI_AXES
    body_height: float = BODY_HEIGHT
    contrasts: Tuple[str, ...] = DEFAULT_CONTRASTS
    durations: Tuple[float, ...] = DURATIONS
    sensitivity: float = DEFAULT_SENSITIVITY
    psf_fwhm: float = DEFAULT_PSF_FWHM
    realizations: int = DEFAULT_REALIZATIONS
    base_seed: int = 0
    filters: Tuple[FilterConfig, ...] = tuple(cls() for cls in FILTER_CONFIGS.values())
    background: BackgroundRoi = DEFAULT_ROI
    save_volumes: bool = False

    def __post_init__(self) -> None:
        for name in ('dims', 'spacing', 'diameters', 'body_semi_axes', 'contrasts', 'durations', 'filters'):
            object.__setattr__(self, name, tuple(getattr(self, name)))

        if self.realizations < 1:
            raise ConfigError('realizations must be >= 1, got {}'.format(self.realizations))
        if not self.filters:
            raise ConfigError('at least one filter is required')
        kinds = [f.kind for f in self.filters]
        if len(set(kinds)) != len(kinds):
            raise ConfigError('filters must be distinct, got {}'.format(', '.join(kinds)))
        if not self.contrasts:
            raise ConfigError('at least one contrast is required')
        for contrast in self.contrasts:
            if contrast not in CONTRAST_PRESETS:
                raise ConfigError("unknown contrast preset '{}'".format(contrast))
        if not self.durations or min(self.durations) <= 0:
            raise ConfigError('durations must be a non-empty list of positive values')
        VolumeGeometry(self.dims, self.spacing)

    @property
    def geometry(self) -> VolumeGeometry:
        return VolumeGeometry(self.dims, self.spacing)

    def phantom(self, contrast: str) -> PhantomSpec:
        return nema_phantom(contrast, self.geometry, self.diameters, self.ring_radius,
                            self.body_semi_axes, self.body_height)

    def acquisition(self, duration: float) -> AcquisitionModel:
        return AcquisitionModel(duration=duration, sensitivity=self.sensitivity, psf_fwhm=self.psf_fwhm)

    def cells(self) -> List[Tuple[int, str, float]]:
        return [(k, contrast, duration)
                for k, (contrast, duration) in enumerate(itertools.product(self.contrasts, self.durations))]

    def cell_seed(self, k: int) -> int:
        return self.base_seed + k * self.realizations


STUDY_DEFAULTS = StudyConfig()

PHANTOM_ARGUMENT_SPEC = dict(
    dims=dict(type='list', elements='int', default=list(STUDY_DEFAULTS.dims)),
    spacing=dict(type='list', elements='float', default=list(STUDY_DEFAULTS.spacing)),
    supersample=dict(type='int', default=STUDY_DEFAULTS.supersample),
    diameters=dict(type='list', elements='float', default=list(STUDY_DEFAULTS.diameters)),
    ring_radius=dict(type='float', default=STUDY_DEFAULTS.ring_radius),
    body_semi_axes=dict(type='list', elements='float', default=list(STUDY_DEFAULTS.body_semi_axes)),
    body_height=dict(type='float', default=STUDY_DEFAULTS.body_height),
)

ACQUISITION_ARGUMENT_SPEC = dict(
    durations=dict(type='list', elements='float', default=list(STUDY_DEFAULTS.durations)),
    sensitivity=dict(type='float', default=STUDY_DEFAULTS.sensitivity),
    psf_fwhm=dict(type='float', default=STUDY_DEFAULTS.psf_fwhm),
    realizations=dict(type='int', default=STUDY_DEFAULTS.realizations),
    base_seed=dict(type='int', default=STUDY_DEFAULTS.base_seed),
)

STUDY_ARGUMENT_SPEC = dict(
    contrasts=dict(type='list', elements='str', choices=list(CONTRAST_PRESETS),
                   default=list(STUDY_DEFAULTS.contrasts)),
    filters=dict(type='list', elements='str', choices=list(FILTER_NAMES),
                 default=[f.kind for f in STUDY_DEFAULTS.filters]),
    save_volumes=dict(type='bool', default=STUDY_DEFAULTS.save_volumes),
    roi_distance=dict(type='float', default=DEFAULT_ROI.distance),
    roi_angle=dict(type='float', default=DEFAULT_ROI.angle),
    roi_diameter=dict(type='float', default=DEFAULT_ROI.diameter),
    min_clearance=dict(type='float', default=DEFAULT_ROI.min_clearance),
)

SECTIONS = ('phantom', 'acquisition', 'study', 'filters')


def filter_argument_spec(kind: str) -> Dict[str, Dict[str, Any]]:
    '''
    Argument spec of one filter's parameters, defaults taken from its config class
    '''

    spec = {}
    for name, default in filter_params(FILTER_CONFIGS[kind]()).items():
        option = dict(type=FILTER_PARAM_TYPES[name], default=default)
        if name == 'window':
            option['elements'] = 'int'
        if name == 'schedule':
            option['choices'] = list(NDF_SCHEDULES)
        spec[name] = option
    return spec


def filters_from_section(kinds: Sequence[str], params: Optional[Dict[str, Any]]) -> Tuple[FilterConfig, ...]:
    if params is None:
        params = {}
    if not isinstance(params, dict):
        raise ConfigError("section 'filters' must be a mapping of filter name to parameters")

    unknown = sorted(set(params) - set(FILTER_NAMES))
    if unknown:
        raise ConfigError("section 'filters': unknown filter {}".format(', '.join(unknown)))

    configs = []
    for kind in kinds:
        values = validate_section(filter_argument_spec(kind), params.get(kind), 'filters.{}'.format(kind))
        configs.append(filter_config(kind, **values))
    return tuple(configs)


def study_config_from_sections(data: Dict[str, Any]) -> StudyConfig:
    unknown = sorted(set(data) - set(SECTIONS))
    if unknown:
        raise ConfigError('unknown configuration section {}'.format(', '.join(unknown)))

    phantom = validate_section(PHANTOM_ARGUMENT_SPEC, data.get('phantom'), 'phantom')
    acquisition = validate_section(ACQUISITION_ARGUMENT_SPEC, data.get('acquisition'), 'acquisition')
    study = validate_section(STUDY_ARGUMENT_SPEC, data.get('study'), 'study')

    for section, key, size in (('phantom', 'dims', 3), ('phantom', 'spacing', 3), ('phantom', 'body_semi_axes', 2)):
        value = phantom[key]
        if len(value) != size:
            raise ConfigError("section '{}': {} needs {} values, got {}".format(section, key, size, len(value)))

    background = BackgroundRoi(distance=study['roi_distance'],
                               angle=study['roi_angle'],
                               diameter=study['roi_diameter'],
                               min_clearance=study['min_clearance'])
    return StudyConfig(filters=filters_from_section(study['filters'], data.get('filters')),
                       contrasts=study['contrasts'],
                       save_volumes=study['save_volumes'],
                       background=background,
                       **phantom,
                       **acquisition)


def study_config_sections(config: StudyConfig) -> Dict[str, Any]:
    '''
    Fully resolved configuration in the same sections load_study_config reads
    '''

    return dict(
        phantom=dict(dims=list(config.dims),
                     spacing=list(config.spacing),
                     supersample=config.supersample,
                     diameters=list(config.diameters),
                     ring_radius=config.ring_radius,
                     body_semi_axes=list(config.body_semi_axes),
                     body_height=config.body_height),
        acquisition=dict(durations=list(config.durations),
                         sensitivity=config.sensitivity,
                         psf_fwhm=config.psf_fwhm,
                         realizations=config.realizations,
                         base_seed=config.base_seed),
        study=dict(contrasts=list(config.contrasts),
                   filters=[f.kind for f in config.filters],
                   save_volumes=config.save_volumes,
                   roi_distance=config.background.distance,
                   roi_angle=config.background.angle,
                   roi_diameter=config.background.diameter,
                   min_clearance=config.background.min_clearance),
        filters={f.kind: filter_params(f) for f in config.filters if filter_params(f)},
    )


def load_study_config(path: Optional[str]) -> StudyConfig:
    '''
    Read a study configuration, or the configuration embedded in a run manifest
    '''

    if path is None:
        return StudyConfig()
    data = io_formats.read_config_file(path)
    if 'collection_version' in data and 'config' in data:
        data = data['config']
    return study_config_from_sections(data)


def contrast_tag(contrast: str) -> str:
    return contrast.replace(':', '-')


def volume_name(contrast: str, duration: float, realization: int, filter_kind: Optional[str] = None) -> str:
    parts = [contrast_tag(contrast), '{:g}s'.format(duration)]
    if filter_kind is not None:
        parts.append(filter_kind)
    parts.append('r{}'.format(realization))
    return '_'.join(parts) + '.hdr'


def check_study(config: StudyConfig) -> None:
    '''
    Build every phantom and its measurement plan so that a bad geometry fails
    before any simulation
    '''

    for contrast in config.contrasts:
        measurement_plan(config.phantom(contrast), config.background)


def _voxel(position: Sequence[float], spacing: Sequence[float]) -> List[int]:
    return [int(round(p / s)) for p, s in zip(position, spacing)]


def _profiles(vol: Volume, spec: PhantomSpec, config: StudyConfig) -> List[Tuple[str, Any]]:
    lines = []
    for sphere in spec.spheres:
        if sphere.diameter == RESOLUTION_SPHERE_MM:
            ix, iy, iz = _voxel(sphere.center, vol.spacing)
            lines.append(('sphere', line_profile(vol, 'x', (iy, iz))))
            break
    ix, iy, iz = _voxel(background_roi_center(spec, config.background), vol.spacing)
    lines.append(('background', line_profile(vol, 'y', (ix, iz))))
    return lines


@dataclass
class CellResult:
    rows: List[MetricsRow]
    profiles: List[io_formats.ProfileRecord]
    seeds: List[int]
    volumes: List[str]


def run_cell(config: StudyConfig, cell: Tuple[int, str, float], volumes_dir: Optional[str] = None) -> CellResult:
    k, contrast, duration = cell
    spec = config.phantom(contrast)
    plan = measurement_plan(spec, config.background)
    base_seed = config.cell_seed(k)
    truth = rasterize_phantom(spec, config.supersample)
    acquired = generate_realizations(spec, config.acquisition(duration), config.realizations, base_seed, truth)

    result = CellResult(rows=[], profiles=[], seeds=[base_seed + r for r in range(config.realizations)], volumes=[])
    for filter_cfg in config.filters:
        measured = []
        for realization, vol in enumerate(acquired):
            filtered = apply_filter(vol, filter_cfg)
            measured.append(measure_volume(filtered, plan))
            if realization == 0:
                result.profiles.extend((contrast, duration, filter_cfg.kind, line, profile)
                                       for line, profile in _profiles(filtered, spec, config))
            if volumes_dir is not None:
                path = os.path.join(volumes_dir, volume_name(contrast, duration, realization, filter_cfg.kind))
                io_formats.write_volume(filtered, path)
                result.volumes.append(path)
        result.rows.extend(cell_rows(contrast, duration, filter_cfg.kind, measured, plan))

    logger.info('cell %d (%s, %g s) done: %d rows', k, contrast, duration, len(result.rows))
    return result


def run_cells(config: StudyConfig, jobs: int = 1, volumes_dir: Optional[str] = None) -> List[CellResult]:
    '''
    Run every cell of the grid, in parallel when jobs > 1; results keep grid order
    '''

    if jobs < 1:
        raise ConfigError('jobs must be >= 1, got {}'.format(jobs))

    cells = config.cells()
    worker = functools.partial(run_cell, config, volumes_dir=volumes_dir)
    if jobs == 1 or len(cells) == 1:
        return [worker(cell) for cell in cells]
    with ProcessPoolExecutor(max_workers=min(jobs, len(cells))) as executor:
        return list(executor.map(worker, cells))


def experiment_report(config: StudyConfig, jobs: int = 1) -> MetricsReport:
    return _report(config, run_cells(config, jobs))


def _report(config: StudyConfig, results: Sequence[CellResult]) -> MetricsReport:
    rows = [row for result in results for row in result.rows]
    metadata = dict(ac_max_dilation=AC_MAX_DILATION, background_roi=dataclasses.asdict(config.background))
    return MetricsReport(rows=rows, metadata=metadata)


def _ensure_writable(out_dir: str) -> None:
    try:
        os.makedirs(out_dir, exist_ok=True)
    except OSError as e:
        raise GvofError('cannot create output directory {}: {}'.format(out_dir, e.strerror))
    if not os.access(out_dir, os.W_OK):
        raise GvofError('output directory {} is not writable'.format(out_dir))


def build_manifest(config: StudyConfig, results: Sequence[CellResult], outputs: Sequence[str]) -> Dict[str, Any]:
    seeds = [dict(contrast=contrast, duration_s=duration, seeds=result.seeds)
             for (_, contrast, duration), result in zip(config.cells(), results)]
    return dict(collection_version=COLLECTION_VERSION,
                config=study_config_sections(config),
                seeds=seeds,
                outputs=list(outputs))


def cmd_study(config_path: Optional[str], out_dir: str, jobs: int = 1, save_volumes: Optional[bool] = None,
              check_mode: bool = False) -> Dict[str, Any]:
    '''
    Run the whole study and write report, summary, profiles and manifest
    under out_dir
    '''

    if jobs < 1:
        raise ConfigError('jobs must be >= 1, got {}'.format(jobs))
    if not check_mode:
        _ensure_writable(out_dir)
    config = load_study_config(config_path)
    if save_volumes is not None:
        config = dataclasses.replace(config, save_volumes=save_volumes)
    check_study(config)

    paths = dict(report=os.path.join(out_dir, REPORT_FILE),
                 summary=os.path.join(out_dir, SUMMARY_FILE),
                 profiles=os.path.join(out_dir, PROFILES_FILE),
                 manifest=os.path.join(out_dir, MANIFEST_FILE))
    if check_mode:
        return dict(paths, rows=0, volumes=[], cells=len(config.cells()))

    volumes_dir = None
    if config.save_volumes:
        volumes_dir = os.path.join(out_dir, VOLUMES_DIR)
        os.makedirs(volumes_dir, exist_ok=True)

    logger.info('study: %d cells x %d filters x %d realizations, %d jobs', len(config.cells()),
                len(config.filters), config.realizations, jobs)
    results = run_cells(config, jobs, volumes_dir)
    report = _report(config, results)

    rows = io_formats.write_report_csv(report, paths['report'])
    io_formats.write_summary_csv(summarize_report(report), paths['summary'])
    io_formats.write_profiles_csv((record for result in results for record in result.profiles), paths['profiles'])

    volumes = [os.path.relpath(path, out_dir) for result in results for path in result.volumes]
    outputs = [REPORT_FILE, SUMMARY_FILE, PROFILES_FILE] + volumes
    io_formats.write_manifest(build_manifest(config, results, outputs), paths['manifest'])

    return dict(paths, rows=rows, volumes=volumes, cells=len(results))


def cmd_phantom(config_path: Optional[str], out_dir: str, check_mode: bool = False) -> Dict[str, Any]:
    '''
    Write the ground truth of every contrast and one simulated volume per
    realization and duration, seeded as the study seeds them
    '''

    if not check_mode:
        _ensure_writable(out_dir)
    config = load_study_config(config_path)

    volumes = []
    seeds = []
    truths = {}
    for k, contrast, duration in config.cells():
        spec = config.phantom(contrast)
        base_seed = config.cell_seed(k)
        names = [volume_name(contrast, duration, r) for r in range(config.realizations)]
        seeds.append(dict(contrast=contrast, duration_s=duration,
                          seeds=[base_seed + r for r in range(config.realizations)], files=names))
        volumes.extend(names)
        if check_mode:
            continue

        truth = truths.get(contrast)
        if truth is None:
            truth = truths[contrast] = rasterize_phantom(spec, config.supersample)
            io_formats.write_volume(truth, os.path.join(out_dir, 'truth_{}.hdr'.format(contrast_tag(contrast))))
        acquired = generate_realizations(spec, config.acquisition(duration), config.realizations, base_seed, truth)
        for name, vol in zip(names, acquired):
            io_formats.write_volume(vol, os.path.join(out_dir, name))

    return dict(volumes=volumes, seeds=seeds, collection_version=COLLECTION_VERSION)


def cmd_filter(in_path: str, out_path: str, kind: str, params: Optional[Dict[str, Any]] = None,
               check_mode: bool = False) -> Dict[str, Any]:
    config = filter_config(kind, **(params or {}))
    result = dict(filter=kind, params=filter_params(config), input=in_path, output=out_path)
    if check_mode:
        return result

    vol = io_formats.read_volume(in_path)
    _, payload = io_formats.write_volume(apply_filter(vol, config), out_path)
    result['payload'] = payload
    return result


def cmd_export_slice(in_path: str, z: int, out_path: str) -> Dict[str, Any]:
    vol = io_formats.read_volume(in_path)
    io_formats.export_slice_pgm(vol, z, out_path)
    return dict(input=in_path, slice=z, output=out_path)
