from __future__ import absolute_import, division, print_function
__metaclass__ = type

import csv
import json
import logging
import os
from typing import Any, Dict, Iterable, Sequence, Tuple

import numpy as np
import yaml

try:
    from ansible_collections.gvof.denoise.plugins.module_utils.gvof_common import (
        ConfigError, LengthMismatchError, MagicMismatchError, NonFiniteError, VolumeError, VolumeFormatError)
    from ansible_collections.gvof.denoise.plugins.module_utils.volume import Profile, Volume
    from ansible_collections.gvof.denoise.plugins.module_utils.metrics import (
        REPORT_COLUMNS, SUMMARY_COLUMNS, MetricsReport, SummaryRow)
except ImportError:
    from module_utils.gvof_common import (
        ConfigError, LengthMismatchError, MagicMismatchError, NonFiniteError, VolumeError, VolumeFormatError)
    from module_utils.volume import Profile, Volume
    from module_utils.metrics import REPORT_COLUMNS, SUMMARY_COLUMNS, MetricsReport, SummaryRow

logger = logging.getLogger(__name__)

MAGIC = 'GVOFVOL1'
UNIT = 'kBq/ml'
BYTE_ORDER = 'little'
SCALAR = 'float32'
PAYLOAD_DTYPE = np.dtype('<f4')
HEADER_KEYS = ('magic', 'dims', 'spacing', 'unit', 'byte_order', 'scalar', 'payload')

PGM_MAXVAL = 65535
PROFILE_COLUMNS = ('contrast', 'duration_s', 'filter', 'line', 'position_mm', 'value')

# (contrast, duration, filter, line name, profile)
ProfileRecord = Tuple[str, float, str, str, Profile]


def payload_path(header_path: str) -> str:
    return os.path.splitext(header_path)[0] + '.raw'


def write_volume(vol: Volume, path: str) -> Tuple[str, str]:
    '''
    Write a text header at path and a little-endian float32 payload next to
    it, x varying fastest. Returns both paths.
    '''

    raw_path = payload_path(path)
    if os.path.abspath(raw_path) == os.path.abspath(path):
        raise VolumeFormatError("volume header path must not end in '.raw': {}".format(path))

    nx, ny, nz = vol.dims
    header = [
        ('magic', MAGIC),
        ('dims', '{} {} {}'.format(nx, ny, nz)),
        ('spacing', ' '.join(repr(s) for s in vol.spacing)),
        ('unit', UNIT),
        ('byte_order', BYTE_ORDER),
        ('scalar', SCALAR),
        ('payload', os.path.basename(raw_path)),
    ]
    with open(path, 'w', encoding='utf-8') as f:
        f.write(''.join('{}: {}\n'.format(key, value) for key, value in header))
    with open(raw_path, 'wb') as f:
        f.write(vol.data.astype(PAYLOAD_DTYPE).tobytes())

    return path, raw_path


def read_header(path: str) -> Dict[str, str]:
    header = {}
    with open(path, 'r', encoding='utf-8') as f:
        for number, line in enumerate(f, 1):
            line = line.strip()
            if not line:
                continue
            key, sep, value = line.partition(':')
            if not sep:
                raise VolumeFormatError('{}:{}: expected "key: value", got {!r}'.format(path, number, line))
            header[key.strip()] = value.strip()

    if header.get('magic') != MAGIC:
        raise MagicMismatchError('{}: magic {!r} is not {!r}'.format(path, header.get('magic'), MAGIC))
    missing = [key for key in HEADER_KEYS if key not in header]
    if missing:
        raise VolumeFormatError('{}: missing header keys {}'.format(path, ', '.join(missing)))
    if header['byte_order'] != BYTE_ORDER or header['scalar'] != SCALAR:
        raise VolumeFormatError('{}: unsupported payload {} {}'.format(path, header['byte_order'], header['scalar']))

    return header


def read_volume(path: str) -> Volume:
    header = read_header(path)
    try:
        nx, ny, nz = (int(n) for n in header['dims'].split())
        spacing = tuple(float(s) for s in header['spacing'].split())
    except ValueError:
        raise VolumeFormatError('{}: malformed dims or spacing'.format(path))
    if len(spacing) != 3:
        raise VolumeFormatError('{}: spacing needs three values'.format(path))

    raw_path = os.path.join(os.path.dirname(path), header['payload'])
    with open(raw_path, 'rb') as f:
        payload = f.read()

    expected = nx * ny * nz * PAYLOAD_DTYPE.itemsize
    if len(payload) != expected:
        raise LengthMismatchError('{}: payload holds {} bytes, header declares {}'.format(
            raw_path, len(payload), expected))

    data = np.frombuffer(payload, dtype=PAYLOAD_DTYPE)
    if not np.all(np.isfinite(data)):
        raise NonFiniteError('{}: payload contains NaN or infinite values'.format(raw_path))

    return Volume(data.astype(np.float64).reshape(nz, ny, nx), spacing)


def slice_to_pgm(image: np.ndarray) -> bytes:
    '''
    16-bit binary PGM of a (ny, nx) slice, min-max windowed;
    a constant slice maps to 0
    '''

    ny, nx = image.shape
    low = float(image.min())
    high = float(image.max())
    if high > low:
        samples = np.round((image - low) / (high - low) * PGM_MAXVAL)
    else:
        samples = np.zeros_like(image)

    header = 'P5\n{} {}\n{}\n'.format(nx, ny, PGM_MAXVAL).encode('ascii')
    return header + samples.astype('>u2').tobytes()


def export_slice_pgm(vol: Volume, z: int, path: str) -> str:
    nz = vol.dims[2]
    if not 0 <= z < nz:
        raise VolumeError('slice {} out of range [0, {})'.format(z, nz))
    with open(path, 'wb') as f:
        f.write(slice_to_pgm(vol.data[z]))
    return path


def format_value(value: Any) -> str:
    if value is None:
        return ''
    if isinstance(value, float):
        return format(value, '.6g')
    return str(value)


def _write_csv(path: str, columns: Sequence[str], records: Iterable[Dict[str, Any]]) -> int:
    count = 0
    with open(path, 'w', encoding='utf-8', newline='') as f:
        writer = csv.writer(f, lineterminator='\n')
        writer.writerow(columns)
        for record in records:
            writer.writerow([format_value(record[column]) for column in columns])
            count += 1
    return count


def write_report_csv(report: MetricsReport, path: str) -> int:
    count = _write_csv(path, REPORT_COLUMNS, (row.record() for row in report.rows))
    logger.info('wrote %d report rows to %s', count, path)
    return count


def write_summary_csv(summaries: Sequence[SummaryRow], path: str) -> int:
    return _write_csv(path, SUMMARY_COLUMNS, (row.record() for row in summaries))


def write_profiles_csv(profiles: Iterable[ProfileRecord], path: str) -> int:
    def records():
        for contrast, duration, filter_kind, line, profile in profiles:
            for position, value in zip(profile.positions, profile.values):
                yield dict(contrast=contrast, duration_s=duration, filter=filter_kind, line=line,
                           position_mm=float(position), value=float(value))

    return _write_csv(path, PROFILE_COLUMNS, records())


def read_config_file(path: str) -> Dict[str, Any]:
    '''
    Load a YAML mapping; JSON manifests load the same way
    '''

    try:
        with open(path, 'r', encoding='utf-8') as f:
            data = yaml.safe_load(f)
    except yaml.YAMLError as e:
        raise ConfigError('{}: {}'.format(path, e))
    except OSError as e:
        raise ConfigError('cannot read config {}: {}'.format(path, e.strerror))

    if data is None:
        return {}
    if not isinstance(data, dict):
        raise ConfigError('{}: top level must be a mapping'.format(path))
    return data


def write_manifest(manifest: Dict[str, Any], path: str) -> str:
    with open(path, 'w', encoding='utf-8') as f:
        json.dump(manifest, f, indent=2, sort_keys=True)
        f.write('\n')
    return path

