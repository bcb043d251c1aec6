import json
import os

import numpy as np
import pytest
import yaml
from mock.mock import patch
from ansible_collections.gvof.denoise.plugins.module_utils import io_formats, study
from ansible_collections.gvof.denoise.plugins.module_utils.filters import GaussianConfig, GvofConfig, NoFilterConfig
from ansible_collections.gvof.denoise.plugins.module_utils.gvof_common import ConfigError, GvofError
from ansible_collections.gvof.denoise.plugins.module_utils.metrics import REPORT_COLUMNS
from ansible_collections.gvof.denoise.plugins.module_utils.volume import Volume


# Coarse grid that still holds the phantom, the background ROI and a 37 mm edge
TINY_CONFIG = {
    'phantom': {'dims': [51, 51, 11], 'spacing': [6.0, 6.0, 6.0], 'supersample': 2},
    'acquisition': {'durations': [900.0, 4000.0], 'realizations': 2, 'base_seed': 7},
    'study': {'contrasts': ['2:1'], 'filters': ['none', 'gf', 'gvof']},
    'filters': {'gvof': {'iterations': 5}},
}


def write_config(directory, data, name='config.yml'):
    path = directory / name
    path.write_text(yaml.safe_dump(data))
    return str(path)


class TestStudyConfig(object):

    def test_defaults(self):
        config = study.load_study_config(None)
        assert config.dims == (128, 128, 32)
        assert config.contrasts == ('2:1', '4:1')
        assert config.durations == (900.0, 1200.0, 2000.0, 4000.0)
        assert [f.kind for f in config.filters] == ['none', 'gf', 'bf', 'ndf', 'gvof']
        assert config.realizations == 5

    def test_sections(self, tmp_path):
        config = study.load_study_config(write_config(tmp_path, TINY_CONFIG))
        assert config.dims == (51, 51, 11)
        assert config.spacing == (6.0, 6.0, 6.0)
        assert config.base_seed == 7
        assert config.filters == (NoFilterConfig(), GaussianConfig(), GvofConfig(iterations=5))

    def test_empty_file_gives_defaults(self, tmp_path):
        path = tmp_path / 'empty.yml'
        path.write_text('')
        assert study.load_study_config(str(path)) == study.StudyConfig()

    def test_unknown_key_is_named(self, tmp_path):
        data = {'acquisition': {'realisations': 3}}
        with pytest.raises(ConfigError, match="section 'acquisition'.*realisations"):
            study.load_study_config(write_config(tmp_path, data))

    def test_unknown_filter_parameter_is_named(self, tmp_path):
        data = {'study': {'filters': ['gvof']}, 'filters': {'gvof': {'kapa': 0.2}}}
        with pytest.raises(ConfigError, match="section 'filters.gvof'.*kapa"):
            study.load_study_config(write_config(tmp_path, data))

    def test_unknown_section(self, tmp_path):
        with pytest.raises(ConfigError, match='unknown configuration section scanner'):
            study.load_study_config(write_config(tmp_path, {'scanner': {}}))

    def test_unquoted_contrast_rejected(self, tmp_path):
        path = tmp_path / 'config.yml'
        path.write_text('study:\n  contrasts: [2:1]\n')
        with pytest.raises(ConfigError, match="section 'study'"):
            study.load_study_config(str(path))

    @pytest.mark.parametrize('section,values', [
        ('phantom', {'dims': [64, 64]}),
        ('phantom', {'body_semi_axes': [147.0]}),
        ('acquisition', {'realizations': 0}),
        ('acquisition', {'durations': [900.0, -1.0]}),
        ('study', {'filters': ['gf', 'gf']}),
        ('study', {'filters': []}),
    ])
    def test_invalid_values(self, tmp_path, section, values):
        with pytest.raises(ConfigError):
            study.load_study_config(write_config(tmp_path, {section: values}))

    def test_invalid_filter_value(self, tmp_path):
        data = {'study': {'filters': ['gvof']}, 'filters': {'gvof': {'window': [2, 3]}}}
        with pytest.raises(ConfigError, match='odd'):
            study.load_study_config(write_config(tmp_path, data))

    def test_sections_reload_to_the_same_config(self, tmp_path):
        config = study.load_study_config(write_config(tmp_path, TINY_CONFIG))
        sections = json.loads(json.dumps(study.study_config_sections(config)))
        assert study.study_config_from_sections(sections) == config

    def test_cells_and_seeds(self, tmp_path):
        config = study.load_study_config(write_config(tmp_path, TINY_CONFIG))
        assert config.cells() == [(0, '2:1', 900.0), (1, '2:1', 4000.0)]
        assert [config.cell_seed(k) for k, _, _ in config.cells()] == [7, 9]

    def test_volume_name(self):
        assert study.volume_name('2:1', 900.0, 0, 'gvof') == '2-1_900s_gvof_r0.hdr'
        assert study.volume_name('4:1', 1200.0, 3) == '4-1_1200s_r3.hdr'

    def test_roi_that_does_not_fit_fails_early(self):
        config = study.StudyConfig(dims=(64, 64, 8))
        with pytest.raises(ConfigError):
            study.check_study(config)


class TestCommands(object):

    def test_study(self, tmp_path):
        out = str(tmp_path / 'out')
        result = study.cmd_study(write_config(tmp_path, TINY_CONFIG), out)

        assert result['cells'] == 2
        assert result['rows'] == 2 * 3 * (2 + 1) * 6
        assert result['volumes'] == []

        lines = open(result['report']).read().splitlines()
        assert lines[0] == ','.join(REPORT_COLUMNS)
        assert len(lines) == 1 + result['rows']
        assert len(open(result['summary']).read().splitlines()) == 1 + 2 * 3

        profiles = open(result['profiles']).read().splitlines()
        assert {line.split(',')[3] for line in profiles[1:]} == {'sphere', 'background'}

        manifest = json.load(open(result['manifest']))
        assert manifest['collection_version'] == '1.0.0'
        assert manifest['seeds'] == [dict(contrast='2:1', duration_s=900.0, seeds=[7, 8]),
                                     dict(contrast='2:1', duration_s=4000.0, seeds=[9, 10])]
        assert manifest['outputs'] == ['report.csv', 'summary.csv', 'profiles.csv']

    def test_manifest_reproduces_the_report(self, tmp_path):
        first = study.cmd_study(write_config(tmp_path, TINY_CONFIG), str(tmp_path / 'first'))
        second = study.cmd_study(first['manifest'], str(tmp_path / 'second'))
        assert open(first['report']).read() == open(second['report']).read()

    def test_parallel_matches_serial(self, tmp_path):
        config_path = write_config(tmp_path, TINY_CONFIG)
        serial = study.cmd_study(config_path, str(tmp_path / 'serial'), jobs=1)
        parallel = study.cmd_study(config_path, str(tmp_path / 'parallel'), jobs=2)
        for name in ('report', 'summary', 'profiles'):
            assert open(serial[name]).read() == open(parallel[name]).read()

    def test_save_volumes(self, tmp_path):
        data = dict(TINY_CONFIG, acquisition={'durations': [900.0], 'realizations': 1})
        out = tmp_path / 'out'
        result = study.cmd_study(write_config(tmp_path, data), str(out), save_volumes=True)

        assert result['volumes'] == [os.path.join('volumes', '2-1_900s_{}_r0.hdr'.format(kind))
                                     for kind in ('none', 'gf', 'gvof')]
        assert (out / 'volumes' / '2-1_900s_gvof_r0.raw').exists()
        manifest = json.load(open(result['manifest']))
        assert manifest['config']['study']['save_volumes'] is True
        assert manifest['outputs'][3:] == result['volumes']

    def test_check_mode_writes_nothing(self, tmp_path):
        out = tmp_path / 'out'
        result = study.cmd_study(write_config(tmp_path, TINY_CONFIG), str(out), check_mode=True)
        assert result['rows'] == 0
        assert result['cells'] == 2
        assert not out.exists()

    def test_unwritable_output(self, tmp_path):
        blocker = tmp_path / 'file'
        blocker.write_text('')
        with pytest.raises(GvofError, match='cannot create output directory'):
            study.cmd_study(write_config(tmp_path, TINY_CONFIG), str(blocker / 'out'))

    def test_phantom(self, tmp_path):
        data = dict(TINY_CONFIG, study={'contrasts': ['2:1', '4:1']})
        out = tmp_path / 'out'
        result = study.cmd_phantom(write_config(tmp_path, data), str(out))

        assert len(result['volumes']) == 2 * 2 * 2
        assert result['seeds'][1] == dict(contrast='2:1', duration_s=4000.0, seeds=[9, 10],
                                          files=['2-1_4000s_r0.hdr', '2-1_4000s_r1.hdr'])
        assert sorted(p.name for p in out.glob('truth_*.hdr')) == ['truth_2-1.hdr', 'truth_4-1.hdr']

        truth = io_formats.read_volume(str(out / 'truth_4-1.hdr'))
        assert truth.data.max() == pytest.approx(2775.0)
        noisy = io_formats.read_volume(str(out / '2-1_900s_r0.hdr'))
        assert noisy.dims == (51, 51, 11)
        assert not np.array_equal(noisy.data, io_formats.read_volume(str(out / '2-1_900s_r1.hdr')).data)

    @pytest.mark.parametrize('check_mode', [False, True])
    def test_invalid_jobs_rejected_up_front(self, tmp_path, check_mode):
        out = tmp_path / 'out'
        with pytest.raises(ConfigError, match='jobs must be >= 1, got 0'):
            study.cmd_study(str(tmp_path / 'absent.yml'), str(out), jobs=0, check_mode=check_mode)
        assert not out.exists()

    def test_phantom_rasterizes_each_contrast_once(self, tmp_path):
        data = dict(TINY_CONFIG, study={'contrasts': ['2:1', '4:1']})
        with patch.object(study, 'rasterize_phantom', wraps=study.rasterize_phantom) as m_rasterize:
            result = study.cmd_phantom(write_config(tmp_path, data), str(tmp_path / 'out'))
        assert len(result['seeds']) == 2 * 2
        assert m_rasterize.call_count == 2

    def test_phantom_check_mode(self, tmp_path):
        out = tmp_path / 'out'
        result = study.cmd_phantom(write_config(tmp_path, TINY_CONFIG), str(out), check_mode=True)
        assert len(result['volumes']) == 4
        assert not out.exists()

    def test_filter_and_export(self, tmp_path):
        rng = np.random.default_rng(0)
        source = io_formats.write_volume(
            Volume(rng.poisson(20.0, size=(3, 16, 16)).astype(float), (2.0, 2.0, 2.0)),
            str(tmp_path / 'in.hdr'))[0]

        result = study.cmd_filter(source, str(tmp_path / 'out.hdr'), 'gvof', {'iterations': 4})
        assert result['params']['iterations'] == 4
        assert result['params']['kappa'] == 0.1
        assert os.path.exists(result['payload'])

        exported = study.cmd_export_slice(result['output'], 1, str(tmp_path / 's.pgm'))
        assert open(exported['output'], 'rb').read().startswith(b'P5\n16 16\n65535\n')

    def test_filter_check_mode(self, tmp_path):
        result = study.cmd_filter(str(tmp_path / 'absent.hdr'), str(tmp_path / 'out.hdr'), 'gf', {'fwhm': 6.0},
                                  check_mode=True)
        assert result['params'] == {'fwhm': 6.0}
        assert 'payload' not in result
        assert not (tmp_path / 'out.hdr').exists()
