import json

import numpy as np
import pytest
from ansible_collections.gvof.denoise.plugins.module_utils import cli, io_formats
from ansible_collections.gvof.denoise.plugins.module_utils.filters import GaussianConfig, run_gaussian
from ansible_collections.gvof.denoise.plugins.module_utils.volume import Volume


@pytest.fixture
def noisy_volume(tmp_path):
    rng = np.random.default_rng(11)
    data = rng.poisson(30.0, size=(3, 20, 20)).astype(float)
    header, _ = io_formats.write_volume(Volume(data, (2.67, 2.67, 2.0)), str(tmp_path / 'in.hdr'))
    return header


class TestParser(object):

    def test_filter_defaults_are_unset(self):
        args = cli.build_parser().parse_args(['filter', '--in', 'a.hdr', '--out', 'b.hdr', '--filter', 'gvof'])
        assert args.input == 'a.hdr'
        assert cli.filter_args(args) == {}

    def test_filter_flags(self):
        args = cli.build_parser().parse_args(['filter', '--in', 'a.hdr', '--out', 'b.hdr', '--filter', 'gvof',
                                              '--kappa', '0.2', '--window', '5', '3', '--smooth-fwhm', '2'])
        assert cli.filter_args(args) == {'kappa': 0.2, 'window': [5, 3], 'smooth_fwhm': 2.0}

    def test_study_flags(self):
        args = cli.build_parser().parse_args(['study', '--out', 'o', '--jobs', '4', '--no-save-volumes'])
        assert args.jobs == 4
        assert args.save_volumes is False
        assert args.config is None


class TestMain(object):

    def test_missing_arguments(self, capsys):
        assert cli.main(['filter', '--in', 'a.hdr']) == cli.EXIT_USAGE
        assert 'required' in capsys.readouterr().err

    def test_unknown_filter(self, capsys):
        assert cli.main(['filter', '--in', 'a', '--out', 'b', '--filter', 'median']) == cli.EXIT_USAGE

    def test_parameter_for_another_filter(self, capsys):
        rc = cli.main(['filter', '--in', 'a', '--out', 'b', '--filter', 'gf', '--kappa', '0.2'])
        assert rc == cli.EXIT_USAGE
        assert "unsupported parameters for filter 'gf': kappa" in capsys.readouterr().err

    def test_invalid_parameter_value(self, capsys):
        rc = cli.main(['filter', '--in', 'a', '--out', 'b', '--filter', 'gvof', '--dt', '0.3'])
        assert rc == cli.EXIT_USAGE

    def test_version(self, capsys):
        assert cli.main(['--version']) == cli.EXIT_OK
        assert '1.0.0' in capsys.readouterr().out

    def test_missing_input_file(self, tmp_path, capsys):
        rc = cli.main(['filter', '--in', str(tmp_path / 'absent.hdr'), '--out', str(tmp_path / 'b.hdr'),
                       '--filter', 'gf'])
        assert rc == cli.EXIT_FAILURE
        assert capsys.readouterr().err.startswith('gvof filter: error:')

    def test_corrupt_input(self, tmp_path, noisy_volume, capsys):
        with open(str(tmp_path / 'in.raw'), 'r+b') as f:
            f.truncate(10)
        rc = cli.main(['filter', '--in', noisy_volume, '--out', str(tmp_path / 'b.hdr'), '--filter', 'gf'])
        assert rc == cli.EXIT_FAILURE
        assert 'payload holds 10 bytes' in capsys.readouterr().err

    def test_gaussian_matches_library(self, tmp_path, noisy_volume, capsys):
        out = str(tmp_path / 'gf.hdr')
        assert cli.main(['filter', '--in', noisy_volume, '--out', out, '--filter', 'gf']) == cli.EXIT_OK

        result = json.loads(capsys.readouterr().out)
        assert result['params'] == {'fwhm': 4.0}
        expected = run_gaussian(io_formats.read_volume(noisy_volume), GaussianConfig())
        expected = expected.data.astype('<f4').tobytes()
        assert open(result['payload'], 'rb').read() == expected

    def test_gvof_logs_its_parameters(self, tmp_path, noisy_volume, capsys, caplog):
        out = str(tmp_path / 'gvof.hdr')
        caplog.set_level('INFO')
        rc = cli.main(['-v', 'filter', '--in', noisy_volume, '--out', out, '--filter', 'gvof',
                       '--iterations', '3', '--window', '5'])
        assert rc == cli.EXIT_OK
        result = json.loads(capsys.readouterr().out)
        assert result['params']['window'] == [5, 5]
        assert result['params']['iterations'] == 3
        assert 'gvof: kappa=0.1 iterations=3 window=(5, 5)' in caplog.text

    def test_export_slice(self, tmp_path, noisy_volume, capsys):
        out = str(tmp_path / 's.pgm')
        assert cli.main(['export-slice', '--in', noisy_volume, '--slice', '2', '--out', out]) == cli.EXIT_OK
        assert open(out, 'rb').read().startswith(b'P5\n20 20\n65535\n')
        assert cli.main(['export-slice', '--in', noisy_volume, '--slice', '3', '--out', out]) == cli.EXIT_FAILURE

    def test_study_with_bad_config(self, tmp_path, capsys):
        config = tmp_path / 'config.yml'
        config.write_text('study:\n  filters: [wiener]\n')
        rc = cli.main(['study', '--config', str(config), '--out', str(tmp_path / 'out')])
        assert rc == cli.EXIT_FAILURE
        assert "section 'study'" in capsys.readouterr().err
