from mock.mock import patch
import os

import numpy as np
import pytest
from ansible_collections.gvof.denoise.tests.unit.modules import gvof_test_common
from ansible_collections.gvof.denoise.plugins.modules import gvof_filter
from ansible_collections.gvof.denoise.plugins.module_utils import io_formats
from ansible_collections.gvof.denoise.plugins.module_utils.volume import Volume


@pytest.fixture
def volume_file(tmp_path):
    data = np.random.default_rng(5).poisson(25.0, size=(2, 12, 12)).astype(float)
    return io_formats.write_volume(Volume(data, (2.0, 2.0, 2.0)), str(tmp_path / 'in.hdr'))[0]


class TestGvofFilterModule(object):

    @patch('ansible.module_utils.basic.AnsibleModule.fail_json')
    def test_without_parameters(self, m_fail_json):
        m_fail_json.side_effect = gvof_test_common.fail_json
        result = gvof_test_common.run_module(gvof_filter, {}, gvof_test_common.AnsibleFailJson)
        assert result['msg'] == 'missing required arguments: filter, input, output'

    @patch('ansible.module_utils.basic.AnsibleModule.fail_json')
    def test_with_invalid_filter(self, m_fail_json):
        m_fail_json.side_effect = gvof_test_common.fail_json
        result = gvof_test_common.run_module(gvof_filter, {'input': 'a.hdr', 'output': 'b.hdr', 'filter': 'median'},
                                             gvof_test_common.AnsibleFailJson)
        assert result['msg'] == 'value of filter must be one of: none, gf, bf, ndf, gvof, got: median'

    @patch('ansible.module_utils.basic.AnsibleModule.fail_json')
    def test_with_unsupported_param(self, m_fail_json):
        m_fail_json.side_effect = gvof_test_common.fail_json
        result = gvof_test_common.run_module(gvof_filter, {'input': 'a.hdr', 'output': 'b.hdr', 'filter': 'gf',
                                                           'params': {'kappa': 0.2}},
                                             gvof_test_common.AnsibleFailJson)
        assert result['msg'].startswith("section 'params': ")
        assert 'kappa' in result['msg']
        assert result['rc'] == 1

    @patch('ansible.module_utils.basic.AnsibleModule.exit_json')
    def test_with_check_mode(self, m_exit_json, tmp_path):
        m_exit_json.side_effect = gvof_test_common.exit_json
        out = str(tmp_path / 'out.hdr')
        result = gvof_test_common.run_module(gvof_filter, {'input': 'in.hdr', 'output': out, 'filter': 'gvof',
                                                           'params': {'iterations': 10, 'window': [5, 5]},
                                                           '_ansible_check_mode': True})
        assert not result['changed']
        assert result['cmd'] == ['gvof', 'filter', '--in', 'in.hdr', '--out', out, '--filter', 'gvof',
                                 '--iterations', '10', '--window', '5', '5']
        assert result['rc'] == 0
        assert result['params']['kappa'] == 0.1
        assert result['params']['window'] == [5, 5]
        assert not os.path.exists(out)

    @patch('ansible.module_utils.basic.AnsibleModule.exit_json')
    def test_filter_volume(self, m_exit_json, tmp_path, volume_file):
        m_exit_json.side_effect = gvof_test_common.exit_json
        out = str(tmp_path / 'out.hdr')
        result = gvof_test_common.run_module(gvof_filter, {'input': volume_file, 'output': out, 'filter': 'ndf',
                                                           'params': {'iterations': 3}})
        assert result['changed']
        assert result['params']['iterations'] == 3
        assert result['payload'] == str(tmp_path / 'out.raw')
        assert io_formats.read_volume(out).dims == (12, 12, 2)

    @patch('ansible.module_utils.basic.AnsibleModule.fail_json')
    def test_missing_input(self, m_fail_json, tmp_path):
        m_fail_json.side_effect = gvof_test_common.fail_json
        result = gvof_test_common.run_module(gvof_filter, {'input': str(tmp_path / 'absent.hdr'),
                                                           'output': str(tmp_path / 'out.hdr'),
                                                           'filter': 'gf'},
                                             gvof_test_common.AnsibleFailJson)
        assert 'absent.hdr' in result['msg']
