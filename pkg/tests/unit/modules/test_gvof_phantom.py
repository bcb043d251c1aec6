from mock.mock import patch

import yaml
from ansible_collections.gvof.denoise.tests.unit.modules import gvof_test_common
from ansible_collections.gvof.denoise.plugins.modules import gvof_phantom

fake_config = {
    'phantom': {'dims': [51, 51, 11], 'spacing': [6.0, 6.0, 6.0], 'supersample': 1},
    'acquisition': {'durations': [900.0], 'realizations': 2},
    'study': {'contrasts': ['4:1']},
}


class TestGvofPhantomModule(object):

    def write_config(self, tmp_path):
        path = tmp_path / 'config.yml'
        path.write_text(yaml.safe_dump(fake_config))
        return str(path)

    @patch('ansible.module_utils.basic.AnsibleModule.fail_json')
    def test_without_parameters(self, m_fail_json):
        m_fail_json.side_effect = gvof_test_common.fail_json
        result = gvof_test_common.run_module(gvof_phantom, {}, gvof_test_common.AnsibleFailJson)
        assert result['msg'] == 'missing required arguments: output_dir'

    @patch('ansible.module_utils.basic.AnsibleModule.exit_json')
    def test_with_check_mode(self, m_exit_json, tmp_path):
        m_exit_json.side_effect = gvof_test_common.exit_json
        config = self.write_config(tmp_path)
        out = str(tmp_path / 'out')
        result = gvof_test_common.run_module(gvof_phantom, {'config': config, 'output_dir': out,
                                                            '_ansible_check_mode': True})
        assert not result['changed']
        assert result['cmd'] == ['gvof', 'phantom', '--config', config, '--out', out]
        assert result['volumes'] == ['4-1_900s_r0.hdr', '4-1_900s_r1.hdr']
        assert not (tmp_path / 'out').exists()

    @patch('ansible.module_utils.basic.AnsibleModule.exit_json')
    def test_write_volumes(self, m_exit_json, tmp_path):
        m_exit_json.side_effect = gvof_test_common.exit_json
        out = tmp_path / 'out'
        result = gvof_test_common.run_module(gvof_phantom, {'config': self.write_config(tmp_path),
                                                            'output_dir': str(out)})
        assert result['changed']
        assert result['seeds'][0]['seeds'] == [0, 1]
        assert sorted(p.name for p in out.glob('*.hdr')) == ['4-1_900s_r0.hdr', '4-1_900s_r1.hdr', 'truth_4-1.hdr']

    @patch('ansible.module_utils.basic.AnsibleModule.fail_json')
    def test_with_invalid_config(self, m_fail_json, tmp_path):
        m_fail_json.side_effect = gvof_test_common.fail_json
        config = tmp_path / 'bad.yml'
        config.write_text('acquisition:\n  realizations: 0\n')
        result = gvof_test_common.run_module(gvof_phantom, {'config': str(config), 'output_dir': str(tmp_path)},
                                             gvof_test_common.AnsibleFailJson)
        assert result['msg'] == 'realizations must be >= 1, got 0'
