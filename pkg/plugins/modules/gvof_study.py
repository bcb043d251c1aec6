#!/usr/bin/python
# -*- coding: utf-8 -*-

# Copyright gvof.denoise contributors
# SPDX-License-Identifier: Apache-2.0

from __future__ import absolute_import, division, print_function
__metaclass__ = type

ANSIBLE_METADATA = {
    'metadata_version': '1.1',
    'status': ['preview'],
    'supported_by': 'community'
}

DOCUMENTATION = '''
---
module: gvof_study
short_description: Run the denoising filter comparison study
version_added: "1.0.0"
description:
    - Simulate every contrast, duration and realization of the configured
      grid, apply every configured filter and measure SNR, CNR, resolution,
      maximum activity bias and reproducibility.
    - Writes C(report.csv), C(summary.csv), C(profiles.csv) and
      C(manifest.json) under output_dir. Passing the manifest back as
      config reproduces the same files byte for byte.
options:
    config:
        description:
            - YAML study configuration or run manifest. Library defaults apply
              when omitted.
        type: path
        required: false
    output_dir:
        description:
            - Directory receiving the report files.
        type: path
        required: true
    jobs:
        description:
            - Number of grid cells simulated in parallel. Results do not
              depend on it.
        type: int
        required: false
        default: 1
    save_volumes:
        description:
            - Write every filtered volume under output_dir/volumes.
              Overrides the configuration when set.
        type: bool
        required: false
author:
    - gvof.denoise contributors
'''

EXAMPLES = '''
- name: run the default study on four workers
  gvof_study:
    output_dir: /data/study
    jobs: 4

- name: rerun a previous study from its manifest
  gvof_study:
    config: /data/study/manifest.json
    output_dir: /data/rerun
'''

RETURN = '''
report:
    description: Path of the per-realization and aggregate metrics table.
    type: str
    returned: always
summary:
    description: Path of the per-filter summary table.
    type: str
    returned: always
manifest:
    description: Path of the run manifest.
    type: str
    returned: always
rows:
    description: Number of report rows written.
    type: int
    returned: always
'''

from ansible.module_utils.basic import AnsibleModule
try:
    from ansible_collections.gvof.denoise.plugins.module_utils.gvof_common import exit_module, \
        fatal, \
        generate_cmd, \
        GvofError
    from ansible_collections.gvof.denoise.plugins.module_utils.study import cmd_study
except ImportError:
    from module_utils.gvof_common import exit_module, \
        fatal, \
        generate_cmd, \
        GvofError
    from module_utils.study import cmd_study

import datetime


def run_module() -> None:
    module = AnsibleModule(
        argument_spec=dict(
            config=dict(type='path', required=False),
            output_dir=dict(type='path', required=True),
            jobs=dict(type='int', required=False, default=1),
            save_volumes=dict(type='bool', required=False),
        ),
        supports_check_mode=True,
    )

    config = module.params.get('config')
    output_dir = module.params.get('output_dir')
    jobs = module.params.get('jobs')
    save_volumes = module.params.get('save_volumes')

    startd = datetime.datetime.now()
    args = dict(config=config, out=output_dir, jobs=jobs)
    if save_volumes is not None:
        args['save_volumes' if save_volumes else 'no_save_volumes'] = True
    cmd = generate_cmd('study', args)

    try:
        result = cmd_study(config, output_dir, jobs=jobs, save_volumes=save_volumes,
                           check_mode=module.check_mode)
    except (GvofError, OSError) as e:
        fatal(str(e), module)

    exit_module(module=module, startd=startd, cmd=cmd, rc=0,
                changed=not module.check_mode, **result)


def main() -> None:
    run_module()


if __name__ == '__main__':
    main()
