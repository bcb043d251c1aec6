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
module: gvof_phantom
short_description: Simulate noisy acquisitions of the sphere phantom
version_added: "1.0.0"
description:
    - Rasterize the body phantom with its six hot spheres for every
      configured contrast, write the ground truth, and write one Poisson
      noise realization per configured duration and realization.
    - Seeds are derived the same way as in M(gvof.denoise.gvof_study), so
      the volumes match the ones a study simulates.
options:
    config:
        description:
            - YAML study configuration or run manifest. Library defaults apply
              when omitted.
        type: path
        required: false
    output_dir:
        description:
            - Directory receiving the volume files.
        type: path
        required: true
author:
    - gvof.denoise contributors
'''

EXAMPLES = '''
- name: simulate the default grid
  gvof_phantom:
    output_dir: /data/phantom

- name: simulate from a study configuration
  gvof_phantom:
    config: /etc/gvof/study.yml
    output_dir: /data/phantom
'''

RETURN = '''
volumes:
    description: Volume headers written, relative to output_dir.
    type: list
    elements: str
    returned: always
seeds:
    description: Seeds and files of every contrast and duration.
    type: list
    elements: dict
    returned: always
'''

from ansible.module_utils.basic import AnsibleModule
try:
    from ansible_collections.gvof.denoise.plugins.module_utils.gvof_common import exit_module, \
        fatal, \
        generate_cmd, \
        GvofError
    from ansible_collections.gvof.denoise.plugins.module_utils.study import cmd_phantom
except ImportError:
    from module_utils.gvof_common import exit_module, \
        fatal, \
        generate_cmd, \
        GvofError
    from module_utils.study import cmd_phantom

import datetime


def run_module() -> None:
    module = AnsibleModule(
        argument_spec=dict(
            config=dict(type='path', required=False),
            output_dir=dict(type='path', required=True),
        ),
        supports_check_mode=True,
    )

    config = module.params.get('config')
    output_dir = module.params.get('output_dir')

    startd = datetime.datetime.now()
    cmd = generate_cmd('phantom', dict(config=config, out=output_dir))

    try:
        result = cmd_phantom(config, output_dir, check_mode=module.check_mode)
    except (GvofError, OSError) as e:
        fatal(str(e), module)

    exit_module(module=module, startd=startd, cmd=cmd, rc=0,
                changed=not module.check_mode, **result)


def main() -> None:
    run_module()


if __name__ == '__main__':
    main()
