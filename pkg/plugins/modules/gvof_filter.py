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
module: gvof_filter
short_description: Denoise a PET volume
version_added: "1.0.0"
description:
    - Apply one denoising filter to a volume file and write the result.
    - The filters are C(none), C(gf) (Gaussian), C(bf) (bilateral),
      C(ndf) (Perona-Malik nonlinear diffusion) and C(gvof)
      (gradient vector orientation diffusion).
options:
    input:
        description:
            - Header of the volume to filter.
        type: path
        required: true
    output:
        description:
            - Header of the filtered volume. The payload is written next to it
              with a C(.raw) suffix.
        type: path
        required: true
    filter:
        description:
            - The filter to apply.
        type: str
        required: true
        choices: ['none', 'gf', 'bf', 'ndf', 'gvof']
    params:
        description:
            - Filter parameters overriding the library defaults, for example
              C(kappa), C(iterations), C(window) or C(fwhm).
        type: dict
        required: false
        default: {}
author:
    - gvof.denoise contributors
'''

EXAMPLES = '''
- name: denoise with the orientation diffusion filter
  gvof_filter:
    input: /data/2-1_900s_r0.hdr
    output: /data/2-1_900s_gvof_r0.hdr
    filter: gvof
    params:
      kappa: 0.1
      iterations: 60
      window: [3, 3]

- name: gaussian smoothing with the default 4 mm FWHM
  gvof_filter:
    input: /data/2-1_900s_r0.hdr
    output: /data/2-1_900s_gf_r0.hdr
    filter: gf
'''

RETURN = '''
params:
    description: The resolved filter parameters.
    type: dict
    returned: always
    sample: {"kappa": 0.1, "iterations": 60, "window": [3, 3]}
payload:
    description: The payload file written next to the output header.
    type: str
    returned: changed
'''

from ansible.module_utils.basic import AnsibleModule
try:
    from ansible_collections.gvof.denoise.plugins.module_utils.gvof_common import exit_module, \
        fatal, \
        generate_cmd, \
        validate_section, \
        GvofError
    from ansible_collections.gvof.denoise.plugins.module_utils.filters import FILTER_NAMES
    from ansible_collections.gvof.denoise.plugins.module_utils.study import cmd_filter, filter_argument_spec
except ImportError:
    from module_utils.gvof_common import exit_module, \
        fatal, \
        generate_cmd, \
        validate_section, \
        GvofError
    from module_utils.filters import FILTER_NAMES
    from module_utils.study import cmd_filter, filter_argument_spec

import datetime


def run_module() -> None:
    module = AnsibleModule(
        argument_spec=dict(
            input=dict(type='path', required=True),
            output=dict(type='path', required=True),
            filter=dict(type='str', required=True, choices=list(FILTER_NAMES)),
            params=dict(type='dict', required=False, default={}),
        ),
        supports_check_mode=True,
    )

    input_path = module.params.get('input')
    output_path = module.params.get('output')
    kind = module.params.get('filter')
    params = module.params.get('params') or {}

    startd = datetime.datetime.now()
    cmd = generate_cmd('filter', dict([('in', input_path), ('out', output_path), ('filter', kind)] +
                                      sorted(params.items())))

    try:
        resolved = validate_section(filter_argument_spec(kind), params, 'params')
        result = cmd_filter(input_path, output_path, kind, resolved, check_mode=module.check_mode)
    except (GvofError, OSError) as e:
        fatal(str(e), module)

    module.debug('gvof_filter: {} {}'.format(kind, result['params']))
    exit_module(module=module, startd=startd, cmd=cmd, rc=0,
                changed=not module.check_mode, **result)


def main() -> None:
    run_module()


if __name__ == '__main__':
    main()
