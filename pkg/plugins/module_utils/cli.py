from __future__ import absolute_import, division, print_function
__metaclass__ = type

import argparse
import json
import logging
import sys
from typing import Any, Dict, List, Optional

try:
    from ansible_collections.gvof.denoise.plugins.module_utils.gvof_common import (
        COLLECTION_VERSION, ConfigError, GvofError)
    from ansible_collections.gvof.denoise.plugins.module_utils.filters import (
        FILTER_NAMES, NDF_SCHEDULES, filter_config, filter_defaults)
    from ansible_collections.gvof.denoise.plugins.module_utils.study import (
        FILTER_PARAM_TYPES, cmd_export_slice, cmd_filter, cmd_phantom, cmd_study)
except ImportError:
    from module_utils.gvof_common import COLLECTION_VERSION, ConfigError, GvofError
    from module_utils.filters import FILTER_NAMES, NDF_SCHEDULES, filter_config, filter_defaults
    from module_utils.study import FILTER_PARAM_TYPES, cmd_export_slice, cmd_filter, cmd_phantom, cmd_study

EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_USAGE = 2

LOG_FORMAT = '%(asctime)s %(levelname)s %(name)s: %(message)s'
ARG_TYPES = {'float': float, 'int': int, 'str': str, 'list': int}


def _param_help(name: str) -> str:
    defaults = ['{}={}'.format(kind, filter_defaults(kind)[name]) for kind in FILTER_NAMES
                if name in filter_defaults(kind)]
    return 'default: ' + ', '.join(defaults)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog='gvof', description='Volumetric PET denoising and phantom studies')
    parser.add_argument('--version', action='version', version='%(prog)s ' + COLLECTION_VERSION)
    parser.add_argument('-v', '--verbose', action='count', default=0, help='-v for INFO, -vv for DEBUG')
    commands = parser.add_subparsers(dest='command', metavar='COMMAND')
    commands.required = True

    phantom = commands.add_parser('phantom', help='rasterize the phantom and simulate noisy acquisitions')
    phantom.add_argument('--config', help='YAML study configuration or run manifest')
    phantom.add_argument('--out', required=True, help='output directory')

    filtering = commands.add_parser('filter', help='denoise one volume')
    filtering.add_argument('--in', dest='input', required=True, help='input volume header')
    filtering.add_argument('--out', required=True, help='output volume header')
    filtering.add_argument('--filter', required=True, choices=FILTER_NAMES)
    for name, kind in FILTER_PARAM_TYPES.items():
        option = dict(type=ARG_TYPES[kind], default=None, help=_param_help(name))
        if name == 'window':
            option['nargs'] = '+'
        if name == 'schedule':
            option['choices'] = NDF_SCHEDULES
        filtering.add_argument('--' + name.replace('_', '-'), dest=name, **option)

    study = commands.add_parser('study', help='run the full filter comparison study')
    study.add_argument('--config', help='YAML study configuration or run manifest')
    study.add_argument('--out', required=True, help='output directory')
    study.add_argument('--jobs', type=int, default=1, help='grid cells run in parallel')
    study.add_argument('--save-volumes', action=argparse.BooleanOptionalAction, default=None,
                       help='write every filtered volume (default: from the configuration)')

    export = commands.add_parser('export-slice', help='write one axial slice as a 16-bit PGM image')
    export.add_argument('--in', dest='input', required=True, help='input volume header')
    export.add_argument('--slice', type=int, required=True, help='z index')
    export.add_argument('--out', required=True, help='output PGM file')

    return parser


def filter_args(args: argparse.Namespace) -> Dict[str, Any]:
    '''
    Filter parameters set on the command line
    '''

    return {name: getattr(args, name) for name in FILTER_PARAM_TYPES if getattr(args, name) is not None}


def configure_logging(verbosity: int) -> None:
    level = logging.WARNING
    if verbosity == 1:
        level = logging.INFO
    elif verbosity > 1:
        level = logging.DEBUG
    logging.basicConfig(level=level, format=LOG_FORMAT, stream=sys.stderr)


def run(args: argparse.Namespace) -> Dict[str, Any]:
    if args.command == 'phantom':
        return cmd_phantom(args.config, args.out)
    if args.command == 'filter':
        return cmd_filter(args.input, args.out, args.filter, filter_args(args))
    if args.command == 'study':
        return cmd_study(args.config, args.out, jobs=args.jobs, save_volumes=args.save_volumes)
    return cmd_export_slice(args.input, args.slice, args.out)


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return EXIT_USAGE if e.code else EXIT_OK

    if args.command == 'filter':
        try:
            filter_config(args.filter, **filter_args(args))
        except ConfigError as e:
            parser.print_usage(sys.stderr)
            print('gvof filter: error: {}'.format(e), file=sys.stderr)
            return EXIT_USAGE

    configure_logging(args.verbose)
    try:
        result = run(args)
    except (GvofError, OSError) as e:
        print('gvof {}: error: {}'.format(args.command, e), file=sys.stderr)
        return EXIT_FAILURE

    print(json.dumps(result, indent=2, sort_keys=True))
    return EXIT_OK


if __name__ == '__main__':
    sys.exit(main())
