from __future__ import absolute_import, division, print_function
__metaclass__ = type

import datetime
import math
from typing import TYPE_CHECKING, Any, Dict, List, Optional

from ansible.module_utils.common.arg_spec import ArgumentSpecValidator  # type: ignore

if TYPE_CHECKING:
    from ansible.module_utils.basic import AnsibleModule  # type: ignore

FWHM_PER_SIGMA = 2.0 * math.sqrt(2.0 * math.log(2.0))
COLLECTION_VERSION = '1.0.0'


class GvofError(Exception):
    '''
    Base class of every error raised by the collection
    '''


class ConfigError(GvofError):
    pass


class VolumeError(GvofError):
    pass


class MetricError(GvofError):
    pass


class InfiniteSnrError(MetricError):
    pass


class SphereTooSmallError(MetricError):
    pass


class FitError(MetricError):
    def __init__(self, message: str, residual: float) -> None:
        super(FitError, self).__init__(message)
        self.residual = residual


class VolumeFormatError(GvofError):
    pass


class MagicMismatchError(VolumeFormatError):
    pass


class LengthMismatchError(VolumeFormatError):
    pass


class NonFiniteError(VolumeFormatError):
    pass


def generate_cmd(sub_cmd: str, args: Optional[Dict[str, Any]] = None, cmd: str = 'gvof') -> List[str]:
    '''
    Generate the 'gvof' command line equivalent to a set of parameters
    '''

    command = [cmd, sub_cmd]

    for key, value in (args or {}).items():
        if value is None or value is False:
            continue
        flag = '--' + key.replace('_', '-')
        if value is True:
            command.append(flag)
        elif isinstance(value, (list, tuple)):
            command.append(flag)
            command.extend(str(v) for v in value)
        else:
            command.extend([flag, str(value)])

    return command


def validate_section(argument_spec: Dict[str, Dict[str, Any]],
                     params: Optional[Dict[str, Any]],
                     section: str) -> Dict[str, Any]:
    '''
    Validate one configuration section against an argument spec and fill defaults
    '''

    if params is None:
        params = {}
    if not isinstance(params, dict):
        raise ConfigError("section '{}' must be a mapping, got {}".format(section, type(params).__name__))

    result = ArgumentSpecValidator(argument_spec).validate(params)
    if result.error_messages:
        raise ConfigError("section '{}': {}".format(section, '; '.join(result.error_messages)))

    return result.validated_parameters


def exit_module(module: "AnsibleModule",
                startd: datetime.datetime,
                cmd: List[str],
                rc: int = 0,
                out: str = '',
                err: str = '',
                changed: bool = False,
                **extra: Any) -> None:
    endd = datetime.datetime.now()
    delta = endd - startd

    result = dict(
        cmd=cmd,
        start=str(startd),
        end=str(endd),
        delta=str(delta),
        rc=rc,
        stdout=out.rstrip("\r\n"),
        stderr=err.rstrip("\r\n"),
        changed=changed,
    )
    result.update(extra)
    module.exit_json(**result)


def fatal(message: str, module: Optional["AnsibleModule"] = None) -> None:
    '''
    Report a fatal error and exit
    '''

    if module:
        module.fail_json(msg=message, rc=1)
    else:
        raise GvofError(message)
