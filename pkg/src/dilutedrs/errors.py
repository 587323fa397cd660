"""Exception hierarchy shared by all solver modules.

Each class carries the CLI exit code it maps to, so the orchestrator can
translate failures into stable process statuses.
"""


class DilutedError(Exception):
    exit_code = 1


class ArgumentError(DilutedError, ValueError):
    exit_code = 2


class InvalidFieldError(ArgumentError):
    pass


class ConfigError(DilutedError, ValueError):
    exit_code = 2


class UnsupportedError(DilutedError):
    exit_code = 2


class ResourceError(DilutedError, RuntimeError):
    exit_code = 4


class DigestMismatchError(DilutedError):
    exit_code = 2


class NoClosedFormError(DilutedError, LookupError):
    exit_code = 2
