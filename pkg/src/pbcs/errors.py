"""Exception hierarchy shared by every module.

Each class carries the process exit code the command-line front end uses
when the error escapes a command.
"""


class PbcsError(Exception):
    exit_code = 1


class UsageError(PbcsError, ValueError):
    exit_code = 2


class ConfigurationError(PbcsError, ValueError):
    """Sensing or solver configuration violates its invariants."""

    exit_code = 2


class DimensionError(PbcsError, ValueError):
    exit_code = 4


class DataError(PbcsError, ValueError):
    """Non-finite or otherwise unusable sample values."""

    exit_code = 4


class RangeError(PbcsError, IndexError):
    exit_code = 2


class FormatError(PbcsError):
    """A file does not match the layout it claims (or is truncated)."""

    exit_code = 4


class ConvergenceError(PbcsError, RuntimeError):
    exit_code = 5


IO_EXIT_CODE = 3
