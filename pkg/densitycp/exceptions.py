"""Error types raised across the package.

Every error carries the name of the module that raised it, which the command line prints in
front of the message (``ctmc-engine: total rate is zero``). The classes also derive from the
closest builtin exception so callers that only catch ``ValueError`` keep working.
"""


class DensityCPError(Exception):
    """Base class for all errors raised by :mod:`densitycp`."""

    module = "densitycp"

    def __init__(self, message, module=None):
        super().__init__(message)
        if module is not None:
            self.module = module

    def qualified(self):
        """str: the message prefixed with the module label"""
        return "{}: {}".format(self.module, self)


class CoordinateError(DensityCPError, IndexError):
    module = "lattice-core"


class StateError(DensityCPError, ValueError):
    module = "lattice-core"


class TopologyError(DensityCPError, ValueError):
    module = "lattice-core"


class AbsorbingStateError(DensityCPError, RuntimeError):
    module = "ctmc-engine"


class UnsupportedError(DensityCPError, ValueError):
    pass


class ParameterError(DensityCPError, ValueError):
    pass


class ParameterOrderError(ParameterError):
    module = "coupling"


class DomainError(ParameterError):
    pass


class BracketError(DensityCPError, RuntimeError):
    module = "experiments"


class ConfigError(DensityCPError, ValueError):
    module = "cli"
