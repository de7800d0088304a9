"""Exception types raised by slicedheat."""


class SlicedHeatError(Exception):
    """Base class for all package errors."""


class InvalidInputError(SlicedHeatError, ValueError):
    """Malformed argument: non-finite coordinates, negative durations, bad shapes."""


class DomainError(SlicedHeatError, ValueError):
    """A point lies in the wrong region for the requested operation."""


class UnsupportedError(SlicedHeatError, NotImplementedError):
    """The operation is not defined for this geometry or bundle."""


class RejectedPathError(SlicedHeatError, ValueError):
    """A quantity was requested from a path whose status is not ``ok``."""


class ConfigError(SlicedHeatError, ValueError):
    """A run configuration failed schema validation."""
