"""Exception and warning types shared across the package."""

from __future__ import annotations


class FlowforgeError(Exception):
    """Base class for all package-specific errors."""


class GridMismatch(FlowforgeError):
    """Two fields (or a field and a direction) live on incompatible grids."""


class NumericalError(FlowforgeError):
    """Base class for runtime numerical failures (CLI exit code 2)."""


class DegenerateDirection(NumericalError):
    """The surface is tangent to the fixed direction somewhere (weight <= 0)."""

    def __init__(self, message: str, node=None):
        super().__init__(message)
        self.node = node


class EmptyStencil(NumericalError):
    """The kernel truncation ball around a probe point contains no grid node."""


class NoBracket(NumericalError):
    """The vertical bracket shows no sign change of the directional derivative."""

    def __init__(self, message: str, node=None):
        super().__init__(message)
        self.node = node


class MaxItersExceeded(NumericalError):
    """An iterative solver ran out of iterations before reaching tolerance."""

    def __init__(self, message: str, residual: float | None = None):
        super().__init__(message)
        self.residual = residual


class BlowUp(NumericalError):
    """A time-stepped field left the trusted range (samples exceed 1e6)."""

    def __init__(self, message: str, time_reached: float | None = None):
        super().__init__(message)
        self.time_reached = time_reached


class ConfigError(FlowforgeError):
    """Base class for configuration failures (CLI exit code 1)."""


class ParseError(ConfigError):
    """Config file is not well-formed JSON."""


class ValidationError(ConfigError):
    """Config file is valid JSON but violates the schema."""


class MultipleRootsWarning(UserWarning):
    """More than one downward sign change was found on a vertical scan line.

    The solver resolves the tie by picking the root nearest the previous
    height, but multiplicity means the evolving surface is leaving the
    single-valued graph regime and must not pass silently.
    """


class KernelResolutionWarning(UserWarning):
    """The diffusion kernel width is under-resolved by the grid spacing."""
