"""Exception taxonomy for boltzkit.

Every guard in the package raises one of these, so callers (and the CLI,
which maps them to exit code 2 plus a structured error report) can tell
configuration mistakes apart from numerical failures.
"""

from __future__ import annotations

__all__ = [
    "BoltzkitError",
    "ConfigurationError",
    "UnsupportedDimensionError",
    "RangeError",
    "GeometryError",
    "RegimeError",
    "NumericalRangeError",
    "InstabilityError",
    "InsufficientDataError",
    "ConfigParseError",
]


class BoltzkitError(Exception):
    """Base class for all boltzkit errors."""


class ConfigurationError(BoltzkitError, ValueError):
    """Invalid parameter combination (grid sizes, norm orders, schemes...)."""


class UnsupportedDimensionError(ConfigurationError):
    """Dimension outside {1, 2, 3}."""


class RangeError(BoltzkitError, ValueError):
    """A frequency level or support escapes the representable grid range."""


class GeometryError(BoltzkitError, ValueError):
    """Geometric precondition violated (e.g. a scattering direction not unit)."""


class RegimeError(BoltzkitError, ValueError):
    """Kernel exponent outside the implemented soft-potential regime."""


class NumericalRangeError(BoltzkitError, ArithmeticError):
    """A computed quantity left the representable numerical range.

    Carries ``node_index`` when raised inside a Duhamel tree evaluation.
    """

    def __init__(self, message: str, node_index: int | None = None):
        super().__init__(message)
        self.node_index = node_index


class InstabilityError(BoltzkitError, ArithmeticError):
    """Time stepping produced NaN/overflow; carries the failing step index."""

    def __init__(self, message: str, step_index: int | None = None):
        super().__init__(message)
        self.step_index = step_index


class InsufficientDataError(BoltzkitError, ValueError):
    """Not enough data points for the requested fit/statistic."""


class ConfigParseError(BoltzkitError, ValueError):
    """Config file could not be parsed; carries the offending line number."""

    def __init__(self, message: str, line_number: int | None = None):
        super().__init__(message)
        self.line_number = line_number
