"""Exception hierarchy shared by the solver modules and the CLI."""
from __future__ import annotations


class EdgeRegError(Exception):
    """Base class for every error raised by edgereg."""


class DimensionError(EdgeRegError, ValueError):
    """Operands do not conform (matrix/vector shapes)."""


class ConfigError(EdgeRegError, ValueError):
    """A run configuration is outside its allowed bounds."""


class DegenerateWeightsError(EdgeRegError):
    """The weighted gradient of a solution is identically zero."""


class SplittingError(EdgeRegError):
    """A C/F splitting leaves an F-point without interpolatory C-points."""


class InterpolationError(EdgeRegError):
    """An interpolation weight denominator vanished."""


class PreconditionerError(EdgeRegError):
    """A relaxation or coarsest-level operator cannot be inverted."""


class LCurveError(EdgeRegError):
    """Too few L-curve points, or an undefined trimming window."""


class ProblemFormatError(EdgeRegError):
    """A problem directory is missing files or holds malformed data."""
