"""Exception hierarchy shared by all modules.

Everything raised for a bad numerical domain derives from ``DomainError`` so the
CLI can map it to a single exit code.
"""


class WindfieldError(Exception):
    """Base class for library errors."""


class DomainError(WindfieldError, ValueError):
    """Input lies outside the domain of an operation."""


class DegenerateNormError(DomainError):
    """Vector lies on an isotropic line (zero pseudo-Euclidean length)."""


class NotOrthonormalError(DomainError):
    pass


class RangeError(DomainError, OverflowError):
    """A scale factor overflowed double precision."""


class SingularityError(DomainError):
    """Query point is inside the exclusion radius of a point feature."""


class CaptureError(SingularityError):
    """A trajectory entered the exclusion radius of a feature."""


class DirectionUndefinedError(DomainError):
    """The potential gradient vanishes so no direction can be assigned."""


class DegenerateGramError(DomainError):
    pass


class NormalizationError(DomainError):
    pass


class InsufficientSampleError(DomainError):
    pass


class IdentityViolation(WindfieldError):
    """Two independent evaluations of the same quantity disagreed."""
