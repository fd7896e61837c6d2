"""Winding charts, Minkowski frames, harmonic-potential feature dynamics and
Markov path amplitudes."""

__version__ = "0.1.0"

from . import dynamics, evolution, field, frames, geometry, stochastic
from .errors import (
    CaptureError,
    DomainError,
    IdentityViolation,
    InsufficientSampleError,
    RangeError,
    SingularityError,
    WindfieldError,
)

__all__ = [
    "CaptureError",
    "DomainError",
    "IdentityViolation",
    "InsufficientSampleError",
    "RangeError",
    "SingularityError",
    "WindfieldError",
    "dynamics",
    "evolution",
    "field",
    "frames",
    "geometry",
    "stochastic",
]
