"""Winding (compactification) maps between flat spaces and compact targets.

Angles follow the modular convention used throughout the package: the
latitude-like angle ``phi`` lives in ``[0, 2*pi)`` and every longitude-like
angle ``theta`` in ``[0, pi)``.  Winding a line onto a circle is many-to-one;
the :class:`Branch` record keeps the integer turn count and sign that the
modulo operation throws away, so every chart here has an exact inverse.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .errors import DegenerateNormError, DomainError

TWO_PI = 2.0 * math.pi

#: relative tolerance for deciding a point sits on an isotropic line
ISOTROPIC_RTOL = 1e-12


def _require_finite(*values: float) -> None:
    for v in values:
        if not math.isfinite(v):
            raise DomainError(f"non-finite coordinate: {v!r}")


def wrap(x: float, period: float) -> float:
    """Reduce ``x`` to ``[0, period)``; a result that rounds onto ``period`` becomes 0."""
    r = math.fmod(x, period)
    if r < 0.0:
        r += period
    if r >= period:
        r = 0.0
    return r


def _half_turns(c: float) -> tuple[float, int]:
    """Split ``c`` as ``m + 2*k`` with ``m`` in ``[0, 2)``.

    ``fmod`` is exact in binary floating point, so ``m`` carries no rounding
    error and ``pi * m`` is the best available value of ``(pi * c) mod 2pi``.
    """
    m = math.fmod(c, 2.0)
    if m < 0.0:
        m += 2.0
    if m >= 2.0:
        m = 0.0
    k = round((c - m) / 2.0)
    return m, int(k)


def _phase(m: float) -> float:
    phase = math.pi * m
    return 0.0 if phase >= TWO_PI else phase


# ---------------------------------------------------------------------------
# types


@dataclass(frozen=True)
class PolarPoint2:
    varphi: float
    rho: float

    def __post_init__(self):
        _require_finite(self.varphi, self.rho)
        if not 0.0 <= self.varphi < TWO_PI:
            raise DomainError(f"varphi must lie in [0, 2pi), got {self.varphi}")
        if self.rho < 0.0:
            raise DomainError(f"rho must be non-negative, got {self.rho}")


@dataclass(frozen=True)
class SphericalPoint:
    """Point on a sphere: one angle mod 2pi and ``n - 2`` angles mod pi."""

    phi: float
    thetas: tuple[float, ...]

    def __post_init__(self):
        object.__setattr__(self, "thetas", tuple(float(t) for t in self.thetas))
        if not 0.0 <= self.phi < TWO_PI:
            raise DomainError(f"phi must lie in [0, 2pi), got {self.phi}")
        for t in self.thetas:
            if not 0.0 <= t < math.pi:
                raise DomainError(f"theta must lie in [0, pi), got {t}")


@dataclass(frozen=True)
class PseudoPlanePoint:
    """Point of the pseudo-Euclidean plane with signature (+, -)."""

    x0: float
    x1: float

    def __post_init__(self):
        _require_finite(self.x0, self.x1)


@dataclass(frozen=True)
class CylinderPoint:
    phi: float
    r: float

    def __post_init__(self):
        _require_finite(self.phi, self.r)
        if not 0.0 <= self.phi < TWO_PI:
            raise DomainError(f"phi must lie in [0, 2pi), got {self.phi}")


@dataclass(frozen=True)
class Branch:
    """Turn count and sign lost by a winding map."""

    turns: int
    sign: int = 1

    def __post_init__(self):
        if self.sign not in (-1, 1):
            raise DomainError(f"sign must be +1 or -1, got {self.sign}")


@dataclass(frozen=True)
class MinkowskiEvent:
    """Event in Minkowski space, signature (+, -, -, -)."""

    x: tuple[float, float, float, float]

    def __post_init__(self):
        x = tuple(float(v) for v in self.x)
        if len(x) != 4:
            raise DomainError(f"Minkowski event needs 4 coordinates, got {len(x)}")
        _require_finite(*x)
        object.__setattr__(self, "x", x)


@dataclass(frozen=True)
class R6Point:
    """Point of R^6 with signature (+, +, +, -, -, -)."""

    x: tuple[float, float, float, float, float, float]

    def __post_init__(self):
        x = tuple(float(v) for v in self.x)
        if len(x) != 6:
            raise DomainError(f"R6 point needs 6 coordinates, got {len(x)}")
        _require_finite(*x)
        object.__setattr__(self, "x", x)


class HyperbolicDecomposition(NamedTuple):
    rho: float
    varphi: float
    sector: str  # one of "+e0", "-e0", "+e1", "-e1"


class MinkowskiWinding(NamedTuple):
    phi: float
    r: tuple[float, float, float]
    branch: Branch


# ---------------------------------------------------------------------------
# line and sphere charts


def interval_sign(varphi: float) -> int:
    """+1 on ``[0, pi)``, -1 on ``[pi, 2pi)``."""
    return 1 if varphi < math.pi else -1


def wind_line_to_circle(x: float) -> float:
    """Argument of ``exp(i*pi*x)`` in ``[0, 2pi)``."""
    _require_finite(x)
    m, _ = _half_turns(x)
    return _phase(m)


def wind_plane_to_sphere(p: PolarPoint2) -> SphericalPoint:
    """Wind the Euclidean plane onto S^2.

    ``theta = varphi mod pi`` and ``phi = (+-pi*rho) mod 2pi`` where the sign is
    ``+`` on the upper half-turn ``[0, pi)`` and ``-`` on ``[pi, 2pi)``.
    """
    sign = interval_sign(p.varphi)
    theta = wrap(p.varphi, math.pi)
    m, _ = _half_turns(sign * p.rho)
    return SphericalPoint(_phase(m), (theta,))


def sphere_branch(p: PolarPoint2) -> Branch:
    sign = interval_sign(p.varphi)
    _, turns = _half_turns(sign * p.rho)
    return Branch(turns, sign)


def unwind_sphere(s: SphericalPoint, b: Branch) -> PolarPoint2:
    """Inverse of :func:`wind_plane_to_sphere` on the branch ``b``."""
    (theta,) = s.thetas
    varphi = theta if b.sign > 0 else theta + math.pi
    rho = b.sign * (s.phi / math.pi + 2.0 * b.turns)
    return PolarPoint2(varphi, abs(rho))


def wind_r3_to_s3(vartheta: float, varphi: float, rho: float) -> SphericalPoint:
    """Wind R^3, given in spherical coordinates, onto S^3.

    Returns ``SphericalPoint(phi, (theta1, theta2))`` with ``theta1 = vartheta``,
    ``theta2 = varphi mod pi`` and the radial winding of :func:`wind_plane_to_sphere`.
    """
    _require_finite(vartheta, varphi, rho)
    if not 0.0 <= vartheta < math.pi:
        raise DomainError(f"vartheta must lie in [0, pi), got {vartheta}")
    p = PolarPoint2(varphi, rho)
    s2 = wind_plane_to_sphere(p)
    return SphericalPoint(s2.phi, (vartheta, s2.thetas[0]))


# ---------------------------------------------------------------------------
# pseudo-Euclidean charts


def pseudo_length(x0: float, x1: float) -> float:
    """``|(x0 + x1)(x0 - x1)|**0.5``: the length of a vector of the (+, -) plane."""
    return math.sqrt(abs((x0 + x1) * (x0 - x1)))


def wind_pseudoplane_to_cylinder(p: PseudoPlanePoint) -> tuple[CylinderPoint, Branch]:
    """Wind the pseudo-Euclidean plane onto the cylinder R x S^1.

    The isotropic line ``x0 + x1`` wraps the cross-section circle and
    ``x0 - x1`` runs along the element.
    """
    s = p.x0 + p.x1
    sign = 1 if s >= 0.0 else -1
    m, turns = _half_turns(abs(s))
    phase = math.pi * m
    if phase >= TWO_PI:
        phase, turns = 0.0, turns + 1
    return CylinderPoint(phase, p.x0 - p.x1), Branch(turns, sign)


def unwind_cylinder(c: CylinderPoint, b: Branch) -> PseudoPlanePoint:
    s = b.sign * (c.phi / math.pi + 2.0 * b.turns)
    return PseudoPlanePoint(0.5 * (s + c.r), 0.5 * (s - c.r))


def is_isotropic(x0: float, x1: float) -> bool:
    return abs((x0 + x1) * (x0 - x1)) <= ISOTROPIC_RTOL * max(1.0, x0 * x0 + x1 * x1)


def hyperbolic_decomposition(p: PseudoPlanePoint) -> HyperbolicDecomposition:
    """Length, hyperbolic angle and sector of a non-isotropic vector.

    ``varphi = -ln|(x0 + x1) / rho|`` so that ``exp(-varphi) * rho = |x0 + x1|``
    and ``exp(varphi) * rho = |x0 - x1|``.
    """
    s, d = p.x0 + p.x1, p.x0 - p.x1
    if is_isotropic(p.x0, p.x1):
        raise DegenerateNormError(f"({p.x0}, {p.x1}) lies on an isotropic line")
    rho = math.sqrt(abs(s * d))
    varphi = -math.log(abs(s) / rho)
    if abs(p.x0) > abs(p.x1):
        sector = "+e0" if p.x0 > 0 else "-e0"
    else:
        sector = "+e1" if p.x1 > 0 else "-e1"
    return HyperbolicDecomposition(rho, varphi, sector)


def recombine(h: HyperbolicDecomposition) -> tuple[float, float]:
    """Cylinder coordinates ``(phi, r)`` rebuilt from a hyperbolic decomposition."""
    m, _ = _half_turns(math.exp(-h.varphi) * h.rho)
    # x0 - x1 is positive for +e0 and -e1, negative for -e0 and +e1
    r_sign = 1.0 if h.sector in ("+e0", "-e1") else -1.0
    return _phase(m), r_sign * math.exp(h.varphi) * h.rho


def wind_r6_to_r3s3(p: R6Point) -> dict[tuple[int, int], tuple[CylinderPoint, Branch]]:
    """Wind every (Euclidean, anti-Euclidean) coordinate plane of R^6 onto a cylinder.

    Keys are zero-based axis pairs ``(k, q)`` with ``k`` in 0..2 and ``q`` in 3..5.
    """
    return {
        (k, q): wind_pseudoplane_to_cylinder(PseudoPlanePoint(p.x[k], p.x[q]))
        for k in range(3)
        for q in range(3, 6)
    }


def wind_minkowski_to_r3s1(e: MinkowskiEvent) -> MinkowskiWinding:
    """Wind Minkowski space onto R^3 x S^1.

    The timelike axis is paired with ``x1`` for the circle coordinate;
    ``r_p = x0 - x_p`` for each spatial axis.
    """
    x0 = e.x[0]
    cyl, branch = wind_pseudoplane_to_cylinder(PseudoPlanePoint(x0, e.x[1]))
    r = (x0 - e.x[1], x0 - e.x[2], x0 - e.x[3])
    return MinkowskiWinding(cyl.phi, r, branch)


def unwind_minkowski(w: MinkowskiWinding) -> MinkowskiEvent:
    plane = unwind_cylinder(CylinderPoint(w.phi, w.r[0]), w.branch)
    x0 = plane.x0
    return MinkowskiEvent((x0, plane.x1, x0 - w.r[1], x0 - w.r[2]))


def wind_pseudoplane_array(x0: np.ndarray, x1: np.ndarray):
    """Vectorised :func:`wind_pseudoplane_to_cylinder`.

    Returns ``(phi, r, turns, sign)`` arrays.
    """
    x0 = np.asarray(x0, dtype=float)
    x1 = np.asarray(x1, dtype=float)
    if not (np.all(np.isfinite(x0)) and np.all(np.isfinite(x1))):
        raise DomainError("non-finite coordinate")
    s = x0 + x1
    sign = np.where(s >= 0.0, 1, -1)
    a = np.abs(s)
    m = np.fmod(a, 2.0)
    turns = np.rint((a - m) / 2.0).astype(np.int64)
    phi = np.pi * m
    wrapped = phi >= TWO_PI
    phi = np.where(wrapped, 0.0, phi)
    turns = turns + wrapped
    return phi, x0 - x1, turns, sign


def unwind_cylinder_array(phi, r, turns, sign):
    s = sign * (np.asarray(phi) / np.pi + 2.0 * np.asarray(turns))
    return 0.5 * (s + r), 0.5 * (s - r)
