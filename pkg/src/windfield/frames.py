"""Frames in Minkowski space, their Gram matrices and the induced metric.

Vectors use signature (+, -, -, -).  A frame is stored as a 4x4 array whose
rows are the frame vectors, so the Gram matrix is ``F @ ETA @ F.T``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from . import geometry
from .errors import DegenerateNormError, DomainError, NotOrthonormalError, RangeError

ETA = np.diag([1.0, -1.0, -1.0, -1.0])
ETA.setflags(write=False)

#: frames whose component matrix has |det| below this are rejected as dependent
SINGULAR_TOL = 1e-12
#: max-abs deviation of a Gram matrix from ETA still accepted as orthonormal
ORTHONORMAL_TOL = 1e-9


def minkowski_inner(a, b):
    """Bilinear form ``a0*b0 - a1*b1 - ...``; broadcasts over leading axes."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    return a[..., 0] * b[..., 0] - np.sum(a[..., 1:] * b[..., 1:], axis=-1)


def minkowski_norm2(a):
    return minkowski_inner(a, a)


def _readonly(a: np.ndarray) -> np.ndarray:
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class Frame4:
    """Ordered frame ``(g0, g1, g2, g3)``; ``vectors[i]`` is the i-th vector."""

    vectors: np.ndarray

    def __post_init__(self):
        v = _readonly(self.vectors)
        if v.shape != (4, 4):
            raise DomainError(f"a frame needs four 4-vectors, got shape {v.shape}")
        if not np.all(np.isfinite(v)):
            raise RangeError("frame has non-finite components")
        if abs(np.linalg.det(v)) <= SINGULAR_TOL:
            raise DomainError("frame vectors are linearly dependent")
        object.__setattr__(self, "vectors", v)

    def __getitem__(self, i):
        return self.vectors[i]

    def is_orthonormal(self, tol: float = ORTHONORMAL_TOL) -> bool:
        return bool(np.max(np.abs(gram(self).entries - ETA)) <= tol)


def standard_frame() -> Frame4:
    return Frame4(np.eye(4))


@dataclass(frozen=True, eq=False)
class GramMatrix:
    entries: np.ndarray

    def __post_init__(self):
        e = _readonly(self.entries)
        if e.ndim != 2 or e.shape[0] != e.shape[1]:
            raise DomainError(f"Gram matrix must be square, got {e.shape}")
        object.__setattr__(self, "entries", e)

    def det(self) -> float:
        # LAPACK getrf: LU with partial pivoting
        return float(np.linalg.det(self.entries))


def gram_entries(vectors) -> np.ndarray:
    """Pairwise Minkowski inner products of the rows of ``vectors``.

    Works on stacks: ``vectors`` of shape ``(..., n, d)`` gives ``(..., n, n)``.
    """
    v = np.asarray(vectors, dtype=float)
    w = v.copy()
    w[..., 1:] *= -1.0
    return v @ np.swapaxes(w, -1, -2)


def gram(frame: Frame4) -> GramMatrix:
    return GramMatrix(gram_entries(frame.vectors))


def _require_orthonormal(frame: Frame4) -> None:
    if not frame.is_orthonormal():
        raise NotOrthonormalError("operation requires an orthonormal frame")


def boost_matrix(varphi: float, plane: tuple[int, int] = (0, 1)) -> np.ndarray:
    i, j = sorted(plane)
    if i != 0 or not 1 <= j <= 3:
        raise DomainError(f"a boost plane must pair axis 0 with a spatial axis, got {plane}")
    try:
        ch, sh = math.cosh(varphi), math.sinh(varphi)
    except OverflowError as exc:
        raise RangeError(f"boost by {varphi} overflows") from exc
    m = np.eye(4)
    m[0, 0] = m[j, j] = ch
    m[0, j] = m[j, 0] = sh
    return m


def hyperbolic_rotate(frame: Frame4, varphi: float, plane: tuple[int, int] = (0, 1)) -> Frame4:
    """Apply the boost of rapidity ``varphi`` in ``plane`` to every frame vector."""
    _require_orthonormal(frame)
    lam = boost_matrix(varphi, plane)
    # rows are vectors: v -> lam @ v, lam symmetric
    return Frame4(frame.vectors @ lam)


def deform_frame(frame: Frame4, varphi: float) -> Frame4:
    """Scale ``g0`` by ``exp(varphi)`` and ``g1`` by ``exp(-varphi)``."""
    _require_orthonormal(frame)
    try:
        up, down = math.exp(varphi), math.exp(-varphi)
    except OverflowError as exc:
        raise RangeError(f"exp({abs(varphi)}) overflows double range") from exc
    v = np.array(frame.vectors)
    v[0] *= up
    v[1] *= down
    if not np.all(np.isfinite(v)) or down == 0.0 or up == 0.0:
        raise RangeError(f"deformation by {varphi} leaves double range")
    return Frame4(v)


def boost_toward(c, direction, angle: float) -> np.ndarray:
    """Boost the unit timelike vector ``c`` by ``angle`` toward a spatial direction.

    ``direction`` is a 3-vector in the global Euclidean slice.  The unit
    spacelike vector orthogonal to ``c`` in that direction is built first, so
    the result has Minkowski norm 1 for any unit timelike ``c``.
    """
    c = np.asarray(c, dtype=float)
    n4 = np.concatenate(([0.0], np.asarray(direction, dtype=float)))
    m = n4 - minkowski_inner(n4, c) * c
    m2 = -minkowski_norm2(m)
    if not m2 > 0.0:
        raise DomainError("boost direction is not spacelike relative to c")
    m /= math.sqrt(m2)
    try:
        return math.cosh(angle) * c + math.sinh(angle) * m
    except OverflowError as exc:
        raise RangeError(f"boost by {angle} overflows") from exc


def _require_unit_timelike(v, name: str) -> None:
    n2 = float(minkowski_norm2(v))
    if not n2 > 0.0:
        raise DegenerateNormError(f"{name} is not timelike: (v, v) = {n2}")
    if abs(n2 - 1.0) > ORTHONORMAL_TOL * max(1.0, float(np.max(np.abs(v))) ** 2):
        raise DomainError(f"{name} is not a unit vector: (v, v) = {n2}")


def flux_density(g, c=(1.0, 0.0, 0.0, 0.0)) -> float:
    """Flux of the unit field ``g`` through the slice orthogonal to ``c``: ``(g, c)``."""
    _require_unit_timelike(g, "g")
    _require_unit_timelike(c, "c")
    return float(minkowski_inner(g, c))


def completed_basis(c) -> np.ndarray:
    """Orthonormal basis ``(c, c1, c2, c3)`` with ``c`` as its timelike leg.

    For ``c`` along the time axis this is the standard basis; otherwise it is
    the standard basis carried by the pure boost taking ``e0`` to ``c``.
    """
    c = np.asarray(c, dtype=float)
    _require_unit_timelike(c, "c")
    gamma = c[0]
    u = c[1:]
    lam = np.eye(4)
    lam[0, 0] = gamma
    lam[0, 1:] = u
    lam[1:, 0] = u
    lam[1:, 1:] += np.outer(u, u) / (1.0 + gamma)
    return lam.T.copy()


def flux_gram(g, c=(1.0, 0.0, 0.0, 0.0)) -> GramMatrix:
    """Gram matrix of the frame ``(g, c1, c2, c3)``."""
    basis = completed_basis(c)
    vectors = np.vstack([np.asarray(g, dtype=float), basis[1:]])
    return GramMatrix(gram_entries(vectors))


class FluxIdentity(NamedTuple):
    flux_squared: float
    abs_det: float


def flux_identity(g, c=(1.0, 0.0, 0.0, 0.0)) -> FluxIdentity:
    """Both sides of ``(g, c)**2 == |det G|`` for the frame ``(g, c1, c2, c3)``."""
    f = flux_density(g, c)
    return FluxIdentity(f * f, abs(flux_gram(g, c).det()))


@dataclass(frozen=True, eq=False)
class AdaptedMetric:
    """Diagonal metric ``exp(2 varphi) dt^2 - exp(-2 varphi) dr^2``."""

    components: np.ndarray
    varphi: float

    def __post_init__(self):
        comp = _readonly(self.components)
        object.__setattr__(self, "components", comp)
        if not (comp[0, 0] > 0.0 and comp[1, 1] < 0.0):
            raise DomainError("adapted metric must have signature (+, -)")

    @property
    def g_tt(self) -> float:
        return float(self.components[0, 0])

    @property
    def g_rr(self) -> float:
        return float(self.components[1, 1])

    def det(self) -> float:
        return self.g_tt * self.g_rr

    def full(self) -> np.ndarray:
        """4x4 form with the two transverse directions left flat."""
        return np.diag([self.g_tt, self.g_rr, -1.0, -1.0])


def induced_metric(varphi: float) -> AdaptedMetric:
    try:
        g_tt = math.exp(2.0 * varphi)
        g_rr = -math.exp(-2.0 * varphi)
    except OverflowError as exc:
        raise RangeError(f"exp(2 * {abs(varphi)}) overflows double range") from exc
    if g_tt == 0.0 or g_rr == 0.0:
        raise RangeError(f"exp(2 * {abs(varphi)}) underflows")
    return AdaptedMetric(np.diag([g_tt, g_rr]), float(varphi))


class ScaleRelations(NamedTuple):
    phase: tuple[float, float]  # winding phase of exp(varphi) g with sign +1, -1
    length: tuple[float, float]  # signed length of exp(-varphi) g1 with sign +1, -1


def scale_relations(g, g1, varphi: float) -> ScaleRelations:
    """Evaluate the winding-chart scale relations of a deformed frame.

    ``g`` and ``g1`` are an orthonormal pair of the (x0, x1) plane (2- or
    4-vectors; only the first two components are read).  The relations hold
    when both phases equal ``pi`` and each signed length equals its sign.
    """
    scale_up, scale_down = math.exp(varphi), math.exp(-varphi)
    gp = np.asarray(g, dtype=float)[:2] * scale_up
    g1p = np.asarray(g1, dtype=float)[:2] * scale_down
    rho_g = geometry.pseudo_length(gp[0], gp[1])
    rho_g1 = geometry.pseudo_length(g1p[0], g1p[1])
    phases = tuple(
        geometry.wind_line_to_circle(sign * scale_down * rho_g) for sign in (1, -1)
    )
    lengths = tuple(sign * scale_up * rho_g1 for sign in (1, -1))
    return ScaleRelations(phases, lengths)
