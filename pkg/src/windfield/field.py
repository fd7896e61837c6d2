"""Scalar potential of point features and the vector fields built from it.

A feature of strength ``mu`` at ``x_i`` contributes ``-mu / |x - x_i|``, the
spherically symmetric harmonic function that vanishes at infinity.  All
evaluators accept a single point of shape ``(3,)`` or a batch ``(..., 3)``.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Protocol

import numpy as np

from . import frames
from .errors import DirectionUndefinedError, DomainError, SingularityError

#: queries closer than this to a feature are rejected
EXCLUSION_RADIUS = 1e-9
GRADIENT_STEP = 1e-5
LAPLACIAN_STEP = 1e-3

E0 = np.array([1.0, 0.0, 0.0, 0.0])
E0.setflags(write=False)


class Potential(Protocol):
    """Anything with a scalar potential and its gradient on R^3."""

    def potential(self, x) -> np.ndarray | float: ...

    def gradient(self, x) -> np.ndarray: ...


@dataclass(frozen=True)
class PointFeature:
    position: tuple[float, float, float]
    mu: float = 1.0

    def __post_init__(self):
        pos = tuple(float(v) for v in self.position)
        if len(pos) != 3 or not all(math.isfinite(v) for v in pos):
            raise DomainError(f"feature position must be 3 finite numbers, got {self.position}")
        if not (math.isfinite(self.mu) and self.mu > 0.0):
            raise DomainError(f"feature strength must be positive, got {self.mu}")
        object.__setattr__(self, "position", pos)
        object.__setattr__(self, "mu", float(self.mu))


@dataclass(frozen=True, eq=False)
class FeatureSet:
    features: tuple[PointFeature, ...] = ()
    exclusion_radius: float = EXCLUSION_RADIUS
    _pos: np.ndarray = field(init=False, repr=False)
    _mu: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        feats = tuple(self.features)
        object.__setattr__(self, "features", feats)
        pos = np.array([f.position for f in feats], dtype=float).reshape(-1, 3)
        mu = np.array([f.mu for f in feats], dtype=float)
        if len(feats) > 1:
            sep = np.linalg.norm(pos[:, None, :] - pos[None, :, :], axis=-1)
            sep[np.diag_indices(len(feats))] = np.inf
            if sep.min() <= 1e-9:
                raise DomainError("feature positions must be pairwise distinct")
        pos.setflags(write=False)
        mu.setflags(write=False)
        object.__setattr__(self, "_pos", pos)
        object.__setattr__(self, "_mu", mu)

    def __len__(self):
        return len(self.features)

    @property
    def positions(self) -> np.ndarray:
        return self._pos

    @property
    def strengths(self) -> np.ndarray:
        return self._mu

    def union(self, other: FeatureSet) -> FeatureSet:
        return FeatureSet(self.features + other.features, self.exclusion_radius)

    # -- serialisation ---------------------------------------------------
    @classmethod
    def from_dict(cls, doc: dict) -> FeatureSet:
        try:
            items = doc["features"]
            feats = tuple(PointFeature(tuple(f["pos"]), f.get("mu", 1.0)) for f in items)
        except (KeyError, TypeError) as exc:
            raise DomainError(f"malformed feature document: {exc}") from exc
        return cls(feats)

    @classmethod
    def load(cls, path) -> FeatureSet:
        return cls.from_dict(json.loads(Path(path).read_text()))

    def to_dict(self) -> dict:
        return {"features": [{"pos": list(f.position), "mu": f.mu} for f in self.features]}

    # -- evaluation ------------------------------------------------------
    def _offsets(self, x) -> tuple[np.ndarray, np.ndarray]:
        x = np.asarray(x, dtype=float)
        if x.shape[-1] != 3:
            raise DomainError(f"points must have 3 coordinates, got shape {x.shape}")
        diff = x[..., None, :] - self._pos
        dist = np.linalg.norm(diff, axis=-1)
        if dist.size and dist.min() < self.exclusion_radius:
            raise SingularityError(
                f"point within {self.exclusion_radius:g} of a feature (distance {dist.min():.3g})"
            )
        return diff, dist

    def potential(self, x):
        diff, dist = self._offsets(x)
        out = -np.sum(self._mu / dist, axis=-1)
        return float(out) if out.ndim == 0 else out

    def gradient(self, x) -> np.ndarray:
        diff, dist = self._offsets(x)
        return np.sum((self._mu / dist**3)[..., None] * diff, axis=-2)

    def min_distance(self, x):
        if not len(self):
            return np.full(np.shape(x)[:-1], np.inf)
        return np.linalg.norm(np.asarray(x, float)[..., None, :] - self._pos, axis=-1).min(-1)


@dataclass(frozen=True)
class HarmonicWell:
    """Quadratic well ``k/2 |x - center|^2``; a test fixture with linear dynamics."""

    k: float = 1.0
    center: tuple[float, float, float] = (0.0, 0.0, 0.0)

    def potential(self, x):
        d = np.asarray(x, dtype=float) - np.asarray(self.center)
        out = 0.5 * self.k * np.sum(d * d, axis=-1)
        return float(out) if out.ndim == 0 else out

    def gradient(self, x) -> np.ndarray:
        return self.k * (np.asarray(x, dtype=float) - np.asarray(self.center))


@dataclass(frozen=True)
class FieldSample:
    phi: float
    grad: np.ndarray
    position: np.ndarray


def potential(fs: FeatureSet, x):
    return fs.potential(x)


def grad_potential(fs: FeatureSet, x) -> np.ndarray:
    return fs.gradient(x)


def sample(fs: FeatureSet, x) -> FieldSample:
    x = np.asarray(x, dtype=float)
    return FieldSample(fs.potential(x), fs.gradient(x), x)


def central_gradient(f: Callable, x, h: float = GRADIENT_STEP) -> np.ndarray:
    """Central-difference gradient of a scalar function of a 3-vector."""
    x = np.asarray(x, dtype=float)
    out = np.empty(3)
    for i in range(3):
        e = np.zeros(3)
        e[i] = h
        out[i] = (f(x + e) - f(x - e)) / (2.0 * h)
    return out


def laplacian(fs: Potential, x, h: float = LAPLACIAN_STEP):
    """Seven-point stencil Laplacian of the potential."""
    x = np.asarray(x, dtype=float)
    acc = -6.0 * np.asarray(fs.potential(x))
    for i in range(3):
        e = np.zeros(3)
        e[i] = h
        acc = acc + fs.potential(x + e) + fs.potential(x - e)
    out = acc / (h * h)
    return float(out) if np.ndim(out) == 0 else out


def unit_field(fs: FeatureSet, x, c=E0) -> np.ndarray:
    """Unit holonomy field: ``c`` boosted by ``|phi(x)|`` toward ``grad phi(x)``."""
    phi = float(fs.potential(x))
    if phi == 0.0:
        return np.array(c, dtype=float)
    grad = fs.gradient(x)
    norm = float(np.linalg.norm(grad))
    _, dist = fs._offsets(x)
    scale = float(np.sum(fs.strengths / dist**2))
    if norm <= 1e-14 * scale:
        raise DirectionUndefinedError(f"grad phi vanishes at {np.asarray(x).tolist()}")
    return frames.boost_toward(c, grad / norm, abs(phi))


def jacobian(vector_field: Callable, x, h: float = GRADIENT_STEP) -> np.ndarray:
    """``J[i, j] = d field_j / d x_i`` by central differences."""
    x = np.asarray(x, dtype=float)
    jac = np.empty((3, 3))
    for i in range(3):
        e = np.zeros(3)
        e[i] = h
        jac[i] = (np.asarray(vector_field(x + e)) - np.asarray(vector_field(x - e))) / (2.0 * h)
    return jac


def curl_residual(vector_field: Callable, x, h: float = GRADIENT_STEP) -> float:
    """``max |d_i g_j - d_j g_i|``; vanishes for gradient fields."""
    jac = jacobian(vector_field, x, h)
    return float(np.max(np.abs(jac - jac.T)))


def closedness_residual(fs: FeatureSet, x, h: float = GRADIENT_STEP) -> float:
    if not len(fs):
        return 0.0
    fs._offsets(x)
    return curl_residual(fs.gradient, x, h)
