"""Direction field on a discretised cylinder segment and the drift of its defects.

Each site carries the angle ``phi`` in ``[0, pi/2]`` between the unit field and
the cylinder element; ``sin(phi)`` is the local flux.  Defect sites are pinned
at ``phi = 0`` and wall sites at ``phi = pi/2``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from .errors import DomainError
from .stochastic import derive_seed

HALF_PI = 0.5 * math.pi
BOUNDARIES = ("periodic", "fixed")


@dataclass(frozen=True, eq=False)
class DirectionLattice:
    angles: np.ndarray
    dx: float = 1.0
    defects: tuple[int, ...] = ()
    walls: tuple[int, ...] = ()

    def __post_init__(self):
        a = np.array(self.angles, dtype=float)
        if a.ndim != 1 or len(a) < 1:
            raise DomainError("lattice angles must be a non-empty 1-D array")
        if np.any(a < 0.0) or np.any(a > HALF_PI) or not np.all(np.isfinite(a)):
            raise DomainError("lattice angles must lie in [0, pi/2]")
        if not self.dx > 0:
            raise DomainError("lattice spacing must be positive")
        defects = tuple(sorted(int(i) for i in self.defects))
        walls = tuple(sorted(int(i) for i in self.walls))
        pinned = defects + walls
        if len(set(pinned)) != len(pinned) or any(not 0 <= i < len(a) for i in pinned):
            raise DomainError("defect and wall sites must be distinct and in range")
        a[list(defects)] = 0.0
        a[list(walls)] = HALF_PI
        a.setflags(write=False)
        object.__setattr__(self, "angles", a)
        object.__setattr__(self, "defects", defects)
        object.__setattr__(self, "walls", walls)

    def __len__(self):
        return len(self.angles)

    @property
    def free(self) -> np.ndarray:
        mask = np.ones(len(self), dtype=bool)
        mask[list(self.defects + self.walls)] = False
        return mask

    def replace(self, angles=None, defects=None) -> DirectionLattice:
        return DirectionLattice(
            self.angles if angles is None else angles,
            self.dx,
            self.defects if defects is None else defects,
            self.walls,
        )


@dataclass(frozen=True)
class EvolutionConfig:
    dtau: float = 0.1
    steps: int = 100
    rate: float = 1.0
    noise: float = 0.0
    seed: int = 0
    stencil: int = 3
    boundary: str = "periodic"

    def __post_init__(self):
        if not (self.dtau > 0 and self.rate > 0):
            raise DomainError("dtau and rate must be positive")
        if not self.noise >= 0:
            raise DomainError("noise must be nonnegative")
        if int(self.steps) != self.steps or self.steps < 0:
            raise DomainError("steps must be a nonnegative integer")
        if int(self.stencil) != self.stencil or self.stencil < 1:
            raise DomainError("stencil must be a positive integer")
        if self.boundary not in BOUNDARIES:
            raise DomainError(f"boundary must be one of {BOUNDARIES}")


def initial_lattice(n: int, value: float, cfg: EvolutionConfig, defects=(), walls=(),
                    dx: float = 1.0) -> DirectionLattice:
    """Uniform lattice at ``value`` plus fluctuations drawn from ``[0, noise)``."""
    angles = np.full(int(n), float(value))
    if cfg.noise > 0:
        rng = np.random.default_rng(derive_seed(cfg.seed, "evolution"))
        angles = angles + rng.uniform(0.0, cfg.noise, int(n))
    return DirectionLattice(np.clip(angles, 0.0, HALF_PI), dx, tuple(defects), tuple(walls))


def flux_functional(l: DirectionLattice) -> float:
    """Instantaneous flux ``sum sin(phi) dx`` over non-defect sites."""
    keep = np.ones(len(l), dtype=bool)
    keep[list(l.defects)] = False
    return float(np.sum(np.sin(l.angles[keep])) * l.dx)


def evolve_step(l: DirectionLattice, cfg: EvolutionConfig) -> DirectionLattice:
    """One ascent step ``phi <- clamp(phi + rate cos(phi) dtau)`` on the free sites."""
    a = np.array(l.angles)
    free = l.free
    a[free] = np.clip(a[free] + cfg.rate * np.cos(a[free]) * cfg.dtau, 0.0, HALF_PI)
    return l.replace(angles=a)


def relax(l: DirectionLattice, cfg: EvolutionConfig, tol: float = 1e-6,
          max_steps: int = 1_000_000) -> tuple[DirectionLattice, int]:
    """Step until every free site is within ``tol`` of ``pi/2``; returns the step count."""
    free = l.free
    for k in range(max_steps + 1):
        if not np.any(free) or np.min(l.angles[free]) >= HALF_PI - tol:
            return l, k
        l = evolve_step(l, cfg)
    raise DomainError(f"lattice did not relax within {max_steps} steps")


class MergeEvent(NamedTuple):
    step: int
    site: int


@dataclass(frozen=True)
class DriftResult:
    positions: list[tuple[int, ...]]
    separations: list[tuple[int, ...]]
    flux: list[float]
    merges: list[MergeEvent] = field(default_factory=list)
    final: DirectionLattice | None = None


def _side_mean(a: np.ndarray, defect_mask: np.ndarray, wall_mask: np.ndarray,
               sites: np.ndarray, n: int, periodic: bool) -> float:
    # sites are ordered outward from the defect
    if periodic:
        sites = sites % n
        ghosts = 0
    else:
        inside = (sites >= 0) & (sites < n)
        ghosts = int(np.count_nonzero(~inside))  # past a fixed boundary phi = 0
        sites = sites[inside]
    vals = np.sin(a[sites])
    hit = np.flatnonzero(wall_mask[sites])
    if len(hit):
        # a wall hides whatever lies behind it
        vals[hit[0]:] = 1.0
        ghosts = 0
    vals = np.concatenate([vals[~defect_mask[sites]], np.zeros(ghosts)])
    return float(np.mean(vals)) if len(vals) else 0.0


def _gaps(pos: tuple[int, ...], n: int, periodic: bool) -> tuple[int, ...]:
    if len(pos) < 2:
        return ()
    gaps = [b - a for a, b in zip(pos, pos[1:])]
    if periodic:
        gaps.append(pos[0] + n - pos[-1])
        # the largest gap closes the ring the long way round
        gaps.remove(max(gaps))
    return tuple(gaps)


def _move_decisions(l: DirectionLattice, cfg: EvolutionConfig) -> list[int]:
    n = len(l)
    periodic = cfg.boundary == "periodic"
    a = l.angles
    defect_mask = np.zeros(n, dtype=bool)
    defect_mask[list(l.defects)] = True
    wall_mask = np.zeros(n, dtype=bool)
    wall_mask[list(l.walls)] = True
    offsets = np.arange(1, cfg.stencil + 1)
    moves = []
    for i in l.defects:
        left = _side_mean(a, defect_mask, wall_mask, i - offsets, n, periodic)
        right = _side_mean(a, defect_mask, wall_mask, i + offsets, n, periodic)
        if abs(left - right) <= 1e-15:
            step = 0
        else:
            step = 1 if right > left else -1
        target = i + step
        if periodic:
            target %= n
        elif not 0 <= target < n:
            step = 0
        if step and wall_mask[target]:
            step = 0
        moves.append(step)
    return moves


def _apply_moves(pos: list[int], moves: list[int], n: int, periodic: bool,
                 step_index: int) -> tuple[list[int], list[MergeEvent]]:
    new = [(p + m) % n if periodic else p + m for p, m in zip(pos, moves)]
    merges = []
    alive = [True] * len(pos)
    pairs = list(zip(range(len(pos) - 1), range(1, len(pos))))
    if periodic and len(pos) >= 2:
        pairs.append((len(pos) - 1, 0))
    for i, j in pairs:
        gap = (pos[j] - pos[i]) % n if periodic else pos[j] - pos[i]
        # defects with no free site between them are in contact
        if gap - moves[i] + moves[j] <= 1 and alive[i] and alive[j]:
            alive[j] = False
            if gap - moves[i] + moves[j] < 0:
                new[i] = min(new[i], new[j])
            merges.append(MergeEvent(step_index, new[i]))
    kept = sorted({p for p, ok in zip(new, alive) if ok})
    return kept, merges


def defect_drift(l: DirectionLattice, cfg: EvolutionConfig) -> DriftResult:
    """Relax the lattice and move each defect one site per step.

    A defect steps toward the side whose stencil of ``cfg.stencil`` sites has
    the larger mean ``sin(phi)``; equal sides hold.  The site it vacates
    restarts from ``phi = 0`` and relaxes again.  Defects left with no free
    site between them merge.
    """
    if len(l.defects) < 1:
        raise DomainError("defect drift needs at least one defect")
    n = len(l)
    periodic = cfg.boundary == "periodic"
    positions = [l.defects]
    separations = [_gaps(l.defects, n, periodic)]
    flux = [flux_functional(l)]
    merges: list[MergeEvent] = []
    for k in range(1, int(cfg.steps) + 1):
        l = evolve_step(l, cfg)
        moves = _move_decisions(l, cfg)
        pos, events = _apply_moves(list(l.defects), moves, n, periodic, k)
        merges.extend(events)
        l = l.replace(defects=tuple(pos))  # vacated sites keep their pinned 0
        positions.append(l.defects)
        separations.append(_gaps(l.defects, n, periodic))
        flux.append(flux_functional(l))
    return DriftResult(positions, separations, flux, merges, l)
