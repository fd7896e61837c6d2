"""Circular statistics and the free-passage random walk on the cylinder.

A real random variable ``x`` is compactified to ``exp(i pi x)``; its mean
``p exp(i pi alpha)`` is a :class:`ComplexAmplitude`.  The walk accumulates a
phase ``dphi = (pi / h) L dtau`` per passage and weighs each path by
``exp((-1 + i) sum dphi)``.
"""

from __future__ import annotations

import cmath
import hashlib
import math
from dataclasses import dataclass
from typing import Callable, NamedTuple, Sequence

import numpy as np
from scipy import integrate

from .errors import DomainError, InsufficientSampleError, NormalizationError

NORMALIZATION_TOL = 1e-9
SPEED_DISTRIBUTIONS = ("fixed", "maxwell")
BINNINGS = ("quantile", "uniform")


def derive_seed(seed: int, label: str) -> int:
    """64-bit child seed from a parent seed and a label."""
    digest = hashlib.sha256(f"{int(seed)}:{label}".encode()).digest()
    return int.from_bytes(digest[:8], "little")


def path_rng(seed: int, index: int) -> np.random.Generator:
    """Independent counter-based stream for path ``index`` of ensemble ``seed``."""
    if not (0 <= seed < 2**64 and 0 <= index < 2**64):
        raise DomainError("seed and path index must fit in 64 bits")
    return np.random.Generator(np.random.Philox(key=(int(seed) << 64) | int(index)))


# ---------------------------------------------------------------------------
# circular statistics


@dataclass(frozen=True)
class ComplexAmplitude:
    p: float
    alpha: float

    def __post_init__(self):
        if not (0.0 <= self.p <= 1.0 + 1e-12):
            raise DomainError(f"amplitude modulus must lie in [0, 1], got {self.p}")
        if not (0.0 <= self.alpha < 2.0):
            raise DomainError(f"phase coefficient must lie in [0, 2), got {self.alpha}")
        object.__setattr__(self, "p", min(float(self.p), 1.0))

    @classmethod
    def from_complex(cls, z: complex) -> ComplexAmplitude:
        p = abs(z)
        alpha = (cmath.phase(z) / math.pi) % 2.0 if p > 0 else 0.0
        if alpha >= 2.0:
            alpha = 0.0
        return cls(p, alpha)

    def __complex__(self):
        return self.p * cmath.exp(1j * math.pi * self.alpha)


@dataclass(frozen=True, eq=False)
class CircularDistribution:
    """Law of a real variable, read through ``exp(i pi x)``.

    Build instances with the class methods; ``kind`` is one of ``delta``,
    ``uniform_line``, ``uniform``, ``gaussian``, ``table`` or ``density``.
    """

    kind: str
    params: dict

    @classmethod
    def delta(cls, alpha: float) -> CircularDistribution:
        return cls("delta", {"alpha": float(alpha)})

    @classmethod
    def uniform_line(cls) -> CircularDistribution:
        """Uniform along the whole line; every turn is equally likely."""
        return cls("uniform_line", {})

    @classmethod
    def uniform(cls, a: float, b: float) -> CircularDistribution:
        if not b > a:
            raise DomainError("uniform interval needs b > a")
        return cls("uniform", {"a": float(a), "b": float(b)})

    @classmethod
    def gaussian(cls, mean: float, sigma: float) -> CircularDistribution:
        if not sigma > 0:
            raise DomainError("gaussian sigma must be positive")
        return cls("gaussian", {"mean": float(mean), "sigma": float(sigma)})

    @classmethod
    def table(cls, x: Sequence[float], density: Sequence[float]) -> CircularDistribution:
        """Piecewise-linear density through the nodes ``(x, density)``."""
        x = np.asarray(x, dtype=float)
        f = np.asarray(density, dtype=float)
        if x.ndim != 1 or x.shape != f.shape or len(x) < 2 or np.any(np.diff(x) <= 0):
            raise DomainError("density table needs increasing nodes and matching values")
        if np.any(f < 0) or not np.all(np.isfinite(f)):
            raise DomainError("density values must be finite and nonnegative")
        mass = float(np.sum(0.5 * (f[1:] + f[:-1]) * np.diff(x)))
        if abs(mass - 1.0) > NORMALIZATION_TOL:
            raise NormalizationError(f"density integrates to {mass!r}, not 1")
        return cls("table", {"x": x, "f": f})

    @classmethod
    def density(cls, f: Callable[[float], float], lo: float, hi: float) -> CircularDistribution:
        mass = integrate.quad(f, lo, hi, epsabs=1e-13, epsrel=1e-12, limit=200)[0]
        if abs(mass - 1.0) > NORMALIZATION_TOL:
            raise NormalizationError(f"density integrates to {mass!r}, not 1")
        return cls("density", {"f": f, "lo": float(lo), "hi": float(hi)})

    def sample(self, rng: np.random.Generator, n: int) -> np.ndarray:
        p = self.params
        if self.kind == "delta":
            return np.full(n, p["alpha"])
        if self.kind == "uniform_line":
            # one period carries the whole compactified law
            return rng.uniform(0.0, 2.0, n)
        if self.kind == "uniform":
            return rng.uniform(p["a"], p["b"], n)
        if self.kind == "gaussian":
            return rng.normal(p["mean"], p["sigma"], n)
        if self.kind == "table":
            return _sample_table(p["x"], p["f"], rng, n)
        raise DomainError(f"sampling is not available for {self.kind!r} distributions")


def _sample_table(x, f, rng, n):
    width = np.diff(x)
    mass = 0.5 * (f[1:] + f[:-1]) * width
    cdf = np.cumsum(mass)
    u = rng.uniform(0.0, cdf[-1], n)
    cell = np.minimum(np.searchsorted(cdf, u, side="right"), len(mass) - 1)
    w = (u - (cdf[cell] - mass[cell])) / width[cell]  # area into the cell per unit width
    f0, f1 = f[cell], f[cell + 1]
    slope = f1 - f0
    # solve f0 t + slope t^2 / 2 = w for t in [0, 1]
    with np.errstate(divide="ignore", invalid="ignore"):
        t = np.where(
            np.abs(slope) > 1e-14 * np.maximum(f0, f1),
            2.0 * w / (f0 + np.sqrt(np.maximum(f0 * f0 + 2.0 * slope * w, 0.0))),
            w / np.where(f0 > 0, f0, 1.0),
        )
    return x[cell] + np.clip(t, 0.0, 1.0) * width[cell]


def _table_expectation(x: np.ndarray, f: np.ndarray) -> complex:
    # exact integral of exp(i k x) against each linear piece
    k = math.pi
    e0 = np.exp(1j * k * x[:-1])
    e1 = np.exp(1j * k * x[1:])
    d = np.diff(x)
    base = (e1 - e0) / (1j * k)
    ramp = d * e1 / (1j * k) - (e1 - e0) / (1j * k) ** 2
    slope = np.diff(f) / d
    return complex(np.sum(f[:-1] * base + slope * ramp))


def circular_expectation(d: CircularDistribution) -> ComplexAmplitude:
    """``M(exp(i pi x))`` in closed form, or by quadrature for a density callable."""
    p = d.params
    if d.kind == "delta":
        return ComplexAmplitude(1.0, p["alpha"] % 2.0)
    if d.kind == "uniform_line":
        return ComplexAmplitude(0.0, 0.0)
    if d.kind == "uniform":
        a, b = p["a"], p["b"]
        z = (cmath.exp(1j * math.pi * b) - cmath.exp(1j * math.pi * a)) / (1j * math.pi * (b - a))
        return ComplexAmplitude.from_complex(z)
    if d.kind == "gaussian":
        p_mod = math.exp(-0.5 * (math.pi * p["sigma"]) ** 2)
        return ComplexAmplitude(p_mod, p["mean"] % 2.0)
    if d.kind == "table":
        return ComplexAmplitude.from_complex(_table_expectation(p["x"], p["f"]))
    if d.kind == "density":
        f, lo, hi = p["f"], p["lo"], p["hi"]
        opts = dict(epsabs=1e-13, epsrel=1e-12, limit=200)
        re = integrate.quad(lambda x: f(x) * math.cos(math.pi * x), lo, hi, **opts)[0]
        im = integrate.quad(lambda x: f(x) * math.sin(math.pi * x), lo, hi, **opts)[0]
        return ComplexAmplitude.from_complex(complex(re, im))
    raise DomainError(f"unknown distribution kind {d.kind!r}")


class SampleEstimate(NamedTuple):
    mean: complex
    stderr: float
    n: int

    @property
    def modulus(self) -> float:
        return abs(self.mean)


def sample_expectation(values) -> SampleEstimate:
    """Monte Carlo mean of ``exp(i pi x)`` over samples with its standard error."""
    x = np.asarray(values, dtype=float)
    if len(x) < 2:
        raise InsufficientSampleError("need at least two samples")
    z = np.exp(1j * math.pi * x)
    return SampleEstimate(complex(np.mean(z)), _complex_stderr(z), len(x))


def _complex_stderr(z: np.ndarray) -> float:
    if len(z) < 2:
        return math.nan
    var = np.var(z.real, ddof=1) + np.var(z.imag, ddof=1)
    return float(math.sqrt(var / len(z)))


def phase_rate(c_magnitude: float, h: float) -> float:
    """Angular velocity ``pi |c| / h`` of winding around a turn of length ``h``."""
    if not h > 0:
        raise DomainError(f"turn length must be positive, got {h}")
    return math.pi * c_magnitude / h


# ---------------------------------------------------------------------------
# Lagrangian fixtures, evaluated row-wise on arrays of shape (n, 3)


@dataclass(frozen=True)
class ConstantLagrangian:
    value: float = 1.0

    def __call__(self, x, v):
        return np.full(np.shape(x)[0], self.value)


@dataclass(frozen=True)
class FreeLagrangian:
    offset: float = 0.0

    def __call__(self, x, v):
        return 0.5 * np.sum(v * v, axis=-1) + self.offset


@dataclass(frozen=True)
class HarmonicLagrangian:
    """``|v|^2 / 2 - k |x|^2 / 2 + offset``; the offset keeps it nonnegative near the origin."""

    k: float = 1.0
    offset: float = 0.0

    def __call__(self, x, v):
        return 0.5 * np.sum(v * v, axis=-1) - 0.5 * self.k * np.sum(x * x, axis=-1) + self.offset


@dataclass(frozen=True)
class NewtonianLagrangian:
    features: object
    offset: float = 0.0

    def __call__(self, x, v):
        return 0.5 * np.sum(v * v, axis=-1) - self.features.potential(x) + self.offset


def lagrangian_from_dict(doc: dict):
    kind = doc.get("kind", "free")
    params = dict(doc.get("params", {}))
    if kind == "constant":
        return ConstantLagrangian(**params)
    if kind == "free":
        return FreeLagrangian(**params)
    if kind == "harmonic":
        return HarmonicLagrangian(**params)
    if kind == "newtonian":
        from .field import FeatureSet

        feats = FeatureSet.from_dict({"features": params.pop("features")})
        return NewtonianLagrangian(feats, **params)
    raise DomainError(f"unknown lagrangian kind {kind!r}")


# ---------------------------------------------------------------------------
# the walk


@dataclass(frozen=True)
class WalkConfig:
    h: float
    T: float
    mean_passage: float
    paths: int
    seed: int = 0
    speed: float = 1.0
    speed_distribution: str = "fixed"
    start: tuple[float, float, float] = (0.0, 0.0, 0.0)
    endpoint_center: tuple[float, float, float] | None = None
    endpoint_radius: float | None = None

    def __post_init__(self):
        for name in ("h", "T", "mean_passage", "speed"):
            v = getattr(self, name)
            if not (math.isfinite(v) and v > 0):
                raise DomainError(f"{name} must be positive, got {v}")
        if int(self.paths) != self.paths or self.paths < 1:
            raise DomainError(f"paths must be a positive integer, got {self.paths}")
        if not 0 <= int(self.seed) < 2**64:
            raise DomainError("seed must be an unsigned 64-bit integer")
        if self.speed_distribution not in SPEED_DISTRIBUTIONS:
            raise DomainError(f"speed_distribution must be one of {SPEED_DISTRIBUTIONS}")
        if (self.endpoint_center is None) != (self.endpoint_radius is None):
            raise DomainError("endpoint center and radius must be given together")
        if self.endpoint_radius is not None and not self.endpoint_radius > 0:
            raise DomainError("endpoint radius must be positive")
        object.__setattr__(self, "start", tuple(float(v) for v in self.start))
        if self.endpoint_center is not None:
            object.__setattr__(self, "endpoint_center", tuple(float(v) for v in self.endpoint_center))


@dataclass(frozen=True, eq=False)
class WalkPath:
    start: np.ndarray
    durations: np.ndarray
    steps: np.ndarray
    lagrangian: np.ndarray
    phase_increments: np.ndarray

    @property
    def positions(self) -> np.ndarray:
        return self.start + np.vstack([np.zeros(3), np.cumsum(self.steps, axis=0)])

    @property
    def endpoint(self) -> np.ndarray:
        return self.start + np.sum(self.steps, axis=0)

    @property
    def action(self) -> float:
        return float(np.sum(self.lagrangian * self.durations))

    @property
    def total_phase(self) -> float:
        return float(np.sum(self.phase_increments))

    def concatenate(self, other: WalkPath) -> WalkPath:
        return WalkPath(
            self.start,
            np.concatenate([self.durations, other.durations]),
            np.concatenate([self.steps, other.steps]),
            np.concatenate([self.lagrangian, other.lagrangian]),
            np.concatenate([self.phase_increments, other.phase_increments]),
        )


def _durations(rng: np.random.Generator, mean: float, total: float) -> np.ndarray:
    batch = int(2.0 * total / mean) + 8
    parts = []
    elapsed = 0.0
    while True:
        d = rng.exponential(mean, batch)
        c = elapsed + np.cumsum(d)
        stop = int(np.searchsorted(c, total, side="left"))
        if stop < batch:
            parts.append(d[:stop])
            break
        parts.append(d)
        elapsed = float(c[-1])
    d = np.concatenate(parts)
    last = total - float(np.sum(d))
    if last <= 0.0:  # rounding can leave the final sum a hair past T
        last = total - float(np.sum(d[:-1]))
        d = d[:-1]
    return np.append(d, last)


def sample_walk(cfg: WalkConfig, lagrangian: Callable, index: int = 0) -> WalkPath:
    """Draw path ``index`` of the ensemble defined by ``cfg``.

    Passage durations are exponential with mean ``mean_passage``; the last one
    is cut so the durations sum to ``T``.  Each passage moves in a straight
    line with an isotropic velocity: fixed speed, or Maxwellian with
    per-component scale ``speed``.  The Lagrangian is read at the passage
    midpoint.
    """
    rng = path_rng(cfg.seed, index)
    dt = _durations(rng, cfg.mean_passage, cfg.T)
    g = rng.standard_normal((len(dt), 3))
    if cfg.speed_distribution == "fixed":
        v = cfg.speed * g / np.linalg.norm(g, axis=1, keepdims=True)
    else:
        v = cfg.speed * g
    steps = v * dt[:, None]
    start = np.asarray(cfg.start, dtype=float)
    before = start + np.vstack([np.zeros(3), np.cumsum(steps, axis=0)[:-1]])
    lag = np.asarray(lagrangian(before + 0.5 * steps, v), dtype=float)
    return WalkPath(start, dt, steps, lag, (math.pi / cfg.h) * lag * dt)


def path_amplitude(path: WalkPath) -> complex:
    """``prod exp(-dphi) exp(i dphi)`` over the passages of ``path``."""
    s = path.total_phase
    return cmath.exp(complex(-s, s))


@dataclass(frozen=True, eq=False)
class Ensemble:
    total_phase: np.ndarray
    action: np.ndarray
    endpoint: np.ndarray
    negative_increments: int
    seed: int

    def __len__(self):
        return len(self.total_phase)

    def control_phase(self) -> np.ndarray:
        """Independent uniform phases, one per path, for the null control."""
        s = derive_seed(self.seed, "control")
        return np.array([path_rng(s, i).uniform(0.0, 2.0 * math.pi) for i in range(len(self))])


def sample_ensemble(cfg: WalkConfig, lagrangian: Callable) -> Ensemble:
    n = int(cfg.paths)
    phase = np.empty(n)
    action = np.empty(n)
    end = np.empty((n, 3))
    negative = 0
    for i in range(n):
        path = sample_walk(cfg, lagrangian, i)
        phase[i] = path.total_phase
        action[i] = path.action
        end[i] = path.endpoint
        negative += int(np.count_nonzero(path.phase_increments < 0))
    return Ensemble(phase, action, end, negative, int(cfg.seed))


def _endpoint_mask(cfg: WalkConfig, ens: Ensemble) -> np.ndarray:
    if cfg.endpoint_center is None:
        return np.ones(len(ens), dtype=bool)
    d = np.linalg.norm(ens.endpoint - np.asarray(cfg.endpoint_center), axis=1)
    return d <= cfg.endpoint_radius


@dataclass(frozen=True)
class AmplitudeSummary:
    """Ensemble mean of path amplitudes.

    ``total`` is the unnormalised sum, ``mean`` the per-path mean.  Both can
    underflow for large phases, so ``log_modulus`` is kept separately.
    """

    mean: complex
    total: complex
    stderr: float
    paths: int
    log_modulus: float
    negative_increments: int

    @property
    def modulus(self) -> float:
        return abs(self.mean)

    @property
    def phase(self) -> float:
        return cmath.phase(self.mean) % (2.0 * math.pi) if self.mean != 0 else 0.0

    @property
    def amplitude(self) -> ComplexAmplitude:
        return ComplexAmplitude.from_complex(self.mean)


def _scaled_amplitudes(phase: np.ndarray, ref: float) -> np.ndarray:
    return np.exp((-1.0 + 1.0j) * (phase - ref))


def amplitude_sum(cfg: WalkConfig, lagrangian: Callable, endpoint_filter: bool = True,
                  control: bool = False, ensemble: Ensemble | None = None) -> AmplitudeSummary:
    """Monte Carlo mean of :func:`path_amplitude` over the walk ensemble.

    With ``control`` every path amplitude is replaced by an independent
    uniform unit phase.
    """
    ens = sample_ensemble(cfg, lagrangian) if ensemble is None else ensemble
    keep = _endpoint_mask(cfg, ens) if endpoint_filter else np.ones(len(ens), dtype=bool)
    n = int(np.count_nonzero(keep))
    if n == 0:
        raise InsufficientSampleError("no path reached the endpoint ball")
    if control:
        z = np.exp(1j * ens.control_phase()[keep])
        ref = 0.0
    else:
        phase = ens.total_phase[keep]
        ref = float(np.min(phase))
        z = _scaled_amplitudes(phase, ref)
    scaled_mean = complex(np.sum(z)) / n  # np.sum reduces pairwise
    factor = cmath.exp(complex(-ref, ref))
    mean = scaled_mean * factor
    log_mod = math.log(abs(scaled_mean)) - ref if scaled_mean != 0 else -math.inf
    return AmplitudeSummary(
        mean, mean * n, _complex_stderr(z) * math.exp(-ref), n, log_mod, ens.negative_increments
    )


class HistogramRow(NamedTuple):
    bin_lo: float
    bin_hi: float
    modulus_sum: float
    count: int


@dataclass(frozen=True)
class ActionHistogram:
    """Per-bin summed amplitudes; moduli are scaled by ``exp(log_scale)``."""

    rows: tuple[HistogramRow, ...]
    log_scale: float
    reference_bin: int | None

    @property
    def peak_bin(self) -> int:
        return int(np.argmax([r.modulus_sum for r in self.rows]))

    @property
    def moduli(self) -> np.ndarray:
        return np.array([r.modulus_sum for r in self.rows])


def _edges(actions: np.ndarray, bins: int, binning: str, reference: float | None) -> np.ndarray:
    lo, hi = float(actions.min()), float(actions.max())
    if reference is not None:
        lo, hi = min(lo, reference), max(hi, reference)
    if binning == "quantile":
        edges = np.quantile(actions, np.linspace(0.0, 1.0, bins + 1))
        edges[0], edges[-1] = lo, hi
        return np.unique(edges)
    return np.linspace(lo, hi, bins + 1)


def _bin_index(edges: np.ndarray, values):
    idx = np.searchsorted(edges, values, side="right") - 1
    return np.clip(idx, 0, len(edges) - 2)


def action_histogram(cfg: WalkConfig, lagrangian: Callable, bins: int = 10,
                     binning: str = "quantile", reference_action: float | None = None,
                     control: bool = False, ensemble: Ensemble | None = None) -> ActionHistogram:
    """Bin endpoint-filtered paths by action and sum their amplitudes per bin.

    ``quantile`` bins hold equal path counts; ``uniform`` bins have equal
    width.  ``reference_action`` (for instance the classical action) is kept
    inside the binned range and its bin reported.  If all actions coincide
    the table has a single degenerate bin.
    """
    if bins < 1:
        raise DomainError("bins must be at least 1")
    if binning not in BINNINGS:
        raise DomainError(f"binning must be one of {BINNINGS}")
    ens = sample_ensemble(cfg, lagrangian) if ensemble is None else ensemble
    keep = _endpoint_mask(cfg, ens)
    if not np.any(keep):
        raise InsufficientSampleError("no path reached the endpoint ball")
    action = ens.action[keep]
    phase = ens.total_phase[keep]
    if control:
        z, ref = np.exp(1j * ens.control_phase()[keep]), 0.0
    else:
        ref = float(np.min(phase))
        if reference_action is not None:
            ref = min(ref, math.pi / cfg.h * reference_action)
        z = _scaled_amplitudes(phase, ref)
    lo, hi = float(action.min()), float(action.max())
    spread = max(hi, reference_action if reference_action is not None else hi) - min(
        lo, reference_action if reference_action is not None else lo
    )
    if spread <= 1e-12 * max(1.0, abs(hi)):
        row = HistogramRow(lo, hi, float(abs(np.sum(z))), len(z))
        return ActionHistogram((row,), -ref, 0 if reference_action is not None else None)
    edges = _edges(action, bins, binning, reference_action)
    idx = _bin_index(edges, action)
    rows = []
    for j in range(len(edges) - 1):
        sel = idx == j
        rows.append(HistogramRow(float(edges[j]), float(edges[j + 1]),
                                 float(abs(np.sum(z[sel]))), int(np.count_nonzero(sel))))
    ref_bin = None if reference_action is None else int(_bin_index(edges, reference_action))
    return ActionHistogram(tuple(rows), -ref, ref_bin)


def harmonic_classical_action(k: float, start, end, T: float, offset: float = 0.0,
                              steps: int = 4000) -> float:
    """Action of the classical path between fixed endpoints in ``k |x|^2 / 2``.

    The path is found by linear shooting with the leapfrog integrator and its
    action taken from the discrete Lagrangian sum.
    """
    from .dynamics import IntegratorConfig, StateEuclid, integrate_newtonian, lagrangian_action
    from .field import HarmonicWell

    well = HarmonicWell(k)
    cfg = IntegratorConfig(T / steps, steps)
    x0 = np.asarray(start, dtype=float)
    target = np.asarray(end, dtype=float)

    def land(v0):
        return integrate_newtonian(well, StateEuclid(tuple(x0), tuple(v0)), cfg)

    base = land(np.zeros(3))
    cols = [land(np.eye(3)[i]).position[-1] - base.position[-1] for i in range(3)]
    v0 = np.linalg.solve(np.column_stack(cols), target - base.position[-1])
    path = land(v0)
    return lagrangian_action(well, path.position, cfg.dt) + offset * T
