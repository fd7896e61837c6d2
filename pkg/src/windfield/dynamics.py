"""Feature trajectories, the radial weak-field geodesic and discretised actions.

Accelerations follow the gravitational convention: with ``phi = -mu/r`` a
feature is pulled toward the source, ``xi'' = -grad phi``, and the conserved
energy is ``|xi'|^2 / 2 + phi(xi)``.  No integrator takes a mass argument.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, NamedTuple

import numpy as np

from . import frames
from .errors import (
    CaptureError,
    DegenerateGramError,
    DirectionUndefinedError,
    DomainError,
    IdentityViolation,
    RangeError,
    SingularityError,
)
from .field import E0, FeatureSet, Potential, unit_field

SCHEMES = ("leapfrog", "rk4")


@dataclass(frozen=True)
class StateEuclid:
    xi: tuple[float, float, float]
    xidot: tuple[float, float, float]
    tau: float = 0.0

    def __post_init__(self):
        xi = tuple(float(v) for v in self.xi)
        xidot = tuple(float(v) for v in self.xidot)
        if len(xi) != 3 or len(xidot) != 3:
            raise DomainError("state needs a 3-vector position and velocity")
        if not all(math.isfinite(v) for v in xi + xidot + (self.tau,)):
            raise DomainError("state must be finite")
        object.__setattr__(self, "xi", xi)
        object.__setattr__(self, "xidot", xidot)


@dataclass(frozen=True)
class IntegratorConfig:
    dt: float
    steps: int
    scheme: str = "leapfrog"

    def __post_init__(self):
        if not (math.isfinite(self.dt) and self.dt > 0):
            raise DomainError(f"dt must be positive, got {self.dt}")
        if int(self.steps) != self.steps or self.steps < 1:
            raise DomainError(f"steps must be a positive integer, got {self.steps}")
        if self.scheme not in SCHEMES:
            raise DomainError(f"scheme must be one of {SCHEMES}, got {self.scheme!r}")


@dataclass(frozen=True, eq=False)
class Trajectory:
    """Uniformly sampled states; ``energy`` is filled by integrators that have one."""

    tau: np.ndarray
    position: np.ndarray
    velocity: np.ndarray
    dt: float
    energy: np.ndarray | None = None

    def __len__(self):
        return len(self.tau)

    @property
    def duration(self) -> float:
        return float(self.tau[-1] - self.tau[0])

    def reversed(self) -> Trajectory:
        """Same path traversed backwards over the same parameter interval."""
        return Trajectory(
            self.tau.copy(),
            self.position[::-1].copy(),
            -self.velocity[::-1],
            self.dt,
            None if self.energy is None else self.energy[::-1].copy(),
        )


@dataclass(frozen=True)
class GridRegion:
    """Axis-aligned box split into ``resolution`` cells per axis."""

    bounds: tuple[tuple[float, float], ...]
    resolution: tuple[int, ...]

    def __post_init__(self):
        bounds = tuple((float(lo), float(hi)) for lo, hi in self.bounds)
        res = tuple(int(n) for n in self.resolution)
        if len(bounds) != len(res):
            raise DomainError("bounds and resolution must have the same length")
        if any(hi <= lo for lo, hi in bounds) or any(n < 1 for n in res):
            raise DomainError("region needs positive extents and resolutions")
        object.__setattr__(self, "bounds", bounds)
        object.__setattr__(self, "resolution", res)

    @property
    def ndim(self) -> int:
        return len(self.bounds)

    @property
    def spacing(self) -> tuple[float, ...]:
        return tuple((hi - lo) / n for (lo, hi), n in zip(self.bounds, self.resolution))

    @property
    def cell_volume(self) -> float:
        return float(np.prod(self.spacing))

    @property
    def volume(self) -> float:
        return float(np.prod([hi - lo for lo, hi in self.bounds]))

    def midpoints(self) -> list[np.ndarray]:
        return [
            lo + (np.arange(n) + 0.5) * h
            for (lo, _), n, h in zip(self.bounds, self.resolution, self.spacing)
        ]

    def refined(self, factor: int = 2) -> GridRegion:
        return GridRegion(self.bounds, tuple(n * factor for n in self.resolution))

    def scaled(self, axis: int, factor: float) -> GridRegion:
        bounds = list(self.bounds)
        lo, hi = bounds[axis]
        bounds[axis] = (lo, lo + factor * (hi - lo))
        return GridRegion(tuple(bounds), self.resolution)


# ---------------------------------------------------------------------------
# integrators

Acceleration = Callable[[np.ndarray, np.ndarray], np.ndarray]


def _integrate(acc: Acceleration, x0, v0, cfg: IntegratorConfig, tau0: float = 0.0,
               check: Callable[[np.ndarray, int], None] | None = None):
    n, dt = int(cfg.steps), cfg.dt
    x = np.array(x0, dtype=float)
    v = np.array(v0, dtype=float)
    pos = np.empty((n + 1, x.size))
    vel = np.empty((n + 1, x.size))
    pos[0], vel[0] = x, v
    if cfg.scheme == "leapfrog":
        # kick-drift-kick; a velocity-dependent force sees the half-step velocity
        a = acc(x, v)
        for k in range(n):
            vh = v + 0.5 * dt * a
            x = x + dt * vh
            if check is not None:
                check(x, k + 1)
            a = acc(x, vh)
            v = vh + 0.5 * dt * a
            pos[k + 1], vel[k + 1] = x, v
    else:
        for k in range(n):
            a1 = acc(x, v)
            x2, v2 = x + 0.5 * dt * v, v + 0.5 * dt * a1
            a2 = acc(x2, v2)
            x3, v3 = x + 0.5 * dt * v2, v + 0.5 * dt * a2
            a3 = acc(x3, v3)
            x4, v4 = x + dt * v3, v + dt * a3
            a4 = acc(x4, v4)
            x = x + dt / 6.0 * (v + 2.0 * v2 + 2.0 * v3 + v4)
            v = v + dt / 6.0 * (a1 + 2.0 * a2 + 2.0 * a3 + a4)
            if check is not None:
                check(x, k + 1)
            pos[k + 1], vel[k + 1] = x, v
    if not (np.all(np.isfinite(pos)) and np.all(np.isfinite(vel))):
        raise RangeError("integration left double range")
    tau = tau0 + dt * np.arange(n + 1)
    return tau, pos, vel


def _capture_guard(field, radius: float | None):
    if not isinstance(field, FeatureSet) or not len(field):
        return None
    radius = field.exclusion_radius if radius is None else radius

    def check(x, step):
        d = float(field.min_distance(x[-3:]))
        if d < radius:
            raise CaptureError(f"trajectory captured at step {step} (distance {d:.3g})")

    return check


def integrate_newtonian(field: Potential, s0: StateEuclid, cfg: IntegratorConfig,
                        capture_radius: float | None = None) -> Trajectory:
    """Integrate ``xi'' = -grad phi(xi)`` from ``s0``.

    ``field`` is a :class:`~windfield.field.FeatureSet` or any object with
    ``potential`` and ``gradient``.  Entering ``capture_radius`` of a feature
    (default: its exclusion radius) raises :class:`CaptureError`.
    """
    check = _capture_guard(field, capture_radius)
    if check is not None:
        check(np.asarray(s0.xi), 0)

    def acc(x, v):
        try:
            return -np.asarray(field.gradient(x))
        except SingularityError as exc:
            raise CaptureError(str(exc)) from exc

    tau, pos, vel = _integrate(acc, s0.xi, s0.xidot, cfg, s0.tau, check)
    energy = 0.5 * np.sum(vel * vel, axis=1) + np.asarray(field.potential(pos))
    return Trajectory(tau, pos, vel, cfg.dt, energy)


def integrate_minkowski(fs: FeatureSet, X0, V0, cfg: IntegratorConfig, c=E0,
                        capture_radius: float | None = None) -> Trajectory:
    """Integrate ``X'' = g(X)`` in the global chart with ``g`` the unit holonomy field.

    The field is static: it depends on the spatial part ``X[1:]`` only.
    """
    x0 = np.asarray(getattr(X0, "x", X0), dtype=float)
    v0 = np.asarray(V0, dtype=float)
    if x0.shape != (4,) or v0.shape != (4,) or not np.all(np.isfinite(v0)):
        raise DomainError("initial event and velocity must be finite 4-vectors")
    check = _capture_guard(fs, capture_radius)
    if check is not None:
        check(x0, 0)
    c = np.asarray(c, dtype=float)

    def acc(x, v):
        try:
            return unit_field(fs, x[1:], c)
        except DirectionUndefinedError:
            raise
        except SingularityError as exc:
            raise CaptureError(str(exc)) from exc

    tau, pos, vel = _integrate(acc, x0, v0, cfg, 0.0, check)
    return Trajectory(tau, pos, vel, cfg.dt)


class RadialProfile(NamedTuple):
    phi: Callable[[float], float]
    dphi: Callable[[float], float]


def point_mass_profile(mu: float) -> RadialProfile:
    return RadialProfile(lambda r: -mu / r, lambda r: mu / (r * r))


def _numeric_derivative(f: Callable[[float], float]) -> Callable[[float], float]:
    def df(r):
        h = 1e-6 * max(1.0, abs(r))
        return (f(r + h) - f(r - h)) / (2.0 * h)

    return df


def geodesic_weakfield(phi_of_r, r0: float, rdot0: float, cfg: IntegratorConfig,
                       dphi_dr: Callable[[float], float] | None = None,
                       capture_radius: float = 1e-9) -> Trajectory:
    """Radial geodesic of ``exp(2 phi) dt^2 - exp(-2 phi) dr^2`` in coordinate time.

    With ``Gamma^t_tr = phi'``, ``Gamma^r_tt = phi' exp(4 phi)`` and
    ``Gamma^r_rr = -phi'`` the coordinate acceleration is
    ``r'' = -phi'(r) (exp(4 phi) - 3 r'^2)``, which tends to ``-phi'`` for weak,
    slow fields.  ``phi_of_r`` may be a :class:`RadialProfile`.
    """
    if isinstance(phi_of_r, RadialProfile):
        phi, dphi = phi_of_r
    else:
        phi = phi_of_r
        dphi = dphi_dr if dphi_dr is not None else _numeric_derivative(phi_of_r)

    def acc(x, v):
        r = float(x[0])
        if r <= capture_radius:
            raise CaptureError(f"radial geodesic reached r = {r:.3g}")
        return np.array([-dphi(r) * (math.exp(4.0 * phi(r)) - 3.0 * float(v[0]) ** 2)])

    def check(x, step):
        if x[0] <= capture_radius:
            raise CaptureError(f"radial geodesic reached r = {x[0]:.3g} at step {step}")

    tau, pos, vel = _integrate(acc, [r0], [rdot0], cfg, 0.0, check)
    return Trajectory(tau, pos, vel, cfg.dt)


def coordinate_acceleration(phi_of_r: RadialProfile, r: float, rdot: float = 0.0) -> float:
    phi, dphi = phi_of_r
    return -dphi(r) * (math.exp(4.0 * phi(r)) - 3.0 * rdot * rdot)


class RadialComparison(NamedTuple):
    t: np.ndarray
    r_newton: np.ndarray
    r_geodesic: np.ndarray

    @property
    def track_error(self) -> float:
        """Largest relative difference of the two radial tracks."""
        return float(np.max(np.abs(self.r_geodesic - self.r_newton) / self.r_newton))

    @property
    def fall_error(self) -> float:
        """Relative difference of the distance fallen by the end of the run."""
        fall_n = self.r_newton[0] - self.r_newton[-1]
        fall_g = self.r_geodesic[0] - self.r_geodesic[-1]
        return float(abs(fall_g - fall_n) / abs(fall_n))


def dynamical_time(mu: float, r0: float) -> float:
    return math.sqrt(r0**3 / mu)


def radial_fall_comparison(mu: float, r0: float = 1.0, duration: float = 1.0,
                           steps: int = 10_000, scheme: str = "rk4") -> RadialComparison:
    """Drop a feature from rest at ``r0`` under both dynamics.

    ``duration`` is in units of the dynamical time ``sqrt(r0^3 / mu)``.  The
    Newtonian track comes from :func:`integrate_newtonian` on a single point
    feature, the other from :func:`geodesic_weakfield`.
    """
    t_end = duration * dynamical_time(mu, r0)
    cfg = IntegratorConfig(t_end / steps, steps, scheme)
    from .field import PointFeature

    fs = FeatureSet((PointFeature((0.0, 0.0, 0.0), mu),))
    newton = integrate_newtonian(fs, StateEuclid((r0, 0.0, 0.0), (0.0, 0.0, 0.0)), cfg)
    geo = geodesic_weakfield(point_mass_profile(mu), r0, 0.0, cfg)
    return RadialComparison(newton.tau, np.linalg.norm(newton.position, axis=1), geo.position[:, 0])


# ---------------------------------------------------------------------------
# actions


def _trapezoid(values: np.ndarray, dt: float) -> float:
    if len(values) < 2:
        return 0.0
    return float(dt * (np.sum(values[1:-1]) + 0.5 * (values[0] + values[-1])))


def action_line(fs: FeatureSet, traj: Trajectory, c=E0) -> float:
    """Trapezoidal ``integral (g(X), X') dtau`` along a Minkowski trajectory."""
    if traj.position.shape[1] != 4:
        raise DomainError("action_line needs a trajectory in Minkowski space")
    c = np.asarray(c, dtype=float)
    g = np.array([unit_field(fs, x[1:], c) for x in traj.position])
    return _trapezoid(frames.minkowski_inner(g, traj.velocity), traj.dt)


def lagrangian_action(field: Potential, positions, dt: float, offset: float = 0.0) -> float:
    """Discrete action of ``L = |v|^2/2 - phi(x) + offset`` on a sampled path.

    Each step uses ``dt * (|dx/dt|^2 / 2 - (phi_k + phi_{k+1}) / 2)``.  The
    leapfrog position recursion is exactly the stationarity condition of this
    sum, so leapfrog paths are its discrete critical points.
    """
    q = np.asarray(positions, dtype=float)
    dq = np.diff(q, axis=0) / dt
    phi = np.asarray(field.potential(q), dtype=float)
    kinetic = 0.5 * np.sum(dq * dq, axis=1)
    potential = 0.5 * (phi[1:] + phi[:-1])
    return float(dt * np.sum(kinetic - potential) + offset * dt * (len(q) - 1))


def bump(tau: np.ndarray, mode: int = 1):
    """Endpoint-fixed profile ``sin(mode * pi * s)`` on ``s in [0, 1]`` and its tau-derivative."""
    t0, t1 = tau[0], tau[-1]
    s = (tau - t0) / (t1 - t0)
    k = mode * math.pi
    return np.sin(k * s), k / (t1 - t0) * np.cos(k * s)


def perturb(traj: Trajectory, amplitude: float, direction, mode: int = 1) -> Trajectory:
    """Add ``amplitude * bump * direction`` with endpoints held fixed."""
    shape, dshape = bump(traj.tau, mode)
    direction = np.asarray(direction, dtype=float)
    pos = traj.position + amplitude * shape[:, None] * direction
    vel = traj.velocity + amplitude * dshape[:, None] * direction
    pos[0], pos[-1] = traj.position[0], traj.position[-1]
    return Trajectory(traj.tau, pos, vel, traj.dt)


def _chunks(n: int, size: int):
    for start in range(0, n, size):
        yield slice(start, min(n, start + size))


def dirichlet_action(gradient: Callable, region: GridRegion, mask: Callable | None = None,
                     time_derivative: Callable | None = None, chunk: int = 8) -> float:
    """Midpoint rule for ``integral [(d phi/dt)^2 - |grad phi|^2] d^3x dt``.

    ``region`` is 3-D (unit duration) or 4-D with time as axis 0.  Fields are
    static unless ``time_derivative`` is given; ``mask(points) -> bool``
    restricts the spatial cells that are summed.
    """
    if region.ndim == 4:
        times = region.midpoints()[0]
        dt_cell = region.spacing[0]
        spatial = GridRegion(region.bounds[1:], region.resolution[1:])
    elif region.ndim == 3:
        times, dt_cell, spatial = np.array([0.5]), 1.0, region
    else:
        raise DomainError("field action needs a 3-D or 4-D region")
    xs, ys, zs = spatial.midpoints()
    dv = spatial.cell_volume
    total = 0.0
    for t in times:
        slab_sums = []
        for sl in _chunks(len(xs), chunk):
            pts = np.stack(np.meshgrid(xs[sl], ys, zs, indexing="ij"), axis=-1).reshape(-1, 3)
            if mask is not None:
                pts = pts[np.asarray(mask(pts), dtype=bool)]
            if not len(pts):
                continue
            g = np.asarray(gradient(pts))
            dens = -np.sum(g * g, axis=-1)
            if time_derivative is not None:
                dens = dens + np.asarray(time_derivative(pts, t)) ** 2
            slab_sums.append(np.sum(dens))
        total += float(np.sum(slab_sums)) * dv * dt_cell
    return total


def field_action(field: Potential, region: GridRegion, mask: Callable | None = None) -> float:
    """Static field action of a potential over ``region``."""
    return dirichlet_action(field.gradient, region, mask)


def riemann_action_2d(varphi_profile: Callable, region: GridRegion) -> float:
    """Midpoint rule for ``integral g^2 sqrt(-det g_ij) dx0 dx1``.

    At each cell the unit field ``g`` is ``c`` boosted by ``varphi``; ``g_ij``
    is the Gram matrix of the deformed tangent pair
    ``(exp(varphi) g, exp(-varphi) g1)``.
    """
    if region.ndim != 2:
        raise DomainError("riemann_action_2d needs a 2-D region")
    a, b = region.midpoints()
    x0, x1 = np.meshgrid(a, b, indexing="ij")
    phi = np.broadcast_to(np.asarray(varphi_profile(x0, x1), dtype=float), x0.shape)
    with np.errstate(over="raise"):
        try:
            ch, sh = np.cosh(phi), np.sinh(phi)
            up, down = np.exp(phi), np.exp(-phi)
        except FloatingPointError as exc:
            raise RangeError("varphi profile overflows double range") from exc
    g = np.stack([ch, sh], axis=-1)
    g1 = np.stack([sh, ch], axis=-1)
    pair = np.stack([up[..., None] * g, down[..., None] * g1], axis=-2)
    gram = frames.gram_entries(pair)
    det = gram[..., 0, 0] * gram[..., 1, 1] - gram[..., 0, 1] * gram[..., 1, 0]
    if np.any(det >= 0.0):
        raise DegenerateGramError("tangent pair Gram determinant is not negative")
    g2 = frames.minkowski_norm2(g)
    return float(np.sum(g2 * np.sqrt(-det)) * region.cell_volume)


class FluxAction(NamedTuple):
    flux: float
    volume: float


def unit_field_batch(fs: FeatureSet, pts: np.ndarray, c=E0) -> np.ndarray:
    """Vectorised :func:`~windfield.field.unit_field` over points of shape ``(n, 3)``."""
    c = np.asarray(c, dtype=float)
    pts = np.asarray(pts, dtype=float)
    if not len(fs):
        return np.broadcast_to(c, (len(pts), 4)).copy()
    phi = np.asarray(fs.potential(pts))
    grad = fs.gradient(pts)
    norm = np.linalg.norm(grad, axis=1)
    _, dist = fs._offsets(pts)
    if np.any(norm <= 1e-14 * np.sum(fs.strengths / dist**2, axis=-1)):
        raise DirectionUndefinedError("grad phi vanishes inside the region")
    n4 = np.concatenate([np.zeros((len(pts), 1)), grad / norm[:, None]], axis=1)
    m = n4 - frames.minkowski_inner(n4, c)[:, None] * c
    m /= np.sqrt(-frames.minkowski_norm2(m))[:, None]
    a = np.abs(phi)[:, None]
    return np.cosh(a) * c + np.sinh(a) * m


def flux_action_4d(fs: FeatureSet, region: GridRegion, c=E0, rtol: float = 1e-10) -> FluxAction:
    """Both sides of ``integral (g, c) d^4x = integral |det G|^(1/2) d^4x``.

    ``region`` is 4-D with time as axis 0; the field is static so each spatial
    cell is weighted by the time extent.  Raises :class:`IdentityViolation` if
    the two quadratures differ by more than ``rtol`` relative.
    """
    if region.ndim != 4:
        raise DomainError("flux_action_4d needs a 4-D region")
    c = np.asarray(c, dtype=float)
    spatial = GridRegion(region.bounds[1:], region.resolution[1:])
    pts = np.stack(np.meshgrid(*spatial.midpoints(), indexing="ij"), axis=-1).reshape(-1, 3)
    g = unit_field_batch(fs, pts, c)
    basis = frames.completed_basis(c)
    vectors = np.concatenate([g[:, None, :], np.broadcast_to(basis[1:], (len(g), 3, 4))], axis=1)
    dets = np.linalg.det(frames.gram_entries(vectors))
    weight = region.volume / len(pts)
    flux = float(np.sum(frames.minkowski_inner(g, c)) * weight)
    volume = float(np.sum(np.sqrt(np.abs(dets))) * weight)
    if abs(flux - volume) > rtol * max(abs(flux), abs(volume)):
        raise IdentityViolation(f"flux {flux!r} and Gram volume {volume!r} disagree")
    return FluxAction(flux, volume)
