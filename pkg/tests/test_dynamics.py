import inspect
import math

import numpy as np
import pytest

from windfield import dynamics as dy
from windfield.errors import (
    CaptureError,
    DegenerateGramError,
    DomainError,
    IdentityViolation,
    SingularityError,
)
from windfield.field import E0, FeatureSet, HarmonicWell, PointFeature


def single(mu=1.0, pos=(0.0, 0.0, 0.0)):
    return FeatureSet((PointFeature(pos, mu),))


def kepler(v=1.0, steps=10_000, dt=1e-3, scheme="leapfrog"):
    s0 = dy.StateEuclid((1.0, 0.0, 0.0), (0.0, v, 0.0))
    return dy.integrate_newtonian(single(), s0, dy.IntegratorConfig(dt, steps, scheme))


def bump_gradient(center, radius):
    center = np.asarray(center, dtype=float)

    def grad(p):
        d = p - center
        s = np.sum(d * d, axis=-1) / radius**2
        out = np.zeros_like(p)
        m = s < 1
        w = np.exp(-1 / (1 - s[m])) * (-1 / (1 - s[m]) ** 2) * 2 / radius**2
        out[m] = w[:, None] * d[m]
        return out

    return grad


class TestConfig:
    @pytest.mark.parametrize("kw", [dict(dt=0, steps=1), dict(dt=1, steps=0), dict(dt=1, steps=1, scheme="euler")])
    def test_invalid(self, kw):
        with pytest.raises(DomainError):
            dy.IntegratorConfig(**kw)

    def test_region(self):
        r = dy.GridRegion(((0, 1), (0, 2)), (4, 8))
        assert r.cell_volume == 0.0625
        assert r.volume == 2.0
        assert r.midpoints()[0].tolist() == [0.125, 0.375, 0.625, 0.875]
        with pytest.raises(DomainError):
            dy.GridRegion(((1, 0),), (3,))


class TestNewtonian:
    def test_circular_orbit(self):
        traj = kepler(steps=1000)
        r = np.linalg.norm(traj.position, axis=1)
        assert np.max(np.abs(r - 1.0)) < 1e-6

    def test_circular_speed_oracle(self):
        # sqrt(mu / r) keeps the radius fixed for any mu
        mu, r0 = 2.5, 1.7
        v = math.sqrt(mu / r0)
        s0 = dy.StateEuclid((r0, 0, 0), (0, v, 0))
        traj = dy.integrate_newtonian(single(mu), s0, dy.IntegratorConfig(1e-3, 2000))
        assert np.max(np.abs(np.linalg.norm(traj.position, axis=1) - r0)) < 1e-6

    def test_free_motion(self):
        s0 = dy.StateEuclid((1, 2, 3), (0.5, -1, 0.25))
        traj = dy.integrate_newtonian(FeatureSet(), s0, dy.IntegratorConfig(0.1, 50))
        expected = np.array(s0.xi) + traj.tau[:, None] * np.array(s0.xidot)
        assert np.allclose(traj.position, expected, rtol=0, atol=1e-12)

    def test_radial_drop_energy(self):
        s0 = dy.StateEuclid((2, 0, 0), (0, 0, 0))
        traj = dy.integrate_newtonian(single(), s0, dy.IntegratorConfig(1e-4, 20_000))
        e = 0.5 * np.sum(traj.velocity**2, axis=1) - 1 / np.linalg.norm(traj.position, axis=1)
        assert np.max(np.abs(e - e[0])) < 1e-8
        assert np.allclose(traj.energy, e, rtol=0, atol=1e-15)

    @pytest.mark.parametrize("v", [1.0, 1.1, 1.2, 0.9])
    def test_energy_conservation(self, v):
        traj = kepler(v)
        e = traj.energy
        assert np.max(np.abs(e - e[0])) <= 1e-6 * abs(e[0])

    def test_rk4_agrees(self):
        a, b = kepler(steps=500), kepler(steps=500, scheme="rk4")
        assert np.max(np.abs(a.position - b.position)) < 1e-6

    def test_mass_independence(self):
        params = inspect.signature(dy.integrate_newtonian).parameters
        assert not any("mass" in p for p in params)
        a, b = kepler(steps=300), kepler(steps=300)
        assert np.array_equal(a.position, b.position)

    def test_capture(self):
        with pytest.raises(CaptureError):
            dy.integrate_newtonian(single(), dy.StateEuclid((0, 0, 0), (1, 0, 0)), dy.IntegratorConfig(1e-3, 10))
        s0 = dy.StateEuclid((0.1, 0, 0), (0, 0, 0))
        with pytest.raises(CaptureError):
            dy.integrate_newtonian(single(), s0, dy.IntegratorConfig(1e-4, 10_000), capture_radius=1e-2)
        assert issubclass(CaptureError, SingularityError)

    def test_harmonic_well(self):
        s0 = dy.StateEuclid((1, 0, 0), (0, 0, 0))
        traj = dy.integrate_newtonian(HarmonicWell(4.0), s0, dy.IntegratorConfig(1e-3, 1000))
        assert np.allclose(traj.position[:, 0], np.cos(2 * traj.tau), atol=1e-6)

    def test_trajectory_shape(self):
        traj = kepler(steps=10)
        assert len(traj) == 11
        assert np.all(np.diff(traj.tau) > 0)
        assert traj.duration == pytest.approx(0.01)


class TestMinkowski:
    def test_constant_field(self):
        x0 = np.array([0.0, 1, 2, 3])
        v0 = np.array([1.0, 0.1, 0, -0.2])
        traj = dy.integrate_minkowski(FeatureSet(), x0, v0, dy.IntegratorConfig(0.01, 100))
        t = traj.tau[:, None]
        assert np.allclose(traj.position, x0 + v0 * t + 0.5 * E0 * t * t, atol=1e-13)

    def test_weak_field_matches_newtonian_track(self):
        fs = single(1e-4)
        cfg = dy.IntegratorConfig(1e-3, 1000)
        mk = dy.integrate_minkowski(fs, [0, 1, 0.2, 0], [1, 0, 0.1, 0], cfg)
        nt = dy.integrate_newtonian(fs, dy.StateEuclid((1, 0.2, 0), (0, 0.1, 0)), cfg)
        rel = np.linalg.norm(mk.position[:, 1:] - nt.position, axis=1) / np.linalg.norm(nt.position, axis=1)
        assert np.max(rel) < 1e-3

    def test_time_component_grows(self):
        traj = dy.integrate_minkowski(single(0.3), [0, 1, 0, 0], [1, 0, 0.2, 0], dy.IntegratorConfig(1e-2, 200))
        assert np.all(np.diff(traj.velocity[:, 0]) > 0)

    def test_bad_input(self):
        with pytest.raises(DomainError):
            dy.integrate_minkowski(FeatureSet(), [0, 0, 0], [1, 0, 0, 0], dy.IntegratorConfig(1, 1))


class TestGeodesic:
    def test_flat(self):
        traj = dy.geodesic_weakfield(lambda r: 0.0, 1.0, 0.3, dy.IntegratorConfig(0.1, 20))
        assert np.allclose(traj.position[:, 0], 1 + 0.3 * traj.tau, atol=1e-14)

    def test_initial_acceleration(self):
        prof = dy.point_mass_profile(1e-6)
        assert dy.coordinate_acceleration(prof, 1.0) == pytest.approx(-1e-6, rel=1e-2)
        numeric = dy._numeric_derivative(prof.phi)(1.0)
        assert numeric == pytest.approx(1e-6, rel=1e-6)

    def test_numeric_derivative_path(self):
        mu = 1e-4
        cfg = dy.IntegratorConfig(0.5, 200)
        a = dy.geodesic_weakfield(lambda r: -mu / r, 1.0, 0.0, cfg)
        b = dy.geodesic_weakfield(dy.point_mass_profile(mu), 1.0, 0.0, cfg)
        assert np.allclose(a.position, b.position, rtol=1e-9)

    def test_deviation_scales_with_mu(self):
        small = dy.radial_fall_comparison(1e-6).fall_error
        large = dy.radial_fall_comparison(1e-3).fall_error
        assert large / small == pytest.approx(1e3, rel=0.05)

    @pytest.mark.parametrize("mu", [1e-6, 1e-5, 1e-4, 1e-3])
    def test_newtonian_limit_half_dynamical_time(self, mu):
        assert dy.radial_fall_comparison(mu, duration=0.5).track_error <= max(1e-6, 10 * mu)

    def test_capture(self):
        with pytest.raises(CaptureError):
            dy.geodesic_weakfield(dy.point_mass_profile(1e-4), 0.05, -1.0, dy.IntegratorConfig(1e-3, 1000), capture_radius=1e-2)


class TestActionLine:
    def test_aligned_constant_field(self):
        tau = np.linspace(0, 1, 101)
        pos = np.column_stack([tau, np.zeros((101, 3))])
        vel = np.tile([1.0, 0, 0, 0], (101, 1))
        traj = dy.Trajectory(tau, pos, vel, 0.01)
        assert dy.action_line(FeatureSet(), traj) == pytest.approx(1.0, abs=1e-15)

    def test_reversal(self):
        traj = dy.integrate_minkowski(single(0.2), [0, 1, 0, 0], [1, 0, 0.3, 0], dy.IntegratorConfig(1e-2, 100))
        fs = single(0.2)
        assert dy.action_line(fs, traj.reversed()) == pytest.approx(-dy.action_line(fs, traj), rel=1e-13)

    def test_stationary_under_bumps(self):
        fs = single(1e-4)
        traj = dy.integrate_minkowski(fs, [0, 1, 0, 0], [1, 0, 0.1, 0], dy.IntegratorConfig(1e-2, 100))
        rng = np.random.default_rng(1)
        eps = 1e-3
        for _ in range(20):
            d = rng.normal(size=4)
            d /= np.linalg.norm(d)
            mode = int(rng.integers(1, 4))
            plus = dy.action_line(fs, dy.perturb(traj, eps, d, mode))
            minus = dy.action_line(fs, dy.perturb(traj, -eps, d, mode))
            first_order = abs(plus - minus) / 2
            assert first_order < 1e-4 * eps


class TestLagrangianAction:
    def response(self, amplitudes, mode=1):
        traj = kepler(1.1, steps=1000)
        rng = np.random.default_rng(2)
        d = rng.normal(size=3)
        fs = single()
        s0 = dy.lagrangian_action(fs, traj.position, traj.dt)
        out = []
        for a in amplitudes:
            q = dy.perturb(traj, a, d, mode).position
            out.append(abs(dy.lagrangian_action(fs, q, traj.dt) - s0))
        return np.array(out)

    @pytest.mark.parametrize("mode", [1, 2, 5])
    def test_second_order_response(self, mode):
        eps = np.logspace(-4, -1, 7)
        slope = np.polyfit(np.log(eps), np.log(self.response(eps, mode)), 1)[0]
        assert slope >= 1.9

    def test_offset(self):
        q = np.zeros((11, 3))
        assert dy.lagrangian_action(HarmonicWell(), q, 0.1, offset=2.0) == pytest.approx(2.0)


class TestFieldAction:
    def test_empty(self):
        assert dy.field_action(FeatureSet(), dy.GridRegion(((0, 1),) * 3, (4, 4, 4))) == 0.0

    def test_harmonic_first_variation(self):
        fs = single()
        region = dy.GridRegion(((0.5, 1.5), (-0.5, 0.5), (-0.5, 0.5)), (96, 96, 96))
        rng = np.random.default_rng(3)
        s0 = dy.field_action(fs, region)
        eps = 1e-4
        for _ in range(3):
            radius = rng.uniform(0.3, 0.45)
            center = np.array([1.0, 0, 0]) + rng.uniform(-0.5 + radius, 0.5 - radius, 3)
            eta = bump_gradient(center, radius)
            plus = dy.dirichlet_action(lambda p: fs.gradient(p) + eps * eta(p), region)
            minus = dy.dirichlet_action(lambda p: fs.gradient(p) - eps * eta(p), region)
            assert abs(plus - minus) / (2 * eps) < 1e-6
            second = (plus + minus - 2 * s0) / eps**2
            assert 0 > second > -10

    def test_shell_refinement(self):
        fs = single()
        shell = lambda p: (np.linalg.norm(p, axis=1) >= 0.5) & (np.linalg.norm(p, axis=1) <= 2)  # noqa: E731
        coarse = dy.field_action(fs, dy.GridRegion(((-2, 2),) * 3, (64,) * 3), shell)
        fine = dy.field_action(fs, dy.GridRegion(((-2, 2),) * 3, (128,) * 3), shell)
        assert abs(fine - coarse) / abs(fine) < 0.01
        assert fine == pytest.approx(-6 * math.pi, rel=0.01)

    def test_four_dimensional_region_scales_with_duration(self):
        fs = single()
        box = ((1, 2), (-0.5, 0.5), (-0.5, 0.5))
        s3 = dy.field_action(fs, dy.GridRegion(box, (8, 8, 8)))
        s4 = dy.field_action(fs, dy.GridRegion(((0, 3),) + box, (2, 8, 8, 8)))
        assert s4 == pytest.approx(3 * s3, rel=1e-13)

    def test_singularity(self):
        with pytest.raises(SingularityError):
            dy.field_action(single(pos=(0.5, 0.5, 0.5)), dy.GridRegion(((0, 1),) * 3, (1, 1, 1)))


class TestRiemann:
    def test_flat(self):
        assert dy.riemann_action_2d(lambda a, b: 0 * a, dy.GridRegion(((0, 1), (0, 1)), (4, 4))) == pytest.approx(1.0)

    def test_constant_matches_flat(self):
        region = dy.GridRegion(((0, 2), (0, 1)), (8, 8))
        flat = dy.riemann_action_2d(lambda a, b: 0 * a, region)
        assert dy.riemann_action_2d(lambda a, b: 0 * a + 1.7, region) == pytest.approx(flat, rel=1e-12)

    def test_refinement(self):
        region = dy.GridRegion(((0, 1), (0, 1)), (16, 16))
        prof = lambda a, b: np.sin(3 * a) * np.cos(2 * b)  # noqa: E731
        coarse = dy.riemann_action_2d(prof, region)
        fine = dy.riemann_action_2d(prof, region.refined())
        assert abs(fine - coarse) < 0.01 * abs(fine)

    def test_wrong_dimension(self):
        with pytest.raises(DomainError):
            dy.riemann_action_2d(lambda a, b: a, dy.GridRegion(((0, 1),) * 3, (2, 2, 2)))

    def test_degenerate_gram_error_type(self):
        assert issubclass(DegenerateGramError, DomainError)


class TestFluxAction:
    def test_empty_unit_box(self):
        res = dy.flux_action_4d(FeatureSet(), dy.GridRegion(((0, 1),) * 4, (2, 2, 2, 2)))
        assert res.flux == pytest.approx(1.0, abs=1e-15)
        assert res.volume == pytest.approx(1.0, abs=1e-15)

    def test_weak_feature(self):
        box = ((0, 1), (0.5, 1.5), (-0.5, 0.5), (-0.5, 0.5))
        res = dy.flux_action_4d(single(1e-3), dy.GridRegion(box, (1, 12, 12, 12)))
        assert abs(res.flux - res.volume) <= 1e-10 * res.flux
        assert res.flux > 1.0

    def test_scaling(self):
        fs = single(0.1)
        region = dy.GridRegion(((0, 1), (0.5, 1.5), (-0.5, 0.5), (-0.5, 0.5)), (1, 6, 6, 6))
        base = dy.flux_action_4d(fs, region)
        wide = dy.flux_action_4d(fs, region.scaled(0, 2.0))
        assert wide.flux == pytest.approx(2 * base.flux, rel=1e-14)
        assert wide.volume == pytest.approx(2 * base.volume, rel=1e-14)

    def test_violation_reported(self):
        region = dy.GridRegion(((0, 1), (0.5, 1.5), (-0.5, 0.5), (-0.5, 0.5)), (1, 4, 4, 4))
        with pytest.raises(IdentityViolation):
            dy.flux_action_4d(single(1.0), region, rtol=-1.0)

    def test_batch_matches_pointwise(self):
        from windfield.field import unit_field

        fs = single(0.4, (0.1, 0.2, 0.0))
        pts = np.random.default_rng(4).uniform(0.5, 1.5, (20, 3))
        batch = dy.unit_field_batch(fs, pts)
        for p, g in zip(pts, batch):
            assert np.allclose(unit_field(fs, p), g, rtol=1e-14, atol=1e-15)
