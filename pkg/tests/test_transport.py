"""Tests for the transport solver: tendencies, stepping, stability."""

import math

import numpy as np
import pytest

from gsqg import (
    AnalyticVelocity,
    FrozenVelocity,
    GridSpec,
    RealField,
    Trajectory,
    TransportError,
    VectorField,
    VelocityLaw,
    advection_rhs,
    besov_velocity_norm,
    compute_velocity,
    growth_bound_check,
    lp_norm,
    rk4_step,
    sobolev_norm,
    solve_transport,
    stable_dt,
)
from gsqg.inequalities import sample_field
from gsqg.littlewood_paley import BesovParams, besov_norm, build_partition
from gsqg.picard import constant_trajectory

GRID = GridSpec(64)


def field(fn, grid=GRID):
    return RealField.from_function(grid, fn)


def rotating(grid=GRID):
    return AnalyticVelocity(grid, lambda x1, x2, t: (-np.sin(x2), np.sin(x1)))


def zero_velocity(grid=GRID):
    return AnalyticVelocity(grid, lambda x1, x2, t: (np.zeros_like(x1), np.zeros_like(x1)))


class TestAdvectionRhs:
    def test_zero_velocity_zero_forcing(self):
        w = field(lambda x1, x2: np.sin(x1) * np.sin(2 * x2))
        u = zero_velocity().velocity(0.0)
        out = advection_rhs(w, u)
        assert np.max(np.abs(out.values)) < 1e-14

    def test_velocity_orthogonal_to_gradient(self):
        w = field(lambda x1, x2: np.sin(x1))
        profile = field(lambda x1, x2: np.cos(3 * x1))
        u = VectorField(RealField.zeros(GRID), profile)
        out = advection_rhs(w, u)
        assert np.max(np.abs(out.values)) < 1e-13

    def test_constant_advection(self):
        w = field(lambda x1, x2: np.sin(x2))
        u = VectorField(
            RealField.zeros(GRID), field(lambda x1, x2: np.ones_like(x1))
        )
        out = advection_rhs(w, u)
        _, x2 = GRID.mesh()
        assert np.max(np.abs(out.values + np.cos(x2))) < 1e-13

    def test_grid_mismatch_rejected(self):
        w = field(lambda x1, x2: np.sin(x1))
        other = GridSpec(32)
        u = zero_velocity(other).velocity(0.0)
        with pytest.raises(ValueError, match="share a grid"):
            advection_rhs(w, u)


class TestStableDt:
    def test_zero_velocity_guard(self):
        u = zero_velocity().velocity(0.0)
        dt = stable_dt(u, GRID, 0.5)
        assert dt == 0.5 * GRID.spacing / 1e-12

    def test_unit_speed_arithmetic(self):
        grid = GridSpec(128)
        u = VectorField(
            RealField.from_function(grid, lambda a, b: np.ones_like(a)),
            RealField.zeros(grid),
        )
        assert abs(stable_dt(u, grid, 0.5) - np.pi / 128.0) < 1e-15

    def test_doubling_n_halves_dt(self):
        u64 = VectorField(
            field(lambda a, b: np.ones_like(a)), RealField.zeros(GRID)
        )
        g128 = GridSpec(128)
        u128 = VectorField(
            RealField.from_function(g128, lambda a, b: np.ones_like(a)),
            RealField.zeros(g128),
        )
        assert abs(stable_dt(u64, GRID, 0.3) / stable_dt(u128, g128, 0.3) - 2.0) < 1e-12

    def test_cfl_range(self):
        u = zero_velocity().velocity(0.0)
        for bad in (0.0, 1.5, -0.2):
            with pytest.raises(ValueError, match="cfl"):
                stable_dt(u, GRID, bad)


class TestRk4Step:
    def test_identity_without_dynamics(self):
        w = field(lambda x1, x2: np.sin(x1) * np.cos(x2))
        out = rk4_step(w, zero_velocity(), None, 0.0, 0.1)
        assert np.max(np.abs(out.values - w.values)) < 1e-15

    def test_translation_local_error(self):
        w = field(lambda x1, x2: np.sin(x1))
        prov = AnalyticVelocity(
            GRID, lambda x1, x2, t: (np.ones_like(x1), np.zeros_like(x1))
        )
        dt = 0.1
        out = rk4_step(w, prov, None, 0.0, dt)
        x1, _ = GRID.mesh()
        exact = np.sin(x1 - dt)
        # translation semigroup: one step misses by the dt^5 remainder
        assert np.max(np.abs(out.values - exact)) <= 1.05 * dt**5 / 120.0

    def test_fourth_order_in_dt(self):
        w0 = field(lambda x1, x2: np.sin(x1) * np.sin(x2))
        prov = AnalyticVelocity(
            GRID,
            lambda x1, x2, t: (-np.cos(t) * np.sin(x2), np.cos(0.7 * t) * np.sin(x1)),
        )
        T = 0.5
        errors = []
        reference = solve_transport(w0, prov, None, T, T / 512, n_nodes=4)
        for steps in (16, 32, 64):
            traj = solve_transport(w0, prov, None, T, T / steps, n_nodes=4)
            errors.append(
                max(
                    np.max(np.abs(a.values - b.values))
                    for a, b in zip(traj.fields, reference.fields)
                )
            )
        slopes = [np.log2(a / b) for a, b in zip(errors, errors[1:])]
        assert min(slopes) >= 3.8

    def test_forcing_enters(self):
        w = RealField.zeros(GRID)
        out = rk4_step(
            w, zero_velocity(), lambda x1, x2, t: np.sin(x1), 0.0, 0.25
        )
        x1, _ = GRID.mesh()
        assert np.max(np.abs(out.values - 0.25 * np.sin(x1))) < 1e-14


class TestSolveTransport:
    def test_zero_velocity_is_identity(self):
        w0 = sample_field(GRID, seed=1, index=0, gamma=2.5, band=(1, 15))
        traj = solve_transport(w0, zero_velocity(), None, 1.0, 0.05, n_nodes=8)
        for f in traj.fields:
            assert np.max(np.abs(f.values - w0.values)) < 1e-12

    def test_frozen_steady_state(self):
        theta0 = field(lambda x1, x2: np.sin(x1))
        source = constant_trajectory(theta0, 1.0, 16)
        prov = FrozenVelocity(source, 0.25, VelocityLaw.PERP)
        # the velocity is orthogonal to the gradient pointwise
        u = prov.velocity(0.0)
        grad1 = advection_rhs(theta0, u)
        assert np.max(np.abs(grad1.values)) < 1e-14
        traj = solve_transport(theta0, prov, None, 1.0, 0.05, n_nodes=16)
        for f in traj.fields:
            assert np.max(np.abs(f.values - theta0.values)) < 1e-12

    def test_self_convergence_rotating(self):
        w0 = field(lambda x1, x2: np.sin(x1) * np.sin(x2))
        coarse = solve_transport(w0, rotating(), None, 0.5, 0.02, n_nodes=8)
        fine = solve_transport(w0, rotating(), None, 0.5, 0.005, n_nodes=8)
        err = max(
            np.max(np.abs(a.values - b.values))
            for a, b in zip(coarse.fields, fine.fields)
        )
        assert err <= 1e-6

    def test_l2_conservation_reference_run(self):
        grid = GridSpec(128)
        w0 = RealField.from_function(
            grid, lambda x1, x2: np.sin(x1) * np.sin(x2) + 0.5 * np.cos(2 * x1) * np.sin(x2)
        )
        prov = rotating(grid)
        dt = stable_dt(prov.velocity(0.0), grid, 0.25)
        traj = solve_transport(w0, prov, None, 1.0, dt, n_nodes=32)
        l2 = [lp_norm(f, 2) for f in traj.fields]
        assert max(abs(v - l2[0]) / l2[0] for v in l2) <= 1e-8

    def test_max_principle(self):
        w0 = field(lambda x1, x2: np.sin(x1) * np.sin(x2))
        traj = solve_transport(w0, rotating(), None, 1.0, 0.02, n_nodes=16)
        linf0 = lp_norm(traj.fields[0], np.inf)
        for f in traj.fields:
            assert lp_norm(f, np.inf) <= linf0 * (1.0 + 1e-4)

    def test_linearity(self):
        a, b = 1.7, -0.4
        w0 = sample_field(GRID, seed=8, index=0, gamma=2.5, band=(1, 15))
        v0 = sample_field(GRID, seed=8, index=1, gamma=2.5, band=(1, 15))
        combo = RealField(GRID, a * w0.values + b * v0.values)
        kw = dict(provider=rotating(), forcing=None, T=0.5, dt=0.02, n_nodes=8)
        t_combo = solve_transport(combo, **kw)
        t_w = solve_transport(w0, **kw)
        t_v = solve_transport(v0, **kw)
        for fc, fw, fv in zip(t_combo.fields, t_w.fields, t_v.fields):
            assert np.max(np.abs(fc.values - (a * fw.values + b * fv.values))) <= 1e-10

    def test_x2_independent_family_is_steady(self):
        rng = np.random.default_rng(12)
        coeffs = rng.normal(size=4)
        w0 = field(
            lambda x1, x2: coeffs[0] * np.sin(x1)
            + coeffs[1] * np.cos(2 * x1)
            + coeffs[2] * np.sin(3 * x1)
            + coeffs[3] * np.cos(5 * x1)
        )
        source = constant_trajectory(w0, 1.0, 16)
        prov = FrozenVelocity(source, 0.3, VelocityLaw.PERP)
        traj = solve_transport(w0, prov, None, 1.0, 0.05, n_nodes=16)
        for f in traj.fields:
            assert np.max(np.abs(f.values - w0.values)) <= 1e-10

    def test_instability_exhausts_halvings(self):
        w0 = field(lambda x1, x2: np.sin(x1) * np.sin(x2))
        # T so large that even 6 halvings leave dt above the CFL bound
        with pytest.raises(TransportError, match="6 dt halvings"):
            solve_transport(w0, rotating(), None, 512.0, 512.0 / 32, n_nodes=32)

    def test_restart_recovers_from_marginal_dt(self):
        w0 = field(lambda x1, x2: np.sin(x1) * np.sin(x2))
        # requested step violates CFL once but is fine after halving
        prov = rotating()
        limit = stable_dt(prov.velocity(0.0), GRID, 1.0)
        traj = solve_transport(w0, prov, None, 8 * limit * 1.5, 2 * limit, n_nodes=4)
        assert len(traj) == 5
        assert np.all(np.isfinite(traj.fields[-1].values))

    def test_trajectory_validation(self):
        f = RealField.zeros(GRID)
        with pytest.raises(ValueError, match="uniformly spaced"):
            Trajectory(GRID, np.array([0.0, 0.1, 0.35]), (f, f, f))
        with pytest.raises(ValueError, match="start at t = 0"):
            Trajectory(GRID, np.array([0.1, 0.2]), (f, f))


class TestGrowthBound:
    def test_steady_rate_zero(self):
        theta0 = field(lambda x1, x2: np.sin(x1))
        source = constant_trajectory(theta0, 1.0, 8)
        prov = FrozenVelocity(source, 0.5, VelocityLaw.PERP)
        traj = solve_transport(theta0, prov, None, 1.0, 0.05, n_nodes=8)
        report = growth_bound_check(traj, source, 2.5, 0.5)
        assert abs(report.rate) < 1e-10

    def test_zero_velocity_rate_zero(self):
        w0 = sample_field(GRID, seed=3, index=0, gamma=2.5, band=(1, 15))
        traj = solve_transport(w0, zero_velocity(), None, 1.0, 0.05, n_nodes=8)
        source = constant_trajectory(RealField.zeros(GRID), 1.0, 8)
        report = growth_bound_check(traj, source, 2.0, 0.25)
        assert report.rate == 0.0

    def test_zero_initial_norm_rejected(self):
        zero = RealField.zeros(GRID)
        traj = constant_trajectory(zero, 1.0, 4)
        with pytest.raises(ValueError, match="zero Sobolev norm"):
            growth_bound_check(traj, traj, 2.0, 0.25)

    def test_rate_bounded_over_ensemble(self):
        rates = []
        for seed in range(20):
            theta0 = sample_field(GRID, seed=500 + seed, index=0, gamma=2.5, band=(1, 15))
            w0 = sample_field(GRID, seed=900 + seed, index=0, gamma=2.5, band=(1, 15))
            source = constant_trajectory(theta0, 0.5, 16)
            prov = FrozenVelocity(source, 0.25, VelocityLaw.PERP)
            dt = stable_dt(prov.velocity(0.0), GRID, 0.25)
            traj = solve_transport(w0, prov, None, 0.5, dt, n_nodes=16)
            report = growth_bound_check(traj, source, 2.0, 0.25, bound=0.5)
            rates.append(report.rate)
            assert report.within_bound
        # single constant covers the whole ensemble with slack
        assert max(rates) <= 0.5


class TestBesovVelocityNorm:
    def test_zero_field(self):
        assert besov_velocity_norm(RealField.zeros(GRID), 0.25, 2.0) == 0.0

    def test_sine_closed_form(self):
        theta = field(lambda x1, x2: np.sin(x1))
        partition = build_partition(GRID)
        u2 = field(lambda x1, x2: -np.cos(x1))
        expected = besov_norm(u2, BesovParams(2.0, 4.0, 2.0), partition)
        got = besov_velocity_norm(theta, 0.25, 2.0)
        assert abs(got - expected) <= 1e-12 * expected

    def test_alpha_half_rejected(self):
        theta = field(lambda x1, x2: np.sin(x1))
        with pytest.raises(ValueError, match="alpha = 1/2"):
            besov_velocity_norm(theta, 0.5, 2.0)

    @pytest.mark.parametrize("alpha", [0.1, 0.25, 0.4])
    def test_ratio_to_sobolev_bounded(self, alpha):
        ratios = []
        for i in range(20):
            f = sample_field(GRID, seed=42, index=i, gamma=2.5, band=(1, 15))
            ratios.append(besov_velocity_norm(f, alpha, 2.0) / sobolev_norm(f, 2.0))
        assert max(ratios) <= 3.0
