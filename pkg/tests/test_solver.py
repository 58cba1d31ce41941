"""Tests for the split-step time integrator and its initial-data library."""

import math

import numpy as np
import pytest

from boltzkit.collision import CollisionKernelSpec, q_full
from boltzkit.errors import (
    ConfigurationError,
    InstabilityError,
    RangeError,
)
from boltzkit.solver import (
    DEFAULT_DT,
    SolverConfig,
    _collision_rhs,
    band_limited_random,
    load_trajectory,
    maxwellian,
    maxwellian_with_mode,
    richardson_order,
    save_trajectory,
    solve,
    step,
    uniqueness_experiment,
)
from boltzkit.spectral_core import (
    NormSpec,
    l2_norm,
    make_field,
    make_grid,
    norm,
    propagate,
    transform,
)


def small_grid_2d():
    return make_grid(d=2, nx=4, nv=8, v_max=4.0)


def fast_kernel(d=2, gamma=0.0):
    return CollisionKernelSpec(d=d, gamma=gamma, n_sphere=8)


def mass(fld):
    g = fld.grid
    f = transform(fld, "XV")
    return float(np.real(np.sum(f.data))) * (g.dx * g.dv) ** g.d


def rel_imag(fld):
    f = transform(fld, "XV")
    scale = float(np.max(np.abs(f.data)))
    if scale == 0.0:
        return 0.0
    return float(np.max(np.abs(f.data.imag))) / scale


class TestConfigValidation:
    def test_bad_dt(self):
        g = small_grid_2d()
        with pytest.raises(ConfigurationError):
            SolverConfig(grid=g, dt=0.0, t_end=1.0)
        with pytest.raises(ConfigurationError):
            SolverConfig(grid=g, dt=-0.1, t_end=1.0)

    def test_negative_t_end(self):
        g = small_grid_2d()
        with pytest.raises(ConfigurationError):
            SolverConfig(grid=g, dt=0.1, t_end=-1.0)

    def test_t_end_below_dt(self):
        g = small_grid_2d()
        with pytest.raises(ConfigurationError):
            SolverConfig(grid=g, dt=0.5, t_end=0.25)

    def test_t_end_not_step_multiple(self):
        g = small_grid_2d()
        with pytest.raises(ConfigurationError):
            SolverConfig(grid=g, dt=0.3, t_end=1.0)

    def test_bad_scheme(self):
        g = small_grid_2d()
        with pytest.raises(ConfigurationError):
            SolverConfig(grid=g, dt=0.1, t_end=0.1, scheme="verlet")

    def test_kernel_dimension_mismatch(self):
        g = small_grid_2d()
        with pytest.raises(ConfigurationError):
            SolverConfig(
                grid=g, dt=0.1, t_end=0.1, kernel=fast_kernel(d=1)
            )

    def test_wrong_rep_rejected(self):
        g = small_grid_2d()
        cfg = SolverConfig(grid=g, dt=0.1, t_end=0.1)
        f = transform(maxwellian(g, sigma2=1.0), "KV")
        with pytest.raises(ConfigurationError):
            step(f, cfg)

    def test_wrong_grid_rejected(self):
        g = small_grid_2d()
        other = make_grid(d=2, nx=4, nv=8, v_max=5.0)
        cfg = SolverConfig(grid=g, dt=0.1, t_end=0.1)
        with pytest.raises(ConfigurationError):
            step(maxwellian(other, sigma2=1.0), cfg)

    def test_default_dt_positive(self):
        assert DEFAULT_DT > 0


class TestPureTransport:
    def test_zero_kernel_matches_propagate(self):
        g = small_grid_2d()
        f0 = band_limited_random(g, seed=7)
        cfg = SolverConfig(grid=g, dt=0.125, t_end=0.5, kernel=None)
        traj = solve(f0, cfg, sample_times=(0.5,))
        expected = propagate(transform(f0, "XV"), 0.5)
        err = l2_norm(traj.fields[-1].with_data(traj.fields[-1].data - expected.data))
        assert err / l2_norm(expected) < 1e-12

    def test_transport_matches_analytic_shift_1d(self):
        # One spatial mode: exp(i x) psi(v) travels as exp(i (x - v t)) psi(v).
        g = make_grid(d=1, nx=8, nv=16, v_max=4.0)
        x = g.x_axis.reshape(-1, 1)
        v = g.v_axis.reshape(1, -1)
        psi = np.exp(-(v**2))
        f0 = make_field(g, "XV", np.exp(1j * x) * psi)
        t = 0.5
        cfg = SolverConfig(grid=g, dt=0.25, t_end=t, kernel=None)
        traj = solve(f0, cfg, sample_times=(t,))
        exact = np.exp(1j * (x - v * t)) * psi
        err = np.max(np.abs(traj.fields[-1].data - exact))
        assert err < 1e-12

    def test_homogeneous_data_transport_identity(self):
        g = small_grid_2d()
        f = maxwellian(g, sigma2=1.0)
        moved = propagate(f, 0.7)
        assert np.max(np.abs(moved.data - f.data)) < 1e-13


class TestStep:
    def test_homogeneous_reduces_to_collision_ode(self):
        # With no x-dependence the transports are identities, so one Strang
        # step must equal one explicit-midpoint step of df/dt = Q(f, f).
        g = small_grid_2d()
        kern = fast_kernel()
        v = g.radial(g.v_axis)
        prof = np.exp(-(v**2)) + 0.5 * np.exp(-((v - 1.5) ** 2))
        data = np.broadcast_to(
            prof.reshape((1, 1) + prof.shape), g.field_shape
        ).astype(complex)
        f = make_field(g, "XV", data)
        dt = 0.05
        cfg = SolverConfig(grid=g, dt=dt, t_end=dt, kernel=kern)
        stepped = step(f, cfg)
        k1 = _collision_rhs(f, cfg)
        half = f.with_data(f.data + 0.5 * dt * k1)
        k2 = _collision_rhs(half, cfg)
        expected = f.data + dt * k2
        scale = np.max(np.abs(expected))
        assert np.max(np.abs(stepped.data - expected)) / scale < 5e-13

    def test_lie_homogeneous_matches_midpoint_too(self):
        g = small_grid_2d()
        kern = fast_kernel()
        f = maxwellian_with_mode(g, sigma2=1.0, eps=0.0)
        dt = 0.05
        cfg = SolverConfig(grid=g, dt=dt, t_end=dt, kernel=kern, scheme="lie")
        stepped = step(f, cfg)
        k1 = _collision_rhs(f, cfg)
        half = f.with_data(f.data + 0.5 * dt * k1)
        k2 = _collision_rhs(half, cfg)
        expected = f.data + dt * k2
        scale = np.max(np.abs(expected))
        assert np.max(np.abs(stepped.data - expected)) / scale < 5e-13

    def test_maxwellian_near_stationary(self):
        # Uniform-in-x Gaussian equilibrium: the step residual is set by the
        # collision quadrature floor, far below any dynamical change.  The
        # 8-direction circle rule cancels gain against loss pointwise at
        # equilibrium; the remaining floor combines the Gaussian box-wrap
        # tail with the stepper's edge-row dealias cross term (~1e-8 at
        # this resolution).
        g = make_grid(d=2, nx=4, nv=32, v_max=8.0)
        kern = CollisionKernelSpec(d=2, gamma=0.0, n_sphere=8)
        m = maxwellian(g, sigma2=0.8)
        dt = 0.1
        cfg = SolverConfig(grid=g, dt=dt, t_end=dt, kernel=kern)
        out = step(m, cfg)
        rel = l2_norm(out.with_data(out.data - m.data)) / l2_norm(m)
        assert rel < 5e-8

    def test_realness_preserved(self):
        g = make_grid(d=2, nx=8, nv=8, v_max=4.0)
        f = band_limited_random(g, seed=3)
        assert rel_imag(f) < 1e-12
        cfg = SolverConfig(grid=g, dt=0.05, t_end=0.15, kernel=fast_kernel())
        traj = solve(f, cfg, sample_times=(0.15,))
        assert rel_imag(traj.fields[-1]) < 1e-12

    def test_mass_drift_per_step(self):
        g = small_grid_2d()
        f = band_limited_random(g, seed=11)
        cfg = SolverConfig(grid=g, dt=0.05, t_end=0.05, kernel=fast_kernel())
        m0 = mass(f)
        m1 = mass(step(transform(f, "XV"), cfg))
        assert abs(m1 - m0) / abs(m0) < 1e-8

    def test_instability_reports_step_index(self):
        g = small_grid_2d()
        kern = fast_kernel()
        data = np.ones(g.field_shape, dtype=complex)
        data[0, 0, 0, 0] = np.nan
        f = make_field(g, "XV", data)
        cfg = SolverConfig(grid=g, dt=0.1, t_end=0.1, kernel=kern)
        with pytest.raises(InstabilityError, match="step 0"):
            step(f, cfg)

    @pytest.mark.filterwarnings("ignore::RuntimeWarning")
    def test_overflow_detected(self):
        g = small_grid_2d()
        kern = fast_kernel()
        f = maxwellian(g, sigma2=1.0)
        cfg = SolverConfig(grid=g, dt=1e160, t_end=1e160, kernel=kern)
        with pytest.raises(InstabilityError):
            step(f, cfg)


class TestSolve:
    def test_t_end_zero_returns_initial(self):
        g = small_grid_2d()
        f = maxwellian(g, sigma2=1.0)
        cfg = SolverConfig(grid=g, dt=0.1, t_end=0.0, kernel=fast_kernel())
        traj = solve(f, cfg)
        assert traj.times == (0.0,)
        assert np.array_equal(traj.fields[0].data, f.data)

    def test_sample_times_snap_to_steps(self):
        g = small_grid_2d()
        f = maxwellian(g, sigma2=1.0)
        cfg = SolverConfig(grid=g, dt=0.25, t_end=1.0, kernel=None)
        traj = solve(f, cfg, sample_times=(0.1, 0.5, 0.77))
        assert traj.times == (0.0, 0.5, 0.75)

    def test_sample_time_out_of_range(self):
        g = small_grid_2d()
        f = maxwellian(g, sigma2=1.0)
        cfg = SolverConfig(grid=g, dt=0.25, t_end=1.0, kernel=None)
        with pytest.raises(ConfigurationError):
            solve(f, cfg, sample_times=(1.5,))
        with pytest.raises(ConfigurationError):
            solve(f, cfg, sample_times=())

    def test_mass_constant_d1(self):
        # d = 1 collisions vanish identically, so mass is conserved to
        # rounding; this pins the trajectory-level diagnostic.
        g = make_grid(d=1, nx=8, nv=16, v_max=4.0)
        kern = CollisionKernelSpec(d=1, gamma=0.0)
        f = band_limited_random(g, seed=5)
        cfg = SolverConfig(grid=g, dt=0.05, t_end=1.0, kernel=kern)
        traj = solve(f, cfg, sample_times=np.linspace(0.0, 1.0, 5))
        m0 = mass(traj.fields[0])
        for fld in traj.fields[1:]:
            assert abs(mass(fld) - m0) / abs(m0) < 1e-7

    def test_mass_constant_d2_hundred_steps(self):
        g = small_grid_2d()
        f = band_limited_random(g, seed=9)
        cfg = SolverConfig(
            grid=g, dt=0.01, t_end=1.0, kernel=fast_kernel()
        )
        traj = solve(f, cfg, sample_times=(0.0, 0.5, 1.0))
        m0 = mass(traj.fields[0])
        for fld in traj.fields[1:]:
            assert abs(mass(fld) - m0) / abs(m0) < 1e-7

    def test_bitwise_deterministic(self):
        g = small_grid_2d()
        f = band_limited_random(g, seed=2)
        cfg = SolverConfig(grid=g, dt=0.05, t_end=0.2, kernel=fast_kernel())
        a = solve(f, cfg, sample_times=(0.2,)).fields[-1]
        b = solve(f, cfg, sample_times=(0.2,)).fields[-1]
        assert np.array_equal(a.data, b.data)

    def test_strang_order_two(self):
        g = small_grid_2d()
        f = maxwellian_with_mode(g, sigma2=1.0, eps=0.3)
        cfg = SolverConfig(
            grid=g, dt=0.1, t_end=0.4, kernel=fast_kernel(), scheme="strang"
        )
        result = richardson_order(f, cfg)
        assert 1.8 <= result["order"] <= 2.2

    def test_lie_order_one(self):
        g = small_grid_2d()
        f = maxwellian_with_mode(g, sigma2=1.0, eps=0.3)
        cfg = SolverConfig(
            grid=g, dt=0.1, t_end=0.4, kernel=fast_kernel(), scheme="lie"
        )
        result = richardson_order(f, cfg)
        assert 0.8 <= result["order"] <= 1.2


class TestUniqueness:
    def test_identical_configs_zero_gap(self):
        g = small_grid_2d()
        f = band_limited_random(g, seed=4)
        cfg = SolverConfig(grid=g, dt=0.1, t_end=0.4, kernel=fast_kernel())
        table = uniqueness_experiment(f, cfg, cfg, T=0.4)
        assert table["sup_gap_l2"] == 0.0
        assert table["sup_gap_sobolev"] == 0.0

    def test_gap_ratio_near_four(self):
        g = small_grid_2d()
        f = maxwellian_with_mode(g, sigma2=1.0, eps=0.3)
        kern = fast_kernel()

        def cfg(dt):
            return SolverConfig(grid=g, dt=dt, t_end=0.4, kernel=kern)

        coarse = uniqueness_experiment(f, cfg(0.1), cfg(0.05), T=0.4)
        fine = uniqueness_experiment(f, cfg(0.05), cfg(0.025), T=0.4)
        ratio = coarse["sup_gap_l2"] / fine["sup_gap_l2"]
        assert 3.0 <= ratio <= 5.0

    def test_grid_mismatch_rejected(self):
        g = small_grid_2d()
        other = make_grid(d=2, nx=4, nv=8, v_max=5.0)
        f = maxwellian(g, sigma2=1.0)
        cfg_a = SolverConfig(grid=g, dt=0.1, t_end=0.2, kernel=None)
        cfg_b = SolverConfig(grid=other, dt=0.1, t_end=0.2, kernel=None)
        with pytest.raises(ConfigurationError):
            uniqueness_experiment(f, cfg_a, cfg_b, T=0.2)

    def test_horizon_mismatch_rejected(self):
        g = small_grid_2d()
        f = maxwellian(g, sigma2=1.0)
        cfg = SolverConfig(grid=g, dt=0.1, t_end=0.2, kernel=None)
        with pytest.raises(ConfigurationError):
            uniqueness_experiment(f, cfg, cfg, T=0.4)


class TestInitialData:
    def test_maxwellian_mass_and_realness(self):
        g = make_grid(d=2, nx=4, nv=32, v_max=8.0)
        m = maxwellian(g, rho=1.3, sigma2=0.8)
        assert rel_imag(m) == 0.0
        expected = 1.3 * (2.0 * math.pi) ** 2
        assert abs(mass(m) - expected) / expected < 1e-9

    def test_maxwellian_bulk_velocity(self):
        g = make_grid(d=2, nx=4, nv=32, v_max=8.0)
        m = maxwellian(g, sigma2=0.8, u=(0.5, -0.25))
        v = g.v_axis
        w = np.real(np.sum(m.data, axis=(0, 1)))
        mean0 = float(np.sum(w * v.reshape(-1, 1)) / np.sum(w))
        mean1 = float(np.sum(w * v.reshape(1, -1)) / np.sum(w))
        assert abs(mean0 - 0.5) < 1e-9
        assert abs(mean1 + 0.25) < 1e-9

    def test_maxwellian_validation(self):
        g = small_grid_2d()
        with pytest.raises(ConfigurationError):
            maxwellian(g, sigma2=0.0)
        with pytest.raises(ConfigurationError):
            maxwellian(g, sigma2=1.0, u=(1.0,))

    def test_mode_perturbation_keeps_mass(self):
        g = small_grid_2d()
        base = maxwellian(g, sigma2=1.0)
        pert = maxwellian_with_mode(g, sigma2=1.0, eps=0.2, mode=1)
        assert abs(mass(pert) - mass(base)) / abs(mass(base)) < 1e-12

    def test_band_limited_norm_and_realness(self):
        g = make_grid(d=2, nx=8, nv=8, v_max=4.0)
        f = band_limited_random(g, seed=1, s=0.8, r=1.3, target_norm=2.5)
        spec = NormSpec(kind="Sobolev-HsHr", s=0.8, r=1.3)
        got = norm(transform(f, "KV"), spec)
        assert abs(got - 2.5) / 2.5 < 1e-12
        assert rel_imag(f) < 1e-12

    def test_band_limited_deterministic(self):
        g = small_grid_2d()
        a = band_limited_random(g, seed=42)
        b = band_limited_random(g, seed=42)
        c = band_limited_random(g, seed=43)
        assert np.array_equal(a.data, b.data)
        assert not np.array_equal(a.data, c.data)

    def test_band_limited_level_out_of_range(self):
        g = small_grid_2d()
        with pytest.raises(RangeError):
            band_limited_random(g, seed=1, level_x=8)


class TestSnapshots:
    def test_round_trip(self, tmp_path):
        g = small_grid_2d()
        f = band_limited_random(g, seed=6)
        cfg = SolverConfig(grid=g, dt=0.1, t_end=0.2, kernel=fast_kernel())
        traj = solve(f, cfg, sample_times=(0.0, 0.1, 0.2))
        bin_path, meta_path = save_trajectory(traj, tmp_path / "snap")
        assert bin_path.exists() and meta_path.exists()
        back = load_trajectory(tmp_path / "snap")
        assert back.times == traj.times
        assert back.grid == traj.grid
        for fa, fb in zip(traj.fields, back.fields):
            assert np.array_equal(fa.data, fb.data)

    def test_version_guard(self, tmp_path):
        import json

        g = small_grid_2d()
        f = maxwellian(g, sigma2=1.0)
        cfg = SolverConfig(grid=g, dt=0.1, t_end=0.0)
        traj = solve(f, cfg)
        _, meta_path = save_trajectory(traj, tmp_path / "snap")
        meta = json.loads(meta_path.read_text(encoding="utf-8"))
        meta["convention_version"] = "other-conventions-0"
        meta_path.write_text(json.dumps(meta), encoding="utf-8")
        with pytest.raises(ConfigurationError):
            load_trajectory(tmp_path / "snap")
