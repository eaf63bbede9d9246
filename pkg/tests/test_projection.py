"""Galerkin and LSPG baselines plus the shared error metric."""

import numpy as np
import pytest

from conftest import random_continuous

from romkit import (
    ConditioningError,
    ContinuousLTI,
    DivergenceError,
    SnapshotMatrix,
    Trajectory,
    build_galerkin,
    build_lspg,
    pod,
    relative_error,
    simulate_galerkin,
    simulate_lspg,
    simulate_rk3,
    step_galerkin_euler,
    step_lspg,
)


def make_basis(rng, n, r, scaled=True):
    data = rng.normal(size=(n, 4 * n))
    snaps = SnapshotMatrix(data=data, step=1.0)
    scaling = None if scaled else np.ones(1)
    return pod(snaps, mode_count=r, scaling=scaling)


def identity_basis(n):
    data = np.diag(np.arange(n, 0, -1.0))
    snaps = SnapshotMatrix(data=data, step=1.0)
    return pod(snaps, mode_count=n, scaling=np.ones(1))


class TestGalerkinBuild:
    def test_reduced_operators_match_triple_product(self, rng):
        sys = random_continuous(rng, n=7, margin=0.4, p=2)
        basis = make_basis(rng, 7, 3)
        rom = build_galerkin(sys, basis)
        s = basis.scaling_vector()
        trial = basis.modes / s[:, None]
        test = s[:, None] * basis.modes
        np.testing.assert_allclose(rom.a_reduced,
                                   test.T @ sys.a_matrix @ trial,
                                   atol=1e-10 * abs(rom.a_reduced).max())
        np.testing.assert_allclose(rom.b_reduced, test.T @ sys.b_matrix,
                                   atol=1e-10)
        assert rom.scaling_applied

    def test_identity_basis_reproduces_the_full_model(self, rng):
        sys = random_continuous(rng, n=4, margin=0.5)
        rom = build_galerkin(sys, identity_basis(4))
        x0 = rng.normal(size=4)
        dt, t_final = 1e-3, 0.3
        steps = int(round(t_final / dt))
        u = rng.normal(size=steps)
        red = simulate_galerkin(rom, u, dt, t_final, x0=x0)
        full = simulate_rk3(sys, u, dt, t_final, x0=x0)
        np.testing.assert_allclose(red.outputs, full.states,
                                   atol=1e-12 * abs(full.states).max())

    def test_dimension_mismatch_is_rejected(self, rng):
        sys = random_continuous(rng, n=5)
        with pytest.raises(Exception):
            build_galerkin(sys, make_basis(rng, 4, 2))


class TestLspg:
    def test_beta0_zero_is_bit_identical_to_explicit_galerkin(self, rng):
        for _ in range(5):
            n = int(rng.integers(3, 9))
            r = int(rng.integers(1, n))
            sys = random_continuous(rng, n=n, margin=0.4)
            basis = make_basis(rng, n, r)
            dt, t_final = 1e-3, 0.05
            steps = int(round(t_final / dt))
            u = rng.normal(size=steps)
            gal = build_galerkin(sys, basis)
            lspg = build_lspg(sys, basis, dt, beta0=0)
            a = simulate_galerkin(gal, u, dt, t_final, scheme="euler")
            b = simulate_lspg(lspg, u, t_final)
            assert np.array_equal(a.states, b.states)
            assert np.array_equal(a.outputs, b.outputs)

    def test_implicit_step_satisfies_stationarity(self, rng):
        sys = random_continuous(rng, n=8, margin=0.5)
        basis = make_basis(rng, 8, 4)
        dt = 1e-3
        rom = build_lspg(sys, basis, dt, beta0=1)
        s = basis.scaling_vector()
        v = basis.modes
        w = rom.test_basis
        scaled_a = s[:, None] * sys.a_matrix / s[None, :]
        scaled_b = s[:, None] * sys.b_matrix
        q = rng.normal(size=4)
        for k in range(5):
            u = rng.normal(size=1)
            q_new = step_lspg(rom, q, u)
            resid = (v @ q_new - v @ q
                     - dt * (scaled_a @ (v @ q_new) + scaled_b @ u))
            scale = (np.linalg.norm(w) *
                     max(np.linalg.norm(v @ q_new), np.linalg.norm(resid),
                         1.0))
            assert np.linalg.norm(w.T @ resid) <= 1e-10 * scale
            q = q_new

    def test_one_step_difference_is_second_order(self, rng):
        sys = random_continuous(rng, n=8, margin=0.5)
        basis = make_basis(rng, 8, 4)
        gal = build_galerkin(sys, basis)
        q0 = gal.project_initial(rng.normal(size=8))
        u = np.array([0.7])
        diffs = []
        dts = (1e-3, 1e-4, 1e-5)
        for dt in dts:
            lspg = build_lspg(sys, basis, dt, beta0=1)
            explicit = step_galerkin_euler(gal, q0, u, dt)
            implicit = step_lspg(lspg, q0, u)
            diffs.append(np.linalg.norm(implicit - explicit))
        slope = np.polyfit(np.log(dts), np.log(diffs), 1)[0]
        assert slope >= 1.9, (slope, diffs)

    def test_implicit_scheme_is_stable_beyond_the_explicit_limit(self):
        sys = ContinuousLTI(np.diag([-1.0, -1000.0]),
                            np.zeros((2, 1)), np.eye(2))
        basis = identity_basis(2)
        dt, t_final = 0.1, 10.0
        steps = int(round(t_final / dt))
        u = np.zeros(steps)
        x0 = np.array([1.0, 1.0])
        lspg = build_lspg(sys, basis, dt, beta0=1)
        traj = simulate_lspg(lspg, u, t_final, x0=x0)
        assert np.all(np.isfinite(traj.outputs))
        assert np.linalg.norm(traj.outputs[-1]) < 1e-3
        gal = build_galerkin(sys, basis)
        with pytest.raises(DivergenceError) as info:
            simulate_galerkin(gal, u, dt, t_final, x0=x0, scheme="euler")
        assert info.value.step_index is not None

    def test_start_from_rest_with_zero_first_input_is_not_divergence(
            self, rng):
        # A sinusoid sampled from t = 0 has u[0] = 0, so the first step
        # from rest stays at exactly zero; the divergence guard must
        # anchor its reference scale to the first nonzero state instead.
        sys = random_continuous(rng, n=5, margin=0.5)
        basis = make_basis(rng, 5, 3)
        dt, t_final = 1e-3, 0.2
        steps = int(round(t_final / dt))
        u = np.sin(2 * np.pi * 5.0 * np.arange(steps) * dt)
        assert u[0] == 0.0
        gal = build_galerkin(sys, basis)
        traj = simulate_galerkin(gal, u, dt, t_final)
        assert np.all(np.isfinite(traj.outputs))
        lspg = build_lspg(sys, basis, dt, beta0=1)
        traj = simulate_lspg(lspg, u, t_final)
        assert np.all(np.isfinite(traj.outputs))

    def test_singular_implicit_matrix_is_a_conditioning_error(self):
        # dt * a = 1 makes the backward-Euler matrix exactly singular.
        sys = ContinuousLTI(np.array([[10.0]]), np.array([[1.0]]),
                            np.array([[1.0]]))
        basis = identity_basis(1)
        with pytest.raises(ConditioningError):
            rom = build_lspg(sys, basis, 0.1, beta0=1)
            step_lspg(rom, np.zeros(1), np.array([1.0]))

    def test_beta0_must_be_zero_or_one(self, rng):
        sys = random_continuous(rng, n=3)
        basis = make_basis(rng, 3, 2)
        with pytest.raises(Exception):
            build_lspg(sys, basis, 1e-3, beta0=2)


def make_traj(outputs, dt=0.1):
    outputs = np.asarray(outputs, dtype=float)
    times = np.arange(outputs.shape[0]) * dt
    return Trajectory(times=times, states=outputs, outputs=outputs)


class TestRelativeError:
    def test_identical_trajectories_have_zero_error(self, rng):
        y = rng.normal(size=(10, 3))
        err = relative_error(make_traj(y), make_traj(y.copy()))
        np.testing.assert_array_equal(err, np.zeros(10))

    def test_doubled_signal_has_unit_error(self, rng):
        y = rng.normal(size=(10, 3))
        err = relative_error(make_traj(y), make_traj(2.0 * y))
        np.testing.assert_allclose(err, np.ones(10), rtol=1e-12)

    def test_zero_reference_steps_are_marked_absent(self):
        y = np.ones((4, 2))
        y[2] = 0.0
        approx = np.ones((4, 2))
        err = relative_error(make_traj(y), make_traj(approx))
        assert np.isnan(err[2])
        np.testing.assert_array_equal(err[[0, 1, 3]], np.zeros(3))

    def test_tail_exclusion_drops_block_tails(self):
        y = np.ones((5, 6))
        approx = y.copy()
        # corrupt only the last cell of each of the two blocks
        approx[:, 2] += 7.0
        approx[:, 5] += 7.0
        blocks = (("u", (0, 3)), ("v", (3, 6)))
        raw = relative_error(make_traj(y), make_traj(approx),
                             variable_blocks=blocks)
        assert np.all(raw > 1.0)
        trimmed = relative_error(make_traj(y), make_traj(approx),
                                 exclude_tail_cells=1,
                                 variable_blocks=blocks)
        np.testing.assert_array_equal(trimmed, np.zeros(5))

    def test_cannot_exclude_a_whole_block(self):
        y = np.ones((3, 4))
        blocks = (("u", (0, 2)), ("v", (2, 4)))
        with pytest.raises(Exception):
            relative_error(make_traj(y), make_traj(y),
                           exclude_tail_cells=2, variable_blocks=blocks)

    def test_mismatched_grids_are_rejected(self, rng):
        y = rng.normal(size=(6, 2))
        with pytest.raises(Exception):
            relative_error(make_traj(y, dt=0.1), make_traj(y, dt=0.2))
