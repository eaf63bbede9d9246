"""Snapshot containers, blockwise scaling, and POD bases."""

import numpy as np
import pytest

from conftest import random_orthonormal

from romkit import (
    DegenerateBlockError,
    SnapshotMatrix,
    apply_sign_convention,
    compute_scaling,
    pod,
    pod_blockwise,
    project,
    reconstruct,
)


def two_block_snaps(rng, rows=6, cols=20, step=0.1):
    data = rng.normal(size=(2 * rows, cols))
    blocks = (("u", (0, rows)), ("v", (rows, 2 * rows)))
    return SnapshotMatrix(data=data, step=step, variable_blocks=blocks)


class TestScaling:
    def test_mean_square_four_gives_quarter(self):
        data = np.full((3, 5), 2.0)
        data[1] = -2.0
        snaps = SnapshotMatrix(data=data, step=1.0)
        np.testing.assert_allclose(compute_scaling(snaps), [0.25])

    def test_per_block_values(self, rng):
        snaps = two_block_snaps(rng)
        s = compute_scaling(snaps)
        for k, (_, (start, stop)) in enumerate(snaps.variable_blocks):
            alpha = np.mean(snaps.data[start:stop] ** 2)
            np.testing.assert_allclose(s[k], 1.0 / alpha, rtol=1e-12)

    def test_zero_block_is_degenerate(self):
        data = np.zeros((4, 6))
        data[:2] = 1.0
        blocks = (("live", (0, 2)), ("dead", (2, 4)))
        snaps = SnapshotMatrix(data=data, step=1.0, variable_blocks=blocks)
        with pytest.raises(DegenerateBlockError):
            compute_scaling(snaps)

    def test_default_block_covers_the_whole_state(self, rng):
        snaps = SnapshotMatrix(data=rng.normal(size=(5, 7)), step=0.5)
        assert snaps.variable_blocks == (("state", (0, 5)),)
        assert snaps.block_rows("state") == (0, 5)

    def test_restrict_extracts_one_variable(self, rng):
        snaps = two_block_snaps(rng, rows=4)
        sub = snaps.restrict("v")
        np.testing.assert_array_equal(sub.data, snaps.data[4:8])
        assert sub.variable_blocks == (("v", (0, 4)),)


class TestPod:
    def test_modes_are_orthonormal(self, rng):
        snaps = two_block_snaps(rng)
        basis = pod(snaps, mode_count=5)
        gram = basis.modes.T @ basis.modes
        np.testing.assert_allclose(gram, np.eye(5), atol=1e-12)

    def test_truncation_error_matches_discarded_energy(self, rng):
        data = rng.normal(size=(8, 30))
        snaps = SnapshotMatrix(data=data, step=1.0)
        sv = np.linalg.svd(data, compute_uv=False)
        for k in (2, 5):
            basis = pod(snaps, mode_count=k, scaling=np.ones(1))
            resid = data - basis.modes @ (basis.modes.T @ data)
            expect = np.sqrt(np.sum(sv[k:] ** 2))
            np.testing.assert_allclose(np.linalg.norm(resid), expect,
                                       rtol=1e-10)

    def test_sign_convention_makes_modes_canonical(self, rng):
        data = rng.normal(size=(7, 15))
        a = pod(SnapshotMatrix(data=data, step=1.0), mode_count=4,
                scaling=np.ones(1))
        b = pod(SnapshotMatrix(data=-data, step=1.0), mode_count=4,
                scaling=np.ones(1))
        np.testing.assert_allclose(a.modes, b.modes, atol=1e-12)
        for j in range(4):
            lead = np.argmax(np.abs(a.modes[:, j]))
            assert a.modes[lead, j] > 0

    def test_apply_sign_convention_flips_pairs_consistently(self, rng):
        m = rng.normal(size=(6, 4))
        u, s, vt = np.linalg.svd(m, full_matrices=False)
        u2, vt2 = apply_sign_convention(u, vt)
        np.testing.assert_allclose(u2 @ np.diag(s) @ vt2, m, atol=1e-12)
        for j in range(u2.shape[1]):
            lead = np.argmax(np.abs(u2[:, j]))
            assert u2[lead, j] > 0

    def test_energy_selection_counts_singular_values(self, rng):
        # Construct snapshots with known singular values 3 and 1.
        u = random_orthonormal(rng, 6, 2)
        v = random_orthonormal(rng, 10, 2)
        data = u @ np.diag([3.0, 1.0]) @ v.T
        snaps = SnapshotMatrix(data=data, step=1.0)
        basis = pod(snaps, energy=0.75, scaling=np.ones(1))
        assert basis.mode_count == 1
        basis = pod(snaps, energy=0.76, scaling=np.ones(1))
        assert basis.mode_count == 2

    def test_retained_energy_beats_random_projections(self, rng):
        data = rng.normal(size=(10, 40))
        snaps = SnapshotMatrix(data=data, step=1.0)
        basis = pod(snaps, mode_count=3, scaling=np.ones(1))
        captured = np.linalg.norm(basis.modes.T @ data)
        for _ in range(20):
            r = random_orthonormal(rng, 10, 3)
            assert np.linalg.norm(r.T @ data) <= captured + 1e-12

    def test_scaling_equivariance(self, rng):
        snaps = two_block_snaps(rng, rows=5)
        s = compute_scaling(snaps)
        basis = pod(snaps, mode_count=4)
        sv = basis.scaling_vector()
        scaled = SnapshotMatrix(data=sv[:, None] * snaps.data, step=0.1,
                                variable_blocks=snaps.variable_blocks)
        unit = pod(scaled, mode_count=4, scaling=np.ones(2))
        np.testing.assert_allclose(basis.scaling, s, rtol=1e-12)
        np.testing.assert_allclose(basis.modes, unit.modes, atol=1e-10)
        np.testing.assert_allclose(basis.singular_values,
                                   unit.singular_values, rtol=1e-10)

    def test_reference_state_centers_the_data(self, rng):
        shift = rng.normal(size=6)
        u = random_orthonormal(rng, 6, 2)
        coeffs = rng.normal(size=(2, 25))
        data = shift[:, None] + u @ coeffs
        snaps = SnapshotMatrix(data=data, step=1.0)
        basis = pod(snaps, mode_count=2, reference_state=shift,
                    scaling=np.ones(1))
        recon = reconstruct(basis, project(basis, data))
        np.testing.assert_allclose(recon, data, atol=1e-10)

    def test_project_reconstruct_roundtrip(self, rng):
        snaps = two_block_snaps(rng)
        basis = pod(snaps, mode_count=6)
        q_hat = rng.normal(size=(6, 3))
        states = reconstruct(basis, q_hat)
        back = project(basis, states)
        np.testing.assert_allclose(back, q_hat, atol=1e-10)
        one = reconstruct(basis, q_hat[:, 0])
        assert one.shape == (12,)

    def test_deterministic_across_calls(self, rng):
        snaps = two_block_snaps(rng)
        a = pod(snaps, mode_count=4)
        b = pod(SnapshotMatrix(data=snaps.data.copy(), step=0.1,
                               variable_blocks=snaps.variable_blocks),
                mode_count=4)
        np.testing.assert_array_equal(a.modes, b.modes)

    def test_mode_count_and_energy_are_exclusive(self, rng):
        snaps = two_block_snaps(rng)
        with pytest.raises(Exception):
            pod(snaps, mode_count=2, energy=0.9)


class TestPodBlockwise:
    def test_modes_are_block_diagonal_and_orthonormal(self, rng):
        snaps = two_block_snaps(rng, rows=5)
        basis = pod_blockwise(snaps, mode_count=2)
        assert basis.mode_count == 4
        gram = basis.modes.T @ basis.modes
        np.testing.assert_allclose(gram, np.eye(4), atol=1e-12)
        for j in range(basis.mode_count):
            col = basis.modes[:, j]
            live_u = np.linalg.norm(col[:5]) > 0
            live_v = np.linalg.norm(col[5:]) > 0
            assert live_u != live_v

    def test_modes_sorted_by_singular_value(self, rng):
        snaps = two_block_snaps(rng, rows=5)
        basis = pod_blockwise(snaps, mode_count=2)
        assert np.all(np.diff(basis.singular_values) <= 1e-12)

    def test_blockwise_matches_per_block_pod(self, rng):
        snaps = two_block_snaps(rng, rows=4)
        joint = pod_blockwise(snaps, mode_count=1)
        for name, (start, stop) in snaps.variable_blocks:
            solo = pod(snaps.restrict(name), mode_count=1)
            col = None
            for j in range(joint.mode_count):
                candidate = joint.modes[start:stop, j]
                if np.linalg.norm(candidate) > 0.5:
                    col = candidate
            np.testing.assert_allclose(col, solo.modes[:, 0], atol=1e-12)
