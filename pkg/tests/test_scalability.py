"""Output partitions, per-block training, and tangential projection."""

import numpy as np
import pytest

from conftest import random_discrete, random_orthonormal

from romkit import (
    ConfigurationError,
    DDRom,
    MarkovSequence,
    OutputPartition,
    PartitionBlock,
    RankError,
    build_hankel,
    era_rom,
    fit_tangential,
    hankel_svd,
    markov_parameters,
    project_markov,
    recover_rom,
    simulate_dd,
    simulate_discrete,
    train_dd,
)


def identify(seq, rank=None, energy=None):
    pair = build_hankel(seq)
    triple = hankel_svd(pair, rank=rank, energy=energy)
    return era_rom(pair, triple, seq.sample_period)


def block_sequence(seq, start, stop, stride=1):
    return MarkovSequence(samples=seq.samples[::stride, start:stop, :],
                          sample_period=seq.sample_period * stride)


class TestOutputPartition:
    def test_blocks_must_tile_the_outputs(self):
        with pytest.raises(ConfigurationError):
            OutputPartition(blocks=(
                PartitionBlock("a", 0, 2, 0.1),
                PartitionBlock("b", 3, 4, 0.1)), base_period=0.1)

    def test_periods_must_be_integer_multiples(self):
        with pytest.raises(ConfigurationError):
            OutputPartition(blocks=(
                PartitionBlock("a", 0, 2, 0.15),), base_period=0.1)

    def test_ratio_and_size_accessors(self):
        part = OutputPartition(blocks=(
            PartitionBlock("a", 0, 2, 0.1),
            PartitionBlock("b", 2, 3, 0.3)), base_period=0.1)
        assert part.q == 3
        assert part.period_ratios() == [1, 3]
        assert part.blocks[0].size == 2
        assert part.blocks[1].size == 1


class TestTrainDD:
    def test_single_block_matches_monolithic_training(self, rng):
        sys = random_discrete(rng, n=4, q=3, radius=0.6)
        seq = markov_parameters(sys, 40)
        part = OutputPartition(blocks=(
            PartitionBlock("all", 0, 3, seq.sample_period),),
            base_period=seq.sample_period)
        dd = train_dd([seq], part)
        mono = identify(seq)
        blk = dd.block_roms[0]
        assert np.array_equal(blk.a_r, mono.a_r)
        assert np.array_equal(blk.b_r, mono.b_r)
        assert np.array_equal(blk.c_r, mono.c_r)
        assert np.array_equal(blk.hsv, mono.hsv)

        u = np.zeros(20)
        u[0] = 1.0
        merged = simulate_dd(dd, u, 20 * seq.sample_period)
        direct = simulate_discrete(mono.to_lti(), u, 20)
        assert np.array_equal(merged.merged_outputs, direct.outputs)
        np.testing.assert_allclose(merged.merged_times, direct.times,
                                   rtol=1e-12)

    def test_mixed_periods_reproduce_per_block_markov_data(self, rng):
        sys = random_discrete(rng, n=4, q=3, radius=0.6)
        seq = markov_parameters(sys, 41)
        part = OutputPartition(blocks=(
            PartitionBlock("fast", 0, 2, seq.sample_period, rank=4),
            PartitionBlock("slow", 2, 3, 2 * seq.sample_period, rank=4)),
            base_period=seq.sample_period)
        fast = block_sequence(seq, 0, 2)
        slow = block_sequence(seq, 2, 3, stride=2)
        dd = train_dd([fast, slow], part)
        for blk_rom, train_seq in zip(dd.block_roms, (fast, slow)):
            rebuilt = markov_parameters(blk_rom.to_lti(), train_seq.count)
            scale = np.abs(train_seq.samples).max()
            assert np.abs(rebuilt.samples - train_seq.samples).max() \
                <= 1e-10 * scale
            assert blk_rom.step == pytest.approx(train_seq.sample_period)

    def test_merged_grid_is_the_coarsest_common_one(self, rng):
        sys = random_discrete(rng, n=3, q=3, radius=0.5)
        seq = markov_parameters(sys, 41)
        dt = seq.sample_period
        part = OutputPartition(blocks=(
            PartitionBlock("fast", 0, 2, dt, rank=3),
            PartitionBlock("slow", 2, 3, 2 * dt, rank=3)),
            base_period=dt)
        dd = train_dd([block_sequence(seq, 0, 2),
                       block_sequence(seq, 2, 3, stride=2)], part)
        n_fine = 16
        u = np.zeros(n_fine)
        u[0] = 1.0
        sim = simulate_dd(dd, u, n_fine * dt)
        np.testing.assert_allclose(np.diff(sim.merged_times), 2 * dt,
                                   rtol=1e-12)
        fast_traj, slow_traj = sim.block_trajectories
        np.testing.assert_array_equal(sim.merged_outputs[:, 0:2],
                                      fast_traj.outputs[::2])
        np.testing.assert_array_equal(sim.merged_outputs[:, 2:3],
                                      slow_traj.outputs[:len(sim.merged_times)])

    def test_source_count_and_shapes_are_validated(self, rng):
        sys = random_discrete(rng, n=3, q=3)
        seq = markov_parameters(sys, 30)
        part = OutputPartition(blocks=(
            PartitionBlock("a", 0, 2, seq.sample_period),
            PartitionBlock("b", 2, 3, seq.sample_period)),
            base_period=seq.sample_period)
        with pytest.raises(ConfigurationError):
            train_dd([seq], part)
        with pytest.raises(ConfigurationError):
            train_dd([block_sequence(seq, 0, 1),
                      block_sequence(seq, 2, 3)], part)
        wrong_period = MarkovSequence(
            samples=seq.samples[:, 2:3, :],
            sample_period=3 * seq.sample_period)
        with pytest.raises(ConfigurationError):
            train_dd([block_sequence(seq, 0, 2), wrong_period], part)

    def test_assembled_system_is_block_diagonal(self, rng):
        sys = random_discrete(rng, n=4, q=3, radius=0.6)
        seq = markov_parameters(sys, 40)
        part = OutputPartition(blocks=(
            PartitionBlock("a", 0, 2, seq.sample_period, rank=4),
            PartitionBlock("b", 2, 3, seq.sample_period, rank=4)),
            base_period=seq.sample_period)
        dd = train_dd([block_sequence(seq, 0, 2),
                       block_sequence(seq, 2, 3)], part)
        a, b, c = dd.assembled()
        orders = [rom.order for rom in dd.block_roms]
        assert a.shape == (sum(orders), sum(orders))
        assert b.shape == (sum(orders), 1)
        assert c.shape == (3, sum(orders))
        np.testing.assert_array_equal(a[:orders[0], orders[0]:], 0.0)
        np.testing.assert_array_equal(a[orders[0]:, :orders[0]], 0.0)
        np.testing.assert_array_equal(c[0:2, orders[0]:], 0.0)
        np.testing.assert_array_equal(c[2:3, :orders[0]], 0.0)


class TestTangential:
    def test_bases_are_orthonormal(self, rng):
        sys = random_discrete(rng, n=5, q=4, p=3, radius=0.6)
        seq = markov_parameters(sys, 30)
        proj = fit_tangential(seq, 2, 2)
        np.testing.assert_allclose(proj.left_basis.T @ proj.left_basis,
                                   np.eye(2), atol=1e-12)
        np.testing.assert_allclose(proj.right_basis.T @ proj.right_basis,
                                   np.eye(2), atol=1e-12)
        assert proj.l1 == 2 and proj.l2 == 2

    def test_retained_energy_uses_squared_singular_values(self, rng):
        sys = random_discrete(rng, n=5, q=4, p=3, radius=0.6)
        seq = markov_parameters(sys, 30)
        proj = fit_tangential(seq, 2, 1)
        q_left = seq.samples.transpose(1, 0, 2).reshape(4, -1)
        q_right = seq.samples.reshape(-1, 3)
        s_l = np.linalg.svd(q_left, compute_uv=False)
        s_r = np.linalg.svd(q_right, compute_uv=False)
        np.testing.assert_allclose(proj.retained_energies[0],
                                   np.sum(s_l[:2] ** 2) / np.sum(s_l ** 2),
                                   rtol=1e-12)
        np.testing.assert_allclose(proj.retained_energies[1],
                                   np.sum(s_r[:1] ** 2) / np.sum(s_r ** 2),
                                   rtol=1e-12)

    def test_projection_beats_random_directions(self, rng):
        sys = random_discrete(rng, n=5, q=4, p=2, radius=0.6)
        seq = markov_parameters(sys, 30)
        proj = fit_tangential(seq, 2, 1)
        q_left = seq.samples.transpose(1, 0, 2).reshape(4, -1)
        captured = np.linalg.norm(proj.left_basis.T @ q_left)
        for _ in range(20):
            r = random_orthonormal(rng, 4, 2)
            assert np.linalg.norm(r.T @ q_left) <= captured + 1e-12

    def test_projected_samples_are_the_two_sided_compression(self, rng):
        sys = random_discrete(rng, n=4, q=3, p=2, radius=0.6)
        seq = markov_parameters(sys, 20)
        proj = fit_tangential(seq, 2, 1)
        small = project_markov(seq, proj)
        assert small.samples.shape == (20, 2, 1)
        assert small.sample_period == seq.sample_period
        for k in range(20):
            np.testing.assert_allclose(
                small.samples[k],
                proj.left_basis.T @ seq.samples[k] @ proj.right_basis,
                atol=1e-14)

    def test_full_rank_projection_roundtrips_exactly(self, rng):
        sys = random_discrete(rng, n=4, q=3, p=2, radius=0.6)
        seq = markov_parameters(sys, 24)
        proj = fit_tangential(seq, 3, 2)
        small = project_markov(seq, proj)
        reduced = identify(small, rank=4)
        rom = recover_rom(reduced, proj)
        assert rom.provenance == "era_tangential"
        assert rom.b_r.shape == (4, 2)
        assert rom.c_r.shape == (3, 4)
        assert rom.step == pytest.approx(seq.sample_period)
        rebuilt = markov_parameters(rom.to_lti(), 24)
        scale = np.abs(seq.samples).max()
        assert np.abs(rebuilt.samples - seq.samples).max() <= 1e-10 * scale

    def test_rank_limits_are_enforced(self, rng):
        sys = random_discrete(rng, n=2, q=4, p=2, radius=0.6)
        seq = markov_parameters(sys, 20)
        with pytest.raises(ConfigurationError):
            fit_tangential(seq, 5, 1)
        with pytest.raises(RankError) as info:
            fit_tangential(seq, 3, 1)
        assert info.value.numerical_rank == 2

    def test_zero_sequence_is_rejected(self):
        seq = MarkovSequence(samples=np.zeros((6, 2, 1)),
                             sample_period=1.0)
        with pytest.raises(RankError):
            fit_tangential(seq, 1, 1)
