"""Cost-reduction extensions for large output dimensions.

Output domain decomposition trains one ROM per contiguous output block,
each at its own sampling period; the assembled system is block-diagonal
in the states, so the blocks integrate independently and exactly.
Tangential interpolation compresses the Markov samples onto dominant
left/right directions before Hankel assembly and recovers the original
input/output dimensions afterwards.
"""

from __future__ import annotations

from dataclasses import dataclass
from math import gcd

import numpy as np
import scipy.linalg as sla

from .errors import ConfigurationError, RankError
from .lti import (
    BalancedROM,
    RANK_FLOOR,
    Trajectory,
    apply_sign_convention,
    simulate_discrete,
)
from .era import (
    MarkovSequence,
    build_hankel,
    default_block_split,
    era_rom,
    hankel_svd,
)

__all__ = [
    "PartitionBlock",
    "OutputPartition",
    "DDRom",
    "DDSimulation",
    "TangentialProjection",
    "train_dd",
    "simulate_dd",
    "fit_tangential",
    "project_markov",
    "recover_rom",
]


@dataclass(frozen=True)
class PartitionBlock:
    """One contiguous output range with its own sampling period and
    rank selector (give ``rank`` or ``energy``, or neither for the
    energy default)."""

    name: str
    start: int
    stop: int
    sample_period: float
    rank: int = None
    energy: float = None

    def __post_init__(self):
        if self.stop <= self.start or self.start < 0:
            raise ConfigurationError("block %r has empty or negative range"
                                     % (self.name,))
        if not (float(self.sample_period) > 0):
            raise ConfigurationError("block %r needs a positive period"
                                     % (self.name,))
        if self.rank is not None and self.energy is not None:
            raise ConfigurationError("block %r: give rank or energy, "
                                     "not both" % (self.name,))
        object.__setattr__(self, "sample_period", float(self.sample_period))

    @property
    def size(self):
        return self.stop - self.start


@dataclass(frozen=True)
class OutputPartition:
    """Ordered contiguous blocks covering all q outputs exactly.

    Every block period must be a positive integer multiple of
    ``base_period``.
    """

    blocks: tuple
    base_period: float

    def __post_init__(self):
        blocks = tuple(self.blocks)
        if not blocks:
            raise ConfigurationError("partition needs at least one block")
        if not (float(self.base_period) > 0):
            raise ConfigurationError("base_period must be positive")
        cursor = 0
        for blk in blocks:
            if blk.start != cursor:
                raise ConfigurationError(
                    "block %r starts at %d, expected %d (blocks must "
                    "tile the outputs in order)" % (blk.name, blk.start,
                                                    cursor))
            cursor = blk.stop
            self._ratio(blk)
        object.__setattr__(self, "blocks", blocks)
        object.__setattr__(self, "base_period", float(self.base_period))

    def _ratio(self, blk):
        ratio = blk.sample_period / float(self.base_period)
        nearest = int(round(ratio))
        if nearest < 1 or abs(ratio - nearest) > 1e-9 * nearest:
            raise ConfigurationError(
                "block %r period %g is not an integer multiple of the "
                "base period %g" % (blk.name, blk.sample_period,
                                    self.base_period))
        return nearest

    @property
    def q(self):
        return self.blocks[-1].stop

    def period_ratios(self):
        return [self._ratio(blk) for blk in self.blocks]


@dataclass(frozen=True)
class DDRom:
    """Per-block ROMs of an output partition.

    The assembled system (block-diagonal A and C, stacked B) is only
    formed on request by :meth:`assembled`.
    """

    block_roms: tuple
    partition: OutputPartition

    def __post_init__(self):
        roms = tuple(self.block_roms)
        if len(roms) != len(self.partition.blocks):
            raise ConfigurationError("one ROM per partition block required")
        for rom, blk in zip(roms, self.partition.blocks):
            if rom.c_r.shape[0] != blk.size:
                raise ConfigurationError(
                    "block %r ROM has %d outputs, range has %d"
                    % (blk.name, rom.c_r.shape[0], blk.size))
        object.__setattr__(self, "block_roms", roms)

    def assembled(self):
        """Dense (A, B, C) of the block-assembled system, verified
        against the per-block matrices."""
        a = sla.block_diag(*[rom.a_r for rom in self.block_roms])
        b = np.vstack([rom.b_r for rom in self.block_roms])
        c = sla.block_diag(*[rom.c_r for rom in self.block_roms])
        col = 0
        row = 0
        for rom in self.block_roms:
            r = rom.order
            qi = rom.c_r.shape[0]
            ok = (np.array_equal(a[col:col + r, col:col + r], rom.a_r)
                  and np.array_equal(b[col:col + r], rom.b_r)
                  and np.array_equal(c[row:row + qi, col:col + r], rom.c_r))
            if not ok:
                raise ConfigurationError("assembled system does not "
                                         "reproduce its blocks")
            col += r
            row += qi
        return a, b, c


@dataclass(frozen=True)
class DDSimulation:
    """Per-block trajectories plus the merged output record."""

    block_trajectories: tuple
    merged_times: np.ndarray
    merged_outputs: np.ndarray


@dataclass(frozen=True)
class TangentialProjection:
    """Orthonormal left/right tangential direction bases."""

    left_basis: np.ndarray
    right_basis: np.ndarray
    retained_energies: tuple

    def __post_init__(self):
        w1 = np.asarray(self.left_basis, dtype=float)
        w2 = np.asarray(self.right_basis, dtype=float)
        for name, w in (("left_basis", w1), ("right_basis", w2)):
            if w.ndim != 2:
                raise ConfigurationError("%s must be a matrix" % name)
            gram = w.T @ w
            if np.max(np.abs(gram - np.eye(w.shape[1]))) > 1e-10:
                raise ConfigurationError("%s is not orthonormal to 1e-10"
                                         % name)
        w1.setflags(write=False)
        w2.setflags(write=False)
        object.__setattr__(self, "left_basis", w1)
        object.__setattr__(self, "right_basis", w2)
        object.__setattr__(self, "retained_energies",
                           tuple(float(e) for e in self.retained_energies))

    @property
    def l1(self):
        return self.left_basis.shape[1]

    @property
    def l2(self):
        return self.right_basis.shape[1]


# ---------------------------------------------------------------------------
# output domain decomposition


def train_dd(sources, partition, m_o=None, m_p=None):
    """Run the identification pipeline independently per output block.

    ``sources[i]`` must be the Markov sequence of block i — its output
    rows only, sampled at the block's own period.  Hankel split
    defaults to the square rule per block.
    """
    if len(sources) != len(partition.blocks):
        raise ConfigurationError("need one Markov sequence per block "
                                 "(%d blocks, %d sequences)"
                                 % (len(partition.blocks), len(sources)))
    roms = []
    for seq, blk in zip(sources, partition.blocks):
        if seq.q != blk.size:
            raise ConfigurationError(
                "block %r expects %d outputs, sequence has %d"
                % (blk.name, blk.size, seq.q))
        if abs(seq.sample_period - blk.sample_period) \
                > 1e-9 * blk.sample_period:
            raise ConfigurationError(
                "block %r expects period %g, sequence has %g"
                % (blk.name, blk.sample_period, seq.sample_period))
        pair = build_hankel(seq, m_o=m_o, m_p=m_p)
        triple = hankel_svd(pair, rank=blk.rank, energy=blk.energy)
        roms.append(era_rom(pair, triple, seq.sample_period))
    return DDRom(block_roms=tuple(roms), partition=partition)


def _lcm(values):
    out = 1
    for v in values:
        out = out * v // gcd(out, v)
    return out


def simulate_dd(rom, input_signal, t_final):
    """Advance each block ROM on its own time grid; merge outputs on
    the coarsest common grid.

    The input signal is sampled on each block's grid with zero-order
    hold.  An array input is interpreted on the finest block grid and
    subsampled for coarser blocks.  Because the assembled system is
    block-diagonal, integrating blocks independently is exact, not an
    approximation.
    """
    partition = rom.partition
    ratios = partition.period_ratios()
    finest = min(ratios)
    trajectories = []
    for block_rom, blk, ratio in zip(rom.block_roms, partition.blocks,
                                     ratios):
        n_steps = int(round(t_final / blk.sample_period))
        if n_steps < 1:
            raise ConfigurationError("t_final shorter than block %r period"
                                     % (blk.name,))
        if hasattr(input_signal, "render") or input_signal is None:
            u = input_signal
        else:
            fine = np.asarray(input_signal, dtype=float)
            if fine.ndim == 1:
                fine = fine.reshape(-1, 1)
            stride = ratio // finest
            if ratio % finest:
                raise ConfigurationError(
                    "block %r period is not commensurate with the finest "
                    "block grid" % (blk.name,))
            u = fine[::stride]
        trajectories.append(simulate_discrete(block_rom, u, n_steps))

    merge_ratio = _lcm(ratios)
    merge_period = merge_ratio * partition.base_period
    n_merge = int(t_final / merge_period + 1e-9)
    merged_times = np.arange(n_merge + 1) * merge_period
    merged = np.empty((n_merge + 1, partition.q))
    for traj, blk, ratio in zip(trajectories, partition.blocks, ratios):
        stride = merge_ratio // ratio
        picks = traj.outputs[::stride][:n_merge + 1]
        if picks.shape[0] != n_merge + 1:
            raise ConfigurationError(
                "block %r trajectory too short for the merged grid"
                % (blk.name,))
        merged[:, blk.start:blk.stop] = picks
    return DDSimulation(block_trajectories=tuple(trajectories),
                        merged_times=merged_times, merged_outputs=merged)


# ---------------------------------------------------------------------------
# tangential interpolation


def fit_tangential(seq, l1, l2):
    """Dominant tangential directions of a Markov sequence.

    ``Q_L`` concatenates all samples horizontally (q x Np) and ``Q_R``
    vertically (Nq x p).  The left basis W1 holds the leading ``l1``
    left singular vectors of Q_L, the right basis W2 the leading ``l2``
    right singular vectors of Q_R.  Retained energies are Frobenius
    fractions (sum of squared retained singular values over the total).
    """
    if not (1 <= l1 <= seq.q):
        raise ConfigurationError("l1 must be in 1..%d, got %d"
                                 % (seq.q, l1))
    if not (1 <= l2 <= seq.p):
        raise ConfigurationError("l2 must be in 1..%d, got %d"
                                 % (seq.p, l2))
    arr = seq.samples
    q_left = np.concatenate(list(arr), axis=1)
    q_right = np.concatenate(list(arr), axis=0)

    u_l, s_l, vt_l = sla.svd(q_left, full_matrices=False)
    u_l, _ = apply_sign_convention(u_l, vt_l)
    u_r, s_r, vt_r = sla.svd(q_right, full_matrices=False)
    _, vt_r = apply_sign_convention(u_r, vt_r)

    for name, s, l in (("l1", s_l, l1), ("l2", s_r, l2)):
        if s.size == 0 or s[0] <= 0:
            raise RankError("Markov sequence is identically zero",
                            numerical_rank=0)
        rank = int(np.count_nonzero(s > RANK_FLOOR * s[0]))
        if l > rank:
            raise RankError("%s = %d exceeds numerical rank %d"
                            % (name, l, rank), numerical_rank=rank)

    energy_left = float(np.sum(s_l[:l1] ** 2) / np.sum(s_l ** 2))
    energy_right = float(np.sum(s_r[:l2] ** 2) / np.sum(s_r ** 2))
    return TangentialProjection(left_basis=u_l[:, :l1],
                                right_basis=vt_r[:l2].T.copy(),
                                retained_energies=(energy_left,
                                                   energy_right))


def project_markov(seq, proj):
    """Two-sided compression ``h_hat = W1^T h W2`` of every sample."""
    if proj.left_basis.shape[0] != seq.q \
            or proj.right_basis.shape[0] != seq.p:
        raise ConfigurationError(
            "projection bases (%d, %d) do not match sequence dims (%d, %d)"
            % (proj.left_basis.shape[0], proj.right_basis.shape[0],
               seq.q, seq.p))
    compressed = np.einsum("il,klm,mj->kij", proj.left_basis.T,
                           seq.samples, proj.right_basis)
    return MarkovSequence(samples=compressed,
                          sample_period=seq.sample_period)


def recover_rom(projected_rom, proj):
    """Restore original input/output dimensions of a ROM identified on
    tangentially projected data: ``B_r = B_hat W2^T``,
    ``C_r = W1 C_hat``."""
    if projected_rom.b_r.shape[1] != proj.l2 \
            or projected_rom.c_r.shape[0] != proj.l1:
        raise ConfigurationError("ROM dimensions do not match the "
                                 "projection bases")
    return BalancedROM(a_r=projected_rom.a_r,
                       b_r=projected_rom.b_r @ proj.right_basis.T,
                       c_r=proj.left_basis @ projected_rom.c_r,
                       hsv=projected_rom.hsv,
                       provenance="era_tangential",
                       step=projected_rom.step)
