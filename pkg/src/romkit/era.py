"""Non-intrusive balanced truncation from impulse-response data.

The pipeline: sample Markov parameters, assemble the block Hankel and
shifted Hankel matrices, take the SVD, and read off a reduced
realization that is balanced by construction.  No adjoint simulation
and no access to the full operators is needed — the Markov samples are
the only input.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla

from .errors import (
    ConfigurationError,
    MemoryGuardError,
    RankError,
    SampleBudgetError,
)
from .lti import (
    BalancedROM,
    DiscreteLTI,
    RANK_FLOOR,
    Trajectory,
    apply_sign_convention,
)

__all__ = [
    "MarkovSequence",
    "HankelPair",
    "EraModes",
    "DEFAULT_ENERGY",
    "sample_impulse",
    "hankel_memory_estimate",
    "build_hankel",
    "hankel_svd",
    "era_rom",
    "era_modes",
]

#: Energy threshold used when no explicit rank is requested: captures
#: 99.99% of the input-output energy.
DEFAULT_ENERGY = 0.9999

#: Default cap on the combined Hankel/shifted-Hankel allocation.
DEFAULT_MEMORY_LIMIT = 8 << 30


@dataclass(frozen=True)
class MarkovSequence:
    """Uniformly sampled impulse-response matrices ``h_1 .. h_N``.

    ``samples`` is stored as an (N, q, p) array; ``samples[k]`` is
    ``h_{k+1}`` in the one-based indexing where ``h_1 = C B``.
    """

    samples: np.ndarray
    sample_period: float

    def __post_init__(self):
        raw = self.samples
        if isinstance(raw, np.ndarray) and raw.ndim == 3:
            arr = np.asarray(raw, dtype=float)
        else:
            mats = [np.atleast_2d(np.asarray(s, dtype=float)) for s in raw]
            if not mats:
                raise ConfigurationError("empty Markov sequence")
            shape = mats[0].shape
            for k, m in enumerate(mats):
                if m.shape != shape:
                    raise ConfigurationError(
                        "sample %d has shape %s, expected %s"
                        % (k, m.shape, shape))
            arr = np.stack(mats)
        if arr.shape[0] < 2:
            raise ConfigurationError("a Markov sequence needs at least two "
                                     "samples")
        if not np.all(np.isfinite(arr)):
            raise ConfigurationError("Markov samples contain non-finite "
                                     "entries")
        if not (float(self.sample_period) > 0):
            raise ConfigurationError("sample_period must be positive")
        object.__setattr__(self, "sample_period", float(self.sample_period))
        arr.setflags(write=False)
        object.__setattr__(self, "samples", arr)

    @property
    def count(self):
        return self.samples.shape[0]

    @property
    def q(self):
        return self.samples.shape[1]

    @property
    def p(self):
        return self.samples.shape[2]

    def shifted(self, offset=1):
        """The sub-sequence ``h_{1+offset} .. h_N`` as a new sequence."""
        if offset < 0 or self.count - offset < 2:
            raise ConfigurationError("cannot shift %d-sample sequence by %d"
                                     % (self.count, offset))
        return MarkovSequence(self.samples[offset:], self.sample_period)


@dataclass(frozen=True)
class HankelPair:
    """Block Hankel matrix and its one-step-shifted companion.

    Block (i, j) of ``hankel`` is ``h_{i+j-1}`` and of ``shifted`` is
    ``h_{i+j}`` (one-based block indices).
    """

    hankel: np.ndarray
    shifted: np.ndarray
    m_o: int
    m_p: int

    def __post_init__(self):
        h = np.asarray(self.hankel, dtype=float)
        hs = np.asarray(self.shifted, dtype=float)
        if h.shape != hs.shape:
            raise ConfigurationError("Hankel and shifted Hankel must share "
                                     "shape")
        if self.m_o < 1 or self.m_p < 1:
            raise ConfigurationError("block counts must be at least 1")
        if h.shape[0] % self.m_o or h.shape[1] % self.m_p:
            raise ConfigurationError(
                "Hankel shape %s not divisible into %d x %d blocks"
                % (h.shape, self.m_o, self.m_p))
        h.setflags(write=False)
        hs.setflags(write=False)
        object.__setattr__(self, "hankel", h)
        object.__setattr__(self, "shifted", hs)

    @property
    def q(self):
        return self.hankel.shape[0] // self.m_o

    @property
    def p(self):
        return self.hankel.shape[1] // self.m_p


@dataclass(frozen=True)
class EraModes:
    """Direct and adjoint balancing modes recovered from snapshots.

    ``adjoint @ direct`` is the r x r identity (to roundoff) when both
    come from consistent data.
    """

    direct: np.ndarray
    adjoint: np.ndarray

    def __post_init__(self):
        d = np.asarray(self.direct, dtype=float)
        a = np.asarray(self.adjoint, dtype=float)
        if d.ndim != 2 or a.ndim != 2 or d.shape != a.shape[::-1]:
            raise ConfigurationError(
                "direct must be n x r and adjoint r x n, got %s and %s"
                % (d.shape, a.shape))
        if not (np.all(np.isfinite(d)) and np.all(np.isfinite(a))):
            raise ConfigurationError("modes contain non-finite entries")
        d.setflags(write=False)
        a.setflags(write=False)
        object.__setattr__(self, "direct", d)
        object.__setattr__(self, "adjoint", a)


# ---------------------------------------------------------------------------
# sampling


def _integer_ratio(sample_period, source_step):
    ratio = sample_period / source_step
    nearest = int(round(ratio))
    if nearest < 1 or abs(ratio - nearest) > 1e-9 * max(1, nearest):
        raise ConfigurationError(
            "sample period %g is not a positive integer multiple of the "
            "source step %g" % (sample_period, source_step))
    return nearest


def sample_impulse(source, sample_period, sample_count):
    """Impulse-response samples of a discrete system or a recorded
    trajectory.

    A unit impulse is applied on the input at the first step; outputs
    are then recorded every ``sample_period``.  For a
    :class:`DiscreteLTI` at its own step this is exactly
    ``markov_parameters``; subsampling every ``s`` steps yields the
    Markov parameters of the ``s``-step system ``(A^s, B, C)``.  A
    :class:`Trajectory` source must already hold an impulse response;
    its outputs at step indices ``1, 1+s, 1+2s, ...`` are taken.
    """
    if sample_count < 2:
        raise ConfigurationError("sample_count must be at least 2")
    if isinstance(source, DiscreteLTI):
        ratio = _integer_ratio(sample_period, source.step)
        a = source.a_matrix
        c = source.c_matrix
        reach = source.b_matrix
        samples = np.empty((sample_count, source.q, source.p))
        samples[0] = c @ reach
        for k in range(1, sample_count):
            for _ in range(ratio):
                reach = a @ reach
            samples[k] = c @ reach
        return MarkovSequence(samples, sample_period)
    if isinstance(source, Trajectory):
        ratio = _integer_ratio(sample_period, source.step)
        last = 1 + (sample_count - 1) * ratio
        if last > len(source) - 1:
            raise ConfigurationError(
                "trajectory has %d steps; %d samples every %d steps need %d"
                % (len(source) - 1, sample_count, ratio, last))
        picks = source.outputs[1:last + 1:ratio]
        return MarkovSequence(picks[:, :, None], sample_period)
    raise ConfigurationError("source must be a DiscreteLTI or a Trajectory, "
                             "got %r" % type(source).__name__)


# ---------------------------------------------------------------------------
# Hankel assembly


def hankel_memory_estimate(seq, m_o, m_p):
    """Bytes needed for the Hankel/shifted pair (two dense float64
    matrices of shape (m_o q) x (m_p p))."""
    return 2 * 8 * (m_o * seq.q) * (m_p * seq.p)


def default_block_split(count):
    """Square block split used when only a sample budget is given:
    ``m_o = m_p = floor(N / 2)``."""
    return count // 2, count // 2


def build_hankel(seq, m_o=None, m_p=None, memory_limit=DEFAULT_MEMORY_LIMIT):
    """Assemble the block Hankel matrix and its shift from a Markov
    sequence.

    Parameters
    ----------
    seq : MarkovSequence
    m_o, m_p : int, optional
        Block row/column counts.  Defaults to the square split
        ``floor(N/2)`` each.  Requires ``m_o + m_p <= N`` (the shifted
        matrix consumes one extra sample).
    memory_limit : int
        Allocation cap in bytes; a request above it is refused with a
        pointer at the output-partition and tangential-projection
        reductions, which shrink the Hankel rows.
    """
    if m_o is None and m_p is None:
        m_o, m_p = default_block_split(seq.count)
    if m_o is None or m_p is None:
        raise ConfigurationError("give both m_o and m_p, or neither")
    if m_o < 1 or m_p < 1:
        raise ConfigurationError("m_o and m_p must be at least 1")
    if m_o + m_p > seq.count:
        raise SampleBudgetError(
            "Hankel with m_o=%d, m_p=%d needs at least %d samples, "
            "sequence has %d" % (m_o, m_p, m_o + m_p, seq.count))
    estimate = hankel_memory_estimate(seq, m_o, m_p)
    if estimate > memory_limit:
        raise MemoryGuardError(
            "Hankel pair needs %.2f GiB, cap is %.2f GiB; consider an "
            "output partition (--partition) or tangential projection "
            "(--tangential) to shrink it"
            % (estimate / 2**30, memory_limit / 2**30))

    arr = seq.samples
    q, p = seq.q, seq.p
    hankel = np.empty((m_o * q, m_p * p))
    shifted = np.empty_like(hankel)
    for i in range(m_o):
        # row block i holds samples h_{i+1} .. h_{i+m_p}
        row = arr[i:i + m_p]
        hankel[i * q:(i + 1) * q] = np.concatenate(row, axis=1)
        shifted[i * q:(i + 1) * q] = np.concatenate(arr[i + 1:i + 1 + m_p],
                                                    axis=1)
    pair = HankelPair(hankel=hankel, shifted=shifted, m_o=m_o, m_p=m_p)
    _spot_check(pair, seq)
    return pair


def _spot_check(pair, seq):
    """Verify corner blocks of the assembled pair against the sequence."""
    q, p = seq.q, seq.p
    corners = {(0, 0), (0, pair.m_p - 1), (pair.m_o - 1, 0),
               (pair.m_o - 1, pair.m_p - 1)}
    for i, j in corners:
        block = pair.hankel[i * q:(i + 1) * q, j * p:(j + 1) * p]
        if not np.array_equal(block, seq.samples[i + j]):
            raise ConfigurationError(
                "Hankel block (%d, %d) does not match sample %d"
                % (i + 1, j + 1, i + j + 1))
        block = pair.shifted[i * q:(i + 1) * q, j * p:(j + 1) * p]
        if not np.array_equal(block, seq.samples[i + j + 1]):
            raise ConfigurationError(
                "shifted Hankel block (%d, %d) does not match sample %d"
                % (i + 1, j + 1, i + j + 2))


# ---------------------------------------------------------------------------
# SVD and realization


def hankel_svd(pair, rank=None, energy=None):
    """Thin SVD of the Hankel matrix with rank selection.

    Exactly one of ``rank`` and ``energy`` may be given; with neither,
    the 99.99% energy default applies.  Energy selection picks the
    smallest ``r`` with ``sum(s[:r]) / sum(s) >= energy``, then extends
    it over any singular values equal (to 1e-12 relative) to the last
    retained one, so ties at the threshold are never split.

    Returns
    -------
    (u_r, sigma_r, v_r)
        ``u_r``: (m_o q) x r, ``sigma_r``: length r, ``v_r``:
        (m_p p) x r, sign convention applied.
    """
    if rank is not None and energy is not None:
        raise ConfigurationError("give either rank or energy, not both")
    if energy is None and rank is None:
        energy = DEFAULT_ENERGY
    if energy is not None and not (0 < energy <= 1):
        raise ConfigurationError("energy must be in (0, 1], got %r"
                                 % (energy,))

    u, sigma, vt = sla.svd(pair.hankel, full_matrices=False)
    u, vt = apply_sign_convention(u, vt)
    if sigma.size == 0 or sigma[0] <= 0:
        raise RankError("Hankel matrix is identically zero",
                        numerical_rank=0)
    numerical_rank = int(np.count_nonzero(sigma > RANK_FLOOR * sigma[0]))

    if rank is not None:
        if rank < 1:
            raise ConfigurationError("rank must be at least 1")
        if rank > numerical_rank:
            raise RankError(
                "requested rank %d exceeds numerical rank %d"
                % (rank, numerical_rank), numerical_rank=numerical_rank)
        r = rank
    else:
        fractions = np.cumsum(sigma) / np.sum(sigma)
        r = int(np.searchsorted(fractions, energy - 1e-15) + 1)
        r = min(r, numerical_rank)
        while r < numerical_rank and sigma[r] >= sigma[r - 1] * (1 - 1e-12):
            r += 1
    return u[:, :r], sigma[:r].copy(), vt[:r].T.copy()


def era_rom(pair, svd_triple, sample_period):
    """Balanced reduced realization from the Hankel pair and its SVD.

    Implements

        ``A_r = S^{-1/2} U^T H' V S^{-1/2}``
        ``B_r = S^{1/2} V^T [I_p; 0]``
        ``C_r = [I_q, 0] U S^{1/2}``

    where (U, S, V) is the retained SVD of the Hankel matrix and H' the
    shifted Hankel matrix.  The result carries provenance ``era`` and
    the sampling period of the training data; its Hankel singular
    values are the retained ``S``.
    """
    u_r, sigma, v_r = svd_triple
    sigma = np.asarray(sigma, dtype=float).ravel()
    r = sigma.size
    if u_r.shape != (pair.hankel.shape[0], r) \
            or v_r.shape != (pair.hankel.shape[1], r):
        raise ConfigurationError("SVD factors do not match the Hankel pair")
    sqrt_s = np.sqrt(sigma)
    inv_sqrt = 1.0 / sqrt_s
    a_r = inv_sqrt[:, None] * (u_r.T @ pair.shifted @ v_r) * inv_sqrt
    b_r = (sqrt_s[:, None] * v_r.T)[:, :pair.p]
    c_r = u_r[:pair.q, :] * sqrt_s
    return BalancedROM(a_r=a_r, b_r=b_r, c_r=c_r, hsv=sigma,
                       provenance="era", step=sample_period)


def era_modes(pair, svd_triple, impulse_snapshots):
    """Direct and adjoint balancing modes for full-state outputs.

    ``impulse_snapshots`` must hold the reachability columns
    ``[B, AB, A^2 B, ...]`` — the full states recorded during the
    impulse experiment, block column j being the state reached j steps
    after the impulse.  Needs the full-state case q = n: the direct
    modes are ``P V_r S^{-1/2}``, and the adjoint modes follow from the
    Hankel row structure ``H = O P`` through the least-squares recovery
    of the observability factor, which reduces to
    ``S^{1/2} V_r^T pinv(P)``.
    """
    u_r, sigma, v_r = svd_triple
    snaps = np.asarray(impulse_snapshots, dtype=float)
    if snaps.ndim != 2:
        raise ConfigurationError("impulse snapshots must be a matrix")
    n = snaps.shape[0]
    if pair.q != n:
        raise ConfigurationError(
            "balancing modes need full-state outputs (q = n); Hankel has "
            "q = %d, snapshots have n = %d" % (pair.q, n))
    if snaps.shape[1] != pair.m_p * pair.p:
        raise ConfigurationError(
            "impulse snapshots have %d columns, Hankel expects %d"
            % (snaps.shape[1], pair.m_p * pair.p))
    sigma = np.asarray(sigma, dtype=float).ravel()
    sqrt_s = np.sqrt(sigma)
    direct = snaps @ v_r / sqrt_s
    adjoint = (sqrt_s[:, None] * v_r.T) @ np.linalg.pinv(snaps, rcond=1e-14)
    return EraModes(direct=direct, adjoint=adjoint)
