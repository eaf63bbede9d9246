"""Snapshot handling and proper orthogonal decomposition.

Snapshots are stored column-wise (one column per time sample) with a
row partition into physical-variable blocks.  POD centers the data by a
reference state, rescales each variable block by the reciprocal of its
mean-square amplitude, and takes the SVD of the result.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla

from .errors import ConfigurationError, DegenerateBlockError, RankError
from .lti import RANK_FLOOR, apply_sign_convention

__all__ = [
    "SnapshotMatrix",
    "PodBasis",
    "compute_scaling",
    "pod",
    "pod_blockwise",
    "cumulative_energy",
    "project",
    "reconstruct",
]


def _normalize_blocks(blocks, n):
    """Validate that blocks are contiguous, disjoint and cover 0..n."""
    if blocks is None:
        return (("state", (0, n)),)
    out = []
    cursor = 0
    for entry in blocks:
        name, (start, stop) = entry
        start, stop = int(start), int(stop)
        if start != cursor:
            raise ConfigurationError(
                "variable block %r starts at row %d, expected %d "
                "(blocks must be contiguous and ordered)"
                % (name, start, cursor))
        if stop <= start:
            raise ConfigurationError("variable block %r is empty" % (name,))
        out.append((str(name), (start, stop)))
        cursor = stop
    if cursor != n:
        raise ConfigurationError("variable blocks cover rows 0..%d, "
                                 "state has %d rows" % (cursor, n))
    return tuple(out)


@dataclass(frozen=True)
class SnapshotMatrix:
    """State snapshots, one column per time sample."""

    data: np.ndarray
    step: float
    variable_blocks: tuple = None

    def __post_init__(self):
        data = np.asarray(self.data, dtype=float)
        if data.ndim != 2 or data.shape[1] < 1:
            raise ConfigurationError("snapshot data must be n x n_t with "
                                     "n_t >= 1")
        if not np.all(np.isfinite(data)):
            raise ConfigurationError("snapshots contain non-finite entries")
        if not (float(self.step) > 0):
            raise ConfigurationError("step must be positive")
        blocks = _normalize_blocks(self.variable_blocks, data.shape[0])
        data.setflags(write=False)
        object.__setattr__(self, "data", data)
        object.__setattr__(self, "step", float(self.step))
        object.__setattr__(self, "variable_blocks", blocks)

    @property
    def n(self):
        return self.data.shape[0]

    @property
    def n_t(self):
        return self.data.shape[1]

    def block_rows(self, name):
        for bname, (start, stop) in self.variable_blocks:
            if bname == name:
                return start, stop
        raise ConfigurationError("no variable block named %r" % (name,))

    def restrict(self, name):
        """A new single-block SnapshotMatrix holding only one variable."""
        start, stop = self.block_rows(name)
        return SnapshotMatrix(self.data[start:stop], self.step,
                              ((name, (0, stop - start)),))


@dataclass(frozen=True)
class PodBasis:
    """Trial basis with its scaling and reference state.

    The expansion is ``q ~ reference_state + S^{-1} V q_hat`` where the
    diagonal of S holds ``scaling`` expanded over the variable blocks.
    """

    modes: np.ndarray
    singular_values: np.ndarray
    scaling: np.ndarray
    reference_state: np.ndarray
    variable_blocks: tuple

    def __post_init__(self):
        v = np.asarray(self.modes, dtype=float)
        sv = np.asarray(self.singular_values, dtype=float).ravel()
        sc = np.asarray(self.scaling, dtype=float).ravel()
        ref = np.asarray(self.reference_state, dtype=float).ravel()
        blocks = _normalize_blocks(self.variable_blocks, v.shape[0])
        if v.ndim != 2:
            raise ConfigurationError("modes must be a matrix")
        if sv.size != v.shape[1]:
            raise ConfigurationError("one singular value per mode required")
        if np.any(sv[1:] > sv[:-1] * (1 + 1e-12)):
            raise ConfigurationError("singular values must be "
                                     "non-increasing")
        if sc.size != len(blocks):
            raise ConfigurationError("one scaling entry per variable block "
                                     "required")
        if np.any(sc <= 0):
            raise ConfigurationError("scaling entries must be strictly "
                                     "positive")
        if ref.size != v.shape[0]:
            raise ConfigurationError("reference state length %d, expected %d"
                                     % (ref.size, v.shape[0]))
        gram = v.T @ v
        if np.max(np.abs(gram - np.eye(v.shape[1]))) > 1e-10:
            raise ConfigurationError("modes are not orthonormal to 1e-10")
        for arr, name in ((v, "modes"), (sv, "singular_values"),
                          (sc, "scaling"), (ref, "reference_state")):
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        object.__setattr__(self, "variable_blocks", blocks)

    @property
    def n(self):
        return self.modes.shape[0]

    @property
    def mode_count(self):
        return self.modes.shape[1]

    def scaling_vector(self):
        """The diagonal of S expanded to length n."""
        s = np.empty(self.n)
        for value, (_, (start, stop)) in zip(self.scaling,
                                             self.variable_blocks):
            s[start:stop] = value
        return s


def compute_scaling(snaps):
    """Per-block diagonal of the scaling matrix S.

    For each variable block, ``alpha`` is the mean square of the block's
    entries over all rows in the block and all snapshots, and the S
    entry on that block is ``1 / alpha``.  A block of identical zeros
    cannot be scaled and raises :class:`DegenerateBlockError`.
    """
    values = []
    for name, (start, stop) in snaps.variable_blocks:
        alpha = float(np.mean(snaps.data[start:stop] ** 2))
        if alpha == 0.0:
            raise DegenerateBlockError(
                "variable block %r is identically zero" % (name,))
        values.append(1.0 / alpha)
    return np.array(values)


def cumulative_energy(singular_values, k):
    """Fraction ``sum(s[:k]) / sum(s)`` — the paper-style cumulative
    energy that sums singular values directly, not their squares."""
    sv = np.asarray(singular_values, dtype=float).ravel()
    if not (1 <= k <= sv.size):
        raise ConfigurationError("k must be in 1..%d, got %d"
                                 % (sv.size, k))
    total = sv.sum()
    if total <= 0:
        raise ConfigurationError("singular values sum to zero")
    return float(sv[:k].sum() / total)


def pod(snaps, mode_count=None, energy=None, reference_state=None,
        scaling=None):
    """Proper orthogonal decomposition of centered, scaled snapshots.

    The snapshot matrix is centered by ``reference_state`` (zero by
    default — the testbed produces perturbation states) and scaled
    blockwise by S before the SVD; both happen internally.

    Parameters
    ----------
    snaps : SnapshotMatrix
    mode_count : int, optional
        Retain exactly this many modes.
    energy : float, optional
        Retain the smallest mode count whose cumulative energy (sum of
        singular values) reaches this fraction.  Give exactly one of
        ``mode_count`` and ``energy``.
    reference_state : array_like, optional
    scaling : array_like, optional
        Per-block S diagonal; computed by :func:`compute_scaling` when
        omitted.

    Returns
    -------
    PodBasis
    """
    if (mode_count is None) == (energy is None):
        raise ConfigurationError("give exactly one of mode_count and "
                                 "energy")
    ref = (np.zeros(snaps.n) if reference_state is None
           else np.asarray(reference_state, dtype=float).ravel())
    if ref.size != snaps.n:
        raise ConfigurationError("reference state length %d, expected %d"
                                 % (ref.size, snaps.n))
    if scaling is None:
        scaling = compute_scaling(snaps)
    else:
        scaling = np.asarray(scaling, dtype=float).ravel()
        if scaling.size != len(snaps.variable_blocks):
            raise ConfigurationError("one scaling entry per block required")

    s_vec = np.empty(snaps.n)
    for value, (_, (start, stop)) in zip(scaling, snaps.variable_blocks):
        s_vec[start:stop] = value
    centered = (snaps.data - ref[:, None]) * s_vec[:, None]

    u, sv, vt = sla.svd(centered, full_matrices=False)
    u, vt = apply_sign_convention(u, vt)
    positive = sv > (RANK_FLOOR * sv[0] if sv[0] > 0 else 0)
    numerical_rank = int(np.count_nonzero(positive))
    if numerical_rank == 0:
        raise RankError("snapshot matrix is identically zero after "
                        "centering", numerical_rank=0)

    if mode_count is not None:
        if mode_count < 1:
            raise ConfigurationError("mode_count must be at least 1")
        if mode_count > numerical_rank:
            raise RankError(
                "requested %d modes, numerical rank is %d"
                % (mode_count, numerical_rank),
                numerical_rank=numerical_rank)
        m = mode_count
    else:
        if not (0 < energy <= 1):
            raise ConfigurationError("energy must be in (0, 1]")
        fractions = np.cumsum(sv) / np.sum(sv)
        m = int(np.searchsorted(fractions, energy - 1e-15) + 1)
        m = min(m, numerical_rank)
    return PodBasis(modes=u[:, :m], singular_values=sv[:m].copy(),
                    scaling=scaling, reference_state=ref,
                    variable_blocks=snaps.variable_blocks)


def pod_blockwise(snaps, mode_count=None, energy=None,
                  reference_state=None):
    """Per-variable POD: one basis per block, assembled block-diagonally.

    Each variable block is decomposed on its own (the scalar-valued
    variant), then the block bases are embedded into disjoint row
    ranges, which keeps the assembled modes orthonormal.  Modes are
    ordered by decreasing singular value across blocks.
    """
    ref = (np.zeros(snaps.n) if reference_state is None
           else np.asarray(reference_state, dtype=float).ravel())
    pieces = []
    scalings = []
    for name, (start, stop) in snaps.variable_blocks:
        sub = SnapshotMatrix(snaps.data[start:stop], snaps.step,
                             ((name, (0, stop - start)),))
        basis = pod(sub, mode_count=mode_count, energy=energy,
                    reference_state=ref[start:stop])
        scalings.append(basis.scaling[0])
        for j in range(basis.mode_count):
            col = np.zeros(snaps.n)
            col[start:stop] = basis.modes[:, j]
            pieces.append((basis.singular_values[j], col))
    pieces.sort(key=lambda item: -item[0])
    modes = np.column_stack([col for _, col in pieces])
    sv = np.array([val for val, _ in pieces])
    return PodBasis(modes=modes, singular_values=sv,
                    scaling=np.array(scalings), reference_state=ref,
                    variable_blocks=snaps.variable_blocks)


def project(basis, full_states):
    """Reduced coordinates ``q_hat = V^T S (q - reference)``.

    Accepts a single state vector or a matrix with one state per
    column.
    """
    q = np.asarray(full_states, dtype=float)
    s_vec = basis.scaling_vector()
    single = q.ndim == 1
    if single:
        q = q[:, None]
    if q.shape[0] != basis.n:
        raise ConfigurationError("states have %d rows, basis expects %d"
                                 % (q.shape[0], basis.n))
    reduced = basis.modes.T @ ((q - basis.reference_state[:, None])
                               * s_vec[:, None])
    return reduced[:, 0] if single else reduced


def reconstruct(basis, reduced_states):
    """Expansion ``q = reference + S^{-1} V q_hat`` (inverse of
    :func:`project` up to truncation)."""
    q_hat = np.asarray(reduced_states, dtype=float)
    single = q_hat.ndim == 1
    if single:
        q_hat = q_hat[:, None]
    if q_hat.shape[0] != basis.mode_count:
        raise ConfigurationError("reduced states have %d rows, basis has "
                                 "%d modes" % (q_hat.shape[0],
                                               basis.mode_count))
    s_vec = basis.scaling_vector()
    full = basis.reference_state[:, None] + (basis.modes @ q_hat) \
        / s_vec[:, None]
    return full[:, 0] if single else full
