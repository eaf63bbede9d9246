"""Dense LTI state-space core.

Continuous and discrete linear time-invariant systems with zero
feedthrough (there is no D anywhere in this package), their simulation,
transfer functions, Gramians via Lyapunov solves, and analytical
balanced truncation.  The analytical path is the dense oracle the
data-driven identification in :mod:`romkit.era` is verified against.

All types are immutable after construction and all operations are pure,
so everything here is safe to call from multiple threads.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla

from .errors import (
    ConditioningError,
    ConfigurationError,
    DivergenceError,
    RankError,
    SizeGuardError,
    StabilityError,
)

__all__ = [
    "ContinuousLTI",
    "DiscreteLTI",
    "Gramians",
    "BalancedROM",
    "Trajectory",
    "PoleProximityWarning",
    "simulate_rk3",
    "simulate_discrete",
    "discretize_exact",
    "markov_parameters",
    "solve_lyapunov",
    "gramians_continuous",
    "gramians_discrete",
    "analytical_bt",
    "transfer_function",
    "hinf_error_estimate",
    "eigenvalues",
]

#: Hard cap for the dense Lyapunov solver.
LYAPUNOV_SIZE_LIMIT = 400

# Above this size the n^2 x n^2 Kronecker matrix stops being "simplest
# correct" and becomes a memory problem (64 -> 128 MiB, 400 -> 205 GiB),
# so larger systems within the cap go through Bartels-Stewart instead.
_KRONECKER_LIMIT = 64

#: Relative floor under the largest singular value below which a
#: direction counts as numerically rank-deficient.
RANK_FLOOR = 1e-14


class PoleProximityWarning(UserWarning):
    """A transfer-function evaluation point sits close to a pole."""


def _as_matrix(value, name):
    mat = np.asarray(value, dtype=float)
    if mat.ndim == 1:
        mat = mat.reshape(-1, 1)
    if mat.ndim != 2:
        raise ConfigurationError("%s must be two-dimensional, got ndim=%d"
                                 % (name, mat.ndim))
    if not np.all(np.isfinite(mat)):
        raise ConfigurationError("%s contains non-finite entries" % name)
    return mat


def _freeze(obj, **arrays):
    for name, arr in arrays.items():
        arr.setflags(write=False)
        object.__setattr__(obj, name, arr)


@dataclass(frozen=True)
class ContinuousLTI:
    """Continuous-time system ``x'(t) = A x(t) + B u(t)``, ``y = C x``.

    Attributes
    ----------
    a_matrix : (n, n) ndarray
    b_matrix : (n, p) ndarray
    c_matrix : (q, n) ndarray
    """

    a_matrix: np.ndarray
    b_matrix: np.ndarray
    c_matrix: np.ndarray

    def __post_init__(self):
        a = _as_matrix(self.a_matrix, "a_matrix")
        b = _as_matrix(self.b_matrix, "b_matrix")
        c = _as_matrix(self.c_matrix, "c_matrix")
        if a.shape[0] != a.shape[1]:
            raise ConfigurationError("a_matrix must be square, got %s"
                                     % (a.shape,))
        if b.shape[0] != a.shape[0]:
            raise ConfigurationError(
                "b_matrix has %d rows, state dimension is %d"
                % (b.shape[0], a.shape[0]))
        if c.shape[1] != a.shape[0]:
            raise ConfigurationError(
                "c_matrix has %d columns, state dimension is %d"
                % (c.shape[1], a.shape[0]))
        _freeze(self, a_matrix=a, b_matrix=b, c_matrix=c)

    @property
    def n(self):
        return self.a_matrix.shape[0]

    @property
    def p(self):
        return self.b_matrix.shape[1]

    @property
    def q(self):
        return self.c_matrix.shape[0]


@dataclass(frozen=True)
class DiscreteLTI:
    """Discrete-time system ``x_{k+1} = A x_k + B u_k``, ``y_k = C x_k``.

    ``step`` is the sampling period in seconds.
    """

    a_matrix: np.ndarray
    b_matrix: np.ndarray
    c_matrix: np.ndarray
    step: float

    def __post_init__(self):
        a = _as_matrix(self.a_matrix, "a_matrix")
        b = _as_matrix(self.b_matrix, "b_matrix")
        c = _as_matrix(self.c_matrix, "c_matrix")
        if a.shape[0] != a.shape[1]:
            raise ConfigurationError("a_matrix must be square, got %s"
                                     % (a.shape,))
        if b.shape[0] != a.shape[0] or c.shape[1] != a.shape[0]:
            raise ConfigurationError("inconsistent system dimensions: "
                                     "a %s, b %s, c %s"
                                     % (a.shape, b.shape, c.shape))
        if not (float(self.step) > 0):
            raise ConfigurationError("step must be positive, got %r"
                                     % (self.step,))
        object.__setattr__(self, "step", float(self.step))
        _freeze(self, a_matrix=a, b_matrix=b, c_matrix=c)

    @property
    def n(self):
        return self.a_matrix.shape[0]

    @property
    def p(self):
        return self.b_matrix.shape[1]

    @property
    def q(self):
        return self.c_matrix.shape[0]


@dataclass(frozen=True)
class Gramians:
    """Reachability and observability Gramians of one system."""

    reachability: np.ndarray
    observability: np.ndarray

    def __post_init__(self):
        wp = _as_matrix(self.reachability, "reachability")
        wo = _as_matrix(self.observability, "observability")
        for name, w in (("reachability", wp), ("observability", wo)):
            if w.shape[0] != w.shape[1]:
                raise ConfigurationError("%s Gramian must be square" % name)
            scale = np.linalg.norm(w)
            if scale > 0 and np.linalg.norm(w - w.T) > 1e-10 * scale:
                raise ConfigurationError("%s Gramian is not symmetric "
                                         "within 1e-10 relative" % name)
            eig = np.linalg.eigvalsh(0.5 * (w + w.T))
            if eig.size and eig[0] < -1e-10 * max(eig[-1], 0.0):
                raise ConfigurationError(
                    "%s Gramian has eigenvalue %g below the PSD tolerance"
                    % (name, eig[0]))
        _freeze(self, reachability=wp, observability=wo)


_PROVENANCES = ("analytical", "era", "era_tangential")


@dataclass(frozen=True)
class BalancedROM:
    """Reduced system in balanced coordinates.

    ``step`` is the sampling period for discrete-time ROMs and ``None``
    for ROMs obtained from a continuous-time system.  ``hsv`` holds the
    retained Hankel singular values, non-increasing.
    """

    a_r: np.ndarray
    b_r: np.ndarray
    c_r: np.ndarray
    hsv: np.ndarray
    provenance: str
    step: float | None = None

    def __post_init__(self):
        a = _as_matrix(self.a_r, "a_r")
        b = _as_matrix(self.b_r, "b_r")
        c = _as_matrix(self.c_r, "c_r")
        hsv = np.asarray(self.hsv, dtype=float).ravel()
        if a.shape[0] != a.shape[1]:
            raise ConfigurationError("a_r must be square")
        if b.shape[0] != a.shape[0] or c.shape[1] != a.shape[0]:
            raise ConfigurationError("inconsistent reduced dimensions")
        if hsv.size != a.shape[0]:
            raise ConfigurationError("hsv length %d does not match order %d"
                                     % (hsv.size, a.shape[0]))
        if hsv.size and hsv[-1] <= 0:
            raise ConfigurationError("hsv must be strictly positive")
        if np.any(hsv[1:] > hsv[:-1] * (1 + 1e-12)):
            raise ConfigurationError("hsv must be non-increasing")
        if self.provenance not in _PROVENANCES:
            raise ConfigurationError("provenance must be one of %s, got %r"
                                     % (_PROVENANCES, self.provenance))
        if self.step is not None:
            if not (float(self.step) > 0):
                raise ConfigurationError("step must be positive when given")
            object.__setattr__(self, "step", float(self.step))
        hsv.setflags(write=False)
        object.__setattr__(self, "hsv", hsv)
        _freeze(self, a_r=a, b_r=b, c_r=c)

    @property
    def order(self):
        return self.a_r.shape[0]

    def to_lti(self):
        """View this ROM as a plain system (discrete iff ``step`` set)."""
        if self.step is None:
            return ContinuousLTI(self.a_r, self.b_r, self.c_r)
        return DiscreteLTI(self.a_r, self.b_r, self.c_r, self.step)


@dataclass(frozen=True)
class Trajectory:
    """Uniformly sampled state/output history of one simulation."""

    times: np.ndarray
    states: np.ndarray
    outputs: np.ndarray

    def __post_init__(self):
        t = np.asarray(self.times, dtype=float).ravel()
        x = np.asarray(self.states, dtype=float)
        y = np.asarray(self.outputs, dtype=float)
        if x.ndim == 1:
            x = x.reshape(-1, 1)
        if y.ndim == 1:
            y = y.reshape(-1, 1)
        if not (len(t) == len(x) == len(y)):
            raise ConfigurationError(
                "times, states, outputs must have equal length "
                "(got %d, %d, %d)" % (len(t), len(x), len(y)))
        if len(t) > 1:
            deltas = np.diff(t)
            if np.any(deltas <= 0):
                raise ConfigurationError("times must be strictly increasing")
            spread = deltas.max() - deltas.min()
            if spread > 1e-12 * max(abs(t[-1]), deltas.max()):
                raise ConfigurationError("time spacing not uniform within "
                                         "1e-12 relative")
        t.setflags(write=False)
        object.__setattr__(self, "times", t)
        _freeze(self, states=x, outputs=y)

    @property
    def step(self):
        if len(self.times) < 2:
            raise ConfigurationError("trajectory has fewer than two samples")
        return float(self.times[1] - self.times[0])

    def __len__(self):
        return len(self.times)


# ---------------------------------------------------------------------------
# input handling


def _render_inputs(input_signal, dt, count, p):
    """Turn a signal object or sample array into a (count, p) array."""
    if hasattr(input_signal, "render"):
        u = np.asarray(input_signal.render(dt, count), dtype=float)
    elif input_signal is None:
        u = np.zeros((count, p))
    else:
        u = np.asarray(input_signal, dtype=float)
    if u.ndim == 1:
        u = u.reshape(-1, 1)
    if u.shape[0] < count:
        raise ConfigurationError("input provides %d samples, %d steps needed"
                                 % (u.shape[0], count))
    if u.shape[1] != p:
        raise ConfigurationError("input has %d channels, system expects %d"
                                 % (u.shape[1], p))
    if not np.all(np.isfinite(u[:count])):
        raise ConfigurationError("input samples contain non-finite values")
    return u[:count]


# ---------------------------------------------------------------------------
# simulation


def simulate_rk3(sys, input_signal, dt, t_final, x0):
    """Integrate ``x' = A x + B u`` with the explicit third-order
    Runge-Kutta scheme.

    The input is treated as zero-order hold: sample ``u_k`` is constant
    over step ``k``.  Outputs ``y_k = C x_k`` are recorded every step,
    including the initial state at ``t = 0``.

    Parameters
    ----------
    sys : ContinuousLTI
    input_signal : array_like or object with ``render(dt, count)`` or None
        One input sample per step (``n_steps`` rows); ``None`` means
        unforced.
    dt, t_final : float
        Step size and end time; the number of steps is
        ``round(t_final / dt)``.
    x0 : array_like
        Initial state, length ``n``.

    Returns
    -------
    Trajectory
    """
    if not isinstance(sys, ContinuousLTI):
        raise ConfigurationError("simulate_rk3 needs a ContinuousLTI")
    if dt <= 0:
        raise ConfigurationError("dt must be positive")
    n_steps = int(round(t_final / dt))
    if n_steps < 1:
        raise ConfigurationError("t_final must be at least one step")
    x = np.asarray(x0, dtype=float).ravel()
    if x.size != sys.n:
        raise ConfigurationError("x0 has length %d, expected %d"
                                 % (x.size, sys.n))
    a = sys.a_matrix
    b = sys.b_matrix
    u = _render_inputs(input_signal, dt, n_steps, sys.p)

    states = np.empty((n_steps + 1, sys.n))
    states[0] = x
    with np.errstate(over="ignore", invalid="ignore"):
        for k in range(n_steps):
            bu = b @ u[k]
            k1 = a @ x + bu
            k2 = a @ (x + 0.5 * dt * k1) + bu
            k3 = a @ (x - dt * k1 + 2.0 * dt * k2) + bu
            x = x + (dt / 6.0) * (k1 + 4.0 * k2 + k3)
            if not np.all(np.isfinite(x)):
                raise DivergenceError("non-finite state at step %d"
                                      % (k + 1), step_index=k + 1)
            states[k + 1] = x

    times = np.arange(n_steps + 1) * dt
    outputs = states @ sys.c_matrix.T
    return Trajectory(times, states, outputs)


def simulate_discrete(sys, input_signal, n_steps, x0=None):
    """Advance a discrete system ``n_steps`` times from ``x0`` (zero by
    default) and record states and outputs, initial sample included."""
    if isinstance(sys, BalancedROM):
        sys = sys.to_lti()
    if not isinstance(sys, DiscreteLTI):
        raise ConfigurationError("simulate_discrete needs a DiscreteLTI")
    if n_steps < 1:
        raise ConfigurationError("n_steps must be at least 1")
    x = (np.zeros(sys.n) if x0 is None
         else np.asarray(x0, dtype=float).ravel())
    if x.size != sys.n:
        raise ConfigurationError("x0 has length %d, expected %d"
                                 % (x.size, sys.n))
    u = _render_inputs(input_signal, sys.step, n_steps, sys.p)
    a = sys.a_matrix
    b = sys.b_matrix
    states = np.empty((n_steps + 1, sys.n))
    states[0] = x
    with np.errstate(over="ignore", invalid="ignore"):
        for k in range(n_steps):
            x = a @ x + b @ u[k]
            if not np.all(np.isfinite(x)):
                raise DivergenceError("non-finite state at step %d"
                                      % (k + 1), step_index=k + 1)
            states[k + 1] = x
    times = np.arange(n_steps + 1) * sys.step
    outputs = states @ sys.c_matrix.T
    return Trajectory(times, states, outputs)


def discretize_exact(sys, step):
    """Zero-order-hold discretization of a continuous system.

    ``A_d = exp(A step)`` by scaling-and-squaring.  The input matrix is
    ``A^{-1}(A_d - I)B`` when ``A`` is comfortably invertible; otherwise
    the integral ``int_0^step exp(A tau) dtau B`` is evaluated through
    the exponential of the augmented matrix ``[[A, B], [0, 0]]``, which
    handles singular ``A`` exactly.
    """
    if not isinstance(sys, ContinuousLTI):
        raise ConfigurationError("discretize_exact needs a ContinuousLTI")
    if step <= 0:
        raise ConfigurationError("step must be positive")
    a = sys.a_matrix
    b = sys.b_matrix
    a_d = sla.expm(a * step)
    if np.linalg.cond(a) < 1e12:
        b_d = np.linalg.solve(a, (a_d - np.eye(sys.n)) @ b)
    else:
        aug = np.zeros((sys.n + sys.p, sys.n + sys.p))
        aug[:sys.n, :sys.n] = a
        aug[:sys.n, sys.n:] = b
        b_d = sla.expm(aug * step)[:sys.n, sys.n:]
    return DiscreteLTI(a_d, b_d, sys.c_matrix, step)


def markov_parameters(sys, count):
    """First ``count`` Markov parameters ``h_k = C A^(k-1) B``, k >= 1.

    The indexing matches the Hankel layout used for identification: the
    (1,1) Hankel block is ``h_1 = C B``.  Accumulated by repeated
    products; no matrix power is ever formed.
    """
    from .era import MarkovSequence  # deferred: era depends on this module

    if not isinstance(sys, DiscreteLTI):
        raise ConfigurationError("markov_parameters needs a DiscreteLTI")
    if count < 1:
        raise ConfigurationError("count must be at least 1")
    a = sys.a_matrix
    c = sys.c_matrix
    reach = sys.b_matrix
    samples = []
    for _ in range(count):
        samples.append(c @ reach)
        reach = a @ reach
    return MarkovSequence(samples=samples, sample_period=sys.step)


# ---------------------------------------------------------------------------
# Gramians and balancing


def _require_hurwitz(a, context):
    eig = np.linalg.eigvals(a)
    abscissa = float(eig.real.max()) if eig.size else -np.inf
    if abscissa >= 0:
        raise StabilityError(
            "%s requires all eigenvalue real parts negative; "
            "spectral abscissa is %g" % (context, abscissa))


def solve_lyapunov(a, rhs):
    """Solve ``A X + X A^T + RHS = 0`` for symmetric ``RHS``.

    Small problems go through the Kronecker-vectorized dense solve, the
    simplest formulation that can be checked by eye; beyond
    ``_KRONECKER_LIMIT`` states the n^2 x n^2 Kronecker matrix is
    replaced by the Bartels-Stewart solver, which computes the same
    solution in O(n^3).  Either way the residual is verified against
    ``1e-8 * ||RHS||_F`` before returning and the result is symmetrized.

    Raises
    ------
    SizeGuardError
        If ``n`` exceeds ``LYAPUNOV_SIZE_LIMIT``.
    StabilityError
        If any eigenvalue of ``a`` has non-negative real part.
    ConditioningError
        If the verified residual exceeds tolerance.
    """
    a = _as_matrix(a, "a")
    rhs = _as_matrix(rhs, "rhs")
    n = a.shape[0]
    if a.shape[0] != a.shape[1] or rhs.shape != a.shape:
        raise ConfigurationError("a and rhs must both be n x n")
    rhs_scale = np.linalg.norm(rhs)
    if rhs_scale > 0 and np.linalg.norm(rhs - rhs.T) > 1e-10 * rhs_scale:
        raise ConfigurationError("rhs must be symmetric")
    if n > LYAPUNOV_SIZE_LIMIT:
        raise SizeGuardError(
            "dense Lyapunov solve limited to n <= %d, got n = %d"
            % (LYAPUNOV_SIZE_LIMIT, n))
    _require_hurwitz(a, "Lyapunov solve")

    if n <= _KRONECKER_LIMIT:
        eye = np.eye(n)
        kron_op = np.kron(eye, a) + np.kron(a, eye)
        x = np.linalg.solve(kron_op, -rhs.flatten(order="F"))
        x = x.reshape((n, n), order="F")
    else:
        x = sla.solve_continuous_lyapunov(a, -rhs)
    x = 0.5 * (x + x.T)

    residual = np.linalg.norm(a @ x + x @ a.T + rhs)
    if rhs_scale > 0 and residual > 1e-8 * rhs_scale:
        raise ConditioningError(
            "Lyapunov residual %.3e exceeds 1e-8 * ||RHS||_F = %.3e"
            % (residual, 1e-8 * rhs_scale))
    return x


def gramians_continuous(sys):
    """Infinite-horizon Gramians of a stable continuous system.

    Reachability solves ``A W + W A^T + B B^T = 0``; observability the
    transposed equation with ``C^T C``.
    """
    if not isinstance(sys, ContinuousLTI):
        raise ConfigurationError("gramians_continuous needs a ContinuousLTI")
    wp = solve_lyapunov(sys.a_matrix, sys.b_matrix @ sys.b_matrix.T)
    wo = solve_lyapunov(sys.a_matrix.T, sys.c_matrix.T @ sys.c_matrix)
    return Gramians(reachability=wp, observability=wo)


def gramians_discrete(sys, horizon):
    """Finite-horizon discrete Gramians.

    ``W_p = sum_{k<horizon} A^k B B^T (A^T)^k`` and the analogous
    observability sum, accumulated by recursion on ``A^k B`` and
    ``C A^k`` rather than explicit powers.  Total for any system; the
    sums only approximate the infinite-horizon Gramians when the
    spectral radius is below one and the horizon covers the decay.
    """
    if not isinstance(sys, DiscreteLTI):
        raise ConfigurationError("gramians_discrete needs a DiscreteLTI")
    if horizon < 1:
        raise ConfigurationError("horizon must be at least 1")
    a = sys.a_matrix
    reach = sys.b_matrix.copy()
    obs = sys.c_matrix.copy()
    wp = np.zeros((sys.n, sys.n))
    wo = np.zeros((sys.n, sys.n))
    for _ in range(horizon):
        wp += reach @ reach.T
        wo += obs.T @ obs
        reach = a @ reach
        obs = obs @ a
    wp = 0.5 * (wp + wp.T)
    wo = 0.5 * (wo + wo.T)
    return Gramians(reachability=wp, observability=wo)


def _factor_gramian(w, name):
    """Factor ``W = F F^T``: Cholesky, or floored eigendecomposition when
    the Gramian is numerically semidefinite."""
    try:
        return sla.cholesky(w, lower=True)
    except np.linalg.LinAlgError:
        pass
    lam, vec = np.linalg.eigh(0.5 * (w + w.T))
    floor = RANK_FLOOR * max(lam[-1], 0.0)
    if lam[-1] <= 0:
        raise ConditioningError("%s Gramian has no positive eigenvalues; "
                                "cannot factor" % name)
    lam = np.maximum(lam, floor)
    return vec @ np.diag(np.sqrt(lam))


def apply_sign_convention(u, vt):
    """Flip singular-vector pairs so each left vector's largest-magnitude
    entry is positive.  Makes modes reproducible across LAPACK builds."""
    u = u.copy()
    vt = vt.copy()
    for j in range(u.shape[1]):
        lead = np.argmax(np.abs(u[:, j]))
        if u[lead, j] < 0:
            u[:, j] = -u[:, j]
            if j < vt.shape[0]:
                vt[j, :] = -vt[j, :]
    return u, vt


def analytical_bt(sys, r, horizon=500):
    """Balanced truncation through explicit Gramians.

    Factor ``W_p = U U^T`` and ``W_o = L L^T``, take the SVD
    ``U^T L = W S V^T``, and build the rank-``r`` balancing transform

        ``T_r = U W_r S_r^{-1/2}``,   ``T_r^{-1} = S_r^{-1/2} V_r^T L^T``.

    Parameters
    ----------
    sys : ContinuousLTI or DiscreteLTI
    r : int
        Retained order; must not exceed the numerical rank of
        ``U^T L``.
    horizon : int
        Summation horizon for the discrete Gramians (ignored for
        continuous systems).

    Returns
    -------
    (BalancedROM, t_direct, t_adjoint)
        ROM with provenance ``analytical``, plus the n x r direct and
        r x n adjoint transforms.  Transformed Gramians
        ``T_r^{-1} W_p T_r^{-T}`` and ``T_r^T W_o T_r`` both equal
        ``diag(hsv)``.
    """
    if isinstance(sys, ContinuousLTI):
        _require_hurwitz(sys.a_matrix, "analytical balanced truncation")
        gram = gramians_continuous(sys)
        step = None
    elif isinstance(sys, DiscreteLTI):
        radius = float(np.max(np.abs(np.linalg.eigvals(sys.a_matrix))))
        if radius >= 1:
            raise StabilityError(
                "analytical balanced truncation requires spectral radius "
                "< 1, got %g" % radius)
        gram = gramians_discrete(sys, horizon)
        step = sys.step
    else:
        raise ConfigurationError("analytical_bt needs an LTI system")
    if r < 1:
        raise ConfigurationError("r must be at least 1")

    factor_p = _factor_gramian(gram.reachability, "reachability")
    factor_o = _factor_gramian(gram.observability, "observability")
    w_svd, sigma, vt_svd = sla.svd(factor_p.T @ factor_o,
                                   full_matrices=False)
    w_svd, vt_svd = apply_sign_convention(w_svd, vt_svd)

    if sigma[0] <= 0:
        raise RankError("Gramian product has zero rank", numerical_rank=0)
    rank = int(np.count_nonzero(sigma > RANK_FLOOR * sigma[0]))
    if r > rank:
        raise RankError("requested order %d exceeds numerical rank %d"
                        % (r, rank), numerical_rank=rank)

    hsv = sigma[:r]
    scale = 1.0 / np.sqrt(hsv)
    t_direct = factor_p @ w_svd[:, :r] * scale
    t_adjoint = (scale[:, None] * vt_svd[:r, :]) @ factor_o.T

    a_r = t_adjoint @ _system_a(sys) @ t_direct
    b_r = t_adjoint @ sys.b_matrix
    c_r = sys.c_matrix @ t_direct
    rom = BalancedROM(a_r=a_r, b_r=b_r, c_r=c_r, hsv=hsv,
                      provenance="analytical", step=step)
    return rom, t_direct, t_adjoint


def _system_a(sys):
    if isinstance(sys, BalancedROM):
        return sys.a_r
    return sys.a_matrix


def _system_matrices(sys):
    if isinstance(sys, BalancedROM):
        return sys.a_r, sys.b_r, sys.c_r, sys.step
    if isinstance(sys, DiscreteLTI):
        return sys.a_matrix, sys.b_matrix, sys.c_matrix, sys.step
    if isinstance(sys, ContinuousLTI):
        return sys.a_matrix, sys.b_matrix, sys.c_matrix, None
    raise ConfigurationError("expected an LTI system or BalancedROM, got %r"
                             % type(sys).__name__)


def transfer_function(sys, s_points):
    """Evaluate ``G(s) = C (sI - A)^{-1} B`` at the given complex points.

    For discrete systems pass points ``z`` (typically on the unit
    circle); the resolvent formula is identical.  Each point is a dense
    linear solve; no inverse is formed.  Points whose resolvent
    condition estimate exceeds 1e14 trigger a
    :class:`PoleProximityWarning` naming the point.
    """
    a, b, c, _ = _system_matrices(sys)
    pts = np.atleast_1d(np.asarray(s_points, dtype=complex))
    n = a.shape[0]
    eye = np.eye(n)
    values = np.empty((pts.size, c.shape[0], b.shape[1]), dtype=complex)
    for i, s in enumerate(pts):
        resolvent = s * eye - a
        cond = np.linalg.cond(resolvent)
        if not np.isfinite(cond) or cond > 1e14:
            warnings.warn(
                "resolvent at point %g%+gj has condition estimate %.3e; "
                "result unreliable near a pole" % (s.real, s.imag, cond),
                PoleProximityWarning, stacklevel=2)
        values[i] = c @ np.linalg.solve(resolvent, b)
    return values


def _tf_points(sys, freqs):
    """Map real frequencies to resolvent evaluation points."""
    _, _, _, step = _system_matrices(sys)
    freqs = np.asarray(freqs, dtype=float)
    if step is None:
        return 1j * freqs
    return np.exp(1j * freqs * step)


def hinf_error_estimate(g_full, g_rom, grid):
    """Grid estimate of ``||G - G_r||_inf``.

    Evaluates the largest singular value of the transfer-function
    difference over the real frequency grid, then refines three times
    around the running argmax with ten-fold denser local grids.  The
    result is a lower estimate of the true H-infinity norm (a sup over
    finitely many points); the refinement exists so the estimate can be
    meaningfully compared against the balanced-truncation bounds.

    Returns
    -------
    (sup_norm, argmax_freq)
    """
    a_f, b_f, c_f, step_f = _system_matrices(g_full)
    a_r, b_r, c_r, step_r = _system_matrices(g_rom)
    if b_f.shape[1] != b_r.shape[1] or c_f.shape[0] != c_r.shape[0]:
        raise ConfigurationError("systems must share input/output "
                                 "dimensions")
    if (step_f is None) != (step_r is None):
        raise ConfigurationError("cannot mix continuous and discrete "
                                 "systems in one error estimate")
    grid = np.asarray(grid, dtype=float).ravel()
    if grid.size == 0:
        raise ConfigurationError("frequency grid is empty")

    def sweep(freqs):
        diff = (transfer_function(g_full, _tf_points(g_full, freqs))
                - transfer_function(g_rom, _tf_points(g_rom, freqs)))
        norms = np.array([np.linalg.norm(d, ord=2) for d in diff])
        best = int(np.argmax(norms))
        return float(norms[best]), best

    freqs = np.sort(grid)
    sup, best = sweep(freqs)
    arg = freqs[best]
    for _ in range(3):
        lo = freqs[max(best - 1, 0)]
        hi = freqs[min(best + 1, freqs.size - 1)]
        if hi <= lo:
            break
        freqs = np.linspace(lo, hi, 21)
        local_sup, best = sweep(freqs)
        if local_sup > sup:
            sup = local_sup
            arg = freqs[best]
    return sup, float(arg)


def eigenvalues(sys):
    """Dense eigenvalues plus the stability measure.

    Returns ``(eigs, measure)`` where the measure is the spectral
    abscissa for continuous systems and the spectral radius for
    discrete ones.
    """
    a, _, _, step = _system_matrices(sys)
    eigs = np.linalg.eigvals(a)
    if step is None:
        measure = float(eigs.real.max()) if eigs.size else -np.inf
    else:
        measure = float(np.abs(eigs).max()) if eigs.size else 0.0
    return eigs, measure
