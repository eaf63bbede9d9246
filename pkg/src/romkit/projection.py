"""Intrusive projection baselines: POD-Galerkin and least-squares
Petrov-Galerkin.

Both reduce the scaled system ``S q' = S J q + S B u`` onto a POD trial
basis V.  Galerkin uses V itself as test space and integrates
explicitly; LSPG minimizes the one-step residual of an Euler scheme
whose implicitness is controlled by ``beta0``: 0 gives forward Euler
(and collapses to Galerkin exactly), 1 gives backward Euler with the
test space ``W = S (I - dt J) S^{-1} V``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla

from .errors import (
    ConditioningError,
    ConfigurationError,
    DivergenceError,
    NumericalError,
)
from .lti import ContinuousLTI, Trajectory, _render_inputs
from .snapshots import PodBasis, project, reconstruct

__all__ = [
    "GalerkinROM",
    "LspgROM",
    "build_galerkin",
    "step_galerkin_euler",
    "step_galerkin_rk3",
    "simulate_galerkin",
    "build_lspg",
    "step_lspg",
    "simulate_lspg",
    "relative_error",
]

#: A trajectory whose state norm exceeds this multiple of its starting
#: norm is declared divergent.
DIVERGENCE_FACTOR = 1e12


def _reduced_operators(sys, basis):
    """``(V^T S J S^{-1} V, V^T S B)`` in one fixed arithmetic order.

    Shared by the Galerkin build and the beta0 = 0 LSPG build so the
    two paths produce bit-identical operators.
    """
    v = basis.modes
    s_vec = basis.scaling_vector()
    test = v.T * s_vec
    trial = v / s_vec[:, None]
    a_red = test @ (sys.a_matrix @ trial)
    b_red = test @ sys.b_matrix
    return a_red, b_red


@dataclass(frozen=True)
class GalerkinROM:
    """Galerkin-reduced LTI system ``q_hat' = A_red q_hat + B_red u``."""

    a_reduced: np.ndarray
    b_reduced: np.ndarray
    basis: PodBasis
    scaling_applied: bool

    def __post_init__(self):
        a = np.asarray(self.a_reduced, dtype=float)
        b = np.asarray(self.b_reduced, dtype=float)
        if a.ndim != 2 or a.shape[0] != a.shape[1]:
            raise ConfigurationError("a_reduced must be square")
        if b.ndim != 2 or b.shape[0] != a.shape[0]:
            raise ConfigurationError("b_reduced rows must match a_reduced")
        a.setflags(write=False)
        b.setflags(write=False)
        object.__setattr__(self, "a_reduced", a)
        object.__setattr__(self, "b_reduced", b)

    @property
    def mode_count(self):
        return self.a_reduced.shape[0]

    def project_initial(self, x0):
        """Initial reduced coordinates for a full initial state."""
        return project(self.basis, np.asarray(x0, dtype=float).ravel())


def build_galerkin(sys, basis):
    """Galerkin ROM of a continuous system on a POD basis.

    The reduced operators are recomputed independently (different
    association order) and compared to 1e-10 as a build-time check.
    """
    if not isinstance(sys, ContinuousLTI):
        raise ConfigurationError("build_galerkin needs a ContinuousLTI")
    if basis.n != sys.n:
        raise ConfigurationError("basis has %d rows, system has %d states"
                                 % (basis.n, sys.n))
    a_red, b_red = _reduced_operators(sys, basis)

    s_vec = basis.scaling_vector()
    a_check = np.linalg.multi_dot([basis.modes.T, np.diag(s_vec),
                                   sys.a_matrix, np.diag(1.0 / s_vec),
                                   basis.modes])
    b_check = np.linalg.multi_dot([basis.modes.T, np.diag(s_vec),
                                   sys.b_matrix])
    scale_a = max(np.linalg.norm(a_check), 1.0)
    scale_b = max(np.linalg.norm(b_check), 1.0)
    if np.linalg.norm(a_red - a_check) > 1e-10 * scale_a \
            or np.linalg.norm(b_red - b_check) > 1e-10 * scale_b:
        raise NumericalError("reduced-operator recomputation mismatch "
                             "exceeds 1e-10")
    return GalerkinROM(a_reduced=a_red, b_reduced=b_red, basis=basis,
                       scaling_applied=bool(np.any(s_vec != 1.0)))


def _euler_update(a_red, b_red, state, u, dt):
    # the one shared forward-Euler kernel; LSPG beta0=0 routes here too
    return state + dt * (a_red @ state + b_red @ u)


def step_galerkin_euler(rom, state, input_sample, dt):
    """One forward-Euler step of the Galerkin ROM."""
    u = np.atleast_1d(np.asarray(input_sample, dtype=float))
    return _euler_update(rom.a_reduced, rom.b_reduced,
                         np.asarray(state, dtype=float), u, dt)


def step_galerkin_rk3(rom, state, input_sample, dt):
    """One explicit third-order Runge-Kutta step of the Galerkin ROM,
    input held constant over the step."""
    a, b = rom.a_reduced, rom.b_reduced
    x = np.asarray(state, dtype=float)
    u = np.atleast_1d(np.asarray(input_sample, dtype=float))
    bu = b @ u
    k1 = a @ x + bu
    k2 = a @ (x + 0.5 * dt * k1) + bu
    k3 = a @ (x - dt * k1 + 2.0 * dt * k2) + bu
    return x + (dt / 6.0) * (k1 + 4.0 * k2 + k3)


@dataclass(frozen=True)
class LspgROM:
    """Least-squares Petrov-Galerkin ROM with fixed time step.

    ``test_basis`` is ``W = S (I - dt beta0 J) S^{-1} V``;
    ``reduced_mass = W^T V``, ``reduced_dynamics = W^T S J S^{-1} V``,
    ``reduced_input = W^T S B``.  The implicit step matrix
    ``reduced_mass - dt * reduced_dynamics`` is LU-factorized once at
    build and reused for every step.
    """

    test_basis: np.ndarray
    dt: float
    beta0: int
    reduced_mass: np.ndarray
    reduced_dynamics: np.ndarray
    reduced_input: np.ndarray
    basis: PodBasis
    mass_condition: float
    lhs_lu: tuple = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        for name in ("test_basis", "reduced_mass", "reduced_dynamics",
                     "reduced_input"):
            arr = np.asarray(getattr(self, name), dtype=float)
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @property
    def mode_count(self):
        return self.reduced_mass.shape[0]

    def project_initial(self, x0):
        return project(self.basis, np.asarray(x0, dtype=float).ravel())


def build_lspg(sys, basis, dt, beta0):
    """LSPG ROM of a continuous system.

    ``beta0 = 0`` reproduces the Galerkin forward-Euler path exactly:
    the test basis collapses to V and stepping reuses the Galerkin
    kernel on operators built by the same code.  ``beta0 = 1`` builds
    the backward-Euler test space and solves the stationarity system
    ``(W^T V - dt W^T S J S^{-1} V) q_new = W^T V q_old + dt W^T S B u``
    each step.
    """
    if not isinstance(sys, ContinuousLTI):
        raise ConfigurationError("build_lspg needs a ContinuousLTI")
    if basis.n != sys.n:
        raise ConfigurationError("basis has %d rows, system has %d states"
                                 % (basis.n, sys.n))
    if dt <= 0:
        raise ConfigurationError("dt must be positive")
    if beta0 not in (0, 1):
        raise ConfigurationError("beta0 must be 0 or 1")

    v = basis.modes
    s_vec = basis.scaling_vector()
    a_red, b_red = _reduced_operators(sys, basis)

    if beta0 == 0:
        test = v
    else:
        trial = v / s_vec[:, None]
        test = v - dt * (s_vec[:, None] * (sys.a_matrix @ trial))
    mass = test.T @ v
    dynamics = (test.T * s_vec) @ (sys.a_matrix @ (v / s_vec[:, None]))
    inputs = (test.T * s_vec) @ sys.b_matrix
    if beta0 == 0:
        # identical arrays as Galerkin uses, for bit-for-bit equivalence
        dynamics = a_red
        inputs = b_red

    cond = np.linalg.cond(mass)
    if not np.isfinite(cond) or cond > 1e14:
        raise ConditioningError("reduced mass W^T V is numerically "
                                "singular (condition %.3e)" % cond)
    lhs_lu = None
    if beta0 == 1:
        try:
            lhs_lu = sla.lu_factor(mass - dt * dynamics)
        except np.linalg.LinAlgError as exc:
            raise ConditioningError("implicit step matrix is singular: %s"
                                    % exc) from exc
    return LspgROM(test_basis=test, dt=float(dt), beta0=int(beta0),
                   reduced_mass=mass, reduced_dynamics=dynamics,
                   reduced_input=inputs, basis=basis,
                   mass_condition=float(cond), lhs_lu=lhs_lu)


def step_lspg(rom, state, input_sample):
    """One LSPG step (forward Euler for beta0 = 0, backward Euler
    otherwise)."""
    x = np.asarray(state, dtype=float)
    u = np.atleast_1d(np.asarray(input_sample, dtype=float))
    if rom.beta0 == 0:
        return _euler_update(rom.reduced_dynamics, rom.reduced_input,
                             x, u, rom.dt)
    rhs = rom.reduced_mass @ x + rom.dt * (rom.reduced_input @ u)
    try:
        return sla.lu_solve(rom.lhs_lu, rhs)
    except (ValueError, np.linalg.LinAlgError) as exc:
        raise ConditioningError("implicit LSPG solve failed: %s"
                                % exc) from exc


def _integrate(step, dt, n_steps, u, q0, basis):
    states = np.empty((n_steps + 1, q0.size))
    states[0] = q0
    x = q0
    norm0 = float(np.linalg.norm(x))
    guard = None
    with np.errstate(over="ignore", invalid="ignore"):
        for k in range(n_steps):
            x = step(x, u[k])
            if not np.all(np.isfinite(x)):
                raise DivergenceError("non-finite reduced state at step %d"
                                      % (k + 1), step_index=k + 1)
            norm = float(np.linalg.norm(x))
            if guard is None:
                # reference scale: the initial norm, or — when starting
                # from rest — the first nonzero state norm
                if norm0 > 0 or norm > 0:
                    guard = DIVERGENCE_FACTOR * max(norm0, norm)
            elif norm > guard:
                raise DivergenceError(
                    "reduced state norm exceeded %g x its initial scale "
                    "at step %d" % (DIVERGENCE_FACTOR, k + 1),
                    step_index=k + 1)
            states[k + 1] = x
    times = np.arange(n_steps + 1) * dt
    full = reconstruct(basis, states.T).T
    return Trajectory(times=times, states=states, outputs=full)


def simulate_galerkin(rom, input_signal, dt, t_final, x0=None,
                      scheme="rk3"):
    """Integrate a Galerkin ROM; outputs hold the reconstructed full
    states.

    ``x0`` is a full-space initial state (zero by default), projected
    through the basis.  ``scheme`` is ``"rk3"`` or ``"euler"``.
    Divergence (non-finite state, or norm beyond 1e12 x the initial
    scale) raises :class:`DivergenceError` naming the step.
    """
    if dt <= 0:
        raise ConfigurationError("dt must be positive")
    n_steps = int(round(t_final / dt))
    if n_steps < 1:
        raise ConfigurationError("t_final must cover at least one step")
    q0 = (np.zeros(rom.mode_count) if x0 is None
          else rom.project_initial(x0))
    u = _render_inputs(input_signal, dt, n_steps,
                       rom.b_reduced.shape[1])
    if scheme == "rk3":
        def step(x, uk):
            return step_galerkin_rk3(rom, x, uk, dt)
    elif scheme == "euler":
        def step(x, uk):
            return step_galerkin_euler(rom, x, uk, dt)
    else:
        raise ConfigurationError("scheme must be 'rk3' or 'euler'")
    return _integrate(step, dt, n_steps, u, q0, rom.basis)


def simulate_lspg(rom, input_signal, t_final, x0=None):
    """Integrate an LSPG ROM at its build-time dt; outputs hold the
    reconstructed full states."""
    dt = rom.dt
    n_steps = int(round(t_final / dt))
    if n_steps < 1:
        raise ConfigurationError("t_final must cover at least one step")
    q0 = (np.zeros(rom.mode_count) if x0 is None
          else rom.project_initial(x0))
    u = _render_inputs(input_signal, dt, n_steps,
                       rom.reduced_input.shape[1])

    def step(x, uk):
        return step_lspg(rom, x, uk)

    return _integrate(step, dt, n_steps, u, q0, rom.basis)


def relative_error(full, reduced_reconstructed, exclude_tail_cells=0,
                   variable_blocks=None):
    """Per-step relative error ``||q_k - q~_k|| / ||q_k||``.

    Compares the output records of the two trajectories on a shared
    time grid.  ``exclude_tail_cells`` drops that many trailing entries
    of every variable block (the whole state is one block when
    ``variable_blocks`` is None) before taking norms.  Steps whose
    reference norm is exactly zero get NaN — the "absent" marker — not
    infinity.
    """
    ref = full.outputs
    approx = reduced_reconstructed.outputs
    if ref.shape != approx.shape:
        raise ConfigurationError("trajectories have mismatched shapes "
                                 "%s vs %s" % (ref.shape, approx.shape))
    t_a, t_b = full.times, reduced_reconstructed.times
    scale = max(abs(float(t_a[-1])), 1e-300)
    if len(t_a) != len(t_b) or np.max(np.abs(t_a - t_b)) > 1e-9 * scale:
        raise ConfigurationError("trajectories are on different time grids")

    dim = ref.shape[1]
    if variable_blocks is None:
        variable_blocks = (("state", (0, dim)),)
    keep = np.ones(dim, dtype=bool)
    for name, (start, stop) in variable_blocks:
        if exclude_tail_cells >= stop - start:
            raise ConfigurationError(
                "cannot exclude %d cells from block %r of size %d"
                % (exclude_tail_cells, name, stop - start))
        if exclude_tail_cells > 0:
            keep[stop - exclude_tail_cells:stop] = False

    diff = np.linalg.norm((ref - approx)[:, keep], axis=1)
    denom = np.linalg.norm(ref[:, keep], axis=1)
    out = np.full(len(ref), np.nan)
    nonzero = denom > 0
    out[nonzero] = diff[nonzero] / denom[nonzero]
    return out
