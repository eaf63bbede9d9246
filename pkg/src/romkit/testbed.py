"""Full-order-model supply.

A synthetic stiff 1D advection-diffusion-reaction generator with a
tunable condition number, ingestion of externally produced system
matrices, and the forcing signals used by the experiments.

The synthetic operator is built so the stiff reaction part couples
one-way into the transport part: the assembled matrix is block
lower-triangular, hence its spectrum is the union of the transport
spectrum and the (shifted) reaction spectrum and stability survives any
reaction rate.  The rate is calibrated until the condition number of A
lands within a factor of ten of the requested target.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from . import io as matio
from .errors import (
    ConfigurationError,
    DataError,
    DivergenceError,
    NumericalError,
)
from .era import MarkovSequence
from .lti import ContinuousLTI, DiscreteLTI

__all__ = [
    "SyntheticFomSpec",
    "InputSignal",
    "build_synthetic_fom",
    "load_external_system",
    "render_signal",
    "sample_impulse_continuous",
]

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class SyntheticFomSpec:
    """Recipe for the synthetic stiff full-order model.

    ``stiffness`` is the requested condition number of A, realized by
    tuning the rate of a stiff one-way reaction block (0 disables the
    block).  With one field variable the reaction block occupies the
    trailing tenth of the grid; with several, every field beyond the
    first relaxes fast toward its predecessor.  ``boundary_input``
    names the state index the scalar forcing enters.
    """

    cells: int
    advection_speed: float = 1.0
    diffusivity: float = 1e-3
    stiffness: float = 0.0
    dx: float = 1e-2
    variable_count: int = 1
    boundary_input: int = 0

    def __post_init__(self):
        if self.cells < 3:
            raise ConfigurationError("need at least 3 cells")
        if self.dx <= 0:
            raise ConfigurationError("dx must be positive")
        if self.advection_speed < 0:
            raise ConfigurationError("upwind advection assumes a "
                                     "non-negative speed")
        if self.diffusivity < 0 or self.stiffness < 0:
            raise ConfigurationError("diffusivity and stiffness must be "
                                     "non-negative")
        if self.advection_speed == 0 and self.diffusivity == 0:
            raise ConfigurationError("advection and diffusion cannot both "
                                     "vanish")
        if self.variable_count < 1:
            raise ConfigurationError("variable_count must be at least 1")
        n = self.cells * self.variable_count
        if not (0 <= self.boundary_input < n):
            raise ConfigurationError("boundary_input outside 0..%d"
                                     % (n - 1))

    @property
    def n(self):
        return self.cells * self.variable_count


def _transport_operator(spec):
    """Upwind advection + central diffusion on one field, Dirichlet
    boundaries."""
    m = spec.cells
    adv = spec.advection_speed / spec.dx
    dif = spec.diffusivity / spec.dx ** 2
    a = np.zeros((m, m))
    idx = np.arange(m)
    a[idx, idx] = -adv - 2.0 * dif
    a[idx[1:], idx[:-1]] += adv + dif
    a[idx[:-1], idx[1:]] += dif
    return a


def _assemble(spec, rate):
    """Full operator for a given reaction rate."""
    m = spec.cells
    v = spec.variable_count
    base = _transport_operator(spec)
    n = spec.n
    a = np.zeros((n, n))
    if v == 1:
        a[:m, :m] = base
        if rate > 0:
            zone = max(1, m // 10)
            bulk = m - zone
            # sever the stencil across the bulk/zone interface so the
            # matrix stays block lower-triangular (guaranteed stable)
            a[:bulk, bulk:] = 0.0
            a[bulk:, :] = 0.0
            rows = np.arange(bulk, m)
            a[rows, rows] = -rate
            a[rows, rows - zone] = rate
        return a
    for f in range(v):
        sl = slice(f * m, (f + 1) * m)
        a[sl, sl] = base
        if f > 0 and rate > 0:
            rows = np.arange(f * m, (f + 1) * m)
            a[rows, rows] += -rate
            a[rows, rows - m] += rate
    return a


def build_synthetic_fom(spec):
    """Build the synthetic stiff FOM.

    Returns a :class:`ContinuousLTI` with a single boundary input
    column and full-state output C = I.  The achieved condition number
    (within 10x of ``spec.stiffness`` when a target is set) and the
    spectral abscissa are logged; stability is verified and a
    :class:`NumericalError` raised if violated.
    """
    target = spec.stiffness
    if target > 0:
        rate = max(target, 1.0)
        for _ in range(8):
            a = _assemble(spec, rate)
            achieved = np.linalg.cond(a)
            if max(achieved / target, target / achieved) < 3:
                break
            new_rate = rate * target / achieved
            if not (np.isfinite(new_rate) and new_rate > 0):
                break
            rate = new_rate
        if max(achieved / target, target / achieved) > 10:
            base_cond = np.linalg.cond(_transport_operator(spec))
            raise NumericalError(
                "could not reach condition target %.3e (achieved %.3e; "
                "transport part alone has %.3e)"
                % (target, achieved, base_cond))
    else:
        rate = 0.0
        a = _assemble(spec, 0.0)
        achieved = np.linalg.cond(a)

    eigs = np.linalg.eigvals(a)
    abscissa = float(eigs.real.max())
    if abscissa >= 0:
        raise NumericalError("synthetic operator has spectral abscissa "
                             "%g >= 0" % abscissa)

    coeff = spec.advection_speed / spec.dx \
        + spec.diffusivity / spec.dx ** 2
    b = np.zeros((spec.n, 1))
    b[spec.boundary_input, 0] = coeff if coeff > 0 else 1.0
    c = np.eye(spec.n)
    log.info("synthetic FOM: n=%d cond=%.3e abscissa=%.3e reaction=%.3e",
             spec.n, achieved, abscissa, rate)
    return ContinuousLTI(a_matrix=a, b_matrix=b, c_matrix=c)


# ---------------------------------------------------------------------------
# forcing signals


_KINDS = ("unit_impulse", "sinusoid", "gaussian_pulse", "samples")


@dataclass(frozen=True)
class InputSignal:
    """Scalar forcing signal rendered on demand onto a sample grid.

    Kinds: ``unit_impulse`` (1 at the first sample, 0 after),
    ``sinusoid`` (``amplitude * sin(2 pi frequency t)``),
    ``gaussian_pulse`` (``exp(-(t - mean)^2 / (2 std^2))``), and
    ``samples`` (explicit values).
    """

    kind: str
    amplitude: float = None
    frequency: float = None
    mean: float = None
    std: float = None
    values: np.ndarray = None

    def __post_init__(self):
        if self.kind not in _KINDS:
            raise ConfigurationError("unknown signal kind %r (one of %s)"
                                     % (self.kind, ", ".join(_KINDS)))
        if self.kind == "sinusoid":
            if not (self.amplitude and self.amplitude > 0):
                raise ConfigurationError("sinusoid amplitude must be > 0")
            if not (self.frequency and self.frequency > 0):
                raise ConfigurationError("sinusoid frequency must be > 0")
        if self.kind == "gaussian_pulse":
            if self.mean is None or self.std is None or self.std <= 0:
                raise ConfigurationError("gaussian_pulse needs a mean and "
                                         "a positive std")
        if self.kind == "samples":
            vals = np.asarray(self.values, dtype=float).ravel()
            if vals.size == 0 or not np.all(np.isfinite(vals)):
                raise ConfigurationError("sample signal must be non-empty "
                                         "and finite")
            vals.setflags(write=False)
            object.__setattr__(self, "values", vals)

    @classmethod
    def unit_impulse(cls):
        return cls(kind="unit_impulse")

    @classmethod
    def sinusoid(cls, amplitude, frequency):
        return cls(kind="sinusoid", amplitude=float(amplitude),
                   frequency=float(frequency))

    @classmethod
    def gaussian_pulse(cls, mean, std):
        return cls(kind="gaussian_pulse", mean=float(mean), std=float(std))

    @classmethod
    def from_samples(cls, values):
        return cls(kind="samples", values=values)

    def render(self, dt, count):
        """Sample values at ``t_k = k dt`` for ``k = 0 .. count-1``."""
        if dt <= 0 or count < 1:
            raise ConfigurationError("need dt > 0 and count >= 1")
        t = np.arange(count) * dt
        if self.kind == "unit_impulse":
            u = np.zeros(count)
            u[0] = 1.0
            return u
        if self.kind == "sinusoid":
            return self.amplitude * np.sin(2.0 * np.pi * self.frequency * t)
        if self.kind == "gaussian_pulse":
            return np.exp(-0.5 * ((t - self.mean) / self.std) ** 2)
        if self.values.size < count:
            raise ConfigurationError(
                "sample signal provides %d values, %d needed"
                % (self.values.size, count))
        return self.values[:count].copy()


def render_signal(sig, dt, t_final):
    """Render a signal on the grid covering ``[0, t_final)`` with one
    sample per step of length ``dt``."""
    count = int(round(t_final / dt))
    if count < 1:
        raise ConfigurationError("t_final must cover at least one sample")
    return sig.render(dt, count)


# ---------------------------------------------------------------------------
# impulse sampling without storing the fine trajectory


def sample_impulse_continuous(sys, dt, period_steps, count,
                              keep_states=False):
    """Impulse-response Markov samples of a continuous single-input
    system, integrating with RK3 at ``dt`` and recording every
    ``period_steps`` steps.

    Streams the integration — only the current state is held, so a
    large subsampling ratio costs no memory.  With ``keep_states`` the
    full states at the sample instants are also returned as an
    n x count matrix (the reachability-column layout the balancing
    modes need).

    Returns ``MarkovSequence`` or ``(MarkovSequence, states)``.
    """
    if not isinstance(sys, ContinuousLTI):
        raise ConfigurationError("sample_impulse_continuous needs a "
                                 "ContinuousLTI")
    if sys.p != 1:
        raise ConfigurationError("streaming impulse sampling supports "
                                 "single-input systems only")
    if dt <= 0 or period_steps < 1 or count < 2:
        raise ConfigurationError("need dt > 0, period_steps >= 1, "
                                 "count >= 2")
    a = sys.a_matrix
    b = sys.b_matrix[:, 0]
    c = sys.c_matrix
    x = np.zeros(sys.n)
    samples = np.empty((count, sys.q, 1))
    states = np.empty((sys.n, count)) if keep_states else None

    total = 1 + (count - 1) * period_steps
    taken = 0
    with np.errstate(over="ignore", invalid="ignore"):
        for k in range(total):
            bu = b if k == 0 else 0.0
            k1 = a @ x + bu
            k2 = a @ (x + 0.5 * dt * k1) + bu
            k3 = a @ (x - dt * k1 + 2.0 * dt * k2) + bu
            x = x + (dt / 6.0) * (k1 + 4.0 * k2 + k3)
            if not np.all(np.isfinite(x)):
                raise DivergenceError("non-finite state at step %d"
                                      % (k + 1), step_index=k + 1)
            if k % period_steps == 0:
                samples[taken, :, 0] = c @ x
                if keep_states:
                    states[:, taken] = x
                taken += 1
    seq = MarkovSequence(samples=samples, sample_period=dt * period_steps)
    if keep_states:
        return seq, states
    return seq


# ---------------------------------------------------------------------------
# external ingestion


def load_external_system(a_file, b_file, c_file, descriptor):
    """Load a system from matrix files plus a JSON descriptor.

    The descriptor (path or dict) declares ``kind`` (``continuous`` or
    ``discrete``) and, for discrete systems, ``step``.  Matrices may be
    DMAT or CSV.  Dimension inconsistencies and non-finite entries are
    data errors; malformed files raise parse errors carrying the byte
    offset.
    """
    desc = matio.read_descriptor(descriptor)
    kind = desc.get("kind")
    if kind not in ("continuous", "discrete"):
        raise DataError("descriptor kind must be 'continuous' or "
                        "'discrete', got %r" % (kind,))
    a = matio.read_matrix(a_file)
    b = matio.read_matrix(b_file)
    c = matio.read_matrix(c_file)
    for name, m in (("A", a), ("B", b), ("C", c)):
        if not np.all(np.isfinite(m)):
            raise DataError("matrix %s contains non-finite entries" % name)
    if a.shape[0] != a.shape[1] or b.shape[0] != a.shape[0] \
            or c.shape[1] != a.shape[0]:
        raise DataError("inconsistent system dimensions: A %s, B %s, C %s"
                        % (a.shape, b.shape, c.shape))
    if kind == "continuous":
        sys = ContinuousLTI(a_matrix=a, b_matrix=b, c_matrix=c)
        eigs = np.linalg.eigvals(a)
        log.info("loaded continuous system n=%d abscissa=%.3e cond=%.3e",
                 sys.n, float(eigs.real.max()), np.linalg.cond(a))
        return sys
    step = desc.get("step")
    if step is None or not (float(step) > 0):
        raise DataError("discrete descriptor needs a positive 'step'")
    sys = DiscreteLTI(a_matrix=a, b_matrix=b, c_matrix=c, step=float(step))
    eigs = np.linalg.eigvals(a)
    log.info("loaded discrete system n=%d radius=%.3e cond=%.3e",
             sys.n, float(np.abs(eigs).max()), np.linalg.cond(a))
    return sys
