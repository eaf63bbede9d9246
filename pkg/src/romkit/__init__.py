"""Non-intrusive balanced model reduction of LTI systems.

Identifies balanced reduced models directly from impulse-response
samples (no adjoint solves, no access to the operator), with an
analytical balanced-truncation oracle, POD-Galerkin and least-squares
Petrov-Galerkin baselines, output-block domain decomposition,
tangential interpolation, a synthetic stiff testbed, and a CLI for the
whole workflow.
"""

from .errors import (
    ConditioningError,
    ConfigurationError,
    DataError,
    DegenerateBlockError,
    DivergenceError,
    MemoryGuardError,
    NumericalError,
    ParseError,
    RankError,
    RomkitError,
    SampleBudgetError,
    SizeGuardError,
    StabilityError,
)
from .lti import (
    BalancedROM,
    ContinuousLTI,
    DiscreteLTI,
    Gramians,
    PoleProximityWarning,
    Trajectory,
    analytical_bt,
    apply_sign_convention,
    discretize_exact,
    eigenvalues,
    gramians_continuous,
    gramians_discrete,
    hinf_error_estimate,
    markov_parameters,
    simulate_discrete,
    simulate_rk3,
    solve_lyapunov,
    transfer_function,
)
from .era import (
    EraModes,
    HankelPair,
    MarkovSequence,
    build_hankel,
    default_block_split,
    era_modes,
    era_rom,
    hankel_memory_estimate,
    hankel_svd,
    sample_impulse,
)
from .snapshots import (
    PodBasis,
    SnapshotMatrix,
    compute_scaling,
    cumulative_energy,
    pod,
    pod_blockwise,
    project,
    reconstruct,
)
from .projection import (
    GalerkinROM,
    LspgROM,
    build_galerkin,
    build_lspg,
    relative_error,
    simulate_galerkin,
    simulate_lspg,
    step_galerkin_euler,
    step_galerkin_rk3,
    step_lspg,
)
from .scalability import (
    DDRom,
    DDSimulation,
    OutputPartition,
    PartitionBlock,
    TangentialProjection,
    fit_tangential,
    project_markov,
    recover_rom,
    simulate_dd,
    train_dd,
)
from .testbed import (
    InputSignal,
    SyntheticFomSpec,
    build_synthetic_fom,
    load_external_system,
    render_signal,
    sample_impulse_continuous,
)

__version__ = "0.1.0"

__all__ = [
    "__version__",
    # errors
    "RomkitError", "ConfigurationError", "SampleBudgetError",
    "SizeGuardError", "MemoryGuardError", "DataError", "ParseError",
    "DegenerateBlockError", "NumericalError", "StabilityError",
    "RankError", "DivergenceError", "ConditioningError",
    # lti
    "ContinuousLTI", "DiscreteLTI", "Gramians", "BalancedROM",
    "Trajectory", "PoleProximityWarning", "simulate_rk3",
    "simulate_discrete", "discretize_exact", "markov_parameters",
    "solve_lyapunov", "gramians_continuous", "gramians_discrete",
    "apply_sign_convention", "analytical_bt", "transfer_function",
    "hinf_error_estimate", "eigenvalues",
    # era
    "MarkovSequence", "HankelPair", "EraModes", "sample_impulse",
    "hankel_memory_estimate", "default_block_split", "build_hankel",
    "hankel_svd", "era_rom", "era_modes",
    # snapshots
    "SnapshotMatrix", "PodBasis", "compute_scaling", "cumulative_energy",
    "pod", "pod_blockwise", "project", "reconstruct",
    # projection
    "GalerkinROM", "LspgROM", "build_galerkin", "build_lspg",
    "step_galerkin_euler", "step_galerkin_rk3", "step_lspg",
    "simulate_galerkin", "simulate_lspg", "relative_error",
    # scalability
    "PartitionBlock", "OutputPartition", "DDRom", "DDSimulation",
    "TangentialProjection", "train_dd", "simulate_dd", "fit_tangential",
    "project_markov", "recover_rom",
    # testbed
    "SyntheticFomSpec", "InputSignal", "build_synthetic_fom",
    "load_external_system", "render_signal", "sample_impulse_continuous",
]
