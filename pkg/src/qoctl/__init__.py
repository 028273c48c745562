"""Piecewise-constant and analytic quantum control synthesis.

Build a ControlSystem (drift + bounded channels), pose a ControlProblem
(gate or state-transfer target, optional amplitude-scale ensemble and
penalty), and hand it to one of the optimizers.  Everything is seeded and
deterministic; the CLI (`qoctl`) drives the same code from JSON problem
files.
"""

from .errors import (
    ApplicabilityError,
    CacheMissError,
    CapabilityError,
    DegenerateInputError,
    DimensionMismatchError,
    IntegrationFailureError,
    MonotonicityError,
    NonFiniteObjectiveError,
    ProblemFileError,
    QoctlError,
    ValidationError,
)
from .fastpaths import (
    BangBangCache,
    bangbang_propagator,
    bangbang_propagator_cache,
    diagonalized_control_propagator,
    trotter_propagator,
)
from .fidelity import (
    attenuated_correlation,
    correlation,
    gate_fidelity,
    trace_fidelity,
    uhlmann_fidelity,
)
from .io import (
    LoadedProblem,
    evaluate_pulse,
    parse_problem,
    read_pulse,
    run_problem,
    serialize_problem,
    write_pulse,
)
from .model import (
    ControlChannel,
    ControlSequence,
    ControlSystem,
    QuantumChannel,
    QuantumState,
    evolve_density,
    propagate_state,
    segment_hamiltonian,
    segment_propagator,
    sequence_propagators,
    total_propagator,
)
from .optimizers import (
    TERMINATION_GOAL,
    TERMINATION_MAX_ITER,
    TERMINATION_STALLED,
    AdiabaticConfig,
    CrabConfig,
    GoatConfig,
    GoatParams,
    GrapeConfig,
    KrotovConfig,
    LyapunovConfig,
    NelderMeadResult,
    OptimizationResult,
    SaConfig,
    SagrapeConfig,
    SmpConfig,
    adiabatic_run,
    adiabatic_sweep,
    crab_run,
    goat_run,
    grape_gradient,
    grape_run,
    krotov_multiplier,
    krotov_run,
    lyapunov_control_law,
    lyapunov_run,
    lyapunov_v,
    nelder_mead_minimize,
    sa_run,
    sa_threshold,
    sagrape_run,
    smp_run,
    sweep_condition,
    sweep_profile,
    sweep_system,
)
from .problems import (
    ControlProblem,
    EnsembleDistribution,
    EnsemblePerformance,
    GateTarget,
    PenaltyConfig,
    StateTarget,
    ensemble_performance,
    penalized_performance,
    penalty_value,
    sequence_fidelity,
)
from .systems import (
    SpinSystemSpec,
    build_spin_system,
    operator_on,
    standard_distribution,
    standard_gate,
)

__version__ = "0.1.0"
