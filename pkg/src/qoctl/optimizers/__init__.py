"""Control-sequence synthesis algorithms.

Every `*_run` entry point takes (problem, config) and returns an
OptimizationResult with parallel objective / mean-fidelity traces, the best
iterate found, and a termination tag of goal-reached | max-iter | stalled.
"""

from .adiabatic import (
    AdiabaticConfig,
    adiabatic_run,
    adiabatic_sweep,
    sweep_condition,
    sweep_profile,
    sweep_system,
)
from .anneal import SaConfig, sa_run, sa_steps, sa_threshold
from .common import (
    TERMINATION_GOAL,
    TERMINATION_MAX_ITER,
    TERMINATION_STALLED,
    OptimizationResult,
    RunState,
    random_initial_sequence,
)
from .crab import CrabConfig, crab_run, crab_waveform
from .goat import (
    GoatConfig,
    GoatParams,
    goat_propagate_with_sensitivities,
    goat_run,
    goat_waveform,
)
from .grape import GrapeConfig, grape_gradient, grape_run, grape_steps
from .krotov import KrotovConfig, krotov_multiplier, krotov_run
from .lyapunov import LyapunovConfig, lyapunov_control_law, lyapunov_run, lyapunov_v
from .neldermead import NelderMeadResult, nelder_mead_minimize
from .sagrape import SagrapeConfig, sagrape_run
from .smp import SmpConfig, smp_run

__all__ = [
    "AdiabaticConfig",
    "CrabConfig",
    "GoatConfig",
    "GoatParams",
    "GrapeConfig",
    "KrotovConfig",
    "LyapunovConfig",
    "NelderMeadResult",
    "OptimizationResult",
    "RunState",
    "SaConfig",
    "SagrapeConfig",
    "SmpConfig",
    "TERMINATION_GOAL",
    "TERMINATION_MAX_ITER",
    "TERMINATION_STALLED",
    "adiabatic_run",
    "adiabatic_sweep",
    "crab_run",
    "crab_waveform",
    "goat_propagate_with_sensitivities",
    "goat_run",
    "goat_waveform",
    "grape_gradient",
    "grape_run",
    "grape_steps",
    "krotov_multiplier",
    "krotov_run",
    "lyapunov_control_law",
    "lyapunov_run",
    "lyapunov_v",
    "nelder_mead_minimize",
    "random_initial_sequence",
    "sa_run",
    "sa_steps",
    "sa_threshold",
    "sagrape_run",
    "smp_run",
    "sweep_condition",
    "sweep_profile",
    "sweep_system",
]
