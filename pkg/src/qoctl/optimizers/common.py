"""Shared result type and iteration bookkeeping for all optimizers.

Every run produces an OptimizationResult whose traces record one entry per
recorded evaluation: entry 0 is the initial sequence, later entries follow
each accepted update.  final_fidelity is re-evaluated from the emitted
sequence, so reloading the sequence reproduces it exactly.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from ..errors import ValidationError
from ..model import ControlSequence, ControlSystem
from ..problems import ControlProblem, ensemble_performance, penalty_value

TERMINATION_GOAL = "goal-reached"
TERMINATION_MAX_ITER = "max-iter"
TERMINATION_STALLED = "stalled"


@dataclass
class OptimizationResult:
    sequence: ControlSequence
    fidelity_trace: np.ndarray
    objective_trace: np.ndarray
    per_bin_profile: np.ndarray
    termination: str
    iterations_used: int
    wall_time: float
    final_fidelity: float
    final_objective: float
    metadata: dict = field(default_factory=dict)


def check_common_config(max_iterations: int, fidelity_goal: float) -> None:
    if max_iterations < 0:
        raise ValidationError("max_iterations must be >= 0")
    if not 0.0 < fidelity_goal <= 1.0:
        raise ValidationError("fidelity_goal must lie in (0, 1]")


def random_initial_sequence(
    system: ControlSystem,
    n_segments: int,
    total_time: float,
    rng: np.random.Generator,
    fraction: float = 0.1,
) -> ControlSequence:
    """Uniform draw in [-fraction, fraction] of each channel bound."""
    if n_segments < 1:
        raise ValidationError("n_segments must be >= 1")
    raw = rng.uniform(-1.0, 1.0, size=(n_segments, system.n_channels))
    amp = raw * fraction * system.max_amplitudes[None, :]
    return ControlSequence.equal_durations(total_time, amp)


class RunState:
    """Mutable state threaded through optimization blocks.

    Keeps the current and best iterates plus parallel Phi / mean-fidelity
    traces; hybrid drivers pass one RunState through successive blocks so the
    concatenated trace is identical to running the blocks standalone.
    """

    def __init__(self, problem: ControlProblem):
        self.problem = problem
        self.sequence: ControlSequence | None = None
        self.phi = -np.inf
        self.fbar = -np.inf
        self.best_sequence: ControlSequence | None = None
        self.best_phi = -np.inf
        self.best_fbar = -np.inf
        self.phi_trace: list[float] = []
        self.fbar_trace: list[float] = []
        self.started = time.monotonic()
        self.extras: dict = {}

    def evaluate(self, sequence: ControlSequence) -> tuple[float, float]:
        perf = ensemble_performance(self.problem, sequence)
        phi = perf.mean - penalty_value(sequence, self.problem.system, self.problem.penalty)
        return phi, perf.mean

    def accept(self, sequence: ControlSequence, phi: float, fbar: float) -> None:
        self.sequence = sequence
        self.phi = phi
        self.fbar = fbar
        if phi > self.best_phi:
            self.best_phi = phi
            self.best_fbar = fbar
            self.best_sequence = sequence

    def record(self) -> None:
        self.phi_trace.append(self.phi)
        self.fbar_trace.append(self.fbar)

    def set_initial(self, sequence: ControlSequence) -> None:
        phi, fbar = self.evaluate(sequence)
        self.accept(sequence, phi, fbar)
        self.record()

    def steps_recorded(self) -> int:
        return len(self.phi_trace)

    def finalize(self, termination: str) -> OptimizationResult:
        seq = self.best_sequence if self.best_sequence is not None else self.sequence
        perf = ensemble_performance(self.problem, seq)
        pen = penalty_value(seq, self.problem.system, self.problem.penalty)
        return OptimizationResult(
            sequence=seq,
            fidelity_trace=np.array(self.fbar_trace),
            objective_trace=np.array(self.phi_trace),
            per_bin_profile=perf.per_bin,
            termination=termination,
            iterations_used=len(self.phi_trace),
            wall_time=time.monotonic() - self.started,
            final_fidelity=perf.mean,
            final_objective=perf.mean - pen,
            metadata=dict(self.extras),
        )
