"""Split-and-search: simplex optimization with recursive segment doubling.

Stage k searches every parameter of 2^(k-1) segments (each segment carries a
duration and one amplitude per channel) with Nelder-Mead, then splits each
segment into two half-duration copies, which leaves the propagator unchanged
at the moment of splitting.  Each stage restarts the simplex twice with
seeded jitter and keeps the best outcome.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import ValidationError
from ..model import ControlSequence
from ..problems import ControlProblem
from .common import (
    TERMINATION_GOAL,
    TERMINATION_MAX_ITER,
    RunState,
    check_common_config,
)
from .neldermead import nelder_mead_minimize

DURATION_FLOOR_FRACTION = 1e-6


@dataclass(frozen=True)
class SmpConfig:
    initial_duration: float = 1.0
    max_segments: int = 8
    stage_evals: int = 600
    restarts: int = 2
    fidelity_goal: float = 0.999
    seed: int = 0
    simplex_fraction: float = 0.2

    def __post_init__(self):
        check_common_config(0, self.fidelity_goal)
        if self.initial_duration <= 0:
            raise ValidationError("initial_duration must be positive")
        if self.max_segments < 1:
            raise ValidationError("max_segments must be >= 1")
        if self.stage_evals < 4:
            raise ValidationError("stage_evals must allow at least a few simplex moves")
        if self.restarts < 0:
            raise ValidationError("restarts must be >= 0")
        if self.simplex_fraction <= 0:
            raise ValidationError("simplex_fraction must be positive")


def _pack(durations: np.ndarray, amplitudes: np.ndarray) -> np.ndarray:
    return np.concatenate([np.column_stack([durations, amplitudes]).reshape(-1)])


def _unpack(x: np.ndarray, n_segments: int, n_channels: int, floor: float):
    rows = x.reshape(n_segments, 1 + n_channels)
    durations = np.maximum(np.abs(rows[:, 0]), floor)
    return durations, rows[:, 1:]


def smp_run(problem: ControlProblem, config: SmpConfig | None = None):
    """Search one segment, then split and search again until max_segments."""
    cfg = config if config is not None else SmpConfig()
    rng = np.random.default_rng(cfg.seed)
    system = problem.system
    n_ch = system.n_channels
    bounds = system.max_amplitudes
    floor = DURATION_FLOOR_FRACTION * cfg.initial_duration

    durations = np.array([cfg.initial_duration])
    amplitudes = rng.uniform(-0.5, 0.5, size=(1, n_ch)) * bounds[None, :]

    state = RunState(problem)
    state.set_initial(ControlSequence(durations, amplitudes))
    if state.fbar >= cfg.fidelity_goal:
        return state.finalize(TERMINATION_GOAL)

    class _GoalReached(Exception):
        pass

    def objective(x):
        dur, amp = _unpack(x, dur_count, n_ch, floor)
        seq = ControlSequence(dur, amp)
        phi, fbar = state.evaluate(seq)
        state.accept(seq, phi, fbar)
        state.record()
        if fbar >= cfg.fidelity_goal:
            raise _GoalReached
        return -phi

    while True:
        dur_count = durations.shape[0]
        x0 = _pack(durations, amplitudes)
        step0 = _pack(
            np.full(dur_count, 0.25 * np.mean(durations)),
            np.tile(cfg.simplex_fraction * bounds, (dur_count, 1)),
        )
        best = None
        try:
            for attempt in range(cfg.restarts + 1):
                if attempt == 0:
                    start, step = x0, step0
                else:
                    jitter = rng.uniform(0.5, 1.5, size=x0.shape)
                    start = x0 * rng.uniform(0.9, 1.1, size=x0.shape)
                    step = step0 * jitter
                res = nelder_mead_minimize(
                    objective, start, initial_step=step, max_evals=cfg.stage_evals
                )
                if best is None or res.fun < best.fun:
                    best = res
        except _GoalReached:
            return state.finalize(TERMINATION_GOAL)
        durations, amplitudes = _unpack(best.x, dur_count, n_ch, floor)
        if state.best_fbar >= cfg.fidelity_goal:
            return state.finalize(TERMINATION_GOAL)
        if 2 * dur_count > cfg.max_segments:
            break
        # halve each segment: identical propagator, twice the search freedom
        durations = np.repeat(durations / 2.0, 2)
        amplitudes = np.repeat(amplitudes, 2, axis=0)
    return state.finalize(TERMINATION_MAX_ITER)
