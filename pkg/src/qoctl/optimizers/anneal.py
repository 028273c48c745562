"""Simulated annealing over segment amplitudes.

A move perturbs one uniformly chosen (segment, channel) amplitude with a
Gaussian of width sigma * channel bound.  A candidate with objective change
d = Phi(current) - Phi(candidate) is accepted when d <= Delta, where

    Delta = min(1, T exp(-d / T))

so improvements (d <= 0) always pass and worse moves pass only while the
temperature allows.  The temperature cools geometrically every block of
moves.
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
    random_initial_sequence,
)


@dataclass(frozen=True)
class SaConfig:
    n_segments: int = 10
    total_time: float = 1.0
    initial_temperature: float = 1.0
    cooling: float = 0.95
    moves_per_temperature: int = 50
    sigma: float = 0.1
    max_iterations: int = 5000
    fidelity_goal: float = 0.999
    seed: int = 0

    def __post_init__(self):
        check_common_config(self.max_iterations, self.fidelity_goal)
        if self.initial_temperature <= 0:
            raise ValidationError("initial_temperature must be positive")
        if not 0.0 < self.cooling <= 1.0:
            raise ValidationError("cooling factor must lie in (0, 1]")
        if self.moves_per_temperature < 1:
            raise ValidationError("moves_per_temperature must be >= 1")
        if self.sigma <= 0:
            raise ValidationError("sigma must be positive")
        if self.n_segments < 1 or self.total_time <= 0:
            raise ValidationError("n_segments and total_time must be positive")


def sa_threshold(temperature: float, delta_phi: float) -> float:
    """Acceptance threshold min(1, T exp(-delta_phi / T))."""
    if temperature <= 0:
        raise ValidationError("temperature must be positive")
    exponent = -delta_phi / temperature
    if exponent > 700.0:
        return 1.0
    return float(min(1.0, temperature * np.exp(exponent)))


def sa_steps(problem, cfg: SaConfig, state: RunState, rng: np.random.Generator, budget: int) -> str:
    if budget <= 0:
        return TERMINATION_MAX_ITER
    temperature = state.extras.get("sa_temperature", cfg.initial_temperature)
    move_count = state.extras.get("sa_move_count", 0)
    bounds = problem.system.max_amplitudes
    for _ in range(budget):
        n = int(rng.integers(state.sequence.n_segments))
        m = int(rng.integers(state.sequence.n_channels))
        amps = state.sequence.amplitudes.copy()
        amps[n, m] += rng.normal() * cfg.sigma * bounds[m]
        candidate = state.sequence.with_amplitudes(amps)
        phi, fbar = state.evaluate(candidate)
        delta_phi = state.phi - phi
        if delta_phi <= sa_threshold(temperature, delta_phi):
            state.accept(candidate, phi, fbar)
        state.record()
        move_count += 1
        if move_count % cfg.moves_per_temperature == 0:
            temperature *= cfg.cooling
        state.extras["sa_temperature"] = temperature
        state.extras["sa_move_count"] = move_count
        if state.fbar >= cfg.fidelity_goal:
            return TERMINATION_GOAL
    return TERMINATION_MAX_ITER


def sa_run(
    problem: ControlProblem,
    config: SaConfig | None = None,
    initial_sequence: ControlSequence | None = None,
):
    """Anneal from a random (or given) sequence; the result is the best iterate."""
    cfg = config if config is not None else SaConfig()
    rng = np.random.default_rng(cfg.seed)
    state = RunState(problem)
    if initial_sequence is None:
        initial_sequence = random_initial_sequence(
            problem.system, cfg.n_segments, cfg.total_time, rng
        )
    state.set_initial(initial_sequence)
    if state.fbar >= cfg.fidelity_goal:
        return state.finalize(TERMINATION_GOAL)
    status = sa_steps(problem, cfg, state, rng, cfg.max_iterations)
    return state.finalize(status)
