"""Alternating annealing / gradient-ascent hybrid.

Annealing blocks make global, bound-scaled random moves that can hop between
basins; gradient blocks refine the current basin quickly.  Alternating the
two finds solutions plain gradient ascent misses from the same start while
converging far faster than annealing alone.

One RunState and one generator are threaded through all blocks, so a
schedule with zero annealing moves per round reproduces grape_run's trace
bit for bit (and zero gradient iterations reproduces sa_run), provided the
seeds and goals agree.  Both sub-configs must describe the same
discretization since the blocks share one iterate.  The quasi-newton
curvature memory is rebuilt inside each gradient block on purpose: annealing
moves in between invalidate it.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from ..errors import ValidationError
from ..model import ControlSequence
from ..problems import ControlProblem
from .anneal import SaConfig, sa_steps
from .common import (
    TERMINATION_GOAL,
    TERMINATION_MAX_ITER,
    TERMINATION_STALLED,
    RunState,
    random_initial_sequence,
)
from .grape import GrapeConfig, grape_steps


@dataclass(frozen=True)
class SagrapeConfig:
    sa: SaConfig = SaConfig()
    grape: GrapeConfig = GrapeConfig()
    rounds: int = 4
    sa_moves_per_round: int = 250
    grape_iterations_per_round: int = 250
    fidelity_goal: float = 0.999
    seed: int = 0

    def __post_init__(self):
        if self.rounds < 1:
            raise ValidationError("rounds must be >= 1")
        if self.sa_moves_per_round < 0 or self.grape_iterations_per_round < 0:
            raise ValidationError("per-round budgets must be >= 0")
        if self.sa_moves_per_round == 0 and self.grape_iterations_per_round == 0:
            raise ValidationError("schedule is empty: both per-round budgets are zero")
        if not 0.0 < self.fidelity_goal <= 1.0:
            raise ValidationError("fidelity_goal must lie in (0, 1]")
        if self.sa.n_segments != self.grape.n_segments:
            raise ValidationError("sa and grape configs must agree on n_segments")
        if self.sa.total_time != self.grape.total_time:
            raise ValidationError("sa and grape configs must agree on total_time")


def sagrape_run(
    problem: ControlProblem,
    config: SagrapeConfig | None = None,
    initial_sequence: ControlSequence | None = None,
):
    """Alternate annealing and gradient blocks on a shared iterate."""
    cfg = config if config is not None else SagrapeConfig()
    # the hybrid goal is authoritative; sub-config goals and seeds are ignored
    sa_cfg = replace(cfg.sa, fidelity_goal=cfg.fidelity_goal)
    grape_cfg = replace(cfg.grape, fidelity_goal=cfg.fidelity_goal)
    rng = np.random.default_rng(cfg.seed)
    state = RunState(problem)
    if initial_sequence is None:
        initial_sequence = random_initial_sequence(
            problem.system, grape_cfg.n_segments, grape_cfg.total_time, rng
        )
    state.set_initial(initial_sequence)
    if state.fbar >= cfg.fidelity_goal:
        return state.finalize(TERMINATION_GOAL)

    blocks: list[tuple[str, str, int]] = []
    status = TERMINATION_MAX_ITER
    for _ in range(cfg.rounds):
        before = state.steps_recorded()
        status = sa_steps(problem, sa_cfg, state, rng, cfg.sa_moves_per_round)
        blocks.append(("sa", status, state.steps_recorded() - before))
        if status == TERMINATION_GOAL:
            break
        before = state.steps_recorded()
        status = grape_steps(problem, grape_cfg, state, cfg.grape_iterations_per_round)
        blocks.append(("grape", status, state.steps_recorded() - before))
        if status == TERMINATION_GOAL:
            break
    state.extras["sagrape_blocks"] = blocks
    if status not in (TERMINATION_GOAL, TERMINATION_STALLED):
        status = TERMINATION_MAX_ITER
    return state.finalize(status)
