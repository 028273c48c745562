"""Randomized-basis waveform search.

Each channel's waveform is a mean value plus K randomized harmonics,

    w_m(t) = wbar_m + sum_k a_km cos(phi_km) + b_km sin(phi_km),
    phi_km = 2 pi k t (1 + r_km) / T,

with the frequency jitters r_km drawn once, uniformly from [-0.5, 0.5], from
the run seed.  The (1 + 2K) parameters per channel are searched with
Nelder-Mead on the penalized objective of the waveform discretized into
n_discretize midpoint-sampled segments.
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


@dataclass(frozen=True)
class CrabConfig:
    harmonics: int = 3
    total_time: float = 1.0
    n_discretize: int = 200
    max_evals: int = 3000
    fidelity_goal: float = 0.999
    seed: int = 0
    init_fraction: float = 0.3

    def __post_init__(self):
        check_common_config(0, self.fidelity_goal)
        if self.harmonics < 0:
            raise ValidationError("harmonics must be >= 0")
        if self.total_time <= 0:
            raise ValidationError("total_time must be positive")
        if self.n_discretize < 1:
            raise ValidationError("n_discretize must be >= 1")
        if self.max_evals < 4:
            raise ValidationError("max_evals must allow at least a few simplex moves")
        if self.init_fraction <= 0:
            raise ValidationError("init_fraction must be positive")


def crab_waveform(
    mean: float,
    cos_coeffs,
    sin_coeffs,
    jitters,
    total_time: float,
    t,
):
    """Randomized-harmonic amplitude at time t (scalar or array)."""
    a = np.asarray(cos_coeffs, dtype=float).reshape(-1)
    b = np.asarray(sin_coeffs, dtype=float).reshape(-1)
    r = np.asarray(jitters, dtype=float).reshape(-1)
    if not (a.shape == b.shape == r.shape):
        raise ValidationError("cos/sin coefficients and jitters must share one length")
    t_arr = np.asarray(t, dtype=float)
    out = np.full_like(t_arr, float(mean), dtype=float)
    for k in range(a.shape[0]):
        phase = 2.0 * np.pi * (k + 1) * t_arr * (1.0 + r[k]) / total_time
        out = out + a[k] * np.cos(phase) + b[k] * np.sin(phase)
    return out if out.ndim else float(out)


def _discretize(params: np.ndarray, jitters: np.ndarray, cfg: CrabConfig, n_ch: int) -> ControlSequence:
    k = cfg.harmonics
    midpoints = (np.arange(cfg.n_discretize) + 0.5) * cfg.total_time / cfg.n_discretize
    amps = np.empty((cfg.n_discretize, n_ch))
    per = 1 + 2 * k
    for m in range(n_ch):
        block = params[m * per : (m + 1) * per]
        amps[:, m] = crab_waveform(
            block[0], block[1 : 1 + k], block[1 + k :], jitters[m], cfg.total_time, midpoints
        )
    return ControlSequence.equal_durations(cfg.total_time, amps)


def crab_run(problem: ControlProblem, config: CrabConfig | None = None):
    """Draw the frequency jitters, then simplex-search the basis coefficients."""
    cfg = config if config is not None else CrabConfig()
    rng = np.random.default_rng(cfg.seed)
    n_ch = problem.system.n_channels
    bounds = problem.system.max_amplitudes
    jitters = rng.uniform(-0.5, 0.5, size=(n_ch, cfg.harmonics))

    per = 1 + 2 * cfg.harmonics
    x0 = np.empty(n_ch * per)
    step = np.empty_like(x0)
    for m in range(n_ch):
        scale = cfg.init_fraction * bounds[m]
        x0[m * per] = rng.uniform(-1.0, 1.0) * scale
        x0[m * per + 1 : (m + 1) * per] = rng.uniform(-1.0, 1.0, 2 * cfg.harmonics) * scale / max(cfg.harmonics, 1)
        step[m * per] = 0.5 * scale
        step[m * per + 1 : (m + 1) * per] = 0.5 * scale / max(cfg.harmonics, 1)

    state = RunState(problem)
    state.set_initial(_discretize(x0, jitters, cfg, n_ch))
    state.extras["crab_jitters"] = jitters
    if state.fbar >= cfg.fidelity_goal:
        return state.finalize(TERMINATION_GOAL)

    class _GoalReached(Exception):
        pass

    def objective(x):
        seq = _discretize(x, jitters, cfg, n_ch)
        phi, fbar = state.evaluate(seq)
        state.accept(seq, phi, fbar)
        state.record()
        if fbar >= cfg.fidelity_goal:
            raise _GoalReached
        return -phi

    try:
        nelder_mead_minimize(objective, x0, initial_step=step, max_evals=cfg.max_evals)
    except _GoalReached:
        return state.finalize(TERMINATION_GOAL)
    if state.best_fbar >= cfg.fidelity_goal:
        return state.finalize(TERMINATION_GOAL)
    return state.finalize(TERMINATION_MAX_ITER)
