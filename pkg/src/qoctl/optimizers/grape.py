"""Gradient ascent on piecewise-constant amplitudes.

The gradient treats each segment propagator to first order in its duration:
for gate synthesis

    g[n, m] = Im{ <U_F | U_{n+1:N} A_m U_{1:n}> <U_{1:N} | U_F> } / d^2

and for trace-fidelity state transfer

    g[n, m] = -i < rho~_n | [A_m, rho_n] >

with rho_n the initial state propagated through segment n and rho~_n the
target pulled back to the same instant.  Ensemble problems sum p_l s_l times
the bin-l gradient (the scale factor is the chain rule through the scaled
amplitudes).  The exact objective derivative is dPhi/dw = c tau_n g - dP/dw
with c = 2 for gates and 1 for state transfer; updates step along dPhi/dw, so
the per-segment duration of the textbook update rule appears through it and
the remaining constant is absorbed into the step size.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass

import numpy as np

from ..errors import CapabilityError, ValidationError
from ..model import ControlSequence, sequence_propagators
from ..problems import ControlProblem, penalty_gradient
from .common import (
    TERMINATION_GOAL,
    TERMINATION_MAX_ITER,
    TERMINATION_STALLED,
    RunState,
    check_common_config,
    random_initial_sequence,
)

MODES = ("first-order", "quasi-newton")


@dataclass(frozen=True)
class GrapeConfig:
    """Hyperparameters for grape_run.

    step is the ascent rate on dPhi/dw (first-order mode) and the initial
    trial step of the backtracking line search (quasi-newton mode).
    """

    n_segments: int = 20
    total_time: float = 1.0
    step: float = 25.0
    mode: str = "first-order"
    max_iterations: int = 2000
    fidelity_goal: float = 0.999
    seed: int = 0
    memory: int = 10
    stall_window: int = 50
    stall_tol: float = 1e-12

    def __post_init__(self):
        check_common_config(self.max_iterations, self.fidelity_goal)
        if self.mode not in MODES:
            raise ValidationError(f"mode must be one of {MODES}")
        if self.n_segments < 1 or self.total_time <= 0 or self.step <= 0:
            raise ValidationError("n_segments, total_time and step must be positive")
        if self.memory < 1 or self.stall_window < 1:
            raise ValidationError("memory and stall_window must be >= 1")


def _check_supported(problem: ControlProblem) -> None:
    if problem.channels:
        raise CapabilityError("gradients assume unitary evolution; remove interleaved channels")
    if not problem.is_gate and problem.target.kind != "trace":
        raise CapabilityError(
            f"state-transfer gradients are defined for the trace kind, not {problem.target.kind!r}"
        )


def _prefixes_suffixes(us: list[np.ndarray], dim: int):
    n = len(us)
    eye = np.eye(dim, dtype=np.complex128)
    prefix = [eye]
    for u in us:
        prefix.append(u @ prefix[-1])
    suffix = [eye] * (n + 1)
    for k in range(n - 1, -1, -1):
        suffix[k] = suffix[k + 1] @ us[k]
    return prefix, suffix


def _nominal_gradient(problem: ControlProblem, sequence: ControlSequence) -> np.ndarray:
    system = problem.system
    us = sequence_propagators(system, sequence)
    prefix, suffix = _prefixes_suffixes(us, system.dim)
    n_seg, n_ch = sequence.n_segments, sequence.n_channels
    g = np.zeros((n_seg, n_ch))
    ops = [ch.operator for ch in system.channels]
    if problem.is_gate:
        u_f = problem.target.unitary
        d = system.dim
        overlap = np.sum(u_f.conj() * prefix[n_seg])  # <U_F | U_{1:N}>
        for n in range(n_seg):
            # loop index n is 0-based: segment s = n + 1, so the bracketing
            # products are suffix[s] = U_{s+1:N} and prefix[s] = U_{1:s}
            left = u_f.conj().T @ suffix[n + 1]
            for m in range(n_ch):
                z = np.trace(left @ (ops[m] @ prefix[n + 1]))
                g[n, m] = (z * np.conj(overlap)).imag / d**2
    else:
        rho = problem.target.initial
        rho_f = problem.target.final
        forward = []
        state = rho
        for u in us:
            state = u @ state @ u.conj().T
            forward.append(state)
        backward = [None] * n_seg
        cost = rho_f
        for n in range(n_seg - 1, -1, -1):
            backward[n] = cost
            cost = us[n].conj().T @ cost @ us[n]
        for n in range(n_seg):
            for m in range(n_ch):
                comm = ops[m] @ forward[n] - forward[n] @ ops[m]
                g[n, m] = (-1j * np.sum(backward[n].conj() * comm)).real
    return g


def grape_gradient(problem: ControlProblem, sequence: ControlSequence) -> np.ndarray:
    """First-order fidelity gradient, shaped like sequence.amplitudes.

    Index [n, m] is the derivative for segment n+1, channel m.  For ensemble
    problems this is the probability-weighted sum of per-bin gradients taken
    with respect to the nominal amplitudes.
    """
    _check_supported(problem)
    dist = problem.ensemble
    g = np.zeros_like(sequence.amplitudes)
    for scale, p in zip(dist.scales, dist.probabilities):
        seq = sequence if scale == 1.0 else sequence.scaled(scale)
        g += p * scale * _nominal_gradient(problem, seq)
    return g


def _phi_gradient(problem: ControlProblem, sequence: ControlSequence) -> np.ndarray:
    factor = 2.0 if problem.is_gate else 1.0
    g = grape_gradient(problem, sequence)
    g = factor * sequence.durations[:, None] * g
    if problem.penalty.weight > 0.0:
        g = g - penalty_gradient(sequence, problem.system, problem.penalty)
    return g


def _first_order_steps(problem, cfg: GrapeConfig, state: RunState, budget: int) -> str:
    best_seen = state.best_phi
    since_improvement = 0
    for _ in range(budget):
        grad = _phi_gradient(problem, state.sequence)
        amps = state.sequence.amplitudes + cfg.step * grad
        seq = state.sequence.with_amplitudes(amps)
        phi, fbar = state.evaluate(seq)
        state.accept(seq, phi, fbar)
        state.record()
        if fbar >= cfg.fidelity_goal:
            return TERMINATION_GOAL
        if state.best_phi > best_seen + cfg.stall_tol:
            best_seen = state.best_phi
            since_improvement = 0
        else:
            since_improvement += 1
            if since_improvement >= cfg.stall_window:
                return TERMINATION_STALLED
    return TERMINATION_MAX_ITER


class _Lbfgs:
    """Two-loop-recursion inverse-Hessian approximation (maximization form)."""

    def __init__(self, memory: int):
        self.pairs = deque(maxlen=memory)

    def update(self, s: np.ndarray, y: np.ndarray) -> None:
        sy = float(np.dot(s, y))
        if sy > 1e-12 * np.linalg.norm(s) * np.linalg.norm(y):
            self.pairs.append((s, y, 1.0 / sy))

    def direction(self, grad: np.ndarray) -> np.ndarray:
        q = grad.copy()
        alphas = []
        for s, y, rho in reversed(self.pairs):
            a = rho * np.dot(s, q)
            alphas.append(a)
            q -= a * y
        if self.pairs:
            s, y, _ = self.pairs[-1]
            q *= np.dot(s, y) / np.dot(y, y)
        for (s, y, rho), a in zip(self.pairs, reversed(alphas)):
            b = rho * np.dot(y, q)
            q += (a - b) * s
        return q


def _quasi_newton_steps(problem, cfg: GrapeConfig, state: RunState, budget: int) -> str:
    lbfgs = _Lbfgs(cfg.memory)
    x = state.sequence.amplitudes.reshape(-1).copy()
    grad = _phi_gradient(problem, state.sequence).reshape(-1)
    shape = state.sequence.amplitudes.shape
    for _ in range(budget):
        direction = lbfgs.direction(grad)
        if np.dot(direction, grad) <= 0.0:
            direction = grad.copy()
        # curvature-scaled directions want unit trial steps; before any pair
        # exists the direction is the bare gradient and cfg.step sets the scale
        t = 1.0 if lbfgs.pairs else cfg.step
        slope = float(np.dot(grad, direction))
        accepted = None
        while t > 1e-14:
            candidate = state.sequence.with_amplitudes((x + t * direction).reshape(shape))
            phi, fbar = state.evaluate(candidate)
            if phi >= state.phi + 1e-4 * t * slope:
                accepted = (candidate, phi, fbar, t)
                break
            t *= 0.5
        if accepted is None:
            return TERMINATION_STALLED
        candidate, phi, fbar, t = accepted
        new_x = x + t * direction
        new_grad = _phi_gradient(problem, candidate).reshape(-1)
        # maximization: curvature pair uses the negated-gradient convention
        lbfgs.update(new_x - x, grad - new_grad)
        x, grad = new_x, new_grad
        state.accept(candidate, phi, fbar)
        state.record()
        if fbar >= cfg.fidelity_goal:
            return TERMINATION_GOAL
    return TERMINATION_MAX_ITER


def grape_steps(problem, cfg: GrapeConfig, state: RunState, budget: int) -> str:
    if budget <= 0:
        return TERMINATION_MAX_ITER
    if cfg.mode == "first-order":
        return _first_order_steps(problem, cfg, state, budget)
    return _quasi_newton_steps(problem, cfg, state, budget)


def grape_run(
    problem: ControlProblem,
    config: GrapeConfig | None = None,
    initial_sequence: ControlSequence | None = None,
):
    """Maximize the penalized ensemble objective by gradient ascent."""
    cfg = config if config is not None else GrapeConfig()
    _check_supported(problem)
    rng = np.random.default_rng(cfg.seed)
    state = RunState(problem)
    if initial_sequence is None:
        initial_sequence = random_initial_sequence(
            problem.system, cfg.n_segments, cfg.total_time, rng
        )
    state.set_initial(initial_sequence)
    if state.fbar >= cfg.fidelity_goal:
        return state.finalize(TERMINATION_GOAL)
    status = grape_steps(problem, cfg, state, cfg.max_iterations)
    return state.finalize(status)
