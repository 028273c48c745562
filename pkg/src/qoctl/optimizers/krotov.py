"""Monotonically convergent variational update for sequences.

Two coupled amplitude sets are kept: the sequence Omega propagates the state
forward and the co-sequence Omega~ propagates the costate backward.  Each
iteration does a forward sweep

    w[n, m] <- (1 - delta) w~_prev[n, m]
               + (delta / lambda_m) Im< B_n_prev | A_m U_{1:n-1} >

building U_{1:n-1} incrementally from already-updated segments, then a
backward sweep

    w~[n, m] <- (1 - eta) w[n, m]
                + (eta / lambda_m) Im< B_n_new | A_m U_{1:n} >.

The multiplier for gate problems is B_n = U_{n+1:N}^dag U_F <U_F|U_{1:N}>, and
for trace-fidelity transfer B_n = U_{n+1:N}^dag (rho_F U_{1:N} rho_I +
kappa U_{1:N}).  Inside a sweep the two roles of B_n split across the two
sequences: the boundary part (U_F times the overlap, or the rho_F/kappa core)
always comes from the forward-propagated sequence, while the U_{n+1:N} suffix
that carries it back to segment n is the backward propagation and therefore
uses co-sequence propagators.  In the forward sweep both pieces are frozen at
the previous iterate; in the backward sweep the boundary part is frozen at the
just-updated sequence and the suffix is built incrementally from already
re-updated co-sequence segments.

Monotone convergence of the continuous-time scheme does not survive a coarse
piecewise-constant grid: a full replacement sweep can overshoot once the
fidelity is high.  Each iteration therefore keeps the sweep output only if the
fidelity did not decrease; otherwise the amplitudes are damped geometrically
toward the previous iterate until the trace is non-decreasing again.  If no
damping helps and the undamped sweep lost more than 1e-6, the run aborts with
MonotonicityError since that signals a miscalibrated lambda for the problem
scale (too large erases the field, the drive term scales with the target
overlap; see the lambda guidance in the config docstring).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import CapabilityError, MonotonicityError, ValidationError
from ..linalg import eig_hermitian
from ..model import ControlSequence, sequence_propagators
from ..problems import ControlProblem
from .common import (
    TERMINATION_GOAL,
    TERMINATION_MAX_ITER,
    TERMINATION_STALLED,
    RunState,
    check_common_config,
    random_initial_sequence,
)

MONOTONICITY_SLACK = 1e-6
# per-iteration slack for the accepted trace; well inside the 1e-9 contract
ACCEPT_SLACK = 1e-12
DAMPING_FLOOR = 2.0**-30


@dataclass(frozen=True)
class KrotovConfig:
    """Coupled-sweep settings.

    lambda_weights balances the drive term against the field magnitude: the
    fixed point satisfies omega = drive / lambda, and for gate targets the
    drive carries the target overlap, which is small before convergence.
    Useful values therefore sit well below 1; the default suits 1-qubit
    problems with bounds of order 2*pi and T of order 1.  delta and eta damp
    the forward/backward replacement (0 copies, 1 replaces, up to 2
    over-relaxes).
    """

    n_segments: int = 10
    total_time: float = 1.0
    delta: float = 1.0
    eta: float = 1.0
    lambda_weights: float | tuple[float, ...] = 0.1
    kappa: float = 1.0
    max_iterations: int = 500
    fidelity_goal: float = 0.999
    seed: int = 0
    stall_tol: float = 1e-12

    def __post_init__(self):
        check_common_config(self.max_iterations, self.fidelity_goal)
        if not 0.0 <= self.delta <= 2.0 or not 0.0 <= self.eta <= 2.0:
            raise ValidationError("delta and eta must lie in [0, 2]")
        lam = self.lambda_weights
        values = (lam,) if np.isscalar(lam) else tuple(lam)
        if any(v <= 0 for v in values):
            raise ValidationError("lambda weights must be positive")
        if self.n_segments < 1 or self.total_time <= 0:
            raise ValidationError("n_segments and total_time must be positive")


def _check_supported(problem: ControlProblem) -> None:
    if problem.channels:
        raise CapabilityError("the variational update assumes unitary evolution")
    if not problem.is_gate and problem.target.kind != "trace":
        raise CapabilityError("state-transfer updates are defined for the trace kind")
    if problem.ensemble.n_bins != 1:
        raise CapabilityError("the multiplier has no ensemble form; use a single-bin problem")


def _lambdas(cfg: KrotovConfig, n_channels: int) -> np.ndarray:
    lam = cfg.lambda_weights
    if np.isscalar(lam):
        return np.full(n_channels, float(lam))
    arr = np.asarray(lam, dtype=float)
    if arr.shape != (n_channels,):
        raise ValidationError("need one lambda per channel")
    return arr


def krotov_multiplier(
    problem: ControlProblem,
    sequence: ControlSequence,
    n: int,
    kappa: float = 1.0,
) -> np.ndarray:
    """Costate matrix B_n (1-based n) for the given sequence."""
    _check_supported(problem)
    if not 1 <= n <= sequence.n_segments:
        raise IndexError(f"segment index {n} outside 1..{sequence.n_segments}")
    us = sequence_propagators(problem.system, sequence)
    full = np.eye(problem.system.dim, dtype=np.complex128)
    for u in us:
        full = u @ full
    suffix = np.eye(problem.system.dim, dtype=np.complex128)
    for k in range(len(us) - 1, n - 1, -1):
        suffix = suffix @ us[k]
    if problem.is_gate:
        u_f = problem.target.unitary
        overlap = np.sum(u_f.conj() * full)
        return suffix.conj().T @ u_f * overlap
    rho_i = problem.target.initial
    rho_f = problem.target.final
    return suffix.conj().T @ (rho_f @ full @ rho_i + kappa * full)


def _segment_propagator_from(problem, durations, amps_row) -> np.ndarray:
    h = problem.system.h_system.copy()
    for m, ch in enumerate(problem.system.channels):
        h += amps_row[m] * ch.operator
    return eig_hermitian(h).exp_i(durations)


def _multiplier_stack(problem, sequence, kappa: float) -> list[np.ndarray]:
    """B_n for n = 1..N computed from one fixed sequence."""
    us = sequence_propagators(problem.system, sequence)
    dim = problem.system.dim
    n_seg = len(us)
    full = np.eye(dim, dtype=np.complex128)
    for u in us:
        full = u @ full
    suffixes = [np.eye(dim, dtype=np.complex128)] * (n_seg + 1)
    for k in range(n_seg - 1, -1, -1):
        suffixes[k] = suffixes[k + 1] @ us[k]
    out = []
    if problem.is_gate:
        u_f = problem.target.unitary
        overlap = np.sum(u_f.conj() * full)
        for n in range(1, n_seg + 1):
            out.append(suffixes[n].conj().T @ u_f * overlap)
    else:
        core = problem.target.final @ full @ problem.target.initial + kappa * full
        for n in range(1, n_seg + 1):
            out.append(suffixes[n].conj().T @ core)
    return out


def _boundary_core(problem, full: np.ndarray, kappa: float) -> np.ndarray:
    """Costate boundary B_N-without-suffix for a full forward product."""
    if problem.is_gate:
        u_f = problem.target.unitary
        overlap = np.sum(u_f.conj() * full)
        return u_f * overlap
    return problem.target.final @ full @ problem.target.initial + kappa * full


def krotov_steps(problem, cfg: KrotovConfig, state: RunState, budget: int) -> str:
    if budget <= 0:
        return TERMINATION_MAX_ITER
    system = problem.system
    ops = [ch.operator for ch in system.channels]
    lam = _lambdas(cfg, system.n_channels)
    durations = state.sequence.durations
    n_seg = state.sequence.n_segments
    omega = state.sequence.amplitudes.copy()
    omega_tilde = state.extras.get("krotov_omega_tilde")
    if omega_tilde is None or omega_tilde.shape != omega.shape:
        omega_tilde = omega.copy()
    dim = system.dim
    eye = np.eye(dim, dtype=np.complex128)

    for _ in range(budget):
        previous_fbar = state.fbar
        previous_omega = omega

        # costate of the previous iterate: boundary from the forward sequence,
        # carried back under co-sequence propagators
        us_prev = sequence_propagators(system, state.sequence)
        full_prev = eye
        for u in us_prev:
            full_prev = u @ full_prev
        core_prev = _boundary_core(problem, full_prev, cfg.kappa)
        us_tilde = sequence_propagators(system, state.sequence.with_amplitudes(omega_tilde))
        suffixes = [eye] * (n_seg + 1)
        for k in range(n_seg - 1, -1, -1):
            suffixes[k] = suffixes[k + 1] @ us_tilde[k]
        b_old = [suffixes[n + 1].conj().T @ core_prev for n in range(n_seg)]

        proposal = np.empty_like(omega)
        prefix = eye
        for n in range(n_seg):
            for m in range(len(ops)):
                drive = np.sum(b_old[n].conj() * (ops[m] @ prefix)).imag
                proposal[n, m] = (1.0 - cfg.delta) * omega_tilde[n, m] + cfg.delta / lam[m] * drive
            u_n = _segment_propagator_from(problem, float(durations[n]), proposal[n])
            prefix = u_n @ prefix

        new_omega = proposal
        new_seq = state.sequence.with_amplitudes(new_omega)
        phi, fbar = state.evaluate(new_seq)
        undamped_fbar = fbar
        scale = 1.0
        while fbar < previous_fbar - ACCEPT_SLACK and scale > DAMPING_FLOOR:
            scale *= 0.5
            new_omega = previous_omega + scale * (proposal - previous_omega)
            new_seq = state.sequence.with_amplitudes(new_omega)
            phi, fbar = state.evaluate(new_seq)
        if fbar < previous_fbar - ACCEPT_SLACK:
            if previous_fbar - undamped_fbar > MONOTONICITY_SLACK:
                raise MonotonicityError(
                    f"fidelity dropped from {previous_fbar:.12g} to {undamped_fbar:.12g} "
                    "and damping could not recover it; adjust lambda (fixed point is "
                    "omega = drive / lambda) or lower delta/eta"
                )
            return TERMINATION_STALLED

        # backward sweep: boundary from the accepted sequence, suffix built
        # incrementally from already re-updated co-sequence segments
        us_new = sequence_propagators(system, new_seq)
        prefixes = [eye]
        for u in us_new:
            prefixes.append(u @ prefixes[-1])
        core_new = _boundary_core(problem, prefixes[-1], cfg.kappa)
        new_tilde = np.empty_like(omega_tilde)
        suffix_tilde = eye
        for n in range(n_seg - 1, -1, -1):
            b_n = suffix_tilde.conj().T @ core_new
            for m in range(len(ops)):
                drive = np.sum(b_n.conj() * (ops[m] @ prefixes[n + 1])).imag
                new_tilde[n, m] = (1.0 - cfg.eta) * new_omega[n, m] + cfg.eta / lam[m] * drive
            u_t = _segment_propagator_from(problem, float(durations[n]), new_tilde[n])
            suffix_tilde = suffix_tilde @ u_t

        omega, omega_tilde = new_omega, new_tilde
        state.accept(new_seq, phi, fbar)
        state.record()
        state.extras["krotov_omega_tilde"] = omega_tilde
        if fbar >= cfg.fidelity_goal:
            return TERMINATION_GOAL
        if abs(fbar - previous_fbar) <= cfg.stall_tol:
            return TERMINATION_STALLED
    return TERMINATION_MAX_ITER


def krotov_run(
    problem: ControlProblem,
    config: KrotovConfig | None = None,
    initial_sequence: ControlSequence | None = None,
):
    """Run the coupled forward/backward sweeps until the goal or the budget."""
    cfg = config if config is not None else KrotovConfig()
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
    status = krotov_steps(problem, cfg, state, cfg.max_iterations)
    return state.finalize(status)
