"""Feedback bang-bang design for transfer to a drift eigenstate.

With target projector complement P = I - |psi_F><psi_F| the candidate function

    V(rho) = 1 - <psi_F| rho |psi_F>

has derivative sum_m w_m v_m along the controls, where v_m = -i <rho|[P, A_m]>.
Choosing w_m = -w_m^max sign(v_m) (zero inside a dead band) makes every term
non-positive.  Free evolution leaves V untouched only when [P, H_sys] = 0,
i.e. the target is a drift eigenstate; that precondition is checked up front.
A stall away from the target (all v_m inside the dead band) triggers one
seeded low-amplitude kick; repeated stalls end the run.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import ApplicabilityError, CapabilityError, ValidationError
from ..linalg import eig_hermitian
from ..model import ControlSequence, QuantumState
from ..problems import ControlProblem
from .common import (
    TERMINATION_GOAL,
    TERMINATION_MAX_ITER,
    TERMINATION_STALLED,
    RunState,
    check_common_config,
)

COMMUTATION_TOL = 1e-8
PURE_TARGET_TOL = 1e-8


@dataclass(frozen=True)
class LyapunovConfig:
    dt: float = 0.01
    max_time: float = 50.0
    dead_band_fraction: float = 1e-8
    kick_fraction: float = 0.01
    max_kicks: int = 10
    fidelity_goal: float = 0.99
    seed: int = 0

    def __post_init__(self):
        check_common_config(0, self.fidelity_goal)
        if self.dt <= 0 or self.max_time <= 0:
            raise ValidationError("dt and max_time must be positive")
        if self.dead_band_fraction < 0 or self.kick_fraction < 0:
            raise ValidationError("dead_band_fraction and kick_fraction must be >= 0")
        if self.max_kicks < 0:
            raise ValidationError("max_kicks must be >= 0")


def _target_vector(problem: ControlProblem) -> np.ndarray:
    if problem.is_gate:
        raise CapabilityError("feedback transfer needs a state-transfer target")
    rho_f = problem.target.final
    w, v = np.linalg.eigh(rho_f)
    if abs(w[-1] - 1.0) > PURE_TARGET_TOL or np.any(np.abs(w[:-1]) > PURE_TARGET_TOL):
        raise CapabilityError("feedback transfer needs a pure target state")
    return v[:, -1]


def lyapunov_v(rho, psi_f) -> float:
    """Candidate function 1 - <psi_F| rho |psi_F>."""
    psi = np.asarray(psi_f, dtype=np.complex128).reshape(-1)
    mat = rho.density_matrix() if isinstance(rho, QuantumState) else np.asarray(rho, dtype=np.complex128)
    return float(1.0 - (psi.conj() @ mat @ psi).real)


def lyapunov_control_law(
    problem: ControlProblem, rho, dead_band_fraction: float = 1e-8
) -> np.ndarray:
    """Bang-bang amplitudes -w_max sign(v_m), zero inside the dead band."""
    psi = _target_vector(problem)
    mat = rho.density_matrix() if isinstance(rho, QuantumState) else np.asarray(rho, dtype=np.complex128)
    d = psi.shape[0]
    proj = np.eye(d, dtype=np.complex128) - np.outer(psi, psi.conj())
    bounds = problem.system.max_amplitudes
    amps = np.zeros(len(bounds))
    for m, ch in enumerate(problem.system.channels):
        comm = proj @ ch.operator - ch.operator @ proj
        v_m = (-1j * np.sum(mat.conj() * comm)).real
        if abs(v_m) > dead_band_fraction * bounds[m]:
            amps[m] = -bounds[m] * np.sign(v_m)
    return amps


def lyapunov_run(problem: ControlProblem, config: LyapunovConfig | None = None):
    """Integrate the closed-loop law, emitting the realized sequence."""
    cfg = config if config is not None else LyapunovConfig()
    psi = _target_vector(problem)
    system = problem.system
    if problem.channels:
        raise CapabilityError("feedback transfer assumes unitary evolution")
    d = system.dim
    proj = np.eye(d, dtype=np.complex128) - np.outer(psi, psi.conj())
    h_scale = max(1.0, float(np.linalg.norm(system.h_system)))
    if np.linalg.norm(proj @ system.h_system - system.h_system @ proj) > COMMUTATION_TOL * h_scale:
        raise ApplicabilityError("target must be a drift eigenstate ([P, H_sys] = 0)")

    rng = np.random.default_rng(cfg.seed)
    bounds = system.max_amplitudes
    ops = [ch.operator for ch in system.channels]
    n_ch = len(ops)

    rho = np.asarray(problem.target.initial, dtype=np.complex128)
    fid = float((psi.conj() @ rho @ psi).real)

    state = RunState(problem)
    state.sequence = ControlSequence.empty(n_ch)
    state.phi = fid
    state.fbar = fid
    state.best_sequence = state.sequence
    state.best_phi = fid
    state.best_fbar = fid
    state.record()

    segments_dur: list[float] = []
    segments_amp: list[np.ndarray] = []
    kick_steps: list[int] = []
    consecutive_kicks = 0

    def v_components():
        out = np.zeros(n_ch)
        for m in range(n_ch):
            comm = proj @ ops[m] - ops[m] @ proj
            out[m] = (-1j * np.sum(rho.conj() * comm)).real
        return out

    def step_with(amps: np.ndarray):
        nonlocal rho
        h = system.h_system.copy()
        for m in range(n_ch):
            if amps[m] != 0.0:
                h = h + amps[m] * ops[m]
        u = eig_hermitian(h).exp_i(cfg.dt)
        rho = u @ rho @ u.conj().T

    n_steps = int(np.floor(cfg.max_time / cfg.dt + 1e-12))
    goal_v = 1.0 - cfg.fidelity_goal
    status = TERMINATION_MAX_ITER
    if 1.0 - fid <= goal_v:
        status = TERMINATION_GOAL
        n_steps = 0

    for _ in range(n_steps):
        v = v_components()
        active = np.abs(v) > cfg.dead_band_fraction * bounds
        if not np.any(active):
            if consecutive_kicks >= cfg.max_kicks:
                status = TERMINATION_STALLED
                break
            amps = rng.uniform(-1.0, 1.0, n_ch) * cfg.kick_fraction * bounds
            kick_steps.append(len(segments_dur))
            consecutive_kicks += 1
        else:
            amps = np.where(active, -bounds * np.sign(v), 0.0)
            consecutive_kicks = 0
        step_with(amps)
        segments_dur.append(cfg.dt)
        segments_amp.append(amps)
        fid = float((psi.conj() @ rho @ psi).real)
        seq = ControlSequence(np.array(segments_dur), np.array(segments_amp))
        state.accept(seq, fid, fid)
        state.record()
        if 1.0 - fid <= goal_v:
            status = TERMINATION_GOAL
            break

    # the emitted drive is the realized trajectory, not the best iterate
    final_seq = (
        ControlSequence(np.array(segments_dur), np.array(segments_amp))
        if segments_dur
        else ControlSequence.empty(n_ch)
    )
    state.best_sequence = final_seq
    state.extras["kick_steps"] = kick_steps
    return state.finalize(status)
