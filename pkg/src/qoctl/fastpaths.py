"""Structure-exploiting segment propagators.

Three shortcuts for the common case where the drift is diagonalized once:

* a delay propagator built from the drift spectrum,
* a symmetric split U_d(tau/2) exp(-i H_ctrl tau) U_d(tau/2) whose error per
  segment shrinks as tau^3,
* a caller-supplied fixed diagonalizing pair (W1, W2) for control Hamiltonians
  that share one eigenbasis, plus a frozen cache of bang-bang propagators.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ApplicabilityError, CacheMissError, ValidationError
from .linalg import eig_hermitian
from .model import ControlSequence, ControlSystem, _require_paired

DIAG_TOL = 1e-8

BANGBANG_KINDS = ("delay", "full-power")


def _segment_control_hamiltonian(system, sequence, n: int) -> np.ndarray:
    h = np.zeros_like(system.h_system)
    for m, ch in enumerate(system.channels):
        h += sequence.amplitudes[n - 1, m] * ch.operator
    return h


def trotter_propagator(system: ControlSystem, sequence: ControlSequence, n: int) -> np.ndarray:
    """Symmetric-split propagator for segment ``n`` (1-based).

    Exact when the drift commutes with the segment's control Hamiltonian;
    otherwise the deviation from the direct exponential scales as tau^3.
    """
    _require_paired(system, sequence)
    if not 1 <= n <= sequence.n_segments:
        raise IndexError(f"segment index {n} outside 1..{sequence.n_segments}")
    tau = float(sequence.durations[n - 1])
    half = system.delay_propagator(tau / 2.0)
    h_ctrl = _segment_control_hamiltonian(system, sequence, n)
    core = eig_hermitian(h_ctrl, what="control Hamiltonian").exp_i(tau)
    return half @ core @ half


def diagonalized_control_propagator(
    system: ControlSystem,
    sequence: ControlSequence,
    n: int,
    w1: np.ndarray,
    w2: np.ndarray,
) -> np.ndarray:
    """Symmetric-split propagator using a fixed diagonalizing pair.

    The caller guarantees that W2 H_ctrl W1 is real diagonal for every segment
    of the family (single-channel fixed-phase drives being the usual case) and
    that W1 W2 = I; both conditions are checked to 1e-8 and violation raises
    ApplicabilityError.
    """
    _require_paired(system, sequence)
    if not 1 <= n <= sequence.n_segments:
        raise IndexError(f"segment index {n} outside 1..{sequence.n_segments}")
    w1 = np.asarray(w1, dtype=np.complex128)
    w2 = np.asarray(w2, dtype=np.complex128)
    d = system.dim
    if w1.shape != (d, d) or w2.shape != (d, d):
        raise ValidationError("W1 and W2 must match the system dimension")
    if np.linalg.norm(w1 @ w2 - np.eye(d)) > DIAG_TOL * d:
        raise ApplicabilityError("W1 W2 must be the identity for the split to close")

    h_ctrl = _segment_control_hamiltonian(system, sequence, n)
    diag_candidate = w2 @ h_ctrl @ w1
    off = diag_candidate - np.diag(np.diag(diag_candidate))
    scale = max(np.linalg.norm(h_ctrl), 1.0)
    if np.linalg.norm(off) > DIAG_TOL * scale:
        raise ApplicabilityError("supplied pair does not diagonalize this control Hamiltonian")
    phases = np.diag(diag_candidate)
    if np.max(np.abs(phases.imag)) > DIAG_TOL * scale:
        raise ApplicabilityError("diagonalized control Hamiltonian must be real")

    tau = float(sequence.durations[n - 1])
    half = system.delay_propagator(tau / 2.0)
    core = w1 @ (np.exp(-1j * phases.real * tau)[:, None] * w2)
    return half @ core @ half


@dataclass(frozen=True)
class BangBangCache:
    """Frozen lookup of delay and full-power propagators keyed by duration."""

    system: ControlSystem
    delay: dict
    full_power: dict

    def durations(self) -> tuple:
        return tuple(sorted(self.delay))


def bangbang_propagator_cache(system: ControlSystem, durations) -> BangBangCache:
    """Precompute exp(-i H tau) for the drift alone and for all channels at
    their positive amplitude bound, for each requested duration."""
    taus = [float(t) for t in np.asarray(durations, dtype=float).reshape(-1)]
    if not taus:
        raise ValidationError("cache needs at least one duration")
    if any(t <= 0 for t in taus):
        raise ValidationError("cache durations must be positive")
    h_full = system.h_system.copy()
    for ch in system.channels:
        h_full += ch.max_amplitude * ch.operator
    full_spec = eig_hermitian(h_full, what="full-power Hamiltonian")
    delay, full = {}, {}
    for t in taus:
        u_d = system.delay_propagator(t)
        u_f = full_spec.exp_i(t)
        u_d.flags.writeable = False
        u_f.flags.writeable = False
        delay[t] = u_d
        full[t] = u_f
    return BangBangCache(system=system, delay=delay, full_power=full)


def bangbang_propagator(cache: BangBangCache, kind: str, tau: float) -> np.ndarray:
    """Fetch a cached propagator; unknown (kind, tau) raises CacheMissError."""
    if kind not in BANGBANG_KINDS:
        raise ValidationError(f"unknown bang-bang kind {kind!r}; expected one of {BANGBANG_KINDS}")
    table = cache.delay if kind == "delay" else cache.full_power
    key = float(tau)
    if key not in table:
        raise CacheMissError(f"duration {tau!r} not present in the frozen cache")
    return table[key]
