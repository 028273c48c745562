"""Control systems, piecewise-constant sequences, states and propagation.

Segment ``n`` of a sequence runs under the constant Hamiltonian

    H_n = H_sys + sum_m amplitudes[n, m] * channel_m

and the total propagator applies segments in time order: the first segment
acts first, so U_total = U_N ... U_2 U_1.  Segment indices in the public
operations are 1-based, matching the pulse-file convention.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DimensionMismatchError, ValidationError
from .linalg import (
    Spectrum,
    as_complex_matrix,
    eig_hermitian,
    require_hermitian,
    require_square,
)

STATE_TOL = 1e-10
KRAUS_TOL = 1e-10


@dataclass(frozen=True)
class ControlChannel:
    """One control knob: a Hermitian operator with a hardware amplitude bound."""

    operator: np.ndarray
    max_amplitude: float
    label: str = ""

    def __post_init__(self):
        op = require_hermitian(self.operator, what="channel operator")
        object.__setattr__(self, "operator", op)
        if not (self.max_amplitude > 0):
            raise ValidationError("channel max_amplitude must be positive")


@dataclass(frozen=True)
class ControlSystem:
    """Drift Hamiltonian plus an ordered set of control channels."""

    h_system: np.ndarray
    channels: tuple[ControlChannel, ...]

    def __post_init__(self):
        h = require_hermitian(self.h_system, what="system Hamiltonian")
        object.__setattr__(self, "h_system", h)
        object.__setattr__(self, "channels", tuple(self.channels))
        for ch in self.channels:
            if ch.operator.shape != h.shape:
                raise DimensionMismatchError(
                    f"channel operator shape {ch.operator.shape} does not match "
                    f"system dimension {h.shape}"
                )

    @property
    def dim(self) -> int:
        return self.h_system.shape[0]

    @property
    def n_channels(self) -> int:
        return len(self.channels)

    @property
    def max_amplitudes(self) -> np.ndarray:
        return np.array([ch.max_amplitude for ch in self.channels], dtype=float)

    def drift_spectrum(self) -> Spectrum:
        """Eigendecomposition of the drift, computed once and memoized."""
        cached = self.__dict__.get("_drift_spectrum")
        if cached is None:
            cached = eig_hermitian(self.h_system, what="system Hamiltonian")
            object.__setattr__(self, "_drift_spectrum", cached)
        return cached

    def delay_propagator(self, tau: float) -> np.ndarray:
        """Free-evolution propagator exp(-i H_sys tau) from the drift spectrum."""
        return self.drift_spectrum().exp_i(tau)


@dataclass(frozen=True)
class ControlSequence:
    """Piecewise-constant control: durations (N,) and amplitudes (N, M)."""

    durations: np.ndarray
    amplitudes: np.ndarray

    def __post_init__(self):
        dur = np.asarray(self.durations, dtype=float).reshape(-1)
        amp = np.asarray(self.amplitudes, dtype=float)
        if amp.ndim != 2:
            raise DimensionMismatchError("amplitudes must be a 2-D (segments x channels) array")
        if amp.shape[0] != dur.shape[0]:
            raise DimensionMismatchError(
                f"{dur.shape[0]} durations but {amp.shape[0]} amplitude rows"
            )
        if not np.all(np.isfinite(dur)) or not np.all(np.isfinite(amp)):
            raise ValidationError("durations and amplitudes must be finite")
        if dur.size and not np.all(dur > 0):
            raise ValidationError("all segment durations must be positive")
        object.__setattr__(self, "durations", dur)
        object.__setattr__(self, "amplitudes", amp)

    @classmethod
    def equal_durations(cls, total_time: float, amplitudes) -> "ControlSequence":
        amp = np.asarray(amplitudes, dtype=float)
        if amp.ndim != 2 or amp.shape[0] == 0:
            raise DimensionMismatchError("amplitudes must be a non-empty 2-D array")
        if not total_time > 0:
            raise ValidationError("total_time must be positive")
        n = amp.shape[0]
        return cls(durations=np.full(n, total_time / n), amplitudes=amp)

    @classmethod
    def empty(cls, n_channels: int) -> "ControlSequence":
        return cls(durations=np.zeros(0), amplitudes=np.zeros((0, n_channels)))

    @property
    def n_segments(self) -> int:
        return self.durations.shape[0]

    @property
    def n_channels(self) -> int:
        return self.amplitudes.shape[1]

    @property
    def total_time(self) -> float:
        return float(np.sum(self.durations))

    def scaled(self, factor: float) -> "ControlSequence":
        """Uniformly scale every amplitude; durations are untouched."""
        return ControlSequence(self.durations, self.amplitudes * float(factor))

    def with_amplitudes(self, amplitudes) -> "ControlSequence":
        return ControlSequence(self.durations, amplitudes)


@dataclass(frozen=True)
class QuantumState:
    """Pure state (unit vector) or density matrix (Hermitian, unit trace, PSD)."""

    vector: np.ndarray | None = None
    matrix: np.ndarray | None = None

    def __post_init__(self):
        if (self.vector is None) == (self.matrix is None):
            raise ValidationError("provide exactly one of vector or matrix")
        if self.vector is not None:
            v = np.asarray(self.vector, dtype=np.complex128).reshape(-1)
            if abs(np.linalg.norm(v) - 1.0) > STATE_TOL:
                raise ValidationError("pure state vector must have unit norm")
            object.__setattr__(self, "vector", v)
        else:
            m = require_hermitian(self.matrix, what="density matrix")
            if abs(np.trace(m).real - 1.0) > STATE_TOL:
                raise ValidationError("density matrix must have unit trace")
            if np.linalg.eigvalsh(m)[0] < -STATE_TOL:
                raise ValidationError("density matrix must be positive semidefinite")
            object.__setattr__(self, "matrix", m)

    @classmethod
    def pure(cls, vector) -> "QuantumState":
        return cls(vector=vector)

    @classmethod
    def density(cls, matrix) -> "QuantumState":
        return cls(matrix=matrix)

    @property
    def is_pure(self) -> bool:
        return self.vector is not None

    @property
    def dim(self) -> int:
        return self.vector.shape[0] if self.is_pure else self.matrix.shape[0]

    def density_matrix(self) -> np.ndarray:
        if self.is_pure:
            return np.outer(self.vector, self.vector.conj())
        return self.matrix

    def purity(self) -> float:
        if self.is_pure:
            return 1.0
        return float(np.trace(self.matrix @ self.matrix).real)


@dataclass(frozen=True)
class QuantumChannel:
    """Kraus map applied after a designated segment (0 = before the first)."""

    kraus_operators: tuple[np.ndarray, ...] = field(default_factory=tuple)
    insert_after_segment: int = 0

    def __post_init__(self):
        ops = tuple(require_square(k) for k in self.kraus_operators)
        if not ops:
            raise ValidationError("a channel needs at least one Kraus operator")
        d = ops[0].shape[0]
        total = np.zeros((d, d), dtype=np.complex128)
        for k in ops:
            if k.shape != (d, d):
                raise DimensionMismatchError("Kraus operators must share one dimension")
            total += k.conj().T @ k
        if np.linalg.norm(total - np.eye(d)) > KRAUS_TOL:
            raise ValidationError("Kraus operators must satisfy sum K^dag K = I")
        if self.insert_after_segment < 0:
            raise ValidationError("insert_after_segment must be >= 0")
        object.__setattr__(self, "kraus_operators", ops)

    @property
    def dim(self) -> int:
        return self.kraus_operators[0].shape[0]

    def apply(self, rho: np.ndarray) -> np.ndarray:
        out = np.zeros_like(rho)
        for k in self.kraus_operators:
            out += k @ rho @ k.conj().T
        return out


def _require_paired(system: ControlSystem, sequence: ControlSequence) -> None:
    if sequence.n_channels != system.n_channels:
        raise DimensionMismatchError(
            f"sequence has {sequence.n_channels} channels, system has {system.n_channels}"
        )


def segment_hamiltonian(system: ControlSystem, sequence: ControlSequence, n: int) -> np.ndarray:
    """Constant Hamiltonian of segment ``n`` (1-based)."""
    _require_paired(system, sequence)
    if not 1 <= n <= sequence.n_segments:
        raise IndexError(f"segment index {n} outside 1..{sequence.n_segments}")
    h = system.h_system.copy()
    for m, ch in enumerate(system.channels):
        h += sequence.amplitudes[n - 1, m] * ch.operator
    return h


def segment_propagator(system: ControlSystem, sequence: ControlSequence, n: int) -> np.ndarray:
    """Unitary exp(-i H_n tau_n) of segment ``n`` (1-based)."""
    h = segment_hamiltonian(system, sequence, n)
    return eig_hermitian(h).exp_i(float(sequence.durations[n - 1]))


def sequence_propagators(system: ControlSystem, sequence: ControlSequence) -> list[np.ndarray]:
    """All segment propagators U_1 .. U_N in time order."""
    _require_paired(system, sequence)
    return [segment_propagator(system, sequence, n) for n in range(1, sequence.n_segments + 1)]


def total_propagator(system: ControlSystem, sequence: ControlSequence) -> np.ndarray:
    """Ordered product U_N ... U_2 U_1; the empty sequence gives the identity."""
    _require_paired(system, sequence)
    u = np.eye(system.dim, dtype=np.complex128)
    for n in range(1, sequence.n_segments + 1):
        u = segment_propagator(system, sequence, n) @ u
    return u


def _channels_by_slot(channels, n_segments: int, dim: int) -> dict[int, list[QuantumChannel]]:
    slots: dict[int, list[QuantumChannel]] = {}
    for ch in channels:
        if ch.dim != dim:
            raise DimensionMismatchError("quantum channel dimension does not match the system")
        if ch.insert_after_segment > n_segments:
            raise ValidationError(
                f"insert_after_segment {ch.insert_after_segment} exceeds segment count {n_segments}"
            )
        slots.setdefault(ch.insert_after_segment, []).append(ch)
    return slots


def evolve_density(
    system: ControlSystem,
    sequence: ControlSequence,
    rho: np.ndarray,
    channels: tuple[QuantumChannel, ...] = (),
) -> np.ndarray:
    """Propagate a (not necessarily normalized) Hermitian matrix through the
    sequence, applying any Kraus maps after their designated segments."""
    _require_paired(system, sequence)
    rho = as_complex_matrix(rho)
    slots = _channels_by_slot(channels, sequence.n_segments, system.dim)
    for ch in slots.get(0, ()):
        rho = ch.apply(rho)
    for n in range(1, sequence.n_segments + 1):
        u = segment_propagator(system, sequence, n)
        rho = u @ rho @ u.conj().T
        for ch in slots.get(n, ()):
            rho = ch.apply(rho)
    return rho


def propagate_state(
    system: ControlSystem,
    sequence: ControlSequence,
    state: QuantumState,
    channels: tuple[QuantumChannel, ...] = (),
) -> QuantumState:
    """Forward-simulate a state; pure inputs stay pure when no channel is attached."""
    _require_paired(system, sequence)
    if state.dim != system.dim:
        raise DimensionMismatchError("state dimension does not match the system")
    if state.is_pure and not channels:
        v = state.vector
        for n in range(1, sequence.n_segments + 1):
            v = segment_propagator(system, sequence, n) @ v
        return QuantumState.pure(v)
    rho = evolve_density(system, sequence, state.density_matrix(), channels)
    return QuantumState.density(rho)
