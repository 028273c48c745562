"""Control problems and the performance functionals optimizers maximize.

A problem pairs a system with either a gate target or a state-transfer target,
an ensemble of amplitude-scale bins for robustness, a soft amplitude penalty,
and optional Kraus channels interleaved with the evolution.  The objective is

    Phi = sum_l p_l F_l  -  penalty

where bin l evaluates the chosen fidelity with every amplitude scaled by
scales[l].
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .errors import CapabilityError, DimensionMismatchError, ValidationError
from .fidelity import (
    attenuated_correlation,
    correlation,
    gate_fidelity,
    trace_fidelity,
    uhlmann_fidelity,
)
from .linalg import as_complex_matrix, require_hermitian
from .model import (
    ControlSequence,
    ControlSystem,
    QuantumChannel,
    QuantumState,
    evolve_density,
    total_propagator,
)

STATE_FIDELITY_KINDS = ("uhlmann", "trace", "correlation", "attenuated")

THREADS_ENV = "QOCTL_THREADS"


@dataclass(frozen=True)
class EnsembleDistribution:
    """Discrete distribution over amplitude-scale factors."""

    scales: np.ndarray
    probabilities: np.ndarray

    def __post_init__(self):
        s = np.asarray(self.scales, dtype=float).reshape(-1)
        p = np.asarray(self.probabilities, dtype=float).reshape(-1)
        if s.shape != p.shape or s.size == 0:
            raise ValidationError("scales and probabilities must be equal-length and non-empty")
        if np.any(s <= 0):
            raise ValidationError("ensemble scales must be positive")
        if np.any(p < 0):
            raise ValidationError("ensemble probabilities must be non-negative")
        if abs(float(np.sum(p)) - 1.0) > 1e-12:
            raise ValidationError("ensemble probabilities must sum to 1")
        object.__setattr__(self, "scales", s)
        object.__setattr__(self, "probabilities", p)

    @classmethod
    def single(cls) -> "EnsembleDistribution":
        return cls(scales=np.array([1.0]), probabilities=np.array([1.0]))

    @property
    def n_bins(self) -> int:
        return self.scales.shape[0]


@dataclass(frozen=True)
class PenaltyConfig:
    """Quadratic hinge on amplitudes above soft_fraction of each channel bound."""

    soft_fraction: float = 0.9
    weight: float = 1.0

    def __post_init__(self):
        if not 0.0 < self.soft_fraction < 1.0:
            raise ValidationError("soft_fraction must lie strictly between 0 and 1")
        if self.weight < 0.0:
            raise ValidationError("penalty weight must be non-negative")


@dataclass(frozen=True)
class GateTarget:
    """Unitary to synthesize, compared with global-phase-invariant overlap."""

    unitary: np.ndarray

    def __post_init__(self):
        u = as_complex_matrix(self.unitary)
        if u.shape[0] != u.shape[1]:
            raise DimensionMismatchError("gate target must be square")
        if np.linalg.norm(u.conj().T @ u - np.eye(u.shape[0])) > 1e-6:
            raise ValidationError("gate target must be unitary")
        object.__setattr__(self, "unitary", u)

    @property
    def dim(self) -> int:
        return self.unitary.shape[0]


@dataclass(frozen=True)
class StateTarget:
    """Initial/final pair for state transfer with a chosen fidelity measure.

    For the correlation kinds the pair holds traceless deviation operators;
    for uhlmann/trace it holds valid states (pure vectors are promoted).
    """

    initial: np.ndarray
    final: np.ndarray
    kind: str = "uhlmann"

    def __post_init__(self):
        if self.kind not in STATE_FIDELITY_KINDS:
            raise ValidationError(
                f"unknown fidelity kind {self.kind!r}; expected one of {STATE_FIDELITY_KINDS}"
            )
        ini = self._coerce(self.initial)
        fin = self._coerce(self.final)
        if ini.shape != fin.shape:
            raise DimensionMismatchError("initial and final states must share one dimension")
        object.__setattr__(self, "initial", ini)
        object.__setattr__(self, "final", fin)

    def _coerce(self, state) -> np.ndarray:
        if isinstance(state, QuantumState):
            return state.density_matrix()
        arr = np.asarray(state, dtype=np.complex128)
        if arr.ndim == 1:
            return QuantumState.pure(arr).density_matrix()
        if self.kind in ("correlation", "attenuated"):
            m = require_hermitian(arr, what="deviation operator")
            if abs(np.trace(m)) > 1e-8:
                raise ValidationError("correlation kinds expect traceless deviation operators")
            return m
        return QuantumState.density(arr).density_matrix()

    @property
    def dim(self) -> int:
        return self.initial.shape[0]


@dataclass(frozen=True)
class ControlProblem:
    system: ControlSystem
    target: GateTarget | StateTarget
    ensemble: EnsembleDistribution = field(default_factory=EnsembleDistribution.single)
    penalty: PenaltyConfig = field(default_factory=PenaltyConfig)
    channels: tuple[QuantumChannel, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "channels", tuple(self.channels))
        if self.target.dim != self.system.dim:
            raise DimensionMismatchError("target dimension does not match the system")
        if self.channels and self.is_gate:
            raise ValidationError("interleaved channels require a state-transfer target")
        for ch in self.channels:
            if ch.dim != self.system.dim:
                raise DimensionMismatchError("channel dimension does not match the system")

    @property
    def is_gate(self) -> bool:
        return isinstance(self.target, GateTarget)


@dataclass(frozen=True)
class EnsemblePerformance:
    mean: float
    per_bin: np.ndarray


def sequence_fidelity(problem: ControlProblem, sequence: ControlSequence, scale: float = 1.0) -> float:
    """Fidelity of one sequence at one amplitude-scale factor."""
    seq = sequence if scale == 1.0 else sequence.scaled(scale)
    if problem.is_gate:
        u = total_propagator(problem.system, seq)
        return gate_fidelity(problem.target.unitary, u)
    rho_n = evolve_density(problem.system, seq, problem.target.initial, problem.channels)
    kind = problem.target.kind
    if kind == "uhlmann":
        return uhlmann_fidelity(problem.target.final, rho_n)
    if kind == "trace":
        return trace_fidelity(problem.target.final, rho_n)
    if kind == "correlation":
        return correlation(problem.target.final, rho_n)
    if kind == "attenuated":
        return attenuated_correlation(problem.target.initial, problem.target.final, rho_n)
    raise CapabilityError(f"unhandled fidelity kind {kind!r}")


_EXECUTORS: dict[int, ThreadPoolExecutor] = {}


def _thread_cap() -> int:
    raw = os.environ.get(THREADS_ENV)
    if raw is None:
        return os.cpu_count() or 1
    try:
        cap = int(raw)
    except ValueError:
        raise ValidationError(f"{THREADS_ENV} must be an integer, got {raw!r}")
    if cap < 1:
        raise ValidationError(f"{THREADS_ENV} must be >= 1")
    return cap


def _bin_fidelities(problem, sequence, scales) -> np.ndarray:
    workers = min(len(scales), _thread_cap())
    if workers <= 1 or len(scales) <= 1:
        return np.array([sequence_fidelity(problem, sequence, s) for s in scales])
    pool = _EXECUTORS.get(workers)
    if pool is None:
        pool = ThreadPoolExecutor(max_workers=workers)
        _EXECUTORS[workers] = pool
    futures = [pool.submit(sequence_fidelity, problem, sequence, s) for s in scales]
    return np.array([f.result() for f in futures])


def ensemble_performance(
    problem: ControlProblem,
    sequence: ControlSequence,
    distribution: EnsembleDistribution | None = None,
) -> EnsemblePerformance:
    """Per-bin fidelities and their probability-weighted mean.

    Bins are independent, so they may be evaluated concurrently; the env var
    QOCTL_THREADS caps the worker count and the reduction order is fixed, so
    results do not depend on scheduling.
    """
    dist = distribution if distribution is not None else problem.ensemble
    per_bin = _bin_fidelities(problem, sequence, list(dist.scales))
    mean = float(np.dot(dist.probabilities, per_bin))
    return EnsemblePerformance(mean=mean, per_bin=per_bin)


def penalty_value(
    sequence: ControlSequence,
    system: ControlSystem,
    penalty: PenaltyConfig,
) -> float:
    """weight * sum over segments/channels of the squared hinge excess."""
    if sequence.n_channels != system.n_channels:
        raise DimensionMismatchError("sequence channel count does not match the system")
    if penalty.weight == 0.0 or sequence.n_segments == 0:
        return 0.0
    z = penalty.soft_fraction
    bounds = system.max_amplitudes
    soft = z * bounds
    width = (1.0 - z) * bounds
    excess = np.maximum(0.0, (np.abs(sequence.amplitudes) - soft) / width)
    # wildly divergent iterates overflow the square; inf is the right limit
    with np.errstate(over="ignore"):
        return float(penalty.weight * np.sum(excess**2))


def penalty_gradient(
    sequence: ControlSequence,
    system: ControlSystem,
    penalty: PenaltyConfig,
) -> np.ndarray:
    """d(penalty)/d(amplitudes), same shape as sequence.amplitudes."""
    z = penalty.soft_fraction
    bounds = system.max_amplitudes
    width = (1.0 - z) * bounds
    excess = np.maximum(0.0, (np.abs(sequence.amplitudes) - z * bounds) / width)
    return penalty.weight * 2.0 * excess / width * np.sign(sequence.amplitudes)


def penalized_performance(
    problem: ControlProblem,
    sequence: ControlSequence,
    distribution: EnsembleDistribution | None = None,
    penalty: PenaltyConfig | None = None,
) -> float:
    """Ensemble mean fidelity minus the amplitude penalty."""
    pen = penalty if penalty is not None else problem.penalty
    perf = ensemble_performance(problem, sequence, distribution)
    return perf.mean - penalty_value(sequence, problem.system, pen)
