"""Spin-qubit model systems, named gates and ensemble distributions.

Frequencies (detunings, couplings, amplitude bounds) are given in Hz and
converted to angular units exactly once, when the system is built.  Qubit 1 is
the leftmost tensor factor.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field

import numpy as np

from .errors import ValidationError
from .model import ControlChannel, ControlSystem
from .problems import EnsembleDistribution

SIGMA_X = np.array([[0.0, 1.0], [1.0, 0.0]], dtype=np.complex128)
SIGMA_Y = np.array([[0.0, -1.0j], [1.0j, 0.0]], dtype=np.complex128)
SIGMA_Z = np.array([[1.0, 0.0], [0.0, -1.0]], dtype=np.complex128)
_PAULI = {"x": SIGMA_X, "y": SIGMA_Y, "z": SIGMA_Z}

DISTRIBUTION_KINDS = ("uniform", "triangular", "gaussian-truncated")


def operator_on(op: np.ndarray, qubit: int, n_qubits: int) -> np.ndarray:
    """Embed a single-qubit operator at 1-based position ``qubit``."""
    if not 1 <= qubit <= n_qubits:
        raise ValidationError(f"qubit index {qubit} outside 1..{n_qubits}")
    out = np.array([[1.0 + 0.0j]])
    for i in range(1, n_qubits + 1):
        out = np.kron(out, op if i == qubit else np.eye(2))
    return out


@dataclass(frozen=True)
class SpinSystemSpec:
    """Declarative description of a coupled spin-qubit register.

    ``axes`` lists the drive axes per qubit as strings over {x, y}; the channel
    order is qubit-major in the given axis order.  ``max_amplitude_hz`` bounds
    every drive channel (the spec of a channel needs a bound, so it lives here).
    """

    n_qubits: int
    detunings_hz: tuple[float, ...]
    couplings_hz: tuple[tuple[float, ...], ...] | None = None
    axes: tuple[str, ...] = field(default_factory=tuple)
    max_amplitude_hz: float = 1.0

    def __post_init__(self):
        if self.n_qubits < 1:
            raise ValidationError("n_qubits must be >= 1")
        det = tuple(float(x) for x in self.detunings_hz)
        if len(det) != self.n_qubits:
            raise ValidationError("need one detuning per qubit")
        axes = tuple(self.axes) if self.axes else tuple("xy" for _ in range(self.n_qubits))
        if len(axes) != self.n_qubits:
            raise ValidationError("need one axis string per qubit")
        for ax in axes:
            if not ax or any(c not in "xy" for c in ax) or len(set(ax)) != len(ax):
                raise ValidationError(f"axis string {ax!r} must be a subset of 'xy' without repeats")
        if self.couplings_hz is not None:
            j = np.asarray(self.couplings_hz, dtype=float)
            if j.shape != (self.n_qubits, self.n_qubits):
                raise ValidationError("coupling matrix must be n_qubits x n_qubits")
            if np.any(np.diag(j) != 0.0):
                raise ValidationError("coupling matrix must have a zero diagonal")
            if not np.allclose(j, j.T):
                raise ValidationError("coupling matrix must be symmetric")
            object.__setattr__(self, "couplings_hz", tuple(tuple(row) for row in j))
        if not self.max_amplitude_hz > 0:
            raise ValidationError("max_amplitude_hz must be positive")
        object.__setattr__(self, "detunings_hz", det)
        object.__setattr__(self, "axes", axes)


def build_spin_system(spec: SpinSystemSpec) -> ControlSystem:
    """Rotating-frame drift plus per-qubit transverse drive channels.

    H_sys = sum_i 2 pi d_i sz_i / 2 + sum_{i<j} 2 pi J_ij sz_i sz_j / 2, with
    channels sx_i / 2 and sy_i / 2 bounded by 2 pi max_amplitude_hz.
    """
    n = spec.n_qubits
    dim = 2**n
    h = np.zeros((dim, dim), dtype=np.complex128)
    for i in range(1, n + 1):
        h += 2.0 * np.pi * spec.detunings_hz[i - 1] * operator_on(SIGMA_Z, i, n) / 2.0
    if spec.couplings_hz is not None:
        j = np.asarray(spec.couplings_hz, dtype=float)
        for a in range(1, n + 1):
            for b in range(a + 1, n + 1):
                if j[a - 1, b - 1] != 0.0:
                    zz = operator_on(SIGMA_Z, a, n) @ operator_on(SIGMA_Z, b, n)
                    h += 2.0 * np.pi * j[a - 1, b - 1] * zz / 2.0
    bound = 2.0 * np.pi * spec.max_amplitude_hz
    channels = []
    for i in range(1, n + 1):
        for axis in spec.axes[i - 1]:
            channels.append(
                ControlChannel(
                    operator=operator_on(_PAULI[axis], i, n) / 2.0,
                    max_amplitude=bound,
                    label=f"q{i}{axis}",
                )
            )
    return ControlSystem(h_system=h, channels=tuple(channels))


def _rotation(axis: str, theta: float) -> np.ndarray:
    half = theta / 2.0
    return np.cos(half) * np.eye(2) - 1j * np.sin(half) * _PAULI[axis]


_ROTATION_RE = re.compile(r"^(rx|ry|rz)\(([-+0-9.eE]+)\)$")

_FIXED_GATES = {
    "hadamard": (1, lambda: np.array([[1, 1], [1, -1]], dtype=np.complex128) / np.sqrt(2.0)),
    "pauli-x": (1, lambda: SIGMA_X.copy()),
    "pauli-y": (1, lambda: SIGMA_Y.copy()),
    "pauli-z": (1, lambda: SIGMA_Z.copy()),
    "cnot": (2, lambda: np.array(
        [[1, 0, 0, 0], [0, 1, 0, 0], [0, 0, 0, 1], [0, 0, 1, 0]], dtype=np.complex128)),
    "iswap": (2, lambda: np.array(
        [[1, 0, 0, 0], [0, 0, 1j, 0], [0, 1j, 0, 0], [0, 0, 0, 1]], dtype=np.complex128)),
}


def standard_gate(name: str, n_qubits: int = 1, theta: float | None = None) -> np.ndarray:
    """Named target unitary.

    Rotations take an angle either as ``theta`` or inline, e.g. "rx(1.5708)";
    angles are radians and R = exp(-i theta sigma / 2).  The qubit count must
    match the gate's arity.
    """
    key = name.strip().lower()
    arity = None
    if key in _FIXED_GATES:
        arity, builder = _FIXED_GATES[key]
        gate = builder()
    else:
        m = _ROTATION_RE.match(key)
        if m is not None:
            if theta is not None:
                raise ValidationError("give the angle inline or as theta, not both")
            axis, angle = m.group(1)[1], float(m.group(2))
            gate, arity = _rotation(axis, angle), 1
        elif key in ("rx", "ry", "rz"):
            if theta is None:
                raise ValidationError(f"rotation {key!r} needs an angle")
            gate, arity = _rotation(key[1], float(theta)), 1
        else:
            raise ValidationError(f"unknown gate name {name!r}")
    if n_qubits != arity:
        raise ValidationError(f"gate {name!r} acts on {arity} qubit(s), not {n_qubits}")
    return gate


def standard_distribution(kind: str, half_width: float, bins: int) -> EnsembleDistribution:
    """Amplitude-scale bins equally spaced in [1 - hw, 1 + hw].

    uniform: equal weights.  triangular: weights 1 + min(l, L-1-l) on the bin
    index, i.e. 1-2-1 for three bins.  gaussian-truncated: exp(-(s-1)^2/2
    sigma^2) with sigma = half_width / 2, renormalized.
    """
    if kind not in DISTRIBUTION_KINDS:
        raise ValidationError(f"unknown distribution kind {kind!r}; expected one of {DISTRIBUTION_KINDS}")
    if not 0.0 <= half_width < 0.5:
        raise ValidationError("half_width must lie in [0, 0.5)")
    if bins < 1:
        raise ValidationError("bins must be >= 1")
    if bins == 1:
        scales = np.array([1.0])
    else:
        scales = np.linspace(1.0 - half_width, 1.0 + half_width, bins)
    if kind == "uniform":
        weights = np.ones(bins)
    elif kind == "triangular":
        idx = np.arange(bins)
        weights = 1.0 + np.minimum(idx, bins - 1 - idx)
    else:
        if half_width == 0.0:
            weights = np.ones(bins)
        else:
            # divide before squaring so subnormal widths cannot underflow to 0/0
            z = (scales - 1.0) / (half_width / 2.0)
            weights = np.exp(-0.5 * z * z)
    return EnsembleDistribution(scales=scales, probabilities=weights / np.sum(weights))
