"""Shared fixtures: small spin systems and canonical synthesis problems."""

import numpy as np
import pytest

from qoctl import (
    ControlProblem,
    GateTarget,
    PenaltyConfig,
    SpinSystemSpec,
    StateTarget,
    build_spin_system,
    standard_gate,
)

KET0 = np.array([1.0, 0.0], dtype=np.complex128)
KET1 = np.array([0.0, 1.0], dtype=np.complex128)
KET_PLUS = np.array([1.0, 1.0], dtype=np.complex128) / np.sqrt(2.0)
KET_MINUS = np.array([1.0, -1.0], dtype=np.complex128) / np.sqrt(2.0)

NO_PENALTY = PenaltyConfig(weight=0.0)


def random_hermitian(rng, dim, scale=1.0):
    m = rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))
    return (m + m.conj().T) * (scale / 2.0)


@pytest.fixture
def qubit():
    """Resonant single qubit, x and y drives, 1 Hz amplitude bound."""
    return build_spin_system(SpinSystemSpec(n_qubits=1, detunings_hz=(0.0,)))


@pytest.fixture
def detuned_qubit():
    return build_spin_system(SpinSystemSpec(n_qubits=1, detunings_hz=(0.5,)))


@pytest.fixture
def hadamard_problem(qubit):
    return ControlProblem(
        system=qubit,
        target=GateTarget(standard_gate("hadamard")),
        penalty=NO_PENALTY,
    )


@pytest.fixture
def flip_problem(qubit):
    """|0> -> |1> state transfer scored with the trace overlap."""
    return ControlProblem(
        system=qubit,
        target=StateTarget(initial=KET0, final=KET1, kind="trace"),
        penalty=NO_PENALTY,
    )
