"""Fidelity measures between target and realized gates or states.

The correlation measures act on caller-supplied traceless parts (see
``qoctl.linalg.traceless_part``); nothing is subtracted silently here.
"""

from __future__ import annotations

import numpy as np

from .errors import DegenerateInputError, ValidationError
from .linalg import as_complex_matrix, hs_inner, require_hermitian, require_same_shape
from .model import QuantumState

UNITARITY_TOL = 1e-6
TRACELESS_TOL = 1e-8
PSD_TOL = 1e-10


def _as_density(state) -> np.ndarray:
    """Accept a QuantumState, a pure vector, or a density matrix."""
    if isinstance(state, QuantumState):
        return state.density_matrix()
    arr = np.asarray(state, dtype=np.complex128)
    if arr.ndim == 1:
        return QuantumState.pure(arr).density_matrix()
    return QuantumState.density(arr).density_matrix()


def gate_fidelity(u_target, u_actual) -> float:
    """Global-phase-invariant gate overlap |Tr(U_target^dag U)|^2 / d^2."""
    ut = as_complex_matrix(u_target)
    ua = as_complex_matrix(u_actual)
    require_same_shape(ut, ua)
    d = ut.shape[0]
    eye = np.eye(d)
    for name, u in (("target", ut), ("actual", ua)):
        if np.linalg.norm(u.conj().T @ u - eye) > UNITARITY_TOL:
            raise ValidationError(f"{name} operator deviates from unitarity beyond {UNITARITY_TOL:g}")
    return float(abs(hs_inner(ut, ua)) ** 2 / d**2)


def _psd_sqrt(rho: np.ndarray) -> np.ndarray:
    w, v = np.linalg.eigh(rho)
    if w[0] < -PSD_TOL:
        raise ValidationError("state must be positive semidefinite")
    w = np.clip(w, 0.0, None)
    return (v * np.sqrt(w)) @ v.conj().T


def uhlmann_fidelity(rho_f, rho_n) -> float:
    """(Tr sqrt(sqrt(rho_f) rho_n sqrt(rho_f)))^2, in [0, 1] for valid states."""
    a = require_hermitian(_as_density(rho_f), what="target state")
    b = require_hermitian(_as_density(rho_n), what="final state")
    require_same_shape(a, b)
    root = _psd_sqrt(a)
    inner = root @ b @ root
    w = np.linalg.eigvalsh((inner + inner.conj().T) / 2.0)
    w = np.clip(w, 0.0, None)
    return float(np.sum(np.sqrt(w)) ** 2)


def trace_fidelity(rho_f, rho_n) -> float:
    """Plain overlap Tr(rho_f^dag rho_n); real for Hermitian arguments."""
    a = _as_density(rho_f)
    b = _as_density(rho_n)
    require_same_shape(a, b)
    val = hs_inner(a, b)
    if abs(val.imag) > 1e-10:
        raise ValidationError("trace fidelity of Hermitian inputs must be real")
    return float(val.real)


def _require_traceless(m: np.ndarray, name: str) -> None:
    if abs(np.trace(m)) > TRACELESS_TOL:
        raise ValidationError(f"{name} must be traceless (use traceless_part first)")


def correlation(rho_f, rho_n) -> float:
    """Normalized overlap of two traceless deviation operators, in [-1, 1]."""
    a = as_complex_matrix(rho_f)
    b = as_complex_matrix(rho_n)
    require_same_shape(a, b)
    _require_traceless(a, "rho_f")
    _require_traceless(b, "rho_n")
    na = np.linalg.norm(a)
    nb = np.linalg.norm(b)
    if na == 0.0 or nb == 0.0:
        raise DegenerateInputError("correlation is undefined for zero-norm operators")
    val = hs_inner(a, b) / (na * nb)
    return float(val.real)


def attenuated_correlation(rho_i, rho_f, rho_n) -> float:
    """Correlation variant normalized by the *initial* deviation norm, so that
    norm lost to decoherence shows up as attenuation: <rho_f|rho_n> /
    (||rho_i|| ||rho_n||)."""
    a = as_complex_matrix(rho_i)
    f = as_complex_matrix(rho_f)
    b = as_complex_matrix(rho_n)
    require_same_shape(a, b)
    require_same_shape(f, b)
    for name, m in (("rho_i", a), ("rho_f", f), ("rho_n", b)):
        _require_traceless(m, name)
    na = np.linalg.norm(a)
    nb = np.linalg.norm(b)
    if na == 0.0 or nb == 0.0:
        raise DegenerateInputError("attenuated correlation is undefined for zero-norm operators")
    val = hs_inner(f, b) / (na * nb)
    return float(val.real)
