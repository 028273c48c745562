"""Dense complex linear algebra shared by every other module.

Operators are plain complex128 ndarrays.  All spectral work goes through the
Hermitian eigendecomposition so that a decomposition computed once (e.g. for a
drift Hamiltonian) can be reused to exponentiate many segment durations.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DimensionMismatchError, ValidationError

# Relative Frobenius tolerance for accepting a matrix as Hermitian.
HERMITICITY_TOL = 1e-10


def as_complex_matrix(a) -> np.ndarray:
    m = np.asarray(a, dtype=np.complex128)
    if m.ndim != 2:
        raise DimensionMismatchError(f"expected a matrix, got ndim={m.ndim}")
    return m


def require_square(a) -> np.ndarray:
    m = as_complex_matrix(a)
    if m.shape[0] != m.shape[1]:
        raise DimensionMismatchError(f"expected a square matrix, got shape {m.shape}")
    return m


def require_same_shape(a: np.ndarray, b: np.ndarray) -> None:
    if a.shape != b.shape:
        raise DimensionMismatchError(f"shape mismatch: {a.shape} vs {b.shape}")


def hermitian_part(a) -> np.ndarray:
    m = require_square(a)
    return (m + m.conj().T) / 2.0


def hermiticity_defect(a) -> float:
    """Relative Frobenius distance between ``a`` and its Hermitian part."""
    m = require_square(a)
    scale = np.linalg.norm(m)
    if scale == 0.0:
        return 0.0
    return float(np.linalg.norm(m - m.conj().T) / (2.0 * scale))


def require_hermitian(a, tol: float = HERMITICITY_TOL, what: str = "matrix") -> np.ndarray:
    """Return the symmetrized matrix, rejecting inputs beyond ``tol``."""
    m = require_square(a)
    if hermiticity_defect(m) > tol:
        raise ValidationError(f"{what} is not Hermitian within relative tolerance {tol:g}")
    return hermitian_part(m)


def hs_inner(a, b) -> complex:
    """Hilbert-Schmidt overlap Tr(a^dag b)."""
    ma, mb = as_complex_matrix(a), as_complex_matrix(b)
    require_same_shape(ma, mb)
    return complex(np.sum(ma.conj() * mb))


def commutator(a, b) -> np.ndarray:
    ma, mb = require_square(a), require_square(b)
    require_same_shape(ma, mb)
    return ma @ mb - mb @ ma


@dataclass(frozen=True)
class Spectrum:
    """Eigendecomposition of a Hermitian operator.

    ``eigenvalues`` are real and ascending; ``eigenvectors`` holds the matching
    orthonormal eigenvectors as columns.
    """

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray

    @property
    def dim(self) -> int:
        return self.eigenvalues.shape[0]

    def exp_i(self, t: float) -> np.ndarray:
        """exp(-i H t) reconstructed from the stored eigenbasis."""
        phases = np.exp(-1j * self.eigenvalues * t)
        v = self.eigenvectors
        return (v * phases) @ v.conj().T


def eig_hermitian(h, what: str = "operator") -> Spectrum:
    """Eigendecomposition of a Hermitian matrix, symmetrizing within tolerance."""
    m = require_hermitian(h, what=what)
    w, v = np.linalg.eigh(m)
    return Spectrum(eigenvalues=w, eigenvectors=v)


def matrix_exp_i(h, t: float) -> np.ndarray:
    """Unitary exp(-i h t) of a Hermitian generator.

    Computed through the eigendecomposition rather than a Pade approximant so
    the result is unitary to roundoff for any |t|.
    """
    if not np.isfinite(t):
        raise ValidationError("time argument must be finite")
    return eig_hermitian(h).exp_i(float(t))


def traceless_part(rho) -> np.ndarray:
    """Remove the identity component: rho - Tr(rho)/d * I."""
    m = require_square(rho)
    d = m.shape[0]
    return m - (np.trace(m) / d) * np.eye(d, dtype=np.complex128)
