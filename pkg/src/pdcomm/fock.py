"""Truncated Fock-space numerics: coherent states, phase-diffused density
matrices and the Helstrom bound."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.stats import poisson

from .errors import CutoffTooSmallError, DimensionMismatchError, NumericalPositivityError

TAIL_TOL = 1e-10
POSITIVITY_TOL = -1e-10


@dataclass(frozen=True)
class FockVector:
    dim: int
    amplitudes: np.ndarray

    @property
    def norm_sq(self) -> float:
        return float(np.sum(np.abs(self.amplitudes) ** 2))

    @property
    def mean_photon_number(self) -> float:
        return float(np.arange(self.dim) @ (np.abs(self.amplitudes) ** 2))


@dataclass(frozen=True)
class DensityMatrix:
    dim: int
    elements: np.ndarray

    @property
    def trace(self) -> float:
        return float(np.real(np.trace(self.elements)))

    @property
    def purity(self) -> float:
        return float(np.real(np.trace(self.elements @ self.elements)))

    def eigenvalues(self) -> np.ndarray:
        return np.linalg.eigvalsh(self.elements)

    def check_positive(self, tol: float = POSITIVITY_TOL) -> None:
        low = self.eigenvalues().min()
        if low < tol:
            raise NumericalPositivityError(f"eigenvalue {low:.3e} below {tol:.0e}")


def fock_cutoff(alpha: complex) -> int:
    """Default truncation ceil(|α|² + 10|α| + 20)."""
    mod = abs(alpha)
    return int(math.ceil(mod * mod + 10 * mod + 20))


def _tail_mass(alpha: complex, dim: int) -> float:
    # P(n >= dim) for Poisson(|α|²)
    return float(poisson.sf(dim - 1, abs(alpha) ** 2))


def _check_tail(alpha: complex, dim: int, tail_tol: float) -> None:
    if dim < 1:
        raise ValueError(f"dim must be positive, got {dim}")
    tail = _tail_mass(alpha, dim)
    if tail > tail_tol:
        raise CutoffTooSmallError(
            f"dim={dim} leaves tail mass {tail:.3e} > {tail_tol:.0e} for |alpha|^2={abs(alpha)**2:.4g}"
        )


def _coherent_amplitudes(alpha: complex, dim: int) -> np.ndarray:
    c = np.empty(dim, dtype=complex)
    c[0] = np.exp(-0.5 * abs(alpha) ** 2)
    for n in range(1, dim):
        c[n] = c[n - 1] * alpha / np.sqrt(n)
    return c


def coherent_fock_vector(alpha: complex, dim: int | None = None, tail_tol: float = TAIL_TOL) -> FockVector:
    """Fock expansion of |α⟩ truncated at ``dim`` (exclusive).

    Raises CutoffTooSmallError if the discarded Poisson tail exceeds ``tail_tol``.
    """
    dim = fock_cutoff(alpha) if dim is None else int(dim)
    _check_tail(alpha, dim, tail_tol)
    return FockVector(dim, _coherent_amplitudes(alpha, dim))


def dephasing_factors(dim: int, sigma: float) -> np.ndarray:
    """exp(-σ²(n-n')²/2): the Gaussian phase average of e^{-i(n-n')φ}."""
    if sigma < 0:
        raise ValueError(f"sigma must be nonnegative, got {sigma}")
    n = np.arange(dim)
    diff = n[:, None] - n[None, :]
    return np.exp(-0.5 * sigma**2 * diff**2)


def dephased_density_matrix(
    alpha: complex, sigma: float, dim: int | None = None, tail_tol: float = TAIL_TOL
) -> DensityMatrix:
    """Phase-diffused coherent state ∫ N(φ; 0, σ²) |αe^{-iφ}⟩⟨αe^{-iφ}| dφ in closed form."""
    vec = coherent_fock_vector(alpha, dim, tail_tol)
    c = vec.amplitudes
    rho = np.outer(c, c.conj()) * dephasing_factors(vec.dim, sigma)
    return DensityMatrix(vec.dim, rho)


def apply_loss(alpha: complex, eta: float) -> complex:
    """Amplitude after a pure-loss channel of transmissivity ``eta``."""
    if not 0.0 <= eta <= 1.0:
        raise ValueError(f"eta must lie in [0, 1], got {eta}")
    return np.sqrt(eta) * alpha


def helstrom_error(rho1, rho2, prior1: float = 0.5) -> float:
    """Minimum error probability ½(1 − ‖p₁ρ₁ − p₂ρ₂‖₁) for two states.

    Accepts DensityMatrix instances or square arrays.
    """
    if not 0.0 <= prior1 <= 1.0:
        raise ValueError(f"prior1 must lie in [0, 1], got {prior1}")
    a = rho1.elements if isinstance(rho1, DensityMatrix) else np.asarray(rho1)
    b = rho2.elements if isinstance(rho2, DensityMatrix) else np.asarray(rho2)
    if a.shape != b.shape or a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise DimensionMismatchError(f"density matrices have shapes {a.shape} and {b.shape}")
    for r in (a, b):
        low = np.linalg.eigvalsh(r).min()
        if low < POSITIVITY_TOL:
            raise NumericalPositivityError(f"input state has eigenvalue {low:.3e}")
    gamma = prior1 * a - (1.0 - prior1) * b
    gamma = 0.5 * (gamma + gamma.conj().T)
    trace_norm = np.abs(np.linalg.eigvalsh(gamma)).sum()
    return float(min(0.5, max(0.0, 0.5 * (1.0 - trace_norm))))
