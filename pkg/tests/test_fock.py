import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.special import comb, factorial
from scipy.stats import poisson

from pdcomm.errors import CutoffTooSmallError, DimensionMismatchError, NumericalPositivityError
from pdcomm.fock import (
    DensityMatrix,
    apply_loss,
    coherent_fock_vector,
    dephased_density_matrix,
    dephasing_factors,
    fock_cutoff,
    helstrom_error,
)


def coherent_oracle(alpha, dim):
    n = np.arange(dim)
    return np.exp(-abs(alpha) ** 2 / 2) * alpha**n / np.sqrt(factorial(n))


def dephased_oracle(alpha, sigma, dim, nodes=200):
    """Average |αe^{-iφ}⟩⟨αe^{-iφ}| over φ ~ N(0, σ²) with Gauss-Hermite."""
    t, w = np.polynomial.hermite.hermgauss(nodes)
    rho = np.zeros((dim, dim), dtype=complex)
    for tk, wk in zip(t, w):
        c = coherent_oracle(alpha * np.exp(-1j * np.sqrt(2) * sigma * tk), dim)
        rho += wk / np.sqrt(np.pi) * np.outer(c, c.conj())
    return rho


def loss_kraus_oracle(rho, eta):
    """Beam-splitter loss map Σ_k E_k ρ E_k† in a truncated Fock space."""
    dim = rho.shape[0]
    out = np.zeros_like(rho)
    for k in range(dim):
        e = np.zeros((dim, dim))
        for n in range(k, dim):
            e[n - k, n] = math.sqrt(comb(n, k) * eta ** (n - k) * (1 - eta) ** k)
        out += e @ rho @ e.T
    return out


def test_vacuum_vector():
    v = coherent_fock_vector(0.0, 5)
    assert np.allclose(v.amplitudes, [1, 0, 0, 0, 0])


def test_mean_photon_number_of_unit_coherent_state():
    assert abs(coherent_fock_vector(1.0, 30).mean_photon_number - 1.0) < 1e-9


def test_amplitudes_match_closed_form():
    alpha = 0.7 - 1.1j
    v = coherent_fock_vector(alpha)
    assert np.allclose(v.amplitudes, coherent_oracle(alpha, v.dim), atol=1e-14)


def test_too_small_cutoff_raises():
    with pytest.raises(CutoffTooSmallError):
        coherent_fock_vector(np.sqrt(2), 2)


def test_default_cutoff_rule():
    assert fock_cutoff(0) == 20
    assert fock_cutoff(2.0) == math.ceil(4 + 20 + 20)


@given(st.floats(0, 3), st.floats(0, 3))
def test_default_cutoff_meets_tail_tolerance(re, im):
    v = coherent_fock_vector(complex(re, im))
    assert 1 - v.norm_sq <= 1e-10


def test_zero_noise_is_pure():
    rho = dephased_density_matrix(0.8, 0.0)
    assert abs(rho.purity - 1.0) < 1e-10


def test_full_dephasing_leaves_poisson_diagonal():
    rho = dephased_density_matrix(1.0, 50.0)
    off = rho.elements - np.diag(np.diag(rho.elements))
    assert np.max(np.abs(off)) <= 1e-10
    assert np.allclose(np.diag(rho.elements).real, poisson.pmf(np.arange(rho.dim), 1.0), atol=1e-15)


def test_closed_form_matches_quadrature_oracle():
    rho = dephased_density_matrix(1.0, 0.4)
    assert np.max(np.abs(rho.elements - dephased_oracle(1.0, 0.4, rho.dim))) < 1e-10


@given(st.floats(-2, 2), st.floats(0, 3))
def test_density_matrix_invariants(alpha, sigma):
    rho = dephased_density_matrix(alpha, sigma)
    e = rho.elements
    assert np.max(np.abs(e - e.conj().T)) <= 1e-12
    assert 1 - 1e-10 <= rho.trace <= 1 + 1e-12
    assert rho.eigenvalues().min() >= -1e-10
    # phase diffusion leaves photon statistics untouched
    assert np.allclose(np.diag(e).real, poisson.pmf(np.arange(rho.dim), alpha**2), atol=1e-14)


def test_dephasing_factors_reject_negative_sigma():
    with pytest.raises(ValueError):
        dephasing_factors(4, -0.1)


def test_apply_loss_examples():
    assert apply_loss(2.0, 1.0) == 2.0
    assert apply_loss(2.0, 0.25) == pytest.approx(1.0)
    with pytest.raises(ValueError):
        apply_loss(1.0, 1.5)


@pytest.mark.parametrize("sigma", [0.0, 0.3, 1.0])
def test_loss_commutes_with_dephasing(sigma):
    dim = fock_cutoff(1.0)
    lossy = loss_kraus_oracle(dephased_density_matrix(1.0, sigma, dim).elements, 0.72)
    direct = dephased_density_matrix(apply_loss(1.0, 0.72), sigma, dim).elements
    assert np.max(np.abs(lossy - direct)) < 1e-8


def test_helstrom_identical_states():
    rho = dephased_density_matrix(0.5, 0.2)
    assert helstrom_error(rho, rho) == pytest.approx(0.5, abs=1e-12)


def test_helstrom_pure_bpsk():
    a = np.sqrt(0.5)
    dim = fock_cutoff(a)
    pe = helstrom_error(dephased_density_matrix(-a, 0, dim), dephased_density_matrix(a, 0, dim))
    assert abs(pe - 0.5 * (1 - np.sqrt(1 - np.exp(-2)))) < 1e-6
    assert abs(pe - 0.035063) < 1e-6


def test_helstrom_near_orthogonal():
    dim = fock_cutoff(4.0)
    assert helstrom_error(dephased_density_matrix(0, 0, dim), dephased_density_matrix(4.0, 0, dim)) <= 1e-7


def test_helstrom_dimension_mismatch():
    with pytest.raises(DimensionMismatchError):
        helstrom_error(dephased_density_matrix(0.5, 0, 25), dephased_density_matrix(0.5, 0, 30))


def test_helstrom_rejects_nonpositive_input():
    bad = DensityMatrix(2, np.diag([1.5, -0.5]))
    with pytest.raises(NumericalPositivityError):
        helstrom_error(bad, np.diag([1.0, 0.0]))
    with pytest.raises(NumericalPositivityError):
        bad.check_positive()


@given(st.floats(-1.5, 1.5), st.floats(-1.5, 1.5), st.floats(0, 1.5), st.floats(0, 1))
def test_helstrom_swap_symmetry(a1, a2, sigma, p1):
    dim = fock_cutoff(2.0)
    r1, r2 = dephased_density_matrix(a1, sigma, dim), dephased_density_matrix(a2, sigma, dim)
    v = helstrom_error(r1, r2, p1)
    assert 0 <= v <= 0.5
    assert abs(v - helstrom_error(r2, r1, 1 - p1)) < 1e-12


def test_helstrom_monotone_in_separation():
    dim = fock_cutoff(3.0)
    seps = np.linspace(0, 3, 13)
    vals = [helstrom_error(dephased_density_matrix(0, 0, dim), dephased_density_matrix(s, 0, dim)) for s in seps]
    assert np.all(np.diff(vals) <= 1e-12)


@pytest.mark.parametrize("sigma", [0.0, 0.5, 1.2])
def test_helstrom_converged_in_cutoff(sigma):
    a = 1.0
    d = fock_cutoff(a)
    v1 = helstrom_error(dephased_density_matrix(-a, sigma, d), dephased_density_matrix(a, sigma, d))
    v2 = helstrom_error(dephased_density_matrix(-a, sigma, 2 * d), dephased_density_matrix(a, sigma, 2 * d))
    assert abs(v1 - v2) <= 1e-8
