"""Compiled inner loops shared by photostats and the optimizer."""

import numba as nb
import numpy as np

KIND_ERROR = 0
KIND_MI = 1


@nb.njit(cache=True)
def mean_count(signal, beta, phi, eta, xi, nu):
    lam = eta * (signal * signal + beta * beta - 2.0 * xi * signal * beta * np.cos(phi)) + nu
    # ξ < 1 with signal == beta can round slightly below zero
    return lam if lam > 0.0 else 0.0


@nb.njit(cache=True)
def pnr_probs_into(signal, beta, m, eta, xi, nu, phi, w, out):
    for k in range(m + 1):
        out[k] = 0.0
    for j in range(phi.size):
        lam = mean_count(signal, beta, phi[j], eta, xi, nu)
        p = np.exp(-lam)
        for k in range(m):
            out[k] += w[j] * p
            p = p * lam / (k + 1)
    total = 0.0
    for k in range(m):
        total += out[k]
    rest = 1.0 - total
    out[m] = rest if rest > 0.0 else 0.0


@nb.njit(cache=True)
def pnr_probs(signal, beta, m, eta, xi, nu, phi, w):
    out = np.empty(m + 1)
    pnr_probs_into(signal, beta, m, eta, xi, nu, phi, w, out)
    return out


@nb.njit(cache=True)
def pair_error(p1, p2, prior1):
    success = 0.0
    for k in range(p1.size):
        a = prior1 * p1[k]
        b = (1.0 - prior1) * p2[k]
        success += a if a >= b else b
    return 1.0 - success


@nb.njit(cache=True)
def pair_mi(p1, p2, prior1):
    prior2 = 1.0 - prior1
    total = 0.0
    for k in range(p1.size):
        pk = prior1 * p1[k] + prior2 * p2[k]
        if p1[k] > 0.0 and prior1 > 0.0:
            total += prior1 * p1[k] * np.log2(p1[k] / pk)
        if p2[k] > 0.0 and prior2 > 0.0:
            total += prior2 * p2[k] * np.log2(p2[k] / pk)
    return total


@nb.njit(cache=True)
def angle_objective(theta, beta, nbar, m, eta, xi, nu, phi, w, kind):
    """P_E (kind 0) or -I (kind 1) for the angle-parametrized alphabet."""
    r = np.sqrt(2.0 * nbar)
    a1 = -r * np.sin(theta)
    a2 = r * np.cos(theta)
    p1 = pnr_probs(a1, beta, m, eta, xi, nu, phi, w)
    p2 = pnr_probs(a2, beta, m, eta, xi, nu, phi, w)
    if kind == KIND_ERROR:
        return pair_error(p1, p2, 0.5)
    return -pair_mi(p1, p2, 0.5)


@nb.njit(cache=True)
def fixed_objective(a1, a2, beta, m, eta, xi, nu, phi, w, kind):
    p1 = pnr_probs(a1, beta, m, eta, xi, nu, phi, w)
    p2 = pnr_probs(a2, beta, m, eta, xi, nu, phi, w)
    if kind == KIND_ERROR:
        return pair_error(p1, p2, 0.5)
    return -pair_mi(p1, p2, 0.5)
