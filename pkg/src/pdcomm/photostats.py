"""Conditional measurement statistics at the receiver.

Three detectors are modelled, each averaged over the Gaussian channel phase:

* displaced photon counting with photon-number resolution ``m`` (outcomes
  0, ..., m-1 exact and ``m`` meaning "m or more"),
* homodyne detection of the in-phase quadrature,
* plain direct detection (intensity only, so phase noise has no effect).

Outcome distributions are plain 1-D numpy arrays of length ``m + 1``.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.optimize import brentq
from scipy.special import ndtr
from scipy.stats import poisson

from . import _kernels
from .errors import ThresholdSearchError
from .quadrature import DEFAULT_NODES, DEFAULT_TOL, converged_order, phase_average, phase_rule

OutcomeDistribution = np.ndarray

# vacuum quadrature variance 1/2
HOMODYNE_SD = np.sqrt(0.5)


@dataclass(frozen=True)
class Imperfections:
    """Detection efficiency ``eta``, interference visibility ``xi`` and the
    mean dark-count number per pulse ``nu``."""

    eta: float = 1.0
    xi: float = 1.0
    nu: float = 0.0

    def __post_init__(self):
        if not 0.0 <= self.eta <= 1.0:
            raise ValueError(f"eta must lie in [0, 1], got {self.eta}")
        if not 0.0 <= self.xi <= 1.0:
            raise ValueError(f"xi must lie in [0, 1], got {self.xi}")
        if self.nu < 0.0:
            raise ValueError(f"nu must be nonnegative, got {self.nu}")

    def astuple(self) -> tuple[float, float, float]:
        return (self.eta, self.xi, self.nu)


IDEAL = Imperfections()
EXPERIMENT = Imperfections(eta=0.72, xi=0.998, nu=3.6e-3)


@dataclass(frozen=True)
class PnrStrategy:
    """Real displacement ``beta`` followed by PNR(``m``) detection."""

    beta: float
    m: int = 1

    def __post_init__(self):
        if int(self.m) != self.m or self.m < 1:
            raise ValueError(f"m must be a positive integer, got {self.m}")


def displaced_mean_count(signal: float, beta: float, phi, imp: Imperfections = IDEAL):
    """Mean detected photon number after displacing a phase-rotated signal.

    λ = η (s² + β² − 2ξ s β cos φ) + ν.  Vectorized over ``phi``.
    """
    phi = np.asarray(phi, dtype=float)
    lam = imp.eta * (signal**2 + beta**2 - 2.0 * imp.xi * signal * beta * np.cos(phi)) + imp.nu
    return np.maximum(lam, 0.0)


def pnr_outcome_probs(
    signal: float,
    sigma: float,
    strat: PnrStrategy,
    imp: Imperfections = IDEAL,
    nodes: int = DEFAULT_NODES,
    tol: float = DEFAULT_TOL,
) -> OutcomeDistribution:
    """P(k | signal) for k = 0..m-1 plus the pooled "≥ m" outcome.

    The phase average uses adaptive node doubling; QuadratureNotConvergedError
    is raised if no rule is stable to ``tol``.
    """
    eta, xi, nu = imp.astuple()
    signal, beta, m = float(signal), float(strat.beta), int(strat.m)
    return phase_average(
        lambda phi, w: _kernels.pnr_probs(signal, beta, m, eta, xi, nu, phi, w),
        sigma,
        n=nodes,
        tol=tol,
    )


def pnr_outcome_probs_fixed(signal, sigma, strat, imp=IDEAL, nodes=DEFAULT_NODES):
    """Same as pnr_outcome_probs with a fixed quadrature order (no convergence check)."""
    phi, w = phase_rule(sigma, nodes)
    return _kernels.pnr_probs(float(signal), float(strat.beta), int(strat.m), *imp.astuple(), phi, w)


def direct_detection_probs(signal: float, m: int, imp: Imperfections = IDEAL) -> OutcomeDistribution:
    """Photon counting without displacement, pooled at ``m``.

    Visibility plays no role and the result does not depend on the phase noise.
    """
    if m < 1:
        raise ValueError(f"m must be positive, got {m}")
    lam = imp.eta * float(signal) ** 2 + imp.nu
    probs = np.empty(m + 1)
    probs[:m] = poisson.pmf(np.arange(m), lam)
    probs[m] = max(0.0, float(poisson.sf(m - 1, lam)))
    return probs


def direct_detection_resolution(signal: float, imp: Imperfections = IDEAL) -> int:
    """Resolution large enough that pooling at it loses no information (tail < 1e-15)."""
    lam = imp.eta * float(signal) ** 2 + imp.nu
    m = int(np.ceil(lam + 10 * np.sqrt(lam) + 20))
    while poisson.sf(m - 1, lam) > 1e-15:
        m *= 2
    return m


# --------------------------------------------------------------------- homodyne


def _homodyne_means(signal: float, eta: float, phi: np.ndarray) -> np.ndarray:
    return np.sqrt(2.0 * eta) * float(signal) * np.cos(phi)


def homodyne_density(signal: float, sigma: float, eta: float, x, tol: float = 1e-12):
    """Quadrature density ∫ N(φ; 0, σ²) Normal(x; √(2η)·s·cos φ, 1/2) dφ."""
    x = np.asarray(x, dtype=float)
    sd = HOMODYNE_SD

    def integrand(phi, w):
        mu = _homodyne_means(signal, eta, phi)
        z = (x[..., None] - mu) / sd
        return np.exp(-0.5 * z * z) @ w / (sd * np.sqrt(2 * np.pi))

    return phase_average(integrand, sigma, tol=tol)


@lru_cache(maxsize=4096)
def _homodyne_rule(a1: float, a2: float, sigma: float, eta: float, tol: float = 1e-10):
    """A phase rule under which both homodyne densities are converged."""
    lo = np.sqrt(2 * eta) * min(a1, a2, 0.0) - 8 * HOMODYNE_SD
    hi = np.sqrt(2 * eta) * max(a1, a2, 0.0) + 8 * HOMODYNE_SD
    probe = np.linspace(lo, hi, 257)

    def integrand(phi, w):
        out = []
        for s in (a1, a2):
            z = (probe[:, None] - _homodyne_means(s, eta, phi)) / HOMODYNE_SD
            out.append(np.exp(-0.5 * z * z) @ w)
        return np.concatenate(out)

    return phase_rule(sigma, converged_order(integrand, sigma, tol=tol))


def _mixture_cdf(x: np.ndarray, mu: np.ndarray, w: np.ndarray) -> np.ndarray:
    return ndtr((np.asarray(x, dtype=float)[..., None] - mu) / HOMODYNE_SD) @ w


def homodyne_thresholds(a1: float, a2: float, sigma: float, eta: float, prior1: float = 0.5, grid: int = 4001):
    """MAP decision boundaries: points where p₁π₁ and p₂π₂ cross.

    Returns ``(thresholds, regions)`` where ``regions[i]`` is the hypothesis
    index (0 or 1) decided on the i-th interval between consecutive
    thresholds (with ±∞ at the ends).
    """
    phi, w = _homodyne_rule(a1, a2, sigma, eta)
    mu1 = _homodyne_means(a1, eta, phi)
    mu2 = _homodyne_means(a2, eta, phi)
    norm = 1.0 / (HOMODYNE_SD * np.sqrt(2 * np.pi))

    def g(x):
        x = np.asarray(x, dtype=float)
        z1 = (x[..., None] - mu1) / HOMODYNE_SD
        z2 = (x[..., None] - mu2) / HOMODYNE_SD
        return norm * (prior1 * (np.exp(-0.5 * z1 * z1) @ w) - (1 - prior1) * (np.exp(-0.5 * z2 * z2) @ w))

    lo = min(mu1.min(), mu2.min()) - 8 * HOMODYNE_SD
    hi = max(mu1.max(), mu2.max()) + 8 * HOMODYNE_SD
    xs = np.linspace(lo, hi, grid)
    gs = g(xs)
    signs = np.sign(gs)
    thresholds = []
    for i in range(grid - 1):
        if signs[i] == 0:
            if i > 0 and signs[i - 1] * signs[i + 1] < 0:
                thresholds.append(xs[i])
        elif signs[i] * signs[i + 1] < 0:
            try:
                thresholds.append(brentq(lambda t: float(g(t)), xs[i], xs[i + 1], xtol=1e-14))
            except (ValueError, RuntimeError) as exc:
                raise ThresholdSearchError(f"root refinement failed on [{xs[i]}, {xs[i+1]}]") from exc
    edges = np.concatenate([[-np.inf], thresholds, [np.inf]])
    regions = []
    for left, right in zip(edges[:-1], edges[1:]):
        probe = 0.5 * (max(left, lo - 1) + min(right, hi + 1))
        regions.append(0 if g(probe) >= 0 else 1)
    return np.asarray(thresholds), np.asarray(regions, dtype=int)


def homodyne_error(a1: float, a2: float, sigma: float, eta: float = 1.0, prior1: float = 0.5) -> float:
    """MAP error probability of homodyne detection for the alphabet {a1, a2}.

    Misclassified mass on each decision interval is integrated exactly with
    normal CDFs over the phase-noise mixture.
    """
    if a1 == a2:
        raise ValueError("homodyne_error requires distinct amplitudes")
    thresholds, regions = homodyne_thresholds(a1, a2, sigma, eta, prior1)
    phi, w = _homodyne_rule(a1, a2, sigma, eta)
    edges = np.concatenate([[-np.inf], thresholds, [np.inf]])
    err = 0.0
    for (left, right), decided in zip(zip(edges[:-1], edges[1:]), regions):
        wrong = a2 if decided == 0 else a1
        prior = (1 - prior1) if decided == 0 else prior1
        mu = _homodyne_means(wrong, eta, phi)
        mass = _mixture_cdf(right, mu, w) - _mixture_cdf(left, mu, w)
        err += prior * float(mass)
    return float(min(max(err, 0.0), min(prior1, 1 - prior1)))


def homodyne_mutual_information(
    a1: float, a2: float, sigma: float, eta: float = 1.0, prior1: float = 0.5, points: int = 2001
) -> float:
    """Mutual information (bits) of the continuous homodyne output.

    Trapezoid rule on ``points`` samples spanning ±8 standard deviations
    beyond the outermost noiseless means.
    """
    lo = np.sqrt(2 * eta) * min(a1, a2) - 8 * HOMODYNE_SD
    hi = np.sqrt(2 * eta) * max(a1, a2) + 8 * HOMODYNE_SD
    x = np.linspace(lo, hi, points)
    phi, w = _homodyne_rule(a1, a2, sigma, eta)
    dens = []
    for s in (a1, a2):
        z = (x[:, None] - _homodyne_means(s, eta, phi)) / HOMODYNE_SD
        dens.append(np.exp(-0.5 * z * z) @ w / (HOMODYNE_SD * np.sqrt(2 * np.pi)))
    p = np.vstack(dens)
    priors = np.array([prior1, 1 - prior1])[:, None]
    mix = (priors * p).sum(axis=0)
    with np.errstate(divide="ignore", invalid="ignore"):
        terms = np.where(p > 0, priors * p * np.log2(p / mix), 0.0)
    return float(max(0.0, np.trapezoid(terms.sum(axis=0), x)))
