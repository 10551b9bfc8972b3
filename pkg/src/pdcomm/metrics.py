"""Decision rules and figures of merit for binary coherent-state alphabets.

Hypothesis indices are 0-based throughout: hypothesis 0 is ``alphabet.a1``
and hypothesis 1 is ``alphabet.a2``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.optimize import minimize_scalar

from . import fock, photostats
from .photostats import IDEAL, Imperfections, PnrStrategy

EQUAL_PRIORS = (0.5, 0.5)
DEFAULT_SIGMA_GRID = np.linspace(0.0, 1.2, 61)
ENERGY_TOL = 1e-9


@dataclass(frozen=True)
class Alphabet:
    """Two real coherent amplitudes with mean photon number ``nbar`` per symbol."""

    a1: float
    a2: float
    nbar: float | None = None

    def __post_init__(self):
        energy = 0.5 * (self.a1**2 + self.a2**2)
        if self.nbar is None:
            object.__setattr__(self, "nbar", energy)
        elif abs(energy - self.nbar) > ENERGY_TOL * max(1.0, self.nbar):
            raise ValueError(f"(a1² + a2²)/2 = {energy} does not match nbar = {self.nbar}")

    @classmethod
    def from_angle(cls, nbar: float, theta: float) -> "Alphabet":
        """a1 = −√(2n̄) sin θ, a2 = √(2n̄) cos θ; θ = π/4 is BPSK and θ = 0 is OOK."""
        r = np.sqrt(2.0 * nbar)
        return cls(float(-r * np.sin(theta)), float(r * np.cos(theta)), float(nbar))

    @classmethod
    def bpsk(cls, nbar: float) -> "Alphabet":
        a = float(np.sqrt(nbar))
        return cls(-a, a, float(nbar))

    @classmethod
    def ook(cls, nbar: float) -> "Alphabet":
        return cls(0.0, float(np.sqrt(2.0 * nbar)), float(nbar))

    @property
    def amplitudes(self) -> tuple[float, float]:
        return (self.a1, self.a2)


@dataclass(frozen=True)
class StrategyReport:
    pe: float
    mi: float
    decision_map: np.ndarray | None = None


# ------------------------------------------------------------ distributions


def _stack(dists) -> np.ndarray:
    arr = np.asarray(dists, dtype=float)
    if arr.ndim != 2:
        raise ValueError("expected one outcome distribution per hypothesis")
    return arr


def map_decision(dists, priors: Sequence[float] = EQUAL_PRIORS) -> np.ndarray:
    """Outcome index -> hypothesis index maximizing P(k|i)P(i).

    Ties go to the lowest hypothesis index.
    """
    arr = _stack(dists)
    return np.argmax(np.asarray(priors)[:, None] * arr, axis=0)


def success_probability(dists, decision: np.ndarray, priors: Sequence[float] = EQUAL_PRIORS) -> float:
    arr = _stack(dists)
    k = np.arange(arr.shape[1])
    return float(np.sum(np.asarray(priors)[decision] * arr[decision, k]))


def error_from_distributions(dists, priors: Sequence[float] = EQUAL_PRIORS) -> float:
    """1 − Σ_k max_i P(i) P(k|i)."""
    arr = _stack(dists)
    return float(1.0 - np.max(np.asarray(priors)[:, None] * arr, axis=0).sum())


def mi_from_distributions(dists, priors: Sequence[float] = EQUAL_PRIORS) -> float:
    """Mutual information in bits between hypothesis and outcome; 0·log 0 = 0."""
    arr = _stack(dists)
    pri = np.asarray(priors, dtype=float)[:, None]
    joint = pri * arr
    marginal = joint.sum(axis=0)
    with np.errstate(divide="ignore", invalid="ignore"):
        terms = np.where(joint > 0, joint * np.log2(arr / marginal), 0.0)
    return float(min(1.0, max(0.0, terms.sum())))


def hard_decision_mi(dists, priors: Sequence[float] = EQUAL_PRIORS) -> float:
    """Mutual information after collapsing outcomes to the MAP guess."""
    arr = _stack(dists)
    decision = map_decision(arr, priors)
    binary = np.zeros((arr.shape[0], arr.shape[0]))
    for k, d in enumerate(decision):
        binary[:, d] += arr[:, k]
    return mi_from_distributions(binary, priors)


# ------------------------------------------------------- displaced PNR receiver


def pnr_distributions(alphabet: Alphabet, sigma: float, strat: PnrStrategy, imp: Imperfections = IDEAL) -> np.ndarray:
    return np.vstack([photostats.pnr_outcome_probs(a, sigma, strat, imp) for a in alphabet.amplitudes])


def error_probability(
    alphabet: Alphabet,
    sigma: float,
    strat: PnrStrategy,
    imp: Imperfections = IDEAL,
    priors: Sequence[float] = EQUAL_PRIORS,
) -> float:
    return error_from_distributions(pnr_distributions(alphabet, sigma, strat, imp), priors)


def mutual_information(
    alphabet: Alphabet,
    sigma: float,
    strat: PnrStrategy,
    imp: Imperfections = IDEAL,
    priors: Sequence[float] = EQUAL_PRIORS,
) -> float:
    """Soft-decision mutual information over the m + 1 pooled outcomes."""
    return mi_from_distributions(pnr_distributions(alphabet, sigma, strat, imp), priors)


def strategy_report(alphabet, sigma, strat, imp=IDEAL, priors=EQUAL_PRIORS) -> StrategyReport:
    dists = pnr_distributions(alphabet, sigma, strat, imp)
    return StrategyReport(
        pe=error_from_distributions(dists, priors),
        mi=mi_from_distributions(dists, priors),
        decision_map=map_decision(dists, priors),
    )


# ------------------------------------------------------------ Helstrom bound


def helstrom_bound(alphabet: Alphabet, sigma: float, eta: float = 1.0, prior1: float = 0.5) -> float:
    """Helstrom error for the phase-diffused alphabet after loss ``eta``."""
    amps = [fock.apply_loss(a, eta) for a in alphabet.amplitudes]
    dim = max(fock.fock_cutoff(a) for a in amps)
    rhos = [fock.dephased_density_matrix(a, sigma, dim) for a in amps]
    return fock.helstrom_error(rhos[0], rhos[1], prior1)


def _optimize_angle(func, maximize: bool = False, grid: int = 17) -> tuple[float, float]:
    """Global search of a 1-D function of θ ∈ [0, π/4]: coarse grid, then bounded refinement."""
    sign = -1.0 if maximize else 1.0
    thetas = np.linspace(0.0, np.pi / 4, grid)
    vals = np.array([sign * func(t) for t in thetas])
    i = int(np.argmin(vals))
    lo, hi = thetas[max(i - 1, 0)], thetas[min(i + 1, grid - 1)]
    res = minimize_scalar(lambda t: sign * func(t), bounds=(lo, hi), method="bounded", options={"xatol": 1e-7})
    if res.fun < vals[i]:
        return float(res.x), float(sign * res.fun)
    return float(thetas[i]), float(sign * vals[i])


def optimal_helstrom(nbar: float, sigma: float, eta: float = 1.0) -> tuple[float, Alphabet]:
    """Helstrom error minimized over the real binary alphabet at fixed energy."""
    if nbar <= 0:
        return 0.5, Alphabet(0.0, 0.0, 0.0)
    theta, value = _optimize_angle(lambda t: helstrom_bound(Alphabet.from_angle(nbar, t), sigma, eta))
    return value, Alphabet.from_angle(nbar, theta)


# --------------------------------------------------- conventional measurement


def direct_distributions(alphabet: Alphabet, imp: Imperfections = IDEAL, m: int | None = None) -> np.ndarray:
    if m is None:
        m = max(photostats.direct_detection_resolution(a, imp) for a in alphabet.amplitudes)
    return np.vstack([photostats.direct_detection_probs(a, m, imp) for a in alphabet.amplitudes])


@dataclass(frozen=True)
class CMResult:
    """Best conventional measurement for one (n̄, σ, η) and one objective."""

    objective: str
    detection: str
    alphabet: Alphabet
    value: float
    report: StrategyReport
    homodyne_value: float
    direct_value: float


def _homodyne_report(alphabet: Alphabet, sigma: float, eta: float) -> StrategyReport:
    a1, a2 = alphabet.amplitudes
    if a1 == a2:
        return StrategyReport(0.5, 0.0)
    return StrategyReport(
        photostats.homodyne_error(a1, a2, sigma, eta),
        photostats.homodyne_mutual_information(a1, a2, sigma, eta),
    )


def _direct_report(alphabet: Alphabet, eta: float) -> StrategyReport:
    dists = direct_distributions(alphabet, Imperfections(eta=eta))
    return StrategyReport(error_from_distributions(dists), mi_from_distributions(dists), map_decision(dists))


def cm_baseline(nbar: float, sigma: float, eta: float = 1.0, objective: str = "error") -> CMResult:
    """Ideal conventional measurement: the better of homodyne and direct
    detection, each with its own optimized real alphabet."""
    if objective not in ("error", "mi"):
        raise ValueError(f"objective must be 'error' or 'mi', got {objective!r}")
    maximize = objective == "mi"
    if nbar <= 0:
        report = StrategyReport(0.5, 0.0)
        trivial = 0.0 if maximize else 0.5
        return CMResult(objective, "homodyne", Alphabet(0.0, 0.0, 0.0), trivial, report, trivial, trivial)

    def hom(theta):
        a = Alphabet.from_angle(nbar, theta)
        if maximize:
            return photostats.homodyne_mutual_information(a.a1, a.a2, sigma, eta)
        return photostats.homodyne_error(a.a1, a.a2, sigma, eta)

    dd_imp = Imperfections(eta=eta)

    def direct(theta):
        dists = direct_distributions(Alphabet.from_angle(nbar, theta), dd_imp)
        return mi_from_distributions(dists) if maximize else error_from_distributions(dists)

    th_h, v_h = _optimize_angle(hom, maximize)
    th_d, v_d = _optimize_angle(direct, maximize)
    homodyne_wins = v_h >= v_d if maximize else v_h <= v_d
    if homodyne_wins:
        alphabet = Alphabet.from_angle(nbar, th_h)
        report = _homodyne_report(alphabet, sigma, eta)
        return CMResult(objective, "homodyne", alphabet, v_h, report, v_h, v_d)
    alphabet = Alphabet.from_angle(nbar, th_d)
    return CMResult(objective, "direct", alphabet, v_d, _direct_report(alphabet, eta), v_h, v_d)


# --------------------------------------------------------------------- R(m)


@dataclass
class RofM:
    """Worst-case relative MI shortfall of optimized PNR(m) against the CM."""

    nbar: float
    m: int
    value: float
    sigma_at_max: float
    sigmas: np.ndarray = field(repr=False)
    mi_cm: np.ndarray = field(repr=False)
    mi_pnr: np.ndarray = field(repr=False)


def cm_mi_curve(nbar: float, sigmas, eta: float = 1.0) -> np.ndarray:
    return np.array([cm_baseline(nbar, s, eta, "mi").value for s in sigmas])


def relative_shortfall(mi_cm: np.ndarray, mi_pnr: np.ndarray) -> np.ndarray:
    """(I_CM − I_PNR) / I_CM, defined as 0 where I_CM vanishes."""
    mi_cm = np.asarray(mi_cm, dtype=float)
    mi_pnr = np.asarray(mi_pnr, dtype=float)
    out = np.zeros_like(mi_cm)
    ok = mi_cm > 0
    out[ok] = (mi_cm[ok] - mi_pnr[ok]) / mi_cm[ok]
    return out


def r_of_m(
    nbar: float,
    m: int,
    imp: Imperfections = IDEAL,
    sigma_grid=None,
    settings=None,
    mi_cm: np.ndarray | None = None,
) -> RofM:
    """R(m) = max_σ (I_CM − I_PNR(m)) / I_CM as a signed fraction.

    Both strategies are alphabet-optimized at every σ; the PNR side uses a
    warm-started MI sweep.  ``mi_cm`` may be passed to reuse a CM curve.
    """
    from .optimizer import RMAP_SETTINGS, sweep_sigma

    sigmas = np.asarray(DEFAULT_SIGMA_GRID if sigma_grid is None else sigma_grid, dtype=float)
    if sigmas.size == 0:
        raise ValueError("sigma_grid must be nonempty")
    if mi_cm is None:
        mi_cm = cm_mi_curve(nbar, sigmas, imp.eta)
    if nbar <= 0:
        mi_pnr = np.zeros_like(sigmas)
    else:
        curve = sweep_sigma(nbar, m, imp, sigmas, "mi", settings or RMAP_SETTINGS)
        mi_pnr = np.array([r.best.value for r in curve.results])
    short = relative_shortfall(mi_cm, mi_pnr)
    i = int(np.argmax(short))
    return RofM(nbar, int(m), float(short[i]), float(sigmas[i]), sigmas, np.asarray(mi_cm), mi_pnr)


def r_of_m_table(nbars, ms, imp: Imperfections = IDEAL, sigma_grid=None, settings=None) -> list[RofM]:
    """R(m) over a (n̄, m) grid, computing each CM curve once."""
    sigmas = np.asarray(DEFAULT_SIGMA_GRID if sigma_grid is None else sigma_grid, dtype=float)
    out = []
    for nbar in nbars:
        cm = cm_mi_curve(nbar, sigmas, imp.eta)
        for m in ms:
            out.append(r_of_m(nbar, m, imp, sigmas, settings, mi_cm=cm))
    return out


def fit_power_law(ms, values) -> tuple[float, float]:
    """Least-squares fit of values ≈ a·m^(−b) in log–log space; returns (a, b)."""
    ms = np.asarray(ms, dtype=float)
    values = np.asarray(values, dtype=float)
    if np.any(values <= 0):
        raise ValueError("power-law fit needs strictly positive values")
    slope, intercept = np.polyfit(np.log(ms), np.log(values), 1)
    return float(np.exp(intercept)), float(-slope)


# ------------------------------------------------------ BPSK vs homodyne limit


def homodyne_crossover(
    nbar: float,
    m: int,
    imp: Imperfections,
    sigma_max: float = 1.2,
    step: float = 0.01,
) -> float:
    """Largest σ at which PNR(m) with BPSK and optimized displacement still
    beats the η-adjusted homodyne limit.

    Scans σ in ``step`` increments and refines the last sign change with
    Brent's method.  Returns 0.0 if PNR never wins and ``sigma_max`` if it
    wins over the whole range.
    """
    from scipy.optimize import brentq

    from .optimizer import optimize_displacement

    alphabet = Alphabet.bpsk(nbar)

    def gap(s):
        pnr = optimize_displacement(alphabet, s, m, imp, "error").value
        return pnr - photostats.homodyne_error(alphabet.a1, alphabet.a2, s, imp.eta)

    sigmas = np.arange(0.0, sigma_max + 0.5 * step, step)
    gaps = np.array([gap(s) for s in sigmas])
    winning = gaps < 0
    if not winning.any():
        return 0.0
    last = int(np.nonzero(winning)[0][-1])
    if last == sigmas.size - 1:
        return float(sigma_max)
    return float(brentq(gap, sigmas[last], sigmas[last + 1], xtol=1e-6))
