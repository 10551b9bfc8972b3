"""Phase-noise calibration from interference photon counts.

A piecewise-constant Gaussian phase is applied in time bins.  Inside a bin
the signal interferes with a local oscillator near the quadrature point, so
the mean count is 2ηn̄(1 ± ξ sin φ); inverting that per bin gives a phase
sample, and a Gaussian fit to the samples gives σ.  Repeating at several
drive voltages and fitting a line maps voltage to σ.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy import stats

from .errors import DegenerateVoltagesError, InsufficientBinsError, OutOfRangeError

SHOTS_PER_BIN = 500
BIN_DURATION = 0.043  # seconds
MIN_BINS = 100
BRANCHES = ("plus", "minus")


@dataclass(frozen=True)
class PhaseTrace:
    bin_phases: np.ndarray
    shots_per_bin: int = SHOTS_PER_BIN
    bin_duration: float = BIN_DURATION

    def __post_init__(self):
        if self.shots_per_bin < 1:
            raise ValueError("shots_per_bin must be at least 1")

    @property
    def n_bins(self) -> int:
        return len(self.bin_phases)

    @property
    def pulse_period(self) -> float:
        return self.bin_duration / self.shots_per_bin


def generate_piecewise_phase(
    sigma: float, n_bins: int, seed: int = 0, shots_per_bin: int = SHOTS_PER_BIN, bin_duration: float = BIN_DURATION
) -> PhaseTrace:
    """I.i.d. N(0, σ²) phases, one per time bin."""
    if n_bins < 1:
        raise ValueError(f"n_bins must be at least 1, got {n_bins}")
    if sigma < 0:
        raise ValueError(f"sigma must be nonnegative, got {sigma}")
    rng = np.random.Generator(np.random.Philox(seed))
    return PhaseTrace(sigma * rng.standard_normal(n_bins), shots_per_bin, bin_duration)


def _sign(branch: str) -> float:
    if branch not in BRANCHES:
        raise ValueError(f"branch must be one of {BRANCHES}, got {branch!r}")
    return 1.0 if branch == "plus" else -1.0


def interference_mean(phase, nbar: float, eta: float, xi: float, branch: str = "plus", nu: float = 0.0):
    """Mean count 2ηn̄(1 ± ξ sin φ) + ν at the π/2 (plus) or 3π/2 (minus) operating point."""
    return 2 * eta * nbar * (1 + _sign(branch) * xi * np.sin(phase)) + nu


def simulate_bin_means(
    trace: PhaseTrace,
    nbar: float,
    eta: float,
    xi: float,
    branch="plus",
    nu: float = 0.0,
    seed: int = 0,
) -> np.ndarray:
    """Empirical mean photon count of each bin.

    ``branch`` is a single operating point or one per bin.
    """
    branches = np.broadcast_to(np.asarray(branch), (trace.n_bins,))
    lam = np.array([interference_mean(p, nbar, eta, xi, b, nu) for p, b in zip(trace.bin_phases, branches)])
    rng = np.random.Generator(np.random.Philox(seed))
    # the sum of a bin's Poisson counts is Poisson with the summed mean
    return rng.poisson(trace.shots_per_bin * lam) / trace.shots_per_bin


def estimate_bin_phase(mean_count, nbar: float, eta: float, xi: float, branch="plus", tol: float = 1e-9):
    """Invert 2ηn̄(1 ± ξ sin φ̂) = mean_count for φ̂ (deviation from the operating point)."""
    mean_count = np.asarray(mean_count, dtype=float)
    signs = np.vectorize(_sign, otypes=[float])(np.asarray(branch))
    arg = signs * (mean_count / (2 * eta * nbar) - 1.0) / xi
    if np.any(np.abs(arg) > 1.0 + tol):
        worst = float(np.max(np.abs(arg)))
        raise OutOfRangeError(f"arcsin argument {worst:.6g} outside [-1, 1]")
    phase = np.arcsin(np.clip(arg, -1.0, 1.0))
    return float(phase) if phase.ndim == 0 else phase


def shot_noise_floor(nbar: float, eta: float, xi: float, shots_per_bin: int = SHOTS_PER_BIN, nu: float = 0.0) -> float:
    """Standard error of a single-bin phase estimate at φ = 0 from Poisson counting."""
    lam = 2 * eta * nbar + nu
    return float(np.sqrt(lam / shots_per_bin) / (2 * eta * nbar * xi))


@dataclass(frozen=True)
class SigmaFit:
    sigma: float
    mean: float
    n_bins: int
    chi2: float
    p_value: float
    alpha: float = 0.05

    @property
    def gaussian_ok(self) -> bool:
        return self.p_value >= self.alpha


def fit_sigma(phases, alpha: float = 0.05, n_classes: int | None = None) -> SigmaFit:
    """Maximum-likelihood Gaussian fit plus a chi-square goodness-of-fit test.

    The test uses ``n_classes`` classes equiprobable under the fitted
    Gaussian; a p-value below ``alpha`` flags a non-Gaussian histogram.
    """
    phases = np.asarray(phases, dtype=float)
    if phases.size < MIN_BINS:
        raise InsufficientBinsError(f"need at least {MIN_BINS} bins, got {phases.size}")
    mu, sd = stats.norm.fit(phases)
    if n_classes is None:
        n_classes = int(np.clip(phases.size // 50, 10, 50))
    if sd == 0:
        return SigmaFit(0.0, float(mu), phases.size, 0.0, 1.0, alpha)
    edges = stats.norm.ppf(np.linspace(0, 1, n_classes + 1), mu, sd)
    observed = np.histogram(phases, bins=np.concatenate([[-np.inf], edges[1:-1], [np.inf]]))[0]
    expected = np.full(n_classes, phases.size / n_classes)
    chi2, p = stats.chisquare(observed, expected, ddof=2)
    return SigmaFit(float(sd), float(mu), phases.size, float(chi2), float(p), alpha)


@dataclass(frozen=True)
class LineFit:
    slope: float
    intercept: float
    residuals: np.ndarray

    def sigma_at(self, voltage):
        return self.slope * np.asarray(voltage) + self.intercept

    def voltage_for(self, sigma):
        """Drive amplitude that produces the target σ."""
        return (np.asarray(sigma) - self.intercept) / self.slope


def fit_voltage_line(voltages, sigmas) -> LineFit:
    """Least-squares σ̂(V) = slope·V + intercept."""
    v = np.asarray(voltages, dtype=float)
    s = np.asarray(sigmas, dtype=float)
    if v.shape != s.shape:
        raise ValueError("voltages and sigmas must have the same length")
    if np.unique(v).size < 2:
        raise DegenerateVoltagesError("need at least two distinct voltages")
    slope, intercept = np.polyfit(v, s, 1)
    return LineFit(float(slope), float(intercept), s - (slope * v + intercept))


@dataclass
class CalibrationRun:
    trace: PhaseTrace
    branches: np.ndarray
    mean_counts: np.ndarray
    estimated: np.ndarray
    fit: SigmaFit
    n_clipped: int = 0
    floor: float = 0.0

    @property
    def corrected_sigma(self) -> float:
        """σ̂ with the per-bin shot-noise floor removed in quadrature."""
        return float(np.sqrt(max(self.fit.sigma**2 - self.floor**2, 0.0)))


def calibrate(
    sigma: float,
    nbar: float = 2.0,
    eta: float = 0.72,
    xi: float = 0.998,
    n_bins: int = 5000,
    shots_per_bin: int = SHOTS_PER_BIN,
    seed: int = 0,
    nu: float = 0.0,
    pooled: bool = True,
    clip: bool = True,
) -> CalibrationRun:
    """Synthetic end-to-end calibration at one drive level.

    With ``pooled`` the bins alternate between the two operating points and
    the phase estimates are combined in one histogram.  Near |φ| = π/2 shot
    noise can push a bin past the invertible range; with ``clip`` such bins
    are clamped to ±π/2 and counted in ``n_clipped``, otherwise they raise.
    """
    ss = np.random.SeedSequence(int(seed))
    trace_seed, count_seed = (int(x) for x in ss.generate_state(2, dtype=np.uint64))
    trace = generate_piecewise_phase(sigma, n_bins, trace_seed, shots_per_bin)
    if pooled:
        branches = np.where(np.arange(n_bins) % 2 == 0, "plus", "minus")
    else:
        branches = np.full(n_bins, "plus")
    means = simulate_bin_means(trace, nbar, eta, xi, branches, nu, count_seed)
    # estimation assumes ν was subtracted, as with a calibrated background
    signs = np.where(branches == "plus", 1.0, -1.0)
    arg = signs * ((means - nu) / (2 * eta * nbar) - 1.0) / xi
    n_clipped = int(np.count_nonzero(np.abs(arg) > 1.0 + 1e-9)) if clip else 0
    estimated = estimate_bin_phase(means - nu, nbar, eta, xi, branches, tol=np.inf if clip else 1e-9)
    return CalibrationRun(trace, branches, means, estimated, fit_sigma(estimated), n_clipped,
                          shot_noise_floor(nbar, eta, xi, shots_per_bin))


def voltage_sweep(
    voltages,
    sigma_per_volt: float,
    offset: float = 0.0,
    seed: int = 0,
    corrected: bool = False,
    **kwargs,
) -> tuple[list[CalibrationRun], LineFit]:
    """Calibrate at each voltage (true σ = offset + sigma_per_volt·V) and fit the line.

    ``corrected`` fits the shot-noise-corrected widths instead of the raw ones.
    """
    voltages = np.asarray(voltages, dtype=float)
    seeds = np.random.SeedSequence(int(seed)).generate_state(voltages.size, dtype=np.uint64)
    runs = [calibrate(offset + sigma_per_volt * v, seed=int(s), **kwargs) for v, s in zip(voltages, seeds)]
    return runs, fit_voltage_line(voltages, [r.corrected_sigma if corrected else r.fit.sigma for r in runs])


def write_trace_csv(path, run: CalibrationRun, synthetic: bool = True) -> None:
    """Columns: bin_index, true_phase (blank unless synthetic), mean_count, estimated_phase."""
    with open(Path(path), "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["bin_index", "true_phase", "mean_count", "estimated_phase"])
        for i, (p, c, e) in enumerate(zip(run.trace.bin_phases, run.mean_counts, run.estimated)):
            writer.writerow([i, f"{p:.12g}" if synthetic else "", f"{c:.12g}", f"{e:.12g}"])
