"""Shot-level Monte Carlo of the displaced photon-counting experiment.

Each shot draws a hypothesis, a channel phase and a pooled photon count.  The
random stream is Philox keyed by ``(seed, block index)``, so a run split into
blocks across processes reproduces the sequential confusion matrix exactly.
"""

from __future__ import annotations

from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from .errors import EmptyHypothesisError
from .metrics import Alphabet, map_decision, mi_from_distributions, pnr_distributions
from .photostats import IDEAL, Imperfections, PnrStrategy, displaced_mean_count

BLOCK_SIZE = 1 << 16


@dataclass
class ShotBatch:
    n_shots: int
    seed: int
    confusion: np.ndarray
    decision_map: np.ndarray | None = None

    @property
    def m(self) -> int:
        return self.confusion.shape[1] - 1


@dataclass(frozen=True)
class EmpiricalMetrics:
    pe: float
    pe_se: float
    mi: float


def block_generator(seed: int, block: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(np.random.SeedSequence([int(seed), int(block)])))


def pooled_poisson_inversion(lam: np.ndarray, u: np.ndarray, m: int) -> np.ndarray:
    """min(X, m) for X ~ Poisson(lam), by inversion of the uniform ``u``."""
    counts = np.zeros(lam.shape, dtype=np.int64)
    pmf = np.exp(-lam)
    cdf = pmf.copy()
    for k in range(m):
        counts += u > cdf
        pmf = pmf * lam / (k + 1)
        cdf = cdf + pmf
    return counts


def _simulate_block(args) -> np.ndarray:
    amplitudes, sigma, beta, m, imp, seed, block, size, hypothesis, prior1 = args
    rng = block_generator(seed, block)
    u_hyp = rng.random(size)
    phi = sigma * rng.standard_normal(size)
    u_count = rng.random(size)
    if hypothesis is None:
        hyp = (u_hyp >= prior1).astype(np.int64)
    else:
        hyp = np.full(size, hypothesis, dtype=np.int64)
    signal = np.asarray(amplitudes)[hyp]
    lam = displaced_mean_count(signal, beta, phi, imp)
    counts = pooled_poisson_inversion(lam, u_count, m)
    flat = np.bincount(hyp * (m + 1) + counts, minlength=2 * (m + 1))
    return flat.reshape(2, m + 1)


def _blocks(n_shots: int, block_size: int):
    n_blocks = -(-n_shots // block_size)
    for b in range(n_blocks):
        yield b, min(block_size, n_shots - b * block_size)


def simulate_shots(
    alphabet: Alphabet,
    sigma: float,
    strat: PnrStrategy,
    imp: Imperfections = IDEAL,
    n_shots: int = 100_000,
    seed: int = 0,
    hypothesis: int | None = None,
    prior1: float = 0.5,
    workers: int = 1,
    block_size: int = BLOCK_SIZE,
) -> ShotBatch:
    """Simulate ``n_shots`` independent experiments.

    ``hypothesis`` forces every shot to send that symbol (0 or 1) instead of
    drawing it with probability ``prior1``.  The result carries the analytic
    MAP decision map used by the receiver.
    """
    if n_shots < 1:
        raise ValueError(f"n_shots must be at least 1, got {n_shots}")
    if hypothesis not in (None, 0, 1):
        raise ValueError(f"hypothesis must be None, 0 or 1, got {hypothesis}")
    m = int(strat.m)
    jobs = [
        (alphabet.amplitudes, float(sigma), float(strat.beta), m, imp, seed, b, size, hypothesis, prior1)
        for b, size in _blocks(n_shots, block_size)
    ]
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(_simulate_block, jobs))
    else:
        parts = [_simulate_block(j) for j in jobs]
    confusion = np.sum(parts, axis=0)
    decision = map_decision(pnr_distributions(alphabet, sigma, strat, imp), (prior1, 1 - prior1))
    return ShotBatch(int(n_shots), int(seed), confusion, decision)


def empirical_metrics(batch: ShotBatch, decision_map: np.ndarray | None = None) -> EmpiricalMetrics:
    """Error rate (with binomial standard error) and plug-in mutual information.

    Decisions follow ``decision_map``, else the batch's analytic map, else the
    MAP rule fitted to the empirical confusion matrix.
    """
    conf = np.asarray(batch.confusion, dtype=float)
    rows = conf.sum(axis=1)
    if np.any(rows == 0):
        raise EmptyHypothesisError("every hypothesis must be sampled at least once")
    n = conf.sum()
    if decision_map is None:
        decision_map = batch.decision_map
    if decision_map is None:
        decision_map = np.argmax(conf, axis=0)
    k = np.arange(conf.shape[1])
    pe = 1.0 - conf[decision_map, k].sum() / n
    se = float(np.sqrt(pe * (1.0 - pe) / n))
    priors = rows / n
    mi = mi_from_distributions(conf / rows[:, None], priors)
    return EmpiricalMetrics(float(pe), se, mi)


def repeated_runs(
    alphabet: Alphabet,
    sigma: float,
    strat: PnrStrategy,
    imp: Imperfections = IDEAL,
    n_runs: int = 5,
    n_shots: int = 100_000,
    seed: int = 0,
    workers: int = 1,
) -> list[EmpiricalMetrics]:
    """Independent runs with seeds derived from ``seed``; error bars are the
    sample standard deviation across runs."""
    seeds = np.random.SeedSequence(int(seed)).generate_state(n_runs, dtype=np.uint64)
    return [
        empirical_metrics(simulate_shots(alphabet, sigma, strat, imp, n_shots, int(s), workers=workers))
        for s in seeds
    ]
