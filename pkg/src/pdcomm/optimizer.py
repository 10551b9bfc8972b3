"""Joint optimization of the binary alphabet and the receiver displacement.

The alphabet is parametrized by an angle θ ∈ [0, π/4]::

    a1 = −√(2n̄) sin θ,   a2 = √(2n̄) cos θ

so θ = π/4 is BPSK and θ = 0 is OOK, and the energy constraint holds by
construction.  The displacement β is a signed real number.  Each objective
evaluation runs in compiled code with a phase-quadrature order fixed per σ
(chosen by a convergence probe), and the reported optima are re-evaluated
with the adaptive, convergence-checked path.
"""

from __future__ import annotations

import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Iterable, Sequence

import numpy as np
from scipy.optimize import brentq, minimize

from . import _kernels
from .errors import OptimizerNotConvergedError
from .metrics import Alphabet, error_probability, mutual_information
from .photostats import IDEAL, Imperfections, PnrStrategy
from .quadrature import converged_order, phase_rule

log = logging.getLogger(__name__)

THETA_MAX = np.pi / 4
OBJECTIVES = ("error", "mi")


@dataclass(frozen=True)
class OptimizerSettings:
    grid: int = 12
    xatol: float = 1e-8
    maxiter: int = 500
    dedup: float = 1e-4
    jump_fraction: float = 0.1
    jitter: float = 0.0
    seed: int = 0
    refine_jumps: bool = True


DEFAULT_SETTINGS = OptimizerSettings()
# MI has a single smooth maximum; warm starts plus a sparse grid suffice
RMAP_SETTINGS = OptimizerSettings(grid=4, refine_jumps=False)


@dataclass(frozen=True)
class Optimum:
    theta: float
    beta: float
    value: float
    nbar: float

    @property
    def alphabet(self) -> Alphabet:
        return Alphabet.from_angle(self.nbar, self.theta)

    @property
    def a1(self) -> float:
        return self.alphabet.a1

    @property
    def a2(self) -> float:
        return self.alphabet.a2

    @property
    def a1sq(self) -> float:
        return self.a1**2

    @property
    def a2sq(self) -> float:
        return self.a2**2

    @property
    def betasq(self) -> float:
        return self.beta**2

    @property
    def nulled(self) -> int:
        """Index of the hypothesis the displacement sits closest to."""
        return int(abs(self.beta - self.a2) < abs(self.beta - self.a1))


@dataclass
class OptimizationResult:
    objective: str
    nbar: float
    sigma: float
    m: int
    best: Optimum
    local_optima: list[Optimum]
    n_starts: int = 0


@dataclass(frozen=True)
class JumpEvent:
    """Discontinuity of the global optimum between two adjacent grid σ's."""

    sigma_lo: float
    sigma_hi: float
    sigma: float
    a1sq_before: float
    a1sq_after: float


@dataclass
class SweepCurve:
    objective: str
    nbar: float
    m: int
    sigmas: np.ndarray
    results: list[OptimizationResult]
    jumps: list[JumpEvent] = field(default_factory=list)

    def column(self, name: str) -> np.ndarray:
        return np.array([getattr(r.best, name) for r in self.results])


def beta_span(nbar: float) -> float:
    return 2.0 * np.sqrt(2.0 * nbar + 1.0)


def _kind(objective: str) -> int:
    if objective not in OBJECTIVES:
        raise ValueError(f"objective must be one of {OBJECTIVES}, got {objective!r}")
    return _kernels.KIND_ERROR if objective == "error" else _kernels.KIND_MI


def _rule_for(nbar: float, sigma: float, m: int, imp: Imperfections) -> tuple[np.ndarray, np.ndarray]:
    """Quadrature rule converged for the largest signals and displacements searched."""
    r = np.sqrt(2.0 * nbar)
    b = beta_span(nbar)
    eta, xi, nu = imp.astuple()
    probes = [(s, beta) for s in (-r, r, -r / np.sqrt(2), r / np.sqrt(2)) for beta in (-b, -r, r, b)]

    def integrand(phi, w):
        return np.concatenate([_kernels.pnr_probs(s, beta, m, eta, xi, nu, phi, w) for s, beta in probes])

    return phase_rule(sigma, converged_order(integrand, sigma))


def _start_grid(nbar: float, settings: OptimizerSettings) -> np.ndarray:
    n = settings.grid
    thetas = np.linspace(0.0, THETA_MAX, n)
    span = beta_span(nbar)
    betas = np.linspace(-span, span, n)
    pts = np.array([(t, b) for t in thetas for b in betas], dtype=float)
    if settings.jitter > 0:
        rng = np.random.default_rng(settings.seed)
        steps = np.array([THETA_MAX / max(n - 1, 1), 2 * span / max(n - 1, 1)])
        pts += settings.jitter * steps * rng.uniform(-0.5, 0.5, size=pts.shape)
        pts[:, 0] = np.clip(pts[:, 0], 0.0, THETA_MAX)
    return pts


def _simplex(x0: np.ndarray) -> np.ndarray:
    dt, db = 0.05, 0.1
    t = x0[0] + dt if x0[0] + dt <= THETA_MAX else x0[0] - dt
    return np.array([x0, [t, x0[1]], [x0[0], x0[1] + db]])


def _local_search(func, x0, settings: OptimizerSettings, restarts: int = 1):
    """Bounded Nelder-Mead from ``x0``.

    A simplex that hits the iteration cap while crawling along a curved
    valley is restarted once, fresh, from its best vertex; a second cap hit
    raises.
    """
    x = np.asarray(x0, dtype=float)
    x[0] = np.clip(x[0], 0.0, THETA_MAX)
    for _ in range(restarts + 1):
        res = minimize(
            func,
            x,
            method="Nelder-Mead",
            bounds=[(0.0, THETA_MAX), (None, None)],
            options={
                "xatol": settings.xatol,
                "fatol": np.inf,
                "maxiter": settings.maxiter,
                "initial_simplex": _simplex(x),
            },
        )
        if res.status == 0:
            return res
        x = np.asarray(res.x, dtype=float)
    raise OptimizerNotConvergedError(f"Nelder-Mead from {np.asarray(x0).tolist()} stopped: {res.message}")


def _polish(func, val: float, x: np.ndarray, settings: OptimizerSettings, restarts: int = 5):
    """Restart the simplex at a converged point until it stops moving.

    A simplex pressed against the θ bound can collapse on a slope; a fresh
    simplex there either confirms the point or slides to the real minimum.
    """
    for _ in range(restarts):
        res = _local_search(func, x, settings)
        moved = np.linalg.norm(res.x - x)
        val, x = float(res.fun), np.asarray(res.x, dtype=float)
        if moved <= settings.dedup:
            break
    return val, x


def _dedupe(points: list[tuple[float, np.ndarray]], tol: float) -> list[tuple[float, np.ndarray]]:
    kept: list[tuple[float, np.ndarray]] = []
    for val, x in sorted(points, key=lambda p: p[0]):
        if all(np.linalg.norm(x - y) > tol for _, y in kept):
            kept.append((val, x))
    return kept


def _checked_value(opt_theta: float, beta: float, nbar: float, sigma: float, m: int, imp, objective: str) -> float:
    alphabet = Alphabet.from_angle(nbar, opt_theta)
    strat = PnrStrategy(float(beta), m)
    if objective == "error":
        return error_probability(alphabet, sigma, strat, imp)
    return mutual_information(alphabet, sigma, strat, imp)


def _optimize(
    nbar: float,
    sigma: float,
    m: int,
    imp: Imperfections,
    objective: str,
    settings: OptimizerSettings | None,
    extra_starts: Iterable[Sequence[float]] = (),
) -> OptimizationResult:
    if nbar <= 0:
        raise ValueError(f"nbar must be positive, got {nbar}")
    settings = settings or DEFAULT_SETTINGS
    kind = _kind(objective)
    phi, w = _rule_for(nbar, sigma, m, imp)
    eta, xi, nu = imp.astuple()

    def func(x):
        return _kernels.angle_objective(x[0], x[1], nbar, m, eta, xi, nu, phi, w, kind)

    starts = list(_start_grid(nbar, settings)) + [np.asarray(s, dtype=float) for s in extra_starts]
    found = []
    for x0 in starts:
        res = _local_search(func, x0, settings)
        found.append((float(res.fun), np.asarray(res.x, dtype=float)))
    kept = _dedupe([_polish(func, val, x, settings) for val, x in _dedupe(found, settings.dedup)], settings.dedup)
    sign = 1.0 if objective == "error" else -1.0
    optima = [Optimum(float(x[0]), float(x[1]), sign * val, float(nbar)) for val, x in kept]
    top = optima[0]
    best = replace(top, value=_checked_value(top.theta, top.beta, nbar, sigma, m, imp, objective))
    optima[0] = best
    return OptimizationResult(objective, float(nbar), float(sigma), int(m), best, optima, len(starts))


def optimize_discrimination(
    nbar: float,
    sigma: float,
    m: int,
    imp: Imperfections = IDEAL,
    settings: OptimizerSettings | None = None,
    extra_starts: Iterable[Sequence[float]] = (),
) -> OptimizationResult:
    """Minimize the MAP error probability over (θ, β) with multi-start Nelder-Mead.

    ``local_optima`` lists every distinct converged point, best first.
    Raises OptimizerNotConvergedError if any start hits the iteration cap.
    """
    return _optimize(nbar, sigma, m, imp, "error", settings, extra_starts)


def optimize_mutual_information(
    nbar: float,
    sigma: float,
    m: int,
    imp: Imperfections = IDEAL,
    settings: OptimizerSettings | None = None,
    extra_starts: Iterable[Sequence[float]] = (),
) -> OptimizationResult:
    """Maximize the soft-decision mutual information over (θ, β)."""
    return _optimize(nbar, sigma, m, imp, "mi", settings, extra_starts)


def optimize(nbar, sigma, m, imp=IDEAL, objective="error", settings=None, extra_starts=()):
    return _optimize(nbar, sigma, m, imp, objective, settings, extra_starts)


# ---------------------------------------------------------- fixed alphabet


@dataclass(frozen=True)
class DisplacementOptimum:
    alphabet: Alphabet
    beta: float
    value: float


def optimize_displacement(
    alphabet: Alphabet,
    sigma: float,
    m: int,
    imp: Imperfections = IDEAL,
    objective: str = "error",
    starts: int = 12,
) -> DisplacementOptimum:
    """Best real displacement for a fixed alphabet (e.g. BPSK)."""
    kind = _kind(objective)
    a1, a2 = alphabet.amplitudes
    reach = max(abs(a1), abs(a2))
    span = 2.0 * reach + 1.0
    r = np.sqrt(2.0 * max(alphabet.nbar, 1e-12))
    eta, xi, nu = imp.astuple()
    nb = max(alphabet.nbar, 1e-12)
    phi, w = _rule_for(nb, sigma, m, imp) if r > 0 else phase_rule(0.0)

    def func(x):
        return _kernels.fixed_objective(a1, a2, x[0], m, eta, xi, nu, phi, w, kind)

    best = None
    for b0 in np.linspace(-span, span, starts):
        res = minimize(func, [b0], method="Nelder-Mead", options={"xatol": 1e-10, "fatol": np.inf, "maxiter": 500})
        if res.status != 0:
            raise OptimizerNotConvergedError(f"displacement search from {b0} stopped: {res.message}")
        if best is None or res.fun < best.fun:
            best = res
    beta = float(best.x[0])
    strat = PnrStrategy(beta, m)
    if objective == "error":
        value = error_probability(alphabet, sigma, strat, imp)
    else:
        value = mutual_information(alphabet, sigma, strat, imp)
    return DisplacementOptimum(alphabet, beta, value)


# ------------------------------------------------------------------ sweeps


def _track(nbar, sigma, m, imp, objective, settings, x0):
    """Follow one basin from ``x0`` with a single local search."""
    kind = _kind(objective)
    phi, w = _rule_for(nbar, sigma, m, imp)
    eta, xi, nu = imp.astuple()
    res = _local_search(
        lambda x: _kernels.angle_objective(x[0], x[1], nbar, m, eta, xi, nu, phi, w, kind), x0, settings
    )
    return float(res.fun), np.asarray(res.x, dtype=float)


def _refine_jump(nbar, m, imp, objective, settings, lo: OptimizationResult, hi: OptimizationResult) -> float:
    """σ at which the two competing basins exchange the global optimum."""
    xa = np.array([lo.best.theta, lo.best.beta])
    xb = np.array([hi.best.theta, hi.best.beta])

    def gap(s):
        fa, _ = _track(nbar, s, m, imp, objective, settings, xa)
        fb, _ = _track(nbar, s, m, imp, objective, settings, xb)
        return fa - fb

    try:
        g_lo, g_hi = gap(lo.sigma), gap(hi.sigma)
        if g_lo * g_hi < 0:
            return float(brentq(gap, lo.sigma, hi.sigma, xtol=1e-5))
    except (ValueError, OptimizerNotConvergedError):
        pass
    return 0.5 * (lo.sigma + hi.sigma)


def detect_jumps(curve: SweepCurve, imp: Imperfections, settings: OptimizerSettings | None = None) -> list[JumpEvent]:
    settings = settings or DEFAULT_SETTINGS
    threshold = settings.jump_fraction * curve.nbar
    events = []
    for lo, hi in zip(curve.results[:-1], curve.results[1:]):
        if abs(hi.best.a1sq - lo.best.a1sq) > threshold:
            if settings.refine_jumps:
                where = _refine_jump(curve.nbar, curve.m, imp, curve.objective, settings, lo, hi)
            else:
                where = 0.5 * (lo.sigma + hi.sigma)
            events.append(JumpEvent(lo.sigma, hi.sigma, where, lo.best.a1sq, hi.best.a1sq))
    return events


def _cold_point(args):
    nbar, sigma, m, imp, objective, settings = args
    return _optimize(nbar, sigma, m, imp, objective, settings)


def sweep_sigma(
    nbar: float,
    m: int,
    imp: Imperfections,
    sigma_grid,
    objective: str = "error",
    settings: OptimizerSettings | None = None,
    mode: str = "warm",
    workers: int = 1,
) -> SweepCurve:
    """Optimize at every σ of an ascending grid and locate alphabet jumps.

    ``mode="warm"`` (default) runs sequentially and seeds each σ with the
    previous σ's local optima in addition to the fresh start grid.
    ``mode="cold"`` treats grid points independently and may use a process
    pool of ``workers``.
    """
    settings = settings or DEFAULT_SETTINGS
    sigmas = np.asarray(sigma_grid, dtype=float)
    if sigmas.size == 0:
        raise ValueError("sigma_grid must be nonempty")
    if np.any(np.diff(sigmas) < 0):
        raise ValueError("sigma_grid must be sorted ascending")
    _kind(objective)
    if mode == "warm":
        results = []
        previous: list[Optimum] = []
        for s in sigmas:
            extra = [(o.theta, o.beta) for o in previous]
            res = _optimize(nbar, s, m, imp, objective, settings, extra)
            log.debug("sigma=%.4f best=%s", s, res.best)
            results.append(res)
            previous = res.local_optima
    elif mode == "cold":
        jobs = [(nbar, float(s), m, imp, objective, settings) for s in sigmas]
        if workers > 1:
            with ProcessPoolExecutor(max_workers=workers) as pool:
                results = list(pool.map(_cold_point, jobs))
        else:
            results = [_cold_point(j) for j in jobs]
    else:
        raise ValueError(f"mode must be 'warm' or 'cold', got {mode!r}")
    curve = SweepCurve(objective, float(nbar), int(m), sigmas, results)
    curve.jumps = detect_jumps(curve, imp, settings)
    return curve
