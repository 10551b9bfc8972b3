import warnings

import numpy as np
import pytest

from pdcomm.errors import OptimizerNotConvergedError
from pdcomm.metrics import Alphabet, direct_distributions, mi_from_distributions, mutual_information
from pdcomm.optimizer import (
    OptimizerSettings,
    optimize_discrimination,
    optimize_displacement,
    optimize_mutual_information,
    sweep_sigma,
)
from pdcomm.photostats import EXPERIMENT, IDEAL, Imperfections, PnrStrategy

NEAR_IDEAL = Imperfections(1.0, 0.998, 0.0)


def test_bpsk_optimal_without_noise():
    best = optimize_discrimination(0.5, 0.0, 1, IDEAL).best
    assert abs(best.a1) == pytest.approx(np.sqrt(0.5), rel=0.02)
    assert abs(best.a2) == pytest.approx(np.sqrt(0.5), rel=0.02)


def test_ook_like_under_heavy_noise():
    best = optimize_discrimination(0.5, 1.2, 1, IDEAL).best
    assert best.a1sq <= 0.05 * 0.5


def test_global_basin_switch_between_low_and_moderate_noise():
    lo = optimize_discrimination(2.0, 0.15, 3, EXPERIMENT).best
    hi = optimize_discrimination(2.0, 0.25, 3, EXPERIMENT).best
    assert abs(lo.a1sq - hi.a1sq) > 0.1 * 2.0 or abs(lo.betasq - hi.betasq) > 0.1 * 2.0


def test_mi_optimum_is_bpsk_without_noise():
    best = optimize_mutual_information(1.0, 0.0, 3, IDEAL).best
    assert abs(best.a1) == pytest.approx(abs(best.a2), rel=0.02)


def test_ook_endpoint_without_displacement_is_direct_detection():
    for sigma in (0.0, 0.7):
        ook = Alphabet.from_angle(1.0, 0.0)
        mi = mutual_information(ook, sigma, PnrStrategy(0.0, 3), EXPERIMENT)
        direct = mi_from_distributions(direct_distributions(ook, EXPERIMENT, 3))
        assert mi == pytest.approx(direct, abs=1e-6)


@pytest.mark.parametrize("objective", ["error", "mi"])
@pytest.mark.parametrize("sigma", [0.0, 0.3, 0.8])
def test_result_invariants(objective, sigma):
    nbar, m = 1.0, 3
    opt = optimize_discrimination if objective == "error" else optimize_mutual_information
    res = opt(nbar, sigma, m, EXPERIMENT)
    sign = 1 if objective == "error" else -1
    for o in res.local_optima:
        assert sign * res.best.value <= sign * o.value + 1e-9
        assert 0.5 * (o.a1**2 + o.a2**2) == pytest.approx(nbar, abs=1e-9)
        assert 0 <= o.theta <= np.pi / 4
    # never worse than either endpoint alphabet with its own best displacement
    for alphabet in (Alphabet.bpsk(nbar), Alphabet.ook(nbar)):
        endpoint = optimize_displacement(alphabet, sigma, m, EXPERIMENT, objective).value
        assert sign * res.best.value <= sign * endpoint + 1e-9


def test_local_optima_count_finding():
    """More interior minima than m is reported as a warning, not a failure."""
    for sigma in (0.15, 0.25, 0.4, 0.45):
        res = optimize_discrimination(2.0, sigma, 3, EXPERIMENT)
        # points on θ = 0 or θ = π/4 are constrained optima of the boundary
        interior = [o for o in res.local_optima if 1e-6 < o.theta < np.pi / 4 - 1e-6]
        if len(interior) > 3:
            warnings.warn(f"sigma={sigma}: {len(interior)} interior local minima for m=3")
        assert 1 <= len(res.local_optima)
        assert len({(round(o.theta, 3), round(o.beta, 3)) for o in res.local_optima}) == len(res.local_optima)


def test_jittered_starts_agree():
    base = optimize_discrimination(1.0, 0.4, 3, EXPERIMENT).best.value
    for seed in (1, 2):
        s = OptimizerSettings(jitter=0.5, seed=seed)
        assert optimize_discrimination(1.0, 0.4, 3, EXPERIMENT, s).best.value == pytest.approx(base, abs=1e-7)


def test_iteration_cap_raises():
    with pytest.raises(OptimizerNotConvergedError):
        optimize_discrimination(1.0, 0.2, 1, IDEAL, OptimizerSettings(grid=2, maxiter=3))


def test_rejects_nonpositive_energy_and_bad_objective():
    with pytest.raises(ValueError):
        optimize_discrimination(0.0, 0.2, 1)
    with pytest.raises(ValueError):
        sweep_sigma(1.0, 1, IDEAL, [0.0, 0.1], objective="capacity")


def test_sweep_validates_grid():
    with pytest.raises(ValueError):
        sweep_sigma(1.0, 1, IDEAL, [0.2, 0.1])
    with pytest.raises(ValueError):
        sweep_sigma(1.0, 1, IDEAL, [])


def test_error_curve_nondecreasing_and_warm_matches_cold():
    grid = np.linspace(0, 1.2, 13)
    warm = sweep_sigma(1.0, 2, NEAR_IDEAL, grid, "error")
    cold = sweep_sigma(1.0, 2, NEAR_IDEAL, grid, "error", mode="cold")
    w, c = warm.column("value"), cold.column("value")
    assert np.all(np.diff(w) >= -1e-9)
    assert np.max(np.abs(w - c)) < 1e-6


def test_no_jumps_at_low_energy():
    curve = sweep_sigma(0.5, 3, EXPERIMENT, np.linspace(0, 1.2, 61), "error")
    assert curve.jumps == []


def test_mi_sweep_continuous():
    curve = sweep_sigma(1.0, 3, EXPERIMENT, np.linspace(0, 1.2, 31), "mi")
    assert curve.jumps == []
    assert np.all(np.diff(curve.column("value")) <= 1e-9)


def test_displacement_optimum_for_bpsk_is_near_kennedy_at_zero_noise():
    res = optimize_displacement(Alphabet.bpsk(1.0), 0.0, 1, IDEAL)
    # optimized displacement beats exact nulling
    assert res.value <= 0.5 * np.exp(-4) + 1e-12
    assert abs(res.beta) > 1.0
