from __future__ import annotations

import math

import numpy as np
import pytest

from conftest import random_channel
from iwgt.errors import InvalidArgumentError, ResourceLimitError
from iwgt.objectives import SumRate, rates, utility
from iwgt.solvers import WmmseConfig, brute_force, full_reuse, wmmse, wmmse_best


def _wsr(H, p, sigma2):
    return utility(rates(H, p, sigma2), SumRate())


def test_wmmse_single_link_full_power():
    cfg = WmmseConfig(p_max=1.0)
    for init in (0.0, 0.3, 1.0):
        p = wmmse(np.array([[1.0 + 0j]]), 1.0, cfg, np.array([init]))
        # rate is monotone in power; v-update goes straight to the clip
        assert p[0] == pytest.approx(1.0, rel=1e-6) or (init == 0.0 and p[0] == 0.0)


def test_wmmse_strong_interference_matches_grid():
    H = np.array([[1.0, math.sqrt(10)], [math.sqrt(10), 1.0]], dtype=complex)
    cfg = WmmseConfig(p_max=1.0, n_starts=100)
    p = wmmse_best(H, 1.0, cfg, seed=0)
    grid = brute_force(H, 1.0, 1.0, 101, SumRate())
    assert _wsr(H, p, 1.0) >= 0.98 * _wsr(H, grid, 1.0)
    # binary on/off structure
    assert min(p) < 0.02 and max(p) > 0.98


def test_wmmse_weak_interference_full_power():
    H = np.array([[1.0, 0.1], [0.1, 1.0]], dtype=complex)
    cfg = WmmseConfig(p_max=1.0, n_starts=20)
    p = wmmse_best(H, 1.0, cfg, seed=1)
    grid = brute_force(H, 1.0, 1.0, 101, SumRate())
    assert np.all(grid == pytest.approx([1.0, 1.0]))
    assert np.all(p >= 0.99)


def test_wmmse_monotone_weighted_sum_rate_per_sweep():
    # rerunning with max_iters = 1..n replays the same deterministic
    # trajectory, so successive prefixes expose the per-sweep values
    rng = np.random.default_rng(5)
    for trial in range(5):
        H = random_channel(4, 100 + trial)
        p0 = rng.uniform(0, 0.01, 4)
        values = []
        for iters in range(1, 12):
            cfg = WmmseConfig(p_max=0.01, max_iters=iters, tol=1e-300)
            p = wmmse(H, 1e-9, cfg, p0)
            values.append(_wsr(H, p, 1e-9))
        assert np.all(np.diff(values) >= -1e-9)
        assert values[0] >= _wsr(H, p0, 1e-9) - 1e-9


def test_wmmse_never_decreases_from_init():
    rng = np.random.default_rng(6)
    cfg = WmmseConfig(p_max=0.01, n_starts=1)
    for trial in range(50):
        H = random_channel(3, 200 + trial)
        p0 = rng.uniform(0, 0.01, 3)
        p = wmmse(H, 1e-9, cfg, p0)
        assert _wsr(H, p, 1e-9) >= _wsr(H, p0, 1e-9) - 1e-9


def test_wmmse_feasibility_exact():
    cfg = WmmseConfig(p_max=0.01, n_starts=5)
    for trial in range(20):
        H = random_channel(5, trial)
        p = wmmse_best(H, 1e-10, cfg, seed=trial)
        assert np.all(p >= 0.0) and np.all(p <= 0.01)


def test_wmmse_rejects_bad_init():
    cfg = WmmseConfig(p_max=1.0)
    with pytest.raises(InvalidArgumentError):
        wmmse(np.eye(2, dtype=complex), 1.0, cfg, np.array([0.5, 1.5]))


def test_wmmse_best_degenerate_multistart():
    H = random_channel(3, 77)
    cfg = WmmseConfig(p_max=0.5, n_starts=1)
    a = wmmse_best(H, 1e-6, cfg, seed=0)
    b = wmmse(H, 1e-6, cfg, np.full(3, 0.5))
    assert np.array_equal(a, b)


def test_wmmse_best_dominates_full_reuse_sample():
    cfg = WmmseConfig(p_max=0.01, n_starts=4)
    for trial in range(50):
        H = random_channel(4, 300 + trial)
        pw = wmmse_best(H, 1e-8, cfg, seed=trial)
        assert _wsr(H, pw, 1e-8) >= _wsr(H, full_reuse(4, 0.01), 1e-8) - 1e-12


def test_full_reuse():
    assert np.array_equal(full_reuse(3, 0.01), [0.01, 0.01, 0.01])
    assert np.array_equal(full_reuse(1, 0.5), [0.5])
    p = full_reuse(6, 0.2)
    assert np.all((0 <= p) & (p <= 0.2))
    with pytest.raises(InvalidArgumentError):
        full_reuse(0, 1.0)


def test_brute_force_single_link():
    p = brute_force(np.array([[1.0 + 0j]]), 1.0, 1.0, 11, SumRate())
    assert p[0] == 1.0


def test_brute_force_symmetric_tie_break():
    H = np.array([[1.0, math.sqrt(10)], [math.sqrt(10), 1.0]], dtype=complex)
    p = brute_force(H, 1.0, 1.0, 101, SumRate())
    # (0, P_max) and (P_max, 0) tie; lexicographically smallest wins
    assert np.array_equal(p, [0.0, 1.0])


def test_brute_force_weak_interference():
    H = np.array([[1.0, 0.1], [0.1, 1.0]], dtype=complex)
    p = brute_force(H, 1.0, 1.0, 101, SumRate())
    assert np.array_equal(p, [1.0, 1.0])


def test_brute_force_cost_guard():
    with pytest.raises(ResourceLimitError):
        brute_force(np.eye(7, dtype=complex), 1.0, 1.0, 11, SumRate())
    with pytest.raises(ResourceLimitError):
        brute_force(np.eye(6, dtype=complex), 1.0, 1.0, 101, SumRate())
    with pytest.raises(InvalidArgumentError):
        brute_force(np.eye(2, dtype=complex), 1.0, 1.0, 1, SumRate())


def test_brute_force_matches_exhaustive_python_loop():
    # independent oracle: plain nested loop over the same grid
    H = random_channel(2, 42)
    levels = np.linspace(0.0, 1.0, 21)
    best, best_p = -np.inf, None
    for a in levels:
        for b in levels:
            u = _wsr(H, np.array([a, b]), 0.1)
            if u > best:
                best, best_p = u, (a, b)
    p = brute_force(H, 0.1, 1.0, 21, SumRate())
    assert np.array_equal(p, best_p)
    assert _wsr(H, p, 0.1) == pytest.approx(best, rel=1e-12)
