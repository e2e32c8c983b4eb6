from __future__ import annotations

import math

import numpy as np
import pytest

from iwgt import tensor as T
from iwgt.errors import InvalidArgumentError, UndefinedRatioError
from iwgt.objectives import (
    ProportionalFairness,
    QoS,
    SumRate,
    normalized_ratio,
    objective_to_dict,
    parse_objective,
    rates,
    rates_node,
    sinr,
    utility,
    utility_node,
    utility_rows,
)


def test_sinr_single_link_no_interference():
    assert sinr(np.array([[1.0 + 0j]]), np.array([1.0]), 1.0) == pytest.approx(1.0)


def test_sinr_symmetric_two_links():
    # |h_kk|^2 = 1, |h_kj|^2 = 0.5, p = (1, 1), sigma2 = 1 -> 1/(0.5+1) = 2/3
    H = np.array([[1.0, math.sqrt(0.5)], [math.sqrt(0.5), 1.0]], dtype=complex)
    s = sinr(H, np.array([1.0, 1.0]), 1.0)
    assert s == pytest.approx([2 / 3, 2 / 3], rel=1e-12)


def test_sinr_zero_power():
    H = np.array([[1.0, 0.3], [0.3, 1.0]], dtype=complex)
    assert np.all(sinr(H, np.zeros(2), 1.0) == 0.0)


def test_sinr_rejects_nonfinite():
    H = np.array([[np.inf, 0.3], [0.3, 1.0]])
    with pytest.raises(InvalidArgumentError):
        sinr(H, np.ones(2), 1.0)


def test_rates_hand_values():
    H = np.array([[1.0, math.sqrt(0.5)], [math.sqrt(0.5), 1.0]], dtype=complex)
    r = rates(H, np.array([1.0, 1.0]), 1.0)
    assert r == pytest.approx([math.log2(5 / 3)] * 2, rel=1e-12)
    assert r[0] == pytest.approx(0.73697, abs=1e-5)
    assert rates(np.array([[1.0 + 0j]]), np.array([1.0]), 1.0)[0] == pytest.approx(1.0)
    assert rates(np.array([[1.0 + 0j]]), np.array([0.0]), 1.0)[0] == 0.0


def test_utility_tabulated_values():
    assert utility(np.array([1.0, 2.0, 3.0]), SumRate()) == pytest.approx(6.0, abs=1e-12)
    qos = QoS(r_min=0.3, alpha=15.0)
    assert utility(np.array([0.5]), qos) == pytest.approx(0.5, abs=1e-12)
    assert utility(np.array([0.1]), qos) == pytest.approx(0.1 - 15 * 0.2, abs=1e-12)
    assert utility(np.array([1.0, 1.0]), ProportionalFairness(epsilon=1e-6)) == pytest.approx(0.0, abs=1e-12)


def test_pf_floor_keeps_utility_finite():
    pf = ProportionalFairness(epsilon=1e-6)
    assert utility(np.array([0.0]), pf) == pytest.approx(math.log(1e-6), rel=1e-12)


def test_utility_rows_matches_scalar():
    rng = np.random.default_rng(0)
    R = rng.uniform(0, 3, size=(50, 4))
    for obj in (SumRate(), ProportionalFairness(), QoS()):
        rows = utility_rows(R, obj)
        for i in range(50):
            assert rows[i] == pytest.approx(utility(R[i], obj), rel=1e-12)


def test_normalized_ratio():
    assert normalized_ratio(6.0, 6.0) == 1.0
    assert normalized_ratio(3.0, 6.0) == 0.5
    # QoS reports can exceed 1
    assert normalized_ratio(3.0, 1.0) == 3.0
    with pytest.raises(UndefinedRatioError):
        normalized_ratio(1.0, 0.0)


def test_sinr_monotonicity_in_own_power():
    rng = np.random.default_rng(1)
    for _ in range(20):
        K = 4
        H = rng.standard_normal((K, K)) + 1j * rng.standard_normal((K, K))
        p = rng.uniform(0.1, 1.0, K)
        s0 = sinr(H, p, 1e-3)
        p2 = p.copy()
        p2[1] *= 1.5
        s1 = sinr(H, p2, 1e-3)
        assert s1[1] > s0[1]
        others = [k for k in range(K) if k != 1]
        assert np.all(s1[others] <= s0[others] + 1e-15)


def test_sinr_scale_invariance():
    rng = np.random.default_rng(2)
    H = rng.standard_normal((3, 3)) + 1j * rng.standard_normal((3, 3))
    p = rng.uniform(0, 1, 3)
    c = 7.3
    assert sinr(c * H, p, c**2 * 1e-2) == pytest.approx(sinr(H, p, 1e-2), rel=1e-12)


def test_utility_monotone_in_rates():
    rng = np.random.default_rng(3)
    for obj in (SumRate(), ProportionalFairness(), QoS()):
        r = rng.uniform(0, 2, 6)
        base = utility(r, obj)
        for k in range(6):
            bumped = r.copy()
            bumped[k] += 0.05
            assert utility(bumped, obj) >= base - 1e-12


def test_node_variants_match_numpy():
    rng = np.random.default_rng(4)
    K = 5
    H = rng.standard_normal((K, K)) + 1j * rng.standard_normal((K, K))
    p = rng.uniform(0.01, 1.0, K)
    r_np = rates(H, p, 0.1)
    r_node = rates_node(H, T.constant(p.reshape(K, 1)), 0.1)
    assert np.allclose(r_node.data.ravel(), r_np, rtol=1e-12)
    for obj in (SumRate(), ProportionalFairness(), QoS()):
        u_node = utility_node(r_node, obj)
        assert u_node.item() == pytest.approx(utility(r_np, obj), rel=1e-12)


def test_objective_parse_roundtrip():
    for obj in (SumRate(), ProportionalFairness(epsilon=1e-5), QoS(r_min=0.4, alpha=12.0)):
        assert parse_objective(objective_to_dict(obj)) == obj
    with pytest.raises(InvalidArgumentError):
        parse_objective("nope")
    with pytest.raises(InvalidArgumentError):
        QoS(alpha=0.5)
