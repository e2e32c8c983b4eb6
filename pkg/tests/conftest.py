from __future__ import annotations

import numpy as np
import pytest

from iwgt.channelsim import ScenarioConfig, make_snapshot


@pytest.fixture(scope="session")
def toy_scenario() -> ScenarioConfig:
    return ScenarioConfig(
        region_side_m=350.0, K=4, d_min_m=2.0, d_max_m=65.0, scenario_id="unit-toy"
    )


@pytest.fixture(scope="session")
def toy_snapshots(toy_scenario):
    return [make_snapshot(toy_scenario, seed) for seed in range(12)]


def random_channel(K: int, seed: int, scale: float = 1.0) -> np.ndarray:
    rng = np.random.default_rng(seed)
    return scale * (rng.standard_normal((K, K)) + 1j * rng.standard_normal((K, K))) / np.sqrt(2.0)
