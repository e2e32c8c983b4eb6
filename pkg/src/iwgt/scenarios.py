"""Named scenario library.

Desk-scale "-toy" scenarios mirror the full-scale library's structure:
a pre-training block crossing link counts with transmitter-receiver
distance ranges, and an out-of-distribution block with a wide [1, 100] m
range. Full-scale entries (K = 20..80, 1000 m region) are shipped for
config export but are far too heavy for CI.
"""

from __future__ import annotations

from .channelsim import ScenarioConfig
from .errors import ConfigError

# Pre-training distance ranges and the OOD range (meters).
_PRETRAIN_RANGES = [(2.0, 65.0), (10.0, 50.0), (30.0, 70.0)]
_OOD_RANGE = (1.0, 100.0)

_TOY_REGION = 350.0
_TOY_K = [4, 6, 8]

_FULL_REGION = 1000.0
_FULL_K = [20, 35, 50, 65, 80]


def _library() -> dict[str, ScenarioConfig]:
    lib: dict[str, ScenarioConfig] = {}

    # Desk scale: D1-toy .. D9-toy pre-training (K-major over distance ranges),
    # D16-toy .. D18-toy out-of-distribution.
    idx = 1
    for k in _TOY_K:
        for d_min, d_max in _PRETRAIN_RANGES:
            name = f"D{idx}-toy"
            lib[name] = ScenarioConfig(
                region_side_m=_TOY_REGION, K=k, d_min_m=d_min, d_max_m=d_max,
                scenario_id=name,
            )
            idx += 1
    for i, k in enumerate(_TOY_K):
        name = f"D{16 + i}-toy"
        lib[name] = ScenarioConfig(
            region_side_m=_TOY_REGION, K=k, d_min_m=_OOD_RANGE[0], d_max_m=_OOD_RANGE[1],
            scenario_id=name,
        )

    # Solvable toys for fine-tune optimality checks.
    lib["K1-toy"] = ScenarioConfig(
        region_side_m=100.0, K=1, d_min_m=2.0, d_max_m=50.0, scenario_id="K1-toy"
    )
    lib["K2-strong-toy"] = ScenarioConfig(
        region_side_m=50.0, K=2, d_min_m=2.0, d_max_m=40.0, scenario_id="K2-strong-toy"
    )

    # Full scale: D1..D15 pre-training, D16..D20 OOD.
    idx = 1
    for k in _FULL_K:
        for d_min, d_max in _PRETRAIN_RANGES:
            name = f"D{idx}"
            lib[name] = ScenarioConfig(
                region_side_m=_FULL_REGION, K=k, d_min_m=d_min, d_max_m=d_max,
                scenario_id=name,
            )
            idx += 1
    for i, k in enumerate(_FULL_K):
        name = f"D{16 + i}"
        lib[name] = ScenarioConfig(
            region_side_m=_FULL_REGION, K=k, d_min_m=_OOD_RANGE[0], d_max_m=_OOD_RANGE[1],
            scenario_id=name,
        )
    return lib


_LIBRARY = _library()


def scenario_names() -> list[str]:
    return sorted(_LIBRARY)


def get_scenario(name: str) -> ScenarioConfig:
    try:
        return _LIBRARY[name]
    except KeyError:
        raise ConfigError(
            f"unknown scenario {name!r}; known: {', '.join(scenario_names())}"
        ) from None
