"""SINR, spectral efficiency, and the three utility families.

Plain numpy versions feed the solvers and reports; the *_node variants
build the same computation on the autodiff tape so fine-tuning can
backpropagate utility through the power vector.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import tensor as T
from .errors import InvalidArgumentError, UndefinedRatioError

LN2 = math.log(2.0)


@dataclass(frozen=True)
class SumRate:
    """Aggregate throughput: sum of user rates."""

    name = "sum_rate"


@dataclass(frozen=True)
class ProportionalFairness:
    """Sum of log rates (geometric-mean rate), floored at epsilon bps/Hz.

    Natural log with a small floor keeps the utility finite at zero rate;
    the base does not change any argmax.
    """

    epsilon: float = 1e-6
    name = "pf"

    def __post_init__(self):
        if self.epsilon <= 0:
            raise InvalidArgumentError("epsilon must be > 0")


@dataclass(frozen=True)
class QoS:
    """Sum rate minus alpha times total shortfall below r_min."""

    r_min: float = 0.3
    alpha: float = 15.0
    name = "qos"

    def __post_init__(self):
        if self.alpha <= 1:
            raise InvalidArgumentError("alpha must be > 1")
        if self.r_min <= 0:
            raise InvalidArgumentError("r_min must be > 0")


Objective = SumRate | ProportionalFairness | QoS


def parse_objective(spec: str | dict) -> Objective:
    """Objective from a config string/dict like "qos" or {"name": "qos", ...}."""
    if isinstance(spec, str):
        spec = {"name": spec}
    name = spec.get("name", "")
    if name == "sum_rate":
        return SumRate()
    if name == "pf":
        return ProportionalFairness(epsilon=float(spec.get("epsilon", 1e-6)))
    if name == "qos":
        return QoS(r_min=float(spec.get("r_min", 0.3)), alpha=float(spec.get("alpha", 15.0)))
    raise InvalidArgumentError(f"unknown objective {name!r}")


def objective_to_dict(obj: Objective) -> dict:
    d = {"name": obj.name}
    if isinstance(obj, ProportionalFairness):
        d["epsilon"] = obj.epsilon
    elif isinstance(obj, QoS):
        d["r_min"] = obj.r_min
        d["alpha"] = obj.alpha
    return d


def sinr(H: np.ndarray, p: np.ndarray, sigma2: float) -> np.ndarray:
    """SINR_k = |h_kk|^2 p_k / (sum_{j != k} |h_kj|^2 p_j + sigma2)."""
    if not np.all(np.isfinite(H)):
        raise InvalidArgumentError("H contains non-finite entries")
    if sigma2 <= 0:
        raise InvalidArgumentError("sigma2 must be > 0")
    g = np.abs(H) ** 2
    p = np.asarray(p, dtype=np.float64)
    signal = np.diagonal(g) * p
    interference = g @ p - np.diagonal(g) * p
    return signal / (interference + sigma2)


def rates(H: np.ndarray, p: np.ndarray, sigma2: float) -> np.ndarray:
    """Spectral efficiency log2(1 + SINR), bps/Hz."""
    return np.log2(1.0 + sinr(H, p, sigma2))


def utility(rate_vec: np.ndarray, objective: Objective) -> float:
    r = np.asarray(rate_vec, dtype=np.float64)
    if isinstance(objective, SumRate):
        return float(r.sum())
    if isinstance(objective, ProportionalFairness):
        return float(np.log(np.maximum(r, objective.epsilon)).sum())
    if isinstance(objective, QoS):
        return float((r - objective.alpha * np.maximum(0.0, objective.r_min - r)).sum())
    raise InvalidArgumentError(f"unknown objective {objective!r}")


def utility_rows(rate_rows: np.ndarray, objective: Objective) -> np.ndarray:
    """Vectorized utility over an (N, K) block of rate vectors."""
    r = np.asarray(rate_rows, dtype=np.float64)
    if isinstance(objective, SumRate):
        return r.sum(axis=-1)
    if isinstance(objective, ProportionalFairness):
        return np.log(np.maximum(r, objective.epsilon)).sum(axis=-1)
    if isinstance(objective, QoS):
        return (r - objective.alpha * np.maximum(0.0, objective.r_min - r)).sum(axis=-1)
    raise InvalidArgumentError(f"unknown objective {objective!r}")


def normalized_ratio(u_model: float, u_ref: float) -> float:
    """u_model / u_ref; dataset-level reports pass ratio-of-mean utilities."""
    if u_ref == 0.0:
        raise UndefinedRatioError("reference utility is zero")
    return u_model / u_ref


# ---------------------------------------------------------------------------
# Differentiable composites


def rates_node(H: np.ndarray, p: T.Tensor, sigma2: float) -> T.Tensor:
    """log2(1 + SINR) on the tape; p is a (K, 1) column of watts."""
    K = H.shape[0]
    if p.shape != (K, 1):
        raise InvalidArgumentError(f"p must have shape ({K}, 1), got {p.shape}")
    g = np.abs(H) ** 2
    diag = np.diagonal(g).reshape(K, 1)
    g_off = g - np.diag(np.diagonal(g))
    signal = T.mul(T.constant(diag), p)
    interference = T.matmul(T.constant(g_off), p)
    snr = T.div(signal, T.add_scalar(interference, sigma2))
    return T.scale(T.ln(T.add_scalar(snr, 1.0)), 1.0 / LN2)


def utility_node(rate_col: T.Tensor, objective: Objective) -> T.Tensor:
    """Scalar utility on the tape; rate_col is (K, 1) bps/Hz."""
    if isinstance(objective, SumRate):
        return T.sum_all(rate_col)
    if isinstance(objective, ProportionalFairness):
        # max(r, eps) == relu(r - eps) + eps, with subgradient 0 below the floor
        floored = T.add_scalar(T.relu(T.add_scalar(rate_col, -objective.epsilon)), objective.epsilon)
        return T.sum_all(T.ln(floored))
    if isinstance(objective, QoS):
        shortfall = T.relu(T.scale(T.add_scalar(rate_col, -objective.r_min), -1.0))
        return T.sum_all(T.sub(rate_col, T.scale(shortfall, objective.alpha)))
    raise InvalidArgumentError(f"unknown objective {objective!r}")
