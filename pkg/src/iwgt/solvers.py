"""Classical power-control baselines.

wmmse runs the standard scalar-channel weighted-sum-rate block-coordinate
updates (receiver gain u, MSE weight w, transmit amplitude v with v^2
clipped to the power budget). wmmse_best restarts it from full power plus
random initializations and keeps the run with the best target utility.
brute_force exhaustively searches a uniform power grid and serves as the
independent ground-truth oracle at small K.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import InvalidArgumentError, NumericalError, ResourceLimitError
from .objectives import Objective, SumRate, rates, utility, utility_rows

BRUTE_FORCE_CELL_LIMIT = 10**8
_CHUNK = 1 << 18


@dataclass(frozen=True)
class WmmseConfig:
    max_iters: int = 500
    tol: float = 1e-5
    n_starts: int = 100
    p_max: float = 0.01
    weights: np.ndarray | None = None  # per-link rate weights, default all 1

    def validate(self) -> None:
        if self.max_iters < 1:
            raise InvalidArgumentError("max_iters must be >= 1")
        if self.tol <= 0:
            raise InvalidArgumentError("tol must be > 0")
        if self.n_starts < 1:
            raise InvalidArgumentError("n_starts must be >= 1")
        if self.p_max <= 0:
            raise InvalidArgumentError("p_max must be > 0")
        if self.weights is not None and np.any(np.asarray(self.weights) <= 0):
            raise InvalidArgumentError("weights must be positive")


def _weighted_sum_rate(H: np.ndarray, p: np.ndarray, sigma2: float, alpha: np.ndarray) -> float:
    return float(alpha @ rates(H, p, sigma2))


def wmmse(H: np.ndarray, sigma2: float, cfg: WmmseConfig, p_init: np.ndarray) -> np.ndarray:
    """Weighted-sum-rate WMMSE from the given initialization.

    Stops when the relative change of the weighted sum rate between sweeps
    drops below cfg.tol, or after cfg.max_iters sweeps. The returned powers
    satisfy the box constraint exactly.
    """
    cfg.validate()
    K = H.shape[0]
    p_init = np.asarray(p_init, dtype=np.float64)
    if np.any(p_init < 0) or np.any(p_init > cfg.p_max):
        raise InvalidArgumentError("p_init outside [0, p_max]")
    alpha = np.ones(K) if cfg.weights is None else np.asarray(cfg.weights, dtype=np.float64)
    a = np.abs(H)  # amplitude gains; phases are immaterial in the scalar case
    a2 = a**2
    v = np.sqrt(p_init)
    vmax = math.sqrt(cfg.p_max)
    prev = _weighted_sum_rate(H, p_init, sigma2, alpha)
    for it in range(cfg.max_iters):
        # Receiver gains: MMSE over total received power plus noise.
        denom_u = a2 @ (v**2) + sigma2
        u = np.diagonal(a) * v / denom_u
        # MSE weights for the rate-equivalent surrogate.
        w = 1.0 / (1.0 - u * np.diagonal(a) * v)
        # Transmit amplitudes: closed-form scalar minimizer, clipped to budget.
        num_v = alpha * w * u * np.diagonal(a)
        den_v = (alpha * w * u**2) @ a2  # den_v[k] = sum_j alpha_j w_j u_j^2 |h_jk|^2
        with np.errstate(invalid="ignore", divide="ignore"):
            v = np.where(den_v > 0, num_v / den_v, 0.0)
        v = np.clip(v, 0.0, vmax)
        if not np.all(np.isfinite(v)):
            raise NumericalError(f"wmmse: non-finite amplitude at iteration {it}")
        cur = _weighted_sum_rate(H, np.minimum(v**2, cfg.p_max), sigma2, alpha)
        if abs(cur - prev) <= cfg.tol * max(abs(prev), 1e-12):
            prev = cur
            break
        prev = cur
    return np.minimum(v**2, cfg.p_max)


def wmmse_best(
    H: np.ndarray,
    sigma2: float,
    cfg: WmmseConfig,
    seed: int,
    objective: Objective = SumRate(),
) -> np.ndarray:
    """Multi-start WMMSE; start 0 is full power, the rest uniform in the box.

    Runs are ranked by the target utility (WMMSE itself always optimizes
    weighted sum rate); ties keep the lowest start index.
    """
    cfg.validate()
    K = H.shape[0]
    rng = np.random.default_rng(seed)
    best_p = None
    best_u = -math.inf
    for start in range(cfg.n_starts):
        if start == 0:
            p0 = np.full(K, cfg.p_max)
        else:
            p0 = rng.uniform(0.0, cfg.p_max, size=K)
        p = wmmse(H, sigma2, cfg, p0)
        u = utility(rates(H, p, sigma2), objective)
        if u > best_u:
            best_u, best_p = u, p
    return best_p


def full_reuse(K: int, p_max: float) -> np.ndarray:
    """Every transmitter at the maximum power budget."""
    if K < 1 or p_max < 0:
        raise InvalidArgumentError("need K >= 1 and p_max >= 0")
    return np.full(K, p_max, dtype=np.float64)


def brute_force(
    H: np.ndarray,
    sigma2: float,
    p_max: float,
    grid_points: int,
    objective: Objective,
) -> np.ndarray:
    """Exhaustive argmax of the utility over the uniform grid {0..p_max}^K.

    Ties resolve to the lexicographically smallest power vector. Guarded by
    a cell-count limit so it stays a small-K oracle.
    """
    K = H.shape[0]
    if grid_points < 2:
        raise InvalidArgumentError("grid_points must be >= 2")
    if K > 6 or grid_points**K > BRUTE_FORCE_CELL_LIMIT:
        raise ResourceLimitError(
            f"brute force grid {grid_points}^{K} exceeds the cost guard"
        )
    levels = np.linspace(0.0, p_max, grid_points)
    g = np.abs(H) ** 2
    diag = np.diagonal(g)
    g_off = g - np.diag(diag)
    total = grid_points**K
    best_u = -math.inf
    best_idx = -1
    # Enumerate in C order (last axis fastest) so the first argmax hit is the
    # lexicographically smallest vector.
    for lo in range(0, total, _CHUNK):
        hi = min(lo + _CHUNK, total)
        idx = np.arange(lo, hi)
        P = np.empty((hi - lo, K))
        rem = idx
        for axis in range(K - 1, -1, -1):
            P[:, axis] = levels[rem % grid_points]
            rem = rem // grid_points
        snr = (P * diag) / (P @ g_off.T + sigma2)
        u = utility_rows(np.log2(1.0 + snr), objective)
        k = int(np.argmax(u))
        if u[k] > best_u:
            best_u = float(u[k])
            best_idx = lo + k
    out = np.empty(K)
    rem = best_idx
    for axis in range(K - 1, -1, -1):
        out[axis] = levels[rem % grid_points]
        rem //= grid_points
    return out
