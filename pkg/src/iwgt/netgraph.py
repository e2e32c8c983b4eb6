"""Interference-graph construction and edge masking.

Every snapshot becomes a fully connected directed graph over the K links:
node k carries the standardized dB gain of its direct channel, and the
edge (k, j) carries the standardized dB gains of the interference pair
(tx j -> rx k, tx k -> rx j). The diagonal carries no edge; edge_present
flags it absent. Masked views withhold a sampled subset of off-diagonal
edges for pre-training and masked-CSI inference.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

from .channelsim import ChannelSnapshot, Dataset
from .errors import DatasetIOError, InvalidArgumentError

STD_FLOOR = 1e-6

# Feature widths: node = (direct gain dB,), edge = (gain kj dB, gain jk dB).
F_NODE = 1
F_EDGE = 2


@dataclass(frozen=True)
class NormStats:
    """Standardization statistics for dB-domain gain features."""

    node_mean_db: float
    node_std_db: float
    edge_mean_db: float
    edge_std_db: float

    def validate(self) -> None:
        if self.node_std_db <= 0 or self.edge_std_db <= 0:
            raise InvalidArgumentError("std values must be > 0")

    def to_dict(self) -> dict:
        return {
            "node_mean_db": self.node_mean_db,
            "node_std_db": self.node_std_db,
            "edge_mean_db": self.edge_mean_db,
            "edge_std_db": self.edge_std_db,
        }

    @staticmethod
    def from_dict(d: dict) -> "NormStats":
        return NormStats(
            node_mean_db=float(d["node_mean_db"]),
            node_std_db=float(d["node_std_db"]),
            edge_mean_db=float(d["edge_mean_db"]),
            edge_std_db=float(d["edge_std_db"]),
        )


@dataclass(frozen=True)
class InterferenceGraph:
    """Feature view of one snapshot, with raw gains kept for objectives.

    node_feat: K x F_NODE, edge_feat: K x K x F_EDGE (diagonal zeroed and
    flagged absent in edge_present), H: complex gains, sigma2: noise watts.
    """

    K: int
    node_feat: np.ndarray
    edge_feat: np.ndarray
    edge_present: np.ndarray
    H: np.ndarray
    sigma2: float


@dataclass(frozen=True)
class MaskView:
    """Boolean K x K mask; True marks a withheld off-diagonal edge."""

    masked: np.ndarray
    ratio: float
    seed: int

    @property
    def n_masked(self) -> int:
        return int(self.masked.sum())


def mask_count(K: int, rho: float) -> int:
    """round-half-up of rho * K * (K-1)."""
    return int(math.floor(rho * K * (K - 1) + 0.5))


def empty_mask(K: int) -> MaskView:
    return MaskView(masked=np.zeros((K, K), dtype=bool), ratio=0.0, seed=0)


def mask_edges(K: int, rho: float, seed: int) -> MaskView:
    """Uniformly sample exactly mask_count(K, rho) off-diagonal positions."""
    if not (0.0 <= rho <= 1.0):
        raise InvalidArgumentError(f"rho must be in [0, 1], got {rho}")
    if K < 1:
        raise InvalidArgumentError(f"K must be >= 1, got {K}")
    m = mask_count(K, rho)
    masked = np.zeros((K, K), dtype=bool)
    if m > 0:
        rng = np.random.default_rng(seed)
        flat = rng.choice(K * (K - 1), size=m, replace=False)
        # Map indices over off-diagonal positions (row-major, diagonal skipped)
        # back to (row, col).
        rows = flat // (K - 1)
        cols = flat % (K - 1)
        cols = np.where(cols >= rows, cols + 1, cols)
        masked[rows, cols] = True
    return MaskView(masked=masked, ratio=rho, seed=seed)


def _gains_db_checked(H: np.ndarray) -> np.ndarray:
    mag2 = np.abs(H) ** 2
    zero = np.argwhere(mag2 == 0.0)
    if zero.size:
        k, j = zero[0]
        raise InvalidArgumentError(f"zero channel gain at entry ({k}, {j})")
    return 10.0 * np.log10(mag2)


def compute_norm_stats(dataset: Dataset | list[ChannelSnapshot]) -> NormStats:
    """Mean/std of dB-domain direct and cross gains over a whole dataset.

    Population statistics (ddof=0); stds are floored at STD_FLOOR.
    """
    snaps = dataset.snapshots if isinstance(dataset, Dataset) else dataset
    if not snaps:
        raise InvalidArgumentError("dataset is empty")
    # Streaming moments keep memory flat for large datasets.
    n_sum = n_sq = e_sum = e_sq = 0.0
    n_cnt = e_cnt = 0
    for snap in snaps:
        g = _gains_db_checked(snap.H)
        diag = np.diagonal(g)
        off = g[~np.eye(snap.K, dtype=bool)]
        n_sum += diag.sum()
        n_sq += (diag**2).sum()
        n_cnt += diag.size
        e_sum += off.sum()
        e_sq += (off**2).sum()
        e_cnt += off.size
    node_mean = n_sum / n_cnt
    node_var = max(n_sq / n_cnt - node_mean**2, 0.0)
    if e_cnt:
        edge_mean = e_sum / e_cnt
        edge_var = max(e_sq / e_cnt - edge_mean**2, 0.0)
    else:
        edge_mean, edge_var = 0.0, 0.0  # K=1 dataset has no cross links
    return NormStats(
        node_mean_db=node_mean,
        node_std_db=max(math.sqrt(node_var), STD_FLOOR),
        edge_mean_db=edge_mean,
        edge_std_db=max(math.sqrt(edge_var), STD_FLOOR),
    )


def build_graph(snapshot: ChannelSnapshot, stats: NormStats, sigma2: float) -> InterferenceGraph:
    """Standardized feature tensors for one snapshot."""
    stats.validate()
    K = snapshot.K
    g = _gains_db_checked(snapshot.H)
    node_feat = ((np.diagonal(g) - stats.node_mean_db) / stats.node_std_db).reshape(K, F_NODE)
    std = (g - stats.edge_mean_db) / stats.edge_std_db
    edge_feat = np.zeros((K, K, F_EDGE), dtype=np.float64)
    off = ~np.eye(K, dtype=bool)
    edge_feat[:, :, 0][off] = std[off]
    edge_feat[:, :, 1][off] = std.T[off]
    return InterferenceGraph(
        K=K,
        node_feat=node_feat,
        edge_feat=edge_feat,
        edge_present=off,
        H=snapshot.H,
        sigma2=sigma2,
    )


def build_graphs(dataset: Dataset, stats: NormStats) -> list[InterferenceGraph]:
    sigma2 = dataset.sigma2
    return [build_graph(s, stats, sigma2) for s in dataset.snapshots]


def save_stats(stats: NormStats, path: str) -> None:
    try:
        with open(path, "w", encoding="utf-8") as f:
            json.dump(stats.to_dict(), f, sort_keys=True, indent=2)
            f.write("\n")
    except OSError as e:
        raise DatasetIOError(path, str(e)) from e


def load_stats(path: str) -> NormStats:
    try:
        with open(path, "r", encoding="utf-8") as f:
            return NormStats.from_dict(json.load(f))
    except OSError as e:
        raise DatasetIOError(path, str(e)) from e
    except (KeyError, ValueError) as e:
        raise DatasetIOError(path, f"bad stats file: {e}") from e
