"""Interference-network channel simulator.

Generates reproducible link topologies (transmitter/receiver pairs with a
nearest-neighbor association constraint), dual-slope path loss with
log-normal shadowing, Rayleigh fading, and dataset files that round-trip
bit-exactly in the binary variant.

All randomness is a pure function of (config, seed). Within one snapshot,
topology, shadowing, and fading draw from independent sub-streams derived
from the snapshot seed by fixed offsets, so snapshots can be generated in
any order (or in parallel) with identical results.
"""

from __future__ import annotations

import json
import math
import struct
from dataclasses import dataclass, field

import numpy as np

from .errors import DatasetIOError, GenerationError, InvalidArgumentError

FORMAT_VERSION = 1

# Rejection budget per receiver before the sampler gives up.
RETRY_BUDGET = 10_000

# Sub-stream offsets within one snapshot seed.
_STREAM_TOPOLOGY = 0
_STREAM_SHADOWING = 1
_STREAM_FADING = 2


def _rng(seed: int, stream: int) -> np.random.Generator:
    if seed < 0:
        raise InvalidArgumentError(f"seed must be non-negative, got {seed}")
    return np.random.default_rng(np.random.SeedSequence([seed, stream]))


@dataclass(frozen=True)
class PathLossConfig:
    """Dual-slope log-distance path loss with log-normal shadowing (dB)."""

    exponent_near: float = 2.0
    exponent_far: float = 4.0
    breakpoint_m: float = 50.0
    ref_loss_db: float = 38.46  # loss at 1 m
    shadowing_std_db: float = 7.0

    def validate(self) -> None:
        if self.breakpoint_m <= 0:
            raise InvalidArgumentError("breakpoint_m must be > 0")
        if self.shadowing_std_db < 0:
            raise InvalidArgumentError("shadowing_std_db must be >= 0")
        if not (self.exponent_far >= self.exponent_near >= 0):
            raise InvalidArgumentError(
                "need exponent_far >= exponent_near >= 0, got "
                f"{self.exponent_far} / {self.exponent_near}"
            )


@dataclass(frozen=True)
class ScenarioConfig:
    """One network scenario: geometry, radio constants, and an id label."""

    region_side_m: float
    K: int
    d_min_m: float
    d_max_m: float
    pathloss: PathLossConfig = field(default_factory=PathLossConfig)
    bandwidth_hz: float = 10e6
    p_max_dbm: float = 10.0
    noise_psd_dbm_hz: float = -174.0
    scenario_id: str = ""

    def validate(self) -> None:
        if self.K < 1:
            raise InvalidArgumentError(f"K must be >= 1, got {self.K}")
        if not (0 < self.d_min_m < self.d_max_m <= self.region_side_m):
            raise InvalidArgumentError(
                f"need 0 < d_min < d_max <= region side, got "
                f"[{self.d_min_m}, {self.d_max_m}] in {self.region_side_m}"
            )
        if self.bandwidth_hz <= 0:
            raise InvalidArgumentError("bandwidth_hz must be > 0")
        self.pathloss.validate()

    @property
    def p_max_watts(self) -> float:
        return dbm_to_watts(self.p_max_dbm)

    @property
    def sigma2_watts(self) -> float:
        return noise_power(self.noise_psd_dbm_hz, self.bandwidth_hz)

    def to_dict(self) -> dict:
        d = {
            "region_side_m": self.region_side_m,
            "K": self.K,
            "d_min_m": self.d_min_m,
            "d_max_m": self.d_max_m,
            "bandwidth_hz": self.bandwidth_hz,
            "p_max_dbm": self.p_max_dbm,
            "noise_psd_dbm_hz": self.noise_psd_dbm_hz,
            "scenario_id": self.scenario_id,
            "pathloss": {
                "exponent_near": self.pathloss.exponent_near,
                "exponent_far": self.pathloss.exponent_far,
                "breakpoint_m": self.pathloss.breakpoint_m,
                "ref_loss_db": self.pathloss.ref_loss_db,
                "shadowing_std_db": self.pathloss.shadowing_std_db,
            },
        }
        return d

    @staticmethod
    def from_dict(d: dict) -> "ScenarioConfig":
        try:
            pl = PathLossConfig(**d["pathloss"]) if "pathloss" in d else PathLossConfig()
            return ScenarioConfig(
                region_side_m=float(d["region_side_m"]),
                K=int(d["K"]),
                d_min_m=float(d["d_min_m"]),
                d_max_m=float(d["d_max_m"]),
                pathloss=pl,
                bandwidth_hz=float(d.get("bandwidth_hz", 10e6)),
                p_max_dbm=float(d.get("p_max_dbm", 10.0)),
                noise_psd_dbm_hz=float(d.get("noise_psd_dbm_hz", -174.0)),
                scenario_id=str(d.get("scenario_id", "")),
            )
        except (KeyError, TypeError, ValueError) as e:
            raise InvalidArgumentError(f"bad scenario dict: {e}") from e


@dataclass(frozen=True)
class Topology:
    """Transmitter and receiver positions, each K x 2 (meters)."""

    tx_pos: np.ndarray
    rx_pos: np.ndarray

    @property
    def K(self) -> int:
        return self.tx_pos.shape[0]

    def link_distances(self) -> np.ndarray:
        """K x K matrix of |rx_k - tx_j| distances."""
        diff = self.rx_pos[:, None, :] - self.tx_pos[None, :, :]
        return np.sqrt((diff**2).sum(axis=2))


@dataclass(frozen=True)
class ChannelSnapshot:
    """One network realization: topology plus complex amplitude gains.

    H[k, j] is the amplitude gain from transmitter j to receiver k.
    """

    topology: Topology
    H: np.ndarray
    seed: int
    scenario_id: str = ""

    @property
    def K(self) -> int:
        return self.H.shape[0]

    def gains_db(self) -> np.ndarray:
        """K x K power gains 10*log10 |h_kj|^2."""
        return 10.0 * np.log10(np.abs(self.H) ** 2)


def dbm_to_watts(dbm: float) -> float:
    return 10.0 ** ((dbm - 30.0) / 10.0)


def noise_power(psd_dbm_hz: float, bandwidth_hz: float) -> float:
    """Thermal noise power in watts over the given bandwidth."""
    if bandwidth_hz <= 0:
        raise InvalidArgumentError(f"bandwidth_hz must be > 0, got {bandwidth_hz}")
    return dbm_to_watts(psd_dbm_hz + 10.0 * math.log10(bandwidth_hz))


def path_loss_db(d_m, pl: PathLossConfig):
    """Deterministic dual-slope path loss in dB, continuous at the breakpoint.

    Accepts a scalar or an array of distances; shadowing is applied
    separately in sample_channel.
    """
    d = np.asarray(d_m, dtype=np.float64)
    if np.any(d <= 0):
        raise InvalidArgumentError("distances must be positive")
    near = pl.ref_loss_db + 10.0 * pl.exponent_near * np.log10(d)
    far = (
        pl.ref_loss_db
        + 10.0 * pl.exponent_near * np.log10(pl.breakpoint_m)
        + 10.0 * pl.exponent_far * np.log10(d / pl.breakpoint_m)
    )
    out = np.where(d <= pl.breakpoint_m, near, far)
    return float(out) if np.isscalar(d_m) else out


def sample_topology(cfg: ScenarioConfig, seed: int) -> Topology:
    """Draw a topology satisfying the nearest-neighbor constraint.

    Transmitters are uniform over the region square. Each receiver is drawn
    uniformly over the annulus [d_min, d_max] around its transmitter and
    kept only if it lies inside the region and is strictly closer to its
    own transmitter than to every other transmitter; otherwise it is
    redrawn, up to RETRY_BUDGET attempts.
    """
    cfg.validate()
    rng = _rng(seed, _STREAM_TOPOLOGY)
    side = cfg.region_side_m
    tx = rng.uniform(0.0, side, size=(cfg.K, 2))
    rx = np.empty((cfg.K, 2), dtype=np.float64)
    for k in range(cfg.K):
        for _ in range(RETRY_BUDGET):
            r = math.sqrt(rng.uniform(cfg.d_min_m**2, cfg.d_max_m**2))
            theta = rng.uniform(0.0, 2.0 * math.pi)
            cand = tx[k] + np.array([r * math.cos(theta), r * math.sin(theta)])
            if not (0.0 <= cand[0] <= side and 0.0 <= cand[1] <= side):
                continue
            dists = np.sqrt(((cand - tx) ** 2).sum(axis=1))
            if np.all(np.delete(dists, k) > dists[k]):
                rx[k] = cand
                break
        else:
            raise GenerationError(k, RETRY_BUDGET)
    return Topology(tx_pos=tx, rx_pos=rx)


def sample_channel(
    topology: Topology,
    cfg: ScenarioConfig,
    seed: int,
    unit_fading: bool = False,
) -> ChannelSnapshot:
    """Draw complex amplitude gains for every (receiver, transmitter) pair.

    |h_kj|^2 = 10^(-(PL(d_kj) + S_kj)/10) * |g_kj|^2 with S_kj log-normal
    shadowing in dB and g_kj unit-variance circularly symmetric complex
    Gaussian fading. unit_fading=True forces g = 1 (test hook).
    """
    cfg.validate()
    d = topology.link_distances()
    pl = path_loss_db(d, cfg.pathloss)
    shade = _rng(seed, _STREAM_SHADOWING).normal(
        0.0, cfg.pathloss.shadowing_std_db, size=d.shape
    )
    if unit_fading:
        g = np.ones(d.shape, dtype=np.complex128)
    else:
        rng = _rng(seed, _STREAM_FADING)
        g = (rng.standard_normal(d.shape) + 1j * rng.standard_normal(d.shape)) / math.sqrt(2.0)
    amp = np.sqrt(10.0 ** (-(pl + shade) / 10.0))
    return ChannelSnapshot(
        topology=topology, H=amp * g, seed=seed, scenario_id=cfg.scenario_id
    )


def make_snapshot(cfg: ScenarioConfig, seed: int, unit_fading: bool = False) -> ChannelSnapshot:
    """Topology and channel from one snapshot seed."""
    topo = sample_topology(cfg, seed)
    return sample_channel(topo, cfg, seed, unit_fading=unit_fading)


@dataclass
class Dataset:
    """In-memory dataset: a scenario plus its snapshots."""

    scenario: ScenarioConfig
    base_seed: int
    snapshots: list[ChannelSnapshot]

    def __len__(self) -> int:
        return len(self.snapshots)

    @property
    def sigma2(self) -> float:
        return self.scenario.sigma2_watts


def _record_bytes(snap: ChannelSnapshot) -> bytes:
    K = snap.K
    tx = np.ascontiguousarray(snap.topology.tx_pos, dtype="<f8")
    rx = np.ascontiguousarray(snap.topology.rx_pos, dtype="<f8")
    h = np.empty(2 * K * K, dtype="<f8")
    h[0::2] = snap.H.real.ravel()
    h[1::2] = snap.H.imag.ravel()
    return (
        struct.pack("<qq", snap.seed, K)
        + tx.tobytes()
        + rx.tobytes()
        + h.tobytes()
    )


def _record_json(snap: ChannelSnapshot) -> str:
    K = snap.K
    h = np.empty(2 * K * K, dtype=np.float64)
    h[0::2] = snap.H.real.ravel()
    h[1::2] = snap.H.imag.ravel()
    rec = {
        "seed": snap.seed,
        "K": K,
        "tx": snap.topology.tx_pos.tolist(),
        "rx": snap.topology.rx_pos.tolist(),
        "H": h.tolist(),
    }
    return json.dumps(rec, sort_keys=True)


def generate_dataset(
    cfg: ScenarioConfig,
    n_snapshots: int,
    base_seed: int,
    path: str,
    encoding: str = "binary",
) -> None:
    """Generate snapshots with seeds base_seed..base_seed+n-1 and write them.

    The file starts with one JSON header line recording the scenario, count,
    and base seed; records follow in the selected encoding.
    """
    if n_snapshots < 1:
        raise InvalidArgumentError(f"n_snapshots must be >= 1, got {n_snapshots}")
    if encoding not in ("binary", "text"):
        raise InvalidArgumentError(f"unknown encoding {encoding!r}")
    cfg.validate()
    header = {
        "format_version": FORMAT_VERSION,
        "encoding": encoding,
        "n_snapshots": n_snapshots,
        "base_seed": base_seed,
        "scenario": cfg.to_dict(),
    }
    try:
        with open(path, "wb") as f:
            f.write((json.dumps(header, sort_keys=True) + "\n").encode("utf-8"))
            for i in range(n_snapshots):
                snap = make_snapshot(cfg, base_seed + i)
                if encoding == "binary":
                    f.write(_record_bytes(snap))
                else:
                    f.write((_record_json(snap) + "\n").encode("utf-8"))
    except OSError as e:
        raise DatasetIOError(path, str(e)) from e


def _snapshot_from_arrays(
    seed: int, K: int, tx: np.ndarray, rx: np.ndarray, h_flat: np.ndarray, scenario_id: str
) -> ChannelSnapshot:
    H = (h_flat[0::2] + 1j * h_flat[1::2]).reshape(K, K)
    topo = Topology(tx_pos=tx.reshape(K, 2), rx_pos=rx.reshape(K, 2))
    return ChannelSnapshot(topology=topo, H=H, seed=seed, scenario_id=scenario_id)


def load_dataset(path: str) -> Dataset:
    """Read a dataset file written by generate_dataset."""
    try:
        with open(path, "rb") as f:
            header_line = f.readline()
            try:
                header = json.loads(header_line.decode("utf-8"))
            except (UnicodeDecodeError, json.JSONDecodeError) as e:
                raise DatasetIOError(path, f"bad header: {e}") from e
            if header.get("format_version") != FORMAT_VERSION:
                raise DatasetIOError(
                    path, f"unsupported format_version {header.get('format_version')}"
                )
            cfg = ScenarioConfig.from_dict(header["scenario"])
            n = int(header["n_snapshots"])
            encoding = header["encoding"]
            snapshots = []
            for i in range(n):
                if encoding == "binary":
                    head = f.read(16)
                    if len(head) < 16:
                        raise DatasetIOError(path, f"truncated at record {i}")
                    seed, K = struct.unpack("<qq", head)
                    body = f.read(8 * (4 * K + 2 * K * K))
                    if len(body) < 8 * (4 * K + 2 * K * K):
                        raise DatasetIOError(path, f"truncated at record {i}")
                    vals = np.frombuffer(body, dtype="<f8")
                    tx, rx, h = vals[: 2 * K], vals[2 * K : 4 * K], vals[4 * K :]
                else:
                    line = f.readline()
                    if not line:
                        raise DatasetIOError(path, f"truncated at record {i}")
                    rec = json.loads(line.decode("utf-8"))
                    seed, K = int(rec["seed"]), int(rec["K"])
                    tx = np.asarray(rec["tx"], dtype=np.float64)
                    rx = np.asarray(rec["rx"], dtype=np.float64)
                    h = np.asarray(rec["H"], dtype=np.float64)
                snapshots.append(
                    _snapshot_from_arrays(seed, K, tx, rx, h, cfg.scenario_id)
                )
            return Dataset(scenario=cfg, base_seed=int(header["base_seed"]), snapshots=snapshots)
    except OSError as e:
        raise DatasetIOError(path, str(e)) from e


def generate_in_memory(
    cfg: ScenarioConfig, n_snapshots: int, base_seed: int
) -> Dataset:
    """Like generate_dataset but returns the Dataset without touching disk."""
    if n_snapshots < 1:
        raise InvalidArgumentError(f"n_snapshots must be >= 1, got {n_snapshots}")
    snaps = [make_snapshot(cfg, base_seed + i) for i in range(n_snapshots)]
    return Dataset(scenario=cfg, base_seed=base_seed, snapshots=snaps)
