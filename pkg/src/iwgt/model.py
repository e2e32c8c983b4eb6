"""Interference-aware graph Transformer: backbone, heads, and checkpoints.

The backbone embeds per-link direct-gain features, then stacks multi-head
self-attention layers whose scores carry an additive per-head bias computed
from the cross-link edge features by a small MLP (the bias projector).
Withheld edges feed a learnable mask token into that projector instead of
their features; the diagonal uses a learnable per-head self bias. Heads on
top of the backbone: edge decoder (masked-edge reconstruction), projector
and predictor (teacher-student alignment), and the sigmoid-scaled decision
head emitting transmit powers.
"""

from __future__ import annotations

import hashlib
import json
import math
import os
from dataclasses import dataclass, field

import numpy as np

from . import tensor as T
from .errors import (
    CheckpointError,
    CheckpointShapeError,
    CheckpointTruncatedError,
    CheckpointVersionError,
    InvalidArgumentError,
)
from .netgraph import F_EDGE, F_NODE, InterferenceGraph, MaskView, NormStats, empty_mask
from .tensor import ParameterSet, Tensor

CHECKPOINT_VERSION = 1

BACKBONE_PREFIXES = ("enc.", "bias.", "mask_token", "self_bias", "layers.")
TEACHER_PREFIXES = BACKBONE_PREFIXES + ("proj.",)
ALL_PARTS = ("backbone", "proj", "pred", "dec", "head")


@dataclass(frozen=True)
class ModelConfig:
    """Architecture hyperparameters. Defaults are the desk-scale model."""

    L: int = 2
    d_model: int = 32
    M: int = 4
    d_ffn: int = 64
    d_proj: int = 16
    d_pred_hidden: int = 16
    F_n: int = F_NODE
    F_e: int = F_EDGE

    def validate(self) -> None:
        if self.L < 0:
            raise InvalidArgumentError("L must be >= 0")
        if self.M < 1 or self.d_model % self.M != 0:
            raise InvalidArgumentError(
                f"d_model ({self.d_model}) must be divisible by M ({self.M})"
            )

    @property
    def d_head(self) -> int:
        return self.d_model // self.M

    def to_dict(self) -> dict:
        return {
            "L": self.L,
            "d_model": self.d_model,
            "M": self.M,
            "d_ffn": self.d_ffn,
            "d_proj": self.d_proj,
            "d_pred_hidden": self.d_pred_hidden,
            "F_n": self.F_n,
            "F_e": self.F_e,
        }

    @staticmethod
    def from_dict(d: dict) -> "ModelConfig":
        return ModelConfig(**{k: int(v) for k, v in d.items()})


def param_shapes(cfg: ModelConfig, parts: tuple[str, ...] = ALL_PARTS) -> dict[str, tuple[int, ...]]:
    """Ordered name -> shape map for the requested parameter groups."""
    cfg.validate()
    d, M = cfg.d_model, cfg.M
    shapes: dict[str, tuple[int, ...]] = {}
    if "backbone" in parts:
        shapes["enc.w1"] = (cfg.F_n, d)
        shapes["enc.b1"] = (d,)
        shapes["enc.w2"] = (d, d)
        shapes["enc.b2"] = (d,)
        if cfg.L > 0:
            shapes["bias.w1"] = (cfg.F_e, 2 * M)
            shapes["bias.b1"] = (2 * M,)
            shapes["bias.w2"] = (2 * M, M)
            shapes["bias.b2"] = (M,)
            shapes["mask_token"] = (cfg.F_e,)
            shapes["self_bias"] = (M,)
        for l in range(cfg.L):
            pre = f"layers.{l}."
            for w in ("wq", "wk", "wv", "wo"):
                shapes[pre + w] = (d, d)
            shapes[pre + "ffn.w1"] = (d, cfg.d_ffn)
            shapes[pre + "ffn.b1"] = (cfg.d_ffn,)
            shapes[pre + "ffn.w2"] = (cfg.d_ffn, d)
            shapes[pre + "ffn.b2"] = (d,)
            for ln in ("ln1", "ln2"):
                shapes[pre + ln + ".g"] = (d,)
                shapes[pre + ln + ".b"] = (d,)
    if "proj" in parts:
        shapes["proj.w"] = (d, cfg.d_proj)
        shapes["proj.b"] = (cfg.d_proj,)
    if "pred" in parts:
        shapes["pred.w1"] = (cfg.d_proj, cfg.d_pred_hidden)
        shapes["pred.b1"] = (cfg.d_pred_hidden,)
        shapes["pred.w2"] = (cfg.d_pred_hidden, cfg.d_proj)
        shapes["pred.b2"] = (cfg.d_proj,)
    if "dec" in parts:
        shapes["dec.w1"] = (2 * d, d)
        shapes["dec.b1"] = (d,)
        shapes["dec.w2"] = (d, cfg.F_e)
        shapes["dec.b2"] = (cfg.F_e,)
    if "head" in parts:
        hidden = max(d // 4, 1)
        shapes["head.w1"] = (d, hidden)
        shapes["head.b1"] = (hidden,)
        shapes["head.w2"] = (hidden, 1)
        shapes["head.b2"] = (1,)
    return shapes


def init_params(cfg: ModelConfig, seed: int, parts: tuple[str, ...] = ALL_PARTS) -> ParameterSet:
    """Glorot-uniform weights, zero biases/mask token/self bias, unit LN gains."""
    rng = np.random.default_rng(seed)
    params = ParameterSet()
    for name, shape in param_shapes(cfg, parts).items():
        leaf = name.rsplit(".", 1)[-1]
        if len(shape) == 2:
            lim = math.sqrt(6.0 / (shape[0] + shape[1]))
            params.add(name, rng.uniform(-lim, lim, size=shape))
        elif leaf == "g":
            params.add(name, np.ones(shape))
        else:
            params.add(name, np.zeros(shape))
    return params


def param_count(cfg: ModelConfig) -> int:
    """Exact scalar count of the deployed model (backbone + decision head)."""
    return sum(
        int(np.prod(s)) for s in param_shapes(cfg, ("backbone", "head")).values()
    )


def _mlp2(x: Tensor, params: ParameterSet, w1: str, b1: str, w2: str, b2: str) -> Tensor:
    h = T.relu(T.add(T.matmul(x, params[w1]), params[b1]))
    return T.add(T.matmul(h, params[w2]), params[b2])


def encode_nodes(graph: InterferenceGraph, params: ParameterSet) -> Tensor:
    """Initial embeddings: two-layer MLP over the node features."""
    x = T.constant(graph.node_feat)
    if x.shape[1] != params["enc.w1"].shape[0]:
        raise InvalidArgumentError(
            f"node feature width {x.shape[1]} does not match encoder"
        )
    return _mlp2(x, params, "enc.w1", "enc.b1", "enc.w2", "enc.b2")


def bias_project(
    graph: InterferenceGraph,
    mask_view: MaskView | None,
    params: ParameterSet,
    cfg: ModelConfig,
) -> Tensor:
    """Per-head attention bias for every node pair, shape (K*K, M).

    Off-diagonal positions project their edge features (or the mask token
    where withheld); diagonal positions carry the learnable self bias.
    """
    K = graph.K
    if mask_view is None:
        mask_view = empty_mask(K)
    if mask_view.masked.shape != (K, K):
        raise InvalidArgumentError(
            f"mask shape {mask_view.masked.shape} does not match K={K}"
        )
    n = K * K
    feats = graph.edge_feat.reshape(n, cfg.F_e)
    masked = mask_view.masked.reshape(n, 1).astype(np.float64)
    masked_f = np.repeat(masked, cfg.F_e, axis=1)
    edge_in = T.add(
        T.mul(T.constant(feats), T.constant(1.0 - masked_f)),
        T.mul(T.tile_rows(params["mask_token"], n), T.constant(masked_f)),
    )
    raw = _mlp2(edge_in, params, "bias.w1", "bias.b1", "bias.w2", "bias.b2")
    diag = np.eye(K, dtype=np.float64).reshape(n, 1)
    diag_m = np.repeat(diag, cfg.M, axis=1)
    return T.add(
        T.mul(raw, T.constant(1.0 - diag_m)),
        T.mul(T.tile_rows(params["self_bias"], n), T.constant(diag_m)),
    )


def attention_layer(
    Z: Tensor, bias: Tensor, params: ParameterSet, layer: int, cfg: ModelConfig
) -> Tensor:
    """One post-norm Transformer block with bias-injected attention scores."""
    K = Z.shape[0]
    pre = f"layers.{layer}."
    dm = cfg.d_head
    q_all = T.matmul(Z, params[pre + "wq"])
    k_all = T.matmul(Z, params[pre + "wk"])
    v_all = T.matmul(Z, params[pre + "wv"])
    heads = []
    for m in range(cfg.M):
        lo, hi = m * dm, (m + 1) * dm
        q = T.slice_last(q_all, lo, hi)
        k = T.slice_last(k_all, lo, hi)
        v = T.slice_last(v_all, lo, hi)
        b_m = T.reshape(T.slice_last(bias, m, m + 1), (K, K))
        scores = T.add(T.scale(T.matmul(q, T.transpose(k)), 1.0 / math.sqrt(dm)), b_m)
        heads.append(T.matmul(T.softmax_last(scores), v))
    attn = T.matmul(T.concat_last(heads), params[pre + "wo"])
    z1 = T.layer_norm(T.add(Z, attn), params[pre + "ln1.g"], params[pre + "ln1.b"])
    ffn = _mlp2(z1, params, pre + "ffn.w1", pre + "ffn.b1", pre + "ffn.w2", pre + "ffn.b2")
    return T.layer_norm(T.add(z1, ffn), params[pre + "ln2.g"], params[pre + "ln2.b"])


def backbone_forward(
    graph: InterferenceGraph,
    mask_view: MaskView | None,
    params: ParameterSet,
    cfg: ModelConfig,
) -> Tensor:
    """Node encoder plus L attention layers; the bias is computed once."""
    Z = encode_nodes(graph, params)
    if cfg.L > 0:
        bias = bias_project(graph, mask_view, params, cfg)
        for l in range(cfg.L):
            Z = attention_layer(Z, bias, params, l, cfg)
    return Z


def edge_decode(Z: Tensor, pairs, params: ParameterSet) -> Tensor:
    """Predict edge features for (receiver k, transmitter j) pairs."""
    ks, js = [], []
    for k, j in pairs:
        if k == j:
            raise InvalidArgumentError(f"diagonal pair ({k}, {j}) has no edge")
        ks.append(k)
        js.append(j)
    x = T.concat_last([T.gather_rows(Z, ks), T.gather_rows(Z, js)])
    return _mlp2(x, params, "dec.w1", "dec.b1", "dec.w2", "dec.b2")


def project_and_predict(Z: Tensor, params: ParameterSet, role: str) -> Tensor:
    """Student: predictor(projector(Z)); teacher: projector only."""
    if role not in ("student", "teacher"):
        raise InvalidArgumentError(f"role must be student or teacher, got {role!r}")
    y = T.add(T.matmul(Z, params["proj.w"]), params["proj.b"])
    if role == "teacher":
        return y
    return _mlp2(y, params, "pred.w1", "pred.b1", "pred.w2", "pred.b2")


def decision_head(Z: Tensor, params: ParameterSet, p_max: float) -> Tensor:
    """Per-link powers p_max * sigmoid(MLP(z)), shape (K, 1)."""
    return T.scale(T.sigmoid(_mlp2(Z, params, "head.w1", "head.b1", "head.w2", "head.b2")), p_max)


def model_powers(
    graph: InterferenceGraph,
    params: ParameterSet,
    cfg: ModelConfig,
    p_max: float,
    mask_view: MaskView | None = None,
) -> np.ndarray:
    """Inference-only forward returning a flat numpy power vector."""
    with T.no_grad():
        Z = backbone_forward(graph, mask_view, params, cfg)
        p = decision_head(Z, params, p_max)
    return p.data.reshape(-1).copy()


# ---------------------------------------------------------------------------
# Checkpoints


@dataclass
class Checkpoint:
    config: ModelConfig
    stats: NormStats
    params: ParameterSet
    metadata: dict = field(default_factory=dict)


def loss_digest(values) -> str:
    """Stable digest of a loss trajectory for checkpoint metadata."""
    h = hashlib.sha256()
    for v in values:
        h.update(repr(float(v)).encode())
    return h.hexdigest()[:16]


def save_checkpoint(path: str, ckpt: Checkpoint) -> None:
    """Write `manifest` (JSON) and `params.bin` (LE float64) into a directory."""
    os.makedirs(path, exist_ok=True)
    manifest = {
        "format_version": CHECKPOINT_VERSION,
        "model": ckpt.config.to_dict(),
        "norm_stats": ckpt.stats.to_dict(),
        "params": [[name, list(t.shape)] for name, t in ckpt.params.items()],
        "metadata": ckpt.metadata,
    }
    with open(os.path.join(path, "manifest"), "w", encoding="utf-8") as f:
        json.dump(manifest, f, sort_keys=True, indent=1)
        f.write("\n")
    with open(os.path.join(path, "params.bin"), "wb") as f:
        for _, t in ckpt.params.items():
            f.write(np.ascontiguousarray(t.data, dtype="<f8").tobytes())


def load_checkpoint(path: str) -> Checkpoint:
    """Inverse of save_checkpoint; validates version, shapes, and length."""
    try:
        with open(os.path.join(path, "manifest"), "r", encoding="utf-8") as f:
            manifest = json.load(f)
    except (OSError, json.JSONDecodeError) as e:
        raise CheckpointError(f"cannot read manifest in {path}: {e}") from e
    version = manifest.get("format_version")
    if version != CHECKPOINT_VERSION:
        raise CheckpointVersionError(f"unsupported checkpoint version {version!r}")
    try:
        cfg = ModelConfig.from_dict(manifest["model"])
        stats = NormStats.from_dict(manifest["norm_stats"])
        declared = [(str(n), tuple(int(x) for x in s)) for n, s in manifest["params"]]
    except (KeyError, TypeError, ValueError) as e:
        raise CheckpointError(f"malformed manifest in {path}: {e}") from e
    expected = param_shapes(cfg, ALL_PARTS)
    for name, shape in declared:
        if name not in expected:
            raise CheckpointShapeError(f"unknown parameter {name!r} in manifest")
        if expected[name] != shape:
            raise CheckpointShapeError(
                f"{name}: manifest shape {shape} != expected {expected[name]}"
            )
    try:
        with open(os.path.join(path, "params.bin"), "rb") as f:
            blob = f.read()
    except OSError as e:
        raise CheckpointError(f"cannot read params.bin in {path}: {e}") from e
    total = sum(int(np.prod(s)) for _, s in declared) * 8
    if len(blob) < total:
        raise CheckpointTruncatedError(
            f"params.bin holds {len(blob)} bytes, manifest declares {total}"
        )
    if len(blob) > total:
        raise CheckpointShapeError(
            f"params.bin holds {len(blob) - total} trailing bytes"
        )
    params = ParameterSet()
    offset = 0
    for name, shape in declared:
        size = int(np.prod(shape))
        vals = np.frombuffer(blob, dtype="<f8", count=size, offset=offset)
        params.add(name, vals.reshape(shape))
        offset += size * 8
    return Checkpoint(config=cfg, stats=stats, params=params, metadata=manifest.get("metadata", {}))
