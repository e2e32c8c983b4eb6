"""Hybrid self-supervised pre-training and two-stage utility fine-tuning.

Pre-training: per graph, a masked view feeds the student backbone; the
edge decoder reconstructs the withheld edge features (mean squared error
over the masked set) while the student's predicted projections align with
the EMA teacher's projections of the unmasked graph (negative mean cosine).
The batch loss mean(L_edge + lambda * L_cl) updates the student via Adam;
the teacher then tracks the student by exponential moving average.

Fine-tuning: a decision head is attached and trained against the negative
expected utility, first with the backbone frozen (head warmup), then
jointly with per-group learning rates.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field, replace

import numpy as np

from . import model as M
from . import tensor as T
from .channelsim import Dataset, load_dataset
from .errors import DegenerateLossError, InvalidArgumentError, ShapeError
from .model import Checkpoint, ModelConfig
from .netgraph import (
    InterferenceGraph,
    MaskView,
    build_graph,
    compute_norm_stats,
    mask_edges,
)
from .objectives import Objective, SumRate, objective_to_dict, rates_node, utility_node
from .tensor import AdamState, ParameterSet

# Disjoint seed streams for validation masks (fixed across epochs) and
# per-step training masks.
_VAL_STREAM = 0
_TRAIN_STREAM = 1


@dataclass(frozen=True)
class PretrainConfig:
    epochs: int = 200
    batch_size: int = 512
    lr: float = 1e-4
    rho: float = 0.3
    tau: float = 0.996
    lam: float = 0.1
    scheduler_factor: float = 0.5
    scheduler_patience: int = 10
    seed: int = 0
    val_fraction: float = 0.1
    grad_clip: float = 5.0

    def validate(self) -> None:
        if not (0.0 < self.tau < 1.0) and self.tau != 1.0:
            raise InvalidArgumentError(f"tau must be in (0, 1], got {self.tau}")
        if not (0.0 <= self.rho <= 1.0):
            raise InvalidArgumentError(f"rho must be in [0, 1], got {self.rho}")
        if self.lam < 0:
            raise InvalidArgumentError(f"lambda must be >= 0, got {self.lam}")
        if self.epochs < 0 or self.batch_size < 1:
            raise InvalidArgumentError("epochs must be >= 0 and batch_size >= 1")


@dataclass(frozen=True)
class FinetuneConfig:
    warmup_epochs: int = 10
    full_epochs: int = 100
    backbone_lr: float = 1e-4
    head_lr: float = 1e-3
    objective: Objective = field(default_factory=SumRate)
    n_shot: int = 64
    seed: int = 0
    batch_size: int = 32
    grad_clip: float = 5.0

    def validate(self) -> None:
        if self.warmup_epochs < 0 or self.full_epochs < 0:
            raise InvalidArgumentError("epoch counts must be >= 0")
        if self.n_shot < 1:
            raise InvalidArgumentError("n_shot must be >= 1")
        if self.backbone_lr <= 0 or self.head_lr <= 0 or self.batch_size < 1:
            raise InvalidArgumentError("learning rates and batch_size must be positive")


class LrScheduler:
    """Halve-on-plateau: decay lr by `factor` after `patience` consecutive
    epochs without an improvement of at least 1e-8."""

    def __init__(self, lr: float, factor: float, patience: int):
        self.lr = lr
        self.factor = factor
        self.patience = patience
        self.best = float("inf")
        self.bad_epochs = 0

    def step(self, val_loss: float) -> float:
        if val_loss <= self.best - 1e-8:
            self.best = val_loss
            self.bad_epochs = 0
        else:
            self.bad_epochs += 1
            if self.bad_epochs >= self.patience:
                self.lr *= self.factor
                self.bad_epochs = 0
        return self.lr


def ema_update(teacher: ParameterSet, student: ParameterSet, tau: float) -> None:
    """theta_t <- tau * theta_t + (1 - tau) * theta_s on the shared subset."""
    if not (0.0 <= tau <= 1.0):
        raise InvalidArgumentError(f"tau must be in [0, 1], got {tau}")
    if tau == 1.0:
        return
    for name, t in teacher.items():
        if name not in student:
            raise InvalidArgumentError(f"teacher parameter {name!r} missing from student")
        s = student[name]
        if s.shape != t.shape:
            raise ShapeError("ema_update", t.shape, s.shape)
        if tau == 0.0:
            t.data = s.data.copy()
        else:
            t.data *= tau
            t.data += (1.0 - tau) * s.data


def _mask_seed(seed: int, stream: int, step: int, index: int = 0) -> int:
    return int(np.random.SeedSequence([seed, stream, step, index]).generate_state(1)[0])


def _graph_losses(
    graph: InterferenceGraph,
    mask_view: MaskView,
    student: ParameterSet,
    teacher: ParameterSet,
    cfg: ModelConfig,
) -> tuple[T.Tensor | None, T.Tensor]:
    """(edge reconstruction loss or None if nothing is masked, cosine loss)."""
    Zs = M.backbone_forward(graph, mask_view, student, cfg)
    l_edge = None
    pairs = np.argwhere(mask_view.masked)
    if len(pairs):
        pred = M.edge_decode(Zs, [(int(k), int(j)) for k, j in pairs], student)
        target = T.constant(graph.edge_feat[mask_view.masked])
        diff = T.sub(pred, target)
        l_edge = T.scale(T.sum_all(T.mul(diff, diff)), 1.0 / len(pairs))
    with T.no_grad():
        z_t = M.backbone_forward(graph, None, teacher, cfg)
        y_t = M.project_and_predict(z_t, teacher, "teacher")
    u_s = M.project_and_predict(Zs, student, "student")
    l_cl = T.scale(T.mean(T.cosine_rows(u_s, T.constant(y_t.data))), -1.0)
    return l_edge, l_cl


def _batch_loss(
    graphs: list[InterferenceGraph],
    mask_views: list[MaskView],
    student: ParameterSet,
    teacher: ParameterSet,
    model_cfg: ModelConfig,
    lam: float,
) -> tuple[T.Tensor, float, float]:
    """Batch-mean loss node plus scalar (l_edge, l_cl) means for logging."""
    total = None
    edge_vals, cl_vals = [], []
    for graph, mv in zip(graphs, mask_views):
        l_edge, l_cl = _graph_losses(graph, mv, student, teacher, model_cfg)
        if l_edge is None and lam == 0.0:
            raise DegenerateLossError(
                "no masked edges and lambda = 0: the loss carries no signal"
            )
        term = T.scale(l_cl, lam)
        if l_edge is not None:
            term = T.add(l_edge, term)
            edge_vals.append(l_edge.item())
        cl_vals.append(l_cl.item())
        total = term if total is None else T.add(total, term)
    loss = T.scale(total, 1.0 / len(graphs))
    l_edge_mean = float(np.mean(edge_vals)) if edge_vals else 0.0
    return loss, l_edge_mean, float(np.mean(cl_vals))


def pretrain_step(
    graphs: list[InterferenceGraph],
    mask_views: list[MaskView],
    student: ParameterSet,
    teacher: ParameterSet,
    model_cfg: ModelConfig,
    cfg: PretrainConfig,
    opt_state: AdamState,
) -> tuple[float, float, float]:
    """One Adam update of the student; returns (l_edge, l_cl, l_total)."""
    student.zero_grads()
    loss, l_edge, l_cl = _batch_loss(graphs, mask_views, student, teacher, model_cfg, cfg.lam)
    T.backward(loss)
    grads = student.grads()
    T.clip_global_norm(grads, cfg.grad_clip)
    T.adam_step(student, grads, opt_state, lr=cfg.lr)
    return l_edge, l_cl, loss.item()


def _validation_metrics(
    graphs: list[InterferenceGraph],
    mask_views: list[MaskView],
    student: ParameterSet,
    teacher: ParameterSet,
    model_cfg: ModelConfig,
    lam: float,
) -> dict:
    with T.no_grad():
        _, l_edge, l_cl = _batch_loss(graphs, mask_views, student, teacher, model_cfg, lam)
    return {
        "val_l_edge": l_edge,
        "val_l_cl": l_cl,
        "val_l_pre": l_edge + lam * l_cl,
    }


class MetricsLog:
    """Per-epoch CSV log; the wall-clock column is the only non-deterministic
    field, so determinism checks compare the other columns."""

    def __init__(self, path: str | None, columns: list[str]):
        self.path = path
        self.columns = columns
        if path:
            with open(path, "w", encoding="utf-8") as f:
                f.write(",".join(columns) + "\n")

    def write(self, row: dict) -> None:
        if not self.path:
            return
        cells = []
        for c in self.columns:
            v = row.get(c, "")
            cells.append(repr(v) if isinstance(v, float) else str(v))
        with open(self.path, "a", encoding="utf-8") as f:
            f.write(",".join(cells) + "\n")


def _pool_datasets(datasets) -> tuple[list, float, str]:
    """Flatten datasets (paths or Dataset objects) into snapshots."""
    loaded = [load_dataset(d) if isinstance(d, str) else d for d in datasets]
    if not loaded:
        raise InvalidArgumentError("need at least one dataset")
    snaps = [s for ds in loaded for s in ds.snapshots]
    sigma2 = loaded[0].sigma2
    scenario_id = loaded[0].scenario.scenario_id
    return snaps, sigma2, scenario_id


def pretrain(
    datasets,
    model_cfg: ModelConfig,
    cfg: PretrainConfig,
    log_path: str | None = None,
) -> Checkpoint:
    """Run the hybrid pre-training loop and return the student checkpoint.

    `datasets` is a list of Dataset objects or dataset file paths. The
    normalization statistics are frozen from the training split and stored
    in the checkpoint. Bit-reproducible given identical inputs and seeds.
    """
    cfg.validate()
    model_cfg.validate()
    snaps, sigma2, _ = _pool_datasets(datasets)
    rng = np.random.default_rng(np.random.SeedSequence([cfg.seed, 0x5350]))
    order = rng.permutation(len(snaps))
    n_val = int(len(snaps) * cfg.val_fraction)
    if len(snaps) >= 2:
        n_val = max(n_val, 1)
    val_idx, train_idx = order[:n_val], order[n_val:]
    if len(train_idx) == 0:
        raise InvalidArgumentError("no training snapshots left after validation split")
    stats = compute_norm_stats([snaps[i] for i in train_idx])
    train = [build_graph(snaps[i], stats, sigma2) for i in train_idx]
    val = [build_graph(snaps[i], stats, sigma2) for i in val_idx]
    # Fixed validation masks keep epoch-over-epoch validation losses comparable.
    val_masks = [
        mask_edges(g.K, cfg.rho, _mask_seed(cfg.seed, _VAL_STREAM, 0, i))
        for i, g in enumerate(val)
    ]

    student = M.init_params(model_cfg, cfg.seed, parts=("backbone", "proj", "pred", "dec"))
    teacher = student.copy(M.TEACHER_PREFIXES)
    opt_state = AdamState()
    sched = LrScheduler(cfg.lr, cfg.scheduler_factor, cfg.scheduler_patience)

    log = MetricsLog(log_path, ["epoch", "lr", "l_edge", "l_cl", "l_pre", "wall_clock_s"])
    history: list[dict] = []
    t_start = time.monotonic()

    def record(epoch: int, train_metrics: dict) -> dict:
        row = {"epoch": epoch, "lr": sched.lr}
        row.update(train_metrics)
        if val:
            row.update(_validation_metrics(val, val_masks, student, teacher, model_cfg, cfg.lam))
        history.append(dict(row))
        log.write(
            {
                "epoch": epoch,
                "lr": sched.lr,
                "l_edge": row.get("val_l_edge", row.get("l_edge", 0.0)),
                "l_cl": row.get("val_l_cl", row.get("l_cl", 0.0)),
                "l_pre": row.get("val_l_pre", row.get("l_pre", 0.0)),
                "wall_clock_s": time.monotonic() - t_start,
            }
        )
        return row

    record(0, {})
    step_index = 0
    for epoch in range(1, cfg.epochs + 1):
        epoch_rng = np.random.default_rng(np.random.SeedSequence([cfg.seed, 0x4550, epoch]))
        order = epoch_rng.permutation(len(train))
        e_edge, e_cl, e_pre = [], [], []
        for lo in range(0, len(order), cfg.batch_size):
            batch_idx = order[lo : lo + cfg.batch_size]
            graphs = [train[i] for i in batch_idx]
            masks = [
                mask_edges(g.K, cfg.rho, _mask_seed(cfg.seed, _TRAIN_STREAM, step_index, int(i)))
                for g, i in zip(graphs, batch_idx)
            ]
            cfg_step = replace(cfg, lr=sched.lr)
            l_edge, l_cl, l_pre = pretrain_step(
                graphs, masks, student, teacher, model_cfg, cfg_step, opt_state
            )
            ema_update(teacher, student, cfg.tau)
            e_edge.append(l_edge)
            e_cl.append(l_cl)
            e_pre.append(l_pre)
            step_index += 1
        row = record(
            epoch,
            {
                "l_edge": float(np.mean(e_edge)),
                "l_cl": float(np.mean(e_cl)),
                "l_pre": float(np.mean(e_pre)),
            },
        )
        sched.step(row.get("val_l_pre", row["l_pre"]))

    metadata = {
        "kind": "pretrain",
        "epochs": cfg.epochs,
        "seed": cfg.seed,
        "rho": cfg.rho,
        "tau": cfg.tau,
        "lambda": cfg.lam,
        "history": history,
        "loss_digest": M.loss_digest([h.get("val_l_pre", h.get("l_pre", 0.0)) for h in history]),
    }
    return Checkpoint(config=model_cfg, stats=stats, params=student, metadata=metadata)


def _utility_loss(
    graphs: list[InterferenceGraph],
    params: ParameterSet,
    model_cfg: ModelConfig,
    objective: Objective,
    p_max: float,
) -> T.Tensor:
    """Negative mean utility over the batch."""
    total = None
    for g in graphs:
        Z = M.backbone_forward(g, None, params, model_cfg)
        p = M.decision_head(Z, params, p_max)
        u = utility_node(rates_node(g.H, p, g.sigma2), objective)
        total = u if total is None else T.add(total, u)
    return T.scale(total, -1.0 / len(graphs))


def finetune(
    init: Checkpoint | None,
    dataset: Dataset | str,
    cfg: FinetuneConfig,
    model_cfg: ModelConfig | None = None,
    log_path: str | None = None,
) -> Checkpoint:
    """Two-stage fine-tuning of the decision head (+ backbone) on n_shot graphs.

    With a pre-trained checkpoint, its backbone weights and normalization
    statistics are reused; otherwise the model starts from scratch and the
    statistics come from the fine-tuning training split.
    """
    cfg.validate()
    ds = load_dataset(dataset) if isinstance(dataset, str) else dataset
    if len(ds) < cfg.n_shot:
        raise InvalidArgumentError(
            f"dataset has {len(ds)} snapshots, fewer than n_shot={cfg.n_shot}"
        )
    train_snaps = ds.snapshots[: cfg.n_shot]
    p_max = ds.scenario.p_max_watts
    if init is not None:
        model_cfg = init.config
        stats = init.stats
    else:
        if model_cfg is None:
            raise InvalidArgumentError("model_cfg is required when fine-tuning from scratch")
        stats = compute_norm_stats(train_snaps)
    model_cfg.validate()
    params = M.init_params(model_cfg, cfg.seed, parts=("backbone", "head"))
    if init is not None:
        params.load_values(init.params.copy(M.BACKBONE_PREFIXES))
    graphs = [build_graph(s, stats, ds.sigma2) for s in train_snaps]

    backbone_names = [n for n in params.names() if n.startswith(M.BACKBONE_PREFIXES)]
    head_names = [n for n in params.names() if n.startswith("head.")]
    state_head = AdamState()
    state_backbone = AdamState()

    log = MetricsLog(log_path, ["epoch", "lr", "utility", "wall_clock_s"])
    history: list[dict] = []
    t_start = time.monotonic()

    def run_stage(n_epochs: int, joint: bool, epoch_offset: int) -> None:
        for e in range(1, n_epochs + 1):
            epoch = epoch_offset + e
            epoch_rng = np.random.default_rng(np.random.SeedSequence([cfg.seed, 0x4654, epoch]))
            order = epoch_rng.permutation(len(graphs))
            utilities = []
            for lo in range(0, len(order), cfg.batch_size):
                batch = [graphs[i] for i in order[lo : lo + cfg.batch_size]]
                params.zero_grads()
                loss = _utility_loss(batch, params, model_cfg, cfg.objective, p_max)
                T.backward(loss)
                grads = params.grads()
                if joint:
                    T.clip_global_norm(grads, cfg.grad_clip)
                    T.adam_step(params, grads, state_backbone, cfg.backbone_lr, names=backbone_names)
                    T.adam_step(params, grads, state_head, cfg.head_lr, names=head_names)
                else:
                    head_grads = {n: grads[n] for n in head_names}
                    T.clip_global_norm(head_grads, cfg.grad_clip)
                    T.adam_step(params, head_grads, state_head, cfg.head_lr, names=head_names)
                utilities.append(-loss.item())
            row = {
                "epoch": epoch,
                "stage": "full" if joint else "warmup",
                "lr": cfg.backbone_lr if joint else cfg.head_lr,
                "utility": float(np.mean(utilities)) if utilities else 0.0,
            }
            history.append(row)
            log.write(
                {
                    "epoch": epoch,
                    "lr": row["lr"],
                    "utility": row["utility"],
                    "wall_clock_s": time.monotonic() - t_start,
                }
            )

    run_stage(cfg.warmup_epochs, joint=False, epoch_offset=0)
    run_stage(cfg.full_epochs, joint=True, epoch_offset=cfg.warmup_epochs)

    metadata = {
        "kind": "finetune",
        "objective": objective_to_dict(cfg.objective),
        "n_shot": cfg.n_shot,
        "seed": cfg.seed,
        "warmup_epochs": cfg.warmup_epochs,
        "full_epochs": cfg.full_epochs,
        "from_pretrained": init is not None,
        "history": history,
        "loss_digest": M.loss_digest([h["utility"] for h in history]),
    }
    return Checkpoint(config=model_cfg, stats=stats, params=params, metadata=metadata)
