"""Experiment harness and command-line surface.

evaluate() scores a policy (checkpoint or callable) against the WMMSE
multi-start and full-reuse baselines on a dataset, snapshot by snapshot;
the sweep functions chain dataset slicing, fine-tuning, and evaluation
into the CSV rows the figure tooling consumes. cli_main() maps the
subcommands onto these functions with sysexits-style exit codes.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import math
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from . import model as M
from . import tensor as T
from .channelsim import Dataset, generate_dataset, load_dataset
from .errors import (
    CheckpointError,
    ConfigError,
    DatasetIOError,
    DegenerateLossError,
    InvalidArgumentError,
    NumericalError,
    ResourceLimitError,
    UndefinedRatioError,
)
from .model import Checkpoint, ModelConfig, load_checkpoint, param_count, save_checkpoint
from .netgraph import InterferenceGraph, build_graph, compute_norm_stats, mask_edges
from .objectives import (
    Objective,
    QoS,
    SumRate,
    normalized_ratio,
    objective_to_dict,
    parse_objective,
    rates,
    rates_node,
    utility,
    utility_node,
)
from .scenarios import get_scenario, scenario_names
from .solvers import WmmseConfig, brute_force, full_reuse, wmmse_best
from .training import FinetuneConfig, PretrainConfig, finetune, pretrain

EX_OK = 0
EX_USAGE = 64
EX_DATAERR = 65
EX_SOFTWARE = 70
EX_IOERR = 74

RESULT_COLUMNS = [
    "experiment",
    "scenario",
    "objective",
    "method",
    "n_shot",
    "mask_ratio",
    "param_count",
    "seed",
    "mean_utility",
    "ratio_vs_wmmse_best",
    "violated_user_rate",
]

DEFAULT_MASK_RATIOS = (0.1, 0.3, 0.5)
DEFAULT_SHOTS = (64, 128, 256, 512, 1024, 2048)

_METHODS = ("model", "wmmse_best", "full_reuse")


def worker_count() -> int:
    """Worker cap from IWGT_THREADS (default: up to 4)."""
    env = os.environ.get("IWGT_THREADS", "")
    if env:
        try:
            n = int(env)
        except ValueError:
            raise ConfigError(f"IWGT_THREADS must be an integer, got {env!r}") from None
        if n < 1:
            raise ConfigError("IWGT_THREADS must be >= 1")
        return n
    return min(4, os.cpu_count() or 1)


def eval_mask_seed(seed: int, index: int) -> int:
    """Per-snapshot seed for inference-time edge masking."""
    return int(np.random.SeedSequence([seed, 0x4D, index]).generate_state(1)[0])


def wmmse_seed(seed: int, index: int) -> int:
    """Per-snapshot seed for the WMMSE multi-start initializations."""
    return int(np.random.SeedSequence([seed, 0x57, index]).generate_state(1)[0])


@dataclass
class EvalReport:
    """Per-snapshot records plus dataset-level aggregates."""

    records: list[dict]
    aggregates: dict
    objective: Objective
    scenario_id: str
    mask_ratio: float
    seed: int

    def recompute_aggregates(self) -> dict:
        """Aggregates from the records; the invariant check in tests."""
        return _aggregate(self.records, self.objective)


def _violated_rate(rate_vec: np.ndarray, r_min: float) -> tuple[float, int]:
    viol = rate_vec[rate_vec < r_min]
    return (float(viol.sum()), int(viol.size))


def _r_min_for(objective: Objective) -> float:
    return objective.r_min if isinstance(objective, QoS) else QoS().r_min


def _aggregate(records: list[dict], objective: Objective) -> dict:
    agg: dict = {"n_snapshots": len(records), "mean_utility": {}, "violated_user_rate": {}}
    for m in _METHODS:
        key = f"utility_{m}"
        if any(key in r for r in records):
            agg["mean_utility"][m] = float(np.mean([r[key] for r in records]))
    ref = agg["mean_utility"].get("wmmse_best")
    agg["ratio_vs_wmmse_best"] = {}
    for m, mu in agg["mean_utility"].items():
        if ref is not None:
            agg["ratio_vs_wmmse_best"][m] = normalized_ratio(mu, ref)
    for m in _METHODS:
        s = sum(r.get(f"violated_rate_sum_{m}", 0.0) for r in records)
        n = sum(r.get(f"violated_count_{m}", 0) for r in records)
        if any(f"utility_{m}" in r for r in records):
            agg["violated_user_rate"][m] = (s / n) if n else float("nan")
    return agg


def evaluate(
    policy,
    dataset: Dataset | str,
    objective: Objective,
    mask_ratio: float = 0.0,
    seed: int = 0,
    wmmse_cfg: WmmseConfig | None = None,
    stats=None,
) -> EvalReport:
    """Score `policy` against WMMSE-Best and full reuse on every snapshot.

    policy is a fine-tuned Checkpoint or a callable (graph, mask_view) ->
    powers. The model sees the optionally masked graph; both baselines
    always use full CSI. mask_ratio must lie in [0, 0.5].
    """
    if not (0.0 <= mask_ratio <= 0.5):
        raise InvalidArgumentError(f"mask_ratio must be in [0, 0.5], got {mask_ratio}")
    ds = load_dataset(dataset) if isinstance(dataset, str) else dataset
    p_max = ds.scenario.p_max_watts
    sigma2 = ds.sigma2
    if isinstance(policy, Checkpoint):
        ckpt = policy
        if "head.w1" not in ckpt.params:
            raise ConfigError("checkpoint has no decision head; fine-tune it first")
        stats = ckpt.stats

        def policy_fn(graph, mask_view):
            return M.model_powers(graph, ckpt.params, ckpt.config, p_max, mask_view)

    else:
        policy_fn = policy
        if stats is None:
            stats = compute_norm_stats(ds)
    wcfg = wmmse_cfg or WmmseConfig(p_max=p_max)
    if wcfg.p_max != p_max:
        wcfg = dataclasses.replace(wcfg, p_max=p_max)
    r_min = _r_min_for(objective)

    def score(i: int) -> dict:
        snap = ds.snapshots[i]
        graph = build_graph(snap, stats, sigma2)
        mask_view = None
        if mask_ratio > 0.0:
            mask_view = mask_edges(snap.K, mask_ratio, eval_mask_seed(seed, i))
        powers = {
            "model": np.asarray(policy_fn(graph, mask_view), dtype=np.float64),
            "wmmse_best": wmmse_best(snap.H, sigma2, wcfg, wmmse_seed(seed, i), objective),
            "full_reuse": full_reuse(snap.K, p_max),
        }
        rec: dict = {"index": i, "K": snap.K}
        if mask_view is not None:
            rec["n_masked"] = mask_view.n_masked
        for m, p in powers.items():
            r = rates(snap.H, p, sigma2)
            rec[f"utility_{m}"] = utility(r, objective)
            rec[f"mean_rate_{m}"] = float(r.mean())
            vs, vn = _violated_rate(r, r_min)
            rec[f"violated_rate_sum_{m}"] = vs
            rec[f"violated_count_{m}"] = vn
        rec["ratio_model"] = (
            rec["utility_model"] / rec["utility_wmmse_best"]
            if rec["utility_wmmse_best"] != 0.0
            else float("nan")
        )
        return rec

    workers = worker_count()
    if workers > 1 and len(ds) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            records = list(pool.map(score, range(len(ds))))
    else:
        records = [score(i) for i in range(len(ds))]
    return EvalReport(
        records=records,
        aggregates=_aggregate(records, objective),
        objective=objective,
        scenario_id=ds.scenario.scenario_id,
        mask_ratio=mask_ratio,
        seed=seed,
    )


# ---------------------------------------------------------------------------
# CSV emission


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, float):
        return repr(v)
    return str(v)


def write_results_csv(path: str, rows: list[dict]) -> None:
    try:
        with open(path, "w", encoding="utf-8") as f:
            f.write(",".join(RESULT_COLUMNS) + "\n")
            for row in rows:
                f.write(",".join(_fmt(row.get(c)) for c in RESULT_COLUMNS) + "\n")
    except OSError as e:
        raise DatasetIOError(path, str(e)) from e


def write_records_csv(path: str, report: EvalReport) -> None:
    """Per-snapshot records backing a report, for inspection."""
    cols = sorted({k for r in report.records for k in r}, key=lambda c: (c != "index", c))
    try:
        with open(path, "w", encoding="utf-8") as f:
            f.write(",".join(cols) + "\n")
            for r in report.records:
                f.write(",".join(_fmt(r.get(c)) for c in cols) + "\n")
    except OSError as e:
        raise DatasetIOError(path, str(e)) from e


def report_rows(
    report: EvalReport,
    experiment: str,
    n_shot: int | None = None,
    param_count_value: int | None = None,
    methods: tuple[str, ...] = _METHODS,
    method_names: dict[str, str] | None = None,
) -> list[dict]:
    """Schema rows (one per method) for a report's aggregates."""
    rows = []
    for m in methods:
        if m not in report.aggregates["mean_utility"]:
            continue
        rows.append(
            {
                "experiment": experiment,
                "scenario": report.scenario_id,
                "objective": report.objective.name,
                "method": (method_names or {}).get(m, m),
                "n_shot": n_shot,
                "mask_ratio": report.mask_ratio if m == "model" else 0.0,
                "param_count": param_count_value if m == "model" else None,
                "seed": report.seed,
                "mean_utility": report.aggregates["mean_utility"][m],
                "ratio_vs_wmmse_best": report.aggregates["ratio_vs_wmmse_best"].get(m),
                "violated_user_rate": report.aggregates["violated_user_rate"].get(m),
            }
        )
    return rows


# ---------------------------------------------------------------------------
# Sweeps


def _split_eval(ds: Dataset, eval_size: int) -> tuple[Dataset, Dataset]:
    if eval_size < 1 or eval_size >= len(ds):
        raise InvalidArgumentError(
            f"eval_size must be in [1, {len(ds) - 1}], got {eval_size}"
        )
    train = Dataset(ds.scenario, ds.base_seed, ds.snapshots[:-eval_size])
    held = Dataset(ds.scenario, ds.base_seed, ds.snapshots[-eval_size:])
    return train, held


def fewshot_sweep(
    init: Checkpoint | None,
    dataset: Dataset | str,
    objective: Objective,
    shots_list,
    ft_cfg: FinetuneConfig,
    model_cfg: ModelConfig,
    eval_size: int = 50,
    seed: int = 0,
    wmmse_cfg: WmmseConfig | None = None,
) -> list[dict]:
    """Fine-tune from the given init and from scratch at each shot count,
    evaluate on a fixed held-out slice, and emit one row per (init, shots)."""
    ds = load_dataset(dataset) if isinstance(dataset, str) else dataset
    train, held = _split_eval(ds, eval_size)
    inits = [("pretrained", init)] if init is not None else []
    inits.append(("scratch", None))
    if len(shots_list) == 0 or max(shots_list) > len(train):
        raise InvalidArgumentError(
            f"shots_list must be non-empty with max <= {len(train)}"
        )
    rows = []
    for n_shot in shots_list:
        for kind, start in inits:
            cfg = dataclasses.replace(ft_cfg, n_shot=int(n_shot), objective=objective, seed=seed)
            ckpt = finetune(start, train, cfg, model_cfg=model_cfg)
            report = evaluate(ckpt, held, objective, seed=seed, wmmse_cfg=wmmse_cfg)
            rows.extend(
                report_rows(
                    report,
                    "fewshot",
                    n_shot=int(n_shot),
                    param_count_value=param_count(ckpt.config),
                    methods=("model",),
                    method_names={"model": f"model_{kind}"},
                )
            )
    return rows


def scaling_sweep(
    model_cfgs: list[ModelConfig],
    pretrain_datasets,
    finetune_dataset: Dataset | str,
    pre_cfg: PretrainConfig,
    ft_cfg: FinetuneConfig,
    eval_size: int = 50,
    seed: int = 0,
    wmmse_cfg: WmmseConfig | None = None,
) -> list[dict]:
    """Pre-train + fine-tune every config at a fixed budget; one row per
    config, sorted by exact parameter count."""
    ds = load_dataset(finetune_dataset) if isinstance(finetune_dataset, str) else finetune_dataset
    train, held = _split_eval(ds, eval_size)
    rows = []
    for mc in sorted(model_cfgs, key=param_count):
        ckpt0 = pretrain(pretrain_datasets, mc, dataclasses.replace(pre_cfg, seed=seed))
        cfg = dataclasses.replace(ft_cfg, seed=seed)
        ckpt = finetune(ckpt0, train, cfg)
        report = evaluate(ckpt, held, cfg.objective, seed=seed, wmmse_cfg=wmmse_cfg)
        rows.extend(
            report_rows(
                report,
                "scaling",
                n_shot=cfg.n_shot,
                param_count_value=param_count(mc),
                methods=("model",),
            )
        )
    return rows


def mask_sweep(
    ckpt: Checkpoint,
    dataset: Dataset | str,
    objective: Objective,
    ratios=DEFAULT_MASK_RATIOS,
    seed: int = 0,
    wmmse_cfg: WmmseConfig | None = None,
) -> list[dict]:
    """Masked-CSI robustness: model rows at each inference mask ratio; the
    baselines appear once, always with full CSI."""
    rows = []
    for i, ratio in enumerate(ratios):
        report = evaluate(ckpt, dataset, objective, mask_ratio=float(ratio), seed=seed, wmmse_cfg=wmmse_cfg)
        methods = ("model",) if i else _METHODS
        rows.extend(
            report_rows(
                report,
                "mask_robustness",
                param_count_value=param_count(ckpt.config),
                methods=methods,
            )
        )
    return rows


# ---------------------------------------------------------------------------
# Gradient-check suite (shared by the CLI and the acceptance tests)


def toy_unit_graph(K: int, seed: int) -> InterferenceGraph:
    """Synthetic unit-scale graph: |h| ~ CN(0,1), sigma2 = 1, features in
    units of 5 dB. Keeps utilities O(1) so central differences at eps=1e-5
    resolve every sampled coordinate."""
    rng = np.random.default_rng(np.random.SeedSequence([seed, 0x475243]))
    H = (rng.standard_normal((K, K)) + 1j * rng.standard_normal((K, K))) / math.sqrt(2)
    gdb = 10.0 * np.log10(np.abs(H) ** 2)
    off = ~np.eye(K, dtype=bool)
    edge_feat = np.zeros((K, K, 2))
    edge_feat[:, :, 0][off] = gdb[off] / 5.0
    edge_feat[:, :, 1][off] = gdb.T[off] / 5.0
    return InterferenceGraph(
        K=K,
        node_feat=(np.diagonal(gdb) / 5.0).reshape(K, 1),
        edge_feat=edge_feat,
        edge_present=off,
        H=H,
        sigma2=1.0,
    )


def gradcheck_suite(eps: float = 1e-5, n_coords: int = 300) -> dict[str, float]:
    """Max relative finite-difference error of the pre-training loss and the
    downstream utility loss on the pinned K=4, L=2, d_model=32 setup."""
    model_cfg = ModelConfig(L=2, d_model=32, M=4, d_ffn=64)
    graphs = [toy_unit_graph(4, 1000 + i) for i in range(4)]
    out: dict[str, float] = {}

    params = M.init_params(model_cfg, seed=0)
    teacher = params.copy(M.TEACHER_PREFIXES)
    masks = [mask_edges(4, 0.3, seed=10 + i) for i in range(len(graphs))]
    targets = []
    for g, mv in zip(graphs, masks):
        pairs = [(int(k), int(j)) for k, j in np.argwhere(mv.masked)]
        targets.append((pairs, T.constant(g.edge_feat[mv.masked])))
    teacher_outs = []
    for g in graphs:
        with T.no_grad():
            zt = M.backbone_forward(g, None, teacher, model_cfg)
            teacher_outs.append(T.constant(M.project_and_predict(zt, teacher, "teacher").data))

    def l_pre():
        total = None
        for g, mv, (pairs, tgt), yt in zip(graphs, masks, targets, teacher_outs):
            zs = M.backbone_forward(g, mv, params, model_cfg)
            pred = M.edge_decode(zs, pairs, params)
            diff = T.sub(pred, tgt)
            l_edge = T.scale(T.sum_all(T.mul(diff, diff)), 1.0 / len(pairs))
            us = M.project_and_predict(zs, params, "student")
            l_cl = T.scale(T.mean(T.cosine_rows(us, yt)), -1.0)
            term = T.add(l_edge, T.scale(l_cl, 0.1))
            total = term if total is None else T.add(total, term)
        return T.scale(total, 1.0 / len(graphs))

    out["l_pre"] = T.grad_check(l_pre, params, eps=eps, n_coords=n_coords, seed=0)

    for tag, objective, seed in (
        ("l_down_sum_rate", SumRate(), 0),
        ("l_down_qos", QoS(r_min=0.3, alpha=2.0), 5),
    ):
        params_d = M.init_params(model_cfg, seed=seed)

        def l_down():
            total = None
            for g in graphs:
                z = M.backbone_forward(g, None, params_d, model_cfg)
                p = M.decision_head(z, params_d, 1.0)
                u = utility_node(rates_node(g.H, p, g.sigma2), objective)
                total = u if total is None else T.add(total, u)
            return T.scale(total, -1.0 / len(graphs))

        out[tag] = T.grad_check(l_down, params_d, eps=eps, n_coords=n_coords, seed=seed)
    return out


# ---------------------------------------------------------------------------
# CLI


def _load_json(path: str) -> dict:
    try:
        with open(path, "r", encoding="utf-8") as f:
            return json.load(f)
    except OSError as e:
        raise DatasetIOError(path, str(e)) from e
    except json.JSONDecodeError as e:
        raise ConfigError(f"{path}: invalid JSON: {e}") from e


def _dataclass_from(cls, d: dict, label: str):
    """Build a config dataclass, rejecting unknown keys by name."""
    known = {f.name for f in dataclasses.fields(cls)}
    unknown = set(d) - known
    if unknown:
        raise ConfigError(f"{label}: unknown fields {sorted(unknown)}")
    if "objective" in d and "objective" in known:
        d = dict(d)
        d["objective"] = parse_objective(d["objective"])
    try:
        return cls(**d)
    except (TypeError, ValueError) as e:
        raise ConfigError(f"{label}: {e}") from e


def _section(cfg: dict, name: str) -> dict:
    v = cfg.get(name, {})
    if not isinstance(v, dict):
        raise ConfigError(f"config section {name!r} must be an object")
    return v


def _objective_from_args(args) -> Objective:
    spec: dict = {"name": args.objective}
    if getattr(args, "r_min", None) is not None:
        spec["r_min"] = args.r_min
    if getattr(args, "alpha", None) is not None:
        spec["alpha"] = args.alpha
    return parse_objective(spec)


def _parser(name: str, description: str) -> argparse.ArgumentParser:
    return argparse.ArgumentParser(prog=f"iwgt {name}", description=description)


def _add_objective_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--objective", default="sum_rate", choices=["sum_rate", "pf", "qos"])
    p.add_argument("--r-min", dest="r_min", type=float, default=None)
    p.add_argument("--alpha", type=float, default=None)


def _cmd_gen(argv: list[str]) -> int:
    p = _parser("gen", "Generate a dataset file")
    p.add_argument("--scenario", default=None, help=f"one of: {', '.join(scenario_names())}")
    p.add_argument("--config", default=None, help="JSON file with a scenario object")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.add_argument("--format", choices=["binary", "text"], default="binary")
    args = p.parse_args(argv)
    if args.scenario:
        scenario = get_scenario(args.scenario)
    elif args.config:
        from .channelsim import ScenarioConfig

        scenario = ScenarioConfig.from_dict(_load_json(args.config))
    else:
        raise ConfigError("gen requires --scenario or --config")
    generate_dataset(scenario, args.n, args.seed, args.out, encoding=args.format)
    print(f"wrote {args.n} snapshots of {scenario.scenario_id or 'custom'} to {args.out}")
    return EX_OK


def _cmd_pretrain(argv: list[str]) -> int:
    p = _parser("pretrain", "Hybrid self-supervised pre-training")
    p.add_argument("--data", nargs="+", required=True)
    p.add_argument("--out", required=True, help="checkpoint directory")
    p.add_argument("--config", default=None, help="JSON with model/pretrain sections")
    p.add_argument("--log", default=None, help="per-epoch metrics CSV")
    p.add_argument("--epochs", type=int, default=None)
    p.add_argument("--batch-size", type=int, default=None)
    p.add_argument("--lr", type=float, default=None)
    p.add_argument("--seed", type=int, default=None)
    args = p.parse_args(argv)
    cfg = _load_json(args.config) if args.config else {}
    model_cfg = _dataclass_from(ModelConfig, _section(cfg, "model"), "model")
    pre = _section(cfg, "pretrain")
    for key, val in (
        ("epochs", args.epochs),
        ("batch_size", args.batch_size),
        ("lr", args.lr),
        ("seed", args.seed),
    ):
        if val is not None:
            pre[key] = val
    pre_cfg = _dataclass_from(PretrainConfig, pre, "pretrain")
    ckpt = pretrain(list(args.data), model_cfg, pre_cfg, log_path=args.log)
    save_checkpoint(args.out, ckpt)
    last = ckpt.metadata["history"][-1]
    print(
        f"pre-trained {param_count(model_cfg)}-param backbone for {pre_cfg.epochs} epochs; "
        f"val L_pre {last.get('val_l_pre', float('nan')):.4f} -> {args.out}"
    )
    return EX_OK


def _cmd_finetune(argv: list[str]) -> int:
    p = _parser("finetune", "Two-stage utility fine-tuning")
    p.add_argument("--data", required=True)
    p.add_argument("--init", default=None, help="pre-trained checkpoint directory (omit for scratch)")
    p.add_argument("--out", required=True)
    p.add_argument("--config", default=None)
    p.add_argument("--log", default=None)
    _add_objective_args(p)
    p.add_argument("--n-shot", dest="n_shot", type=int, default=None)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--warmup-epochs", dest="warmup_epochs", type=int, default=None)
    p.add_argument("--full-epochs", dest="full_epochs", type=int, default=None)
    args = p.parse_args(argv)
    cfg = _load_json(args.config) if args.config else {}
    model_cfg = _dataclass_from(ModelConfig, _section(cfg, "model"), "model")
    ft = _section(cfg, "finetune")
    for key, val in (
        ("n_shot", args.n_shot),
        ("seed", args.seed),
        ("warmup_epochs", args.warmup_epochs),
        ("full_epochs", args.full_epochs),
    ):
        if val is not None:
            ft[key] = val
    ft["objective"] = objective_to_dict(_objective_from_args(args)) if "objective" not in ft else ft["objective"]
    ft_cfg = _dataclass_from(FinetuneConfig, ft, "finetune")
    init = load_checkpoint(args.init) if args.init else None
    ckpt = finetune(init, args.data, ft_cfg, model_cfg=model_cfg, log_path=args.log)
    save_checkpoint(args.out, ckpt)
    last = ckpt.metadata["history"][-1] if ckpt.metadata["history"] else {}
    print(
        f"fine-tuned ({'pretrained' if init else 'scratch'}, {ft_cfg.objective.name}, "
        f"n_shot={ft_cfg.n_shot}); train utility {last.get('utility', float('nan')):.4f} -> {args.out}"
    )
    return EX_OK


def _cmd_eval(argv: list[str]) -> int:
    p = _parser("eval", "Evaluate a checkpoint against the baselines")
    p.add_argument("--ckpt", default=None)
    p.add_argument("--data", required=True)
    _add_objective_args(p)
    p.add_argument("--mask-ratio", dest="mask_ratio", type=float, default=0.0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--starts", type=int, default=100, help="WMMSE multi-start count")
    p.add_argument("--out", required=True, help="aggregate results CSV")
    p.add_argument("--records", default=None, help="per-snapshot records CSV")
    args = p.parse_args(argv)
    if not args.ckpt:
        raise ConfigError("eval: missing required --ckpt (checkpoint directory)")
    ckpt = load_checkpoint(args.ckpt)
    objective = _objective_from_args(args)
    report = evaluate(
        ckpt,
        args.data,
        objective,
        mask_ratio=args.mask_ratio,
        seed=args.seed,
        wmmse_cfg=WmmseConfig(n_starts=args.starts),
    )
    rows = report_rows(report, "eval", param_count_value=param_count(ckpt.config))
    write_results_csv(args.out, rows)
    if args.records:
        write_records_csv(args.records, report)
    ratio = report.aggregates["ratio_vs_wmmse_best"].get("model")
    print(f"evaluated {len(report.records)} snapshots; model ratio vs wmmse_best = {ratio!r}")
    return EX_OK


def _cmd_sweep_fewshot(argv: list[str]) -> int:
    p = _parser("sweep-fewshot", "Few-shot adaptation sweep")
    p.add_argument("--data", required=True)
    p.add_argument("--init", default=None)
    _add_objective_args(p)
    p.add_argument("--shots", default=",".join(str(s) for s in DEFAULT_SHOTS))
    p.add_argument("--config", default=None)
    p.add_argument("--eval-size", dest="eval_size", type=int, default=50)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    args = p.parse_args(argv)
    cfg = _load_json(args.config) if args.config else {}
    model_cfg = _dataclass_from(ModelConfig, _section(cfg, "model"), "model")
    ft_cfg = _dataclass_from(FinetuneConfig, _section(cfg, "finetune"), "finetune")
    shots = [int(s) for s in args.shots.split(",") if s]
    init = load_checkpoint(args.init) if args.init else None
    rows = fewshot_sweep(
        init,
        args.data,
        _objective_from_args(args),
        shots,
        ft_cfg,
        model_cfg,
        eval_size=args.eval_size,
        seed=args.seed,
    )
    write_results_csv(args.out, rows)
    print(f"wrote {len(rows)} few-shot rows to {args.out}")
    return EX_OK


def _cmd_sweep_scaling(argv: list[str]) -> int:
    p = _parser("sweep-scaling", "Model-size scaling sweep")
    p.add_argument("--pretrain-data", nargs="+", required=True)
    p.add_argument("--finetune-data", required=True)
    p.add_argument("--configs", required=True, help="JSON list of model config objects")
    p.add_argument("--config", default=None, help="JSON with pretrain/finetune sections")
    p.add_argument("--eval-size", dest="eval_size", type=int, default=50)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    args = p.parse_args(argv)
    raw = _load_json(args.configs)
    if not isinstance(raw, list) or not raw:
        raise ConfigError("--configs must be a non-empty JSON list of model configs")
    model_cfgs = [_dataclass_from(ModelConfig, d, f"configs[{i}]") for i, d in enumerate(raw)]
    cfg = _load_json(args.config) if args.config else {}
    pre_cfg = _dataclass_from(PretrainConfig, _section(cfg, "pretrain"), "pretrain")
    ft_cfg = _dataclass_from(FinetuneConfig, _section(cfg, "finetune"), "finetune")
    rows = scaling_sweep(
        model_cfgs,
        list(args.pretrain_data),
        args.finetune_data,
        pre_cfg,
        ft_cfg,
        eval_size=args.eval_size,
        seed=args.seed,
    )
    write_results_csv(args.out, rows)
    print(f"wrote {len(rows)} scaling rows to {args.out}")
    return EX_OK


def _cmd_sweep_mask(argv: list[str]) -> int:
    p = _parser("sweep-mask", "Masked-CSI robustness sweep")
    p.add_argument("--ckpt", required=True)
    p.add_argument("--data", required=True)
    _add_objective_args(p)
    p.add_argument("--ratios", default=",".join(str(r) for r in DEFAULT_MASK_RATIOS))
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--starts", type=int, default=100)
    p.add_argument("--out", required=True)
    args = p.parse_args(argv)
    ckpt = load_checkpoint(args.ckpt)
    ratios = [float(r) for r in args.ratios.split(",") if r]
    rows = mask_sweep(
        ckpt,
        args.data,
        _objective_from_args(args),
        ratios=ratios,
        seed=args.seed,
        wmmse_cfg=WmmseConfig(n_starts=args.starts),
    )
    write_results_csv(args.out, rows)
    print(f"wrote {len(rows)} mask-robustness rows to {args.out}")
    return EX_OK


def _cmd_gradcheck(argv: list[str]) -> int:
    p = _parser("gradcheck", "Finite-difference check of the training losses")
    p.add_argument("--eps", type=float, default=1e-5)
    p.add_argument("--coords", type=int, default=300)
    p.add_argument("--tol", type=float, default=1e-4)
    args = p.parse_args(argv)
    results = gradcheck_suite(eps=args.eps, n_coords=args.coords)
    worst = max(results.values())
    for name, err in results.items():
        print(f"{name}: max relative error {err:.3e}")
    print(f"worst: {worst:.3e} ({'PASS' if worst < args.tol else 'FAIL'} at tol {args.tol:g})")
    if worst >= args.tol:
        raise NumericalError(f"gradient check failed: {worst:.3e} >= {args.tol:g}")
    return EX_OK


def _cmd_oracle(argv: list[str]) -> int:
    p = _parser("oracle", "WMMSE-Best vs brute-force grid oracle")
    p.add_argument("--n", type=int, default=100)
    p.add_argument("--ks", default="2,3")
    p.add_argument("--starts", type=int, default=100)
    p.add_argument("--grid", type=int, default=101)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default=None, help="per-snapshot ratio CSV")
    args = p.parse_args(argv)
    ks = [int(k) for k in args.ks.split(",") if k]
    from .channelsim import ScenarioConfig, make_snapshot

    ratios = []
    u_w_sum = u_b_sum = 0.0
    lines = ["index,K,utility_wmmse_best,utility_brute_force,ratio"]
    for i in range(args.n):
        k = ks[i % len(ks)]
        scen = ScenarioConfig(
            region_side_m=100.0, K=k, d_min_m=2.0, d_max_m=40.0, scenario_id=f"oracle-K{k}"
        )
        snap = make_snapshot(scen, args.seed * 1_000_000 + i)
        sigma2 = scen.sigma2_watts
        wcfg = WmmseConfig(p_max=scen.p_max_watts, n_starts=args.starts, tol=1e-5)
        p_w = wmmse_best(snap.H, sigma2, wcfg, wmmse_seed(args.seed, i))
        p_b = brute_force(snap.H, sigma2, scen.p_max_watts, args.grid, SumRate())
        u_w = utility(rates(snap.H, p_w, sigma2), SumRate())
        u_b = utility(rates(snap.H, p_b, sigma2), SumRate())
        ratios.append(u_w / u_b)
        u_w_sum += u_w
        u_b_sum += u_b
        lines.append(f"{i},{k},{u_w!r},{u_b!r},{u_w / u_b!r}")
    aggregate = u_w_sum / u_b_sum
    print(
        f"aggregate ratio {aggregate:.5f} over {args.n} snapshots "
        f"(per-snapshot min {min(ratios):.5f}, mean {np.mean(ratios):.5f})"
    )
    if args.out:
        try:
            with open(args.out, "w", encoding="utf-8") as f:
                f.write("\n".join(lines) + "\n")
        except OSError as e:
            raise DatasetIOError(args.out, str(e)) from e
    return EX_OK


_COMMANDS = {
    "gen": _cmd_gen,
    "pretrain": _cmd_pretrain,
    "finetune": _cmd_finetune,
    "eval": _cmd_eval,
    "sweep-fewshot": _cmd_sweep_fewshot,
    "sweep-scaling": _cmd_sweep_scaling,
    "sweep-mask": _cmd_sweep_mask,
    "gradcheck": _cmd_gradcheck,
    "oracle": _cmd_oracle,
}


def cli_main(argv: list[str]) -> int:
    """Dispatch a subcommand; exit codes follow sysexits conventions."""
    if not argv or argv[0] in ("-h", "--help"):
        print("usage: iwgt <command> [options]")
        print("commands: " + ", ".join(_COMMANDS))
        return EX_OK if argv else EX_USAGE
    name, rest = argv[0], argv[1:]
    handler = _COMMANDS.get(name)
    if handler is None:
        print(f"iwgt: unknown subcommand {name!r}; commands: {', '.join(_COMMANDS)}", file=sys.stderr)
        return EX_USAGE
    try:
        return handler(rest)
    except SystemExit as e:
        # argparse exits with 0 for --help, 2 for usage errors
        return EX_OK if e.code in (0, None) else EX_USAGE
    except (ConfigError, InvalidArgumentError, CheckpointError, ResourceLimitError, UndefinedRatioError) as e:
        print(f"iwgt {name}: {e}", file=sys.stderr)
        return EX_DATAERR
    except DatasetIOError as e:
        print(f"iwgt {name}: {e}", file=sys.stderr)
        return EX_IOERR
    except (NumericalError, DegenerateLossError) as e:
        print(f"iwgt {name}: {e}", file=sys.stderr)
        return EX_SOFTWARE
    except OSError as e:
        print(f"iwgt {name}: {e}", file=sys.stderr)
        return EX_IOERR


def main() -> None:
    sys.exit(cli_main(sys.argv[1:]))


if __name__ == "__main__":
    main()
