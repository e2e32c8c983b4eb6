from __future__ import annotations

import json
import os

import numpy as np
import pytest

from iwgt import model as M
from iwgt.channelsim import Dataset, ScenarioConfig, generate_in_memory
from iwgt.errors import InvalidArgumentError
from iwgt.evalcli import (
    DEFAULT_MASK_RATIOS,
    RESULT_COLUMNS,
    cli_main,
    evaluate,
    fewshot_sweep,
    mask_sweep,
    report_rows,
    scaling_sweep,
    wmmse_seed,
    write_results_csv,
)
from iwgt.model import Checkpoint, ModelConfig, param_count
from iwgt.netgraph import NormStats, mask_count
from iwgt.objectives import QoS, SumRate
from iwgt.solvers import WmmseConfig, wmmse_best
from iwgt.training import FinetuneConfig, PretrainConfig

TINY_MODEL = ModelConfig(L=1, d_model=16, M=2, d_ffn=32, d_proj=8, d_pred_hidden=8)


@pytest.fixture(scope="module")
def strong_dataset() -> Dataset:
    cfg = ScenarioConfig(region_side_m=50.0, K=4, d_min_m=2.0, d_max_m=40.0, scenario_id="strong-toy")
    return generate_in_memory(cfg, 12, base_seed=0)


@pytest.fixture(scope="module")
def tiny_ckpt(strong_dataset) -> Checkpoint:
    params = M.init_params(TINY_MODEL, seed=0, parts=("backbone", "head"))
    from iwgt.netgraph import compute_norm_stats

    return Checkpoint(config=TINY_MODEL, stats=compute_norm_stats(strong_dataset), params=params)


WCFG = WmmseConfig(n_starts=8)


def test_wmmse_wrapper_double_gives_unit_ratio(strong_dataset):
    sigma2 = strong_dataset.sigma2
    p_max = strong_dataset.scenario.p_max_watts
    calls = {"i": 0}

    def double(graph, mask_view):
        i = calls["i"]
        calls["i"] += 1
        cfg = WmmseConfig(n_starts=8, p_max=p_max)
        return wmmse_best(graph.H, sigma2, cfg, wmmse_seed(7, i), SumRate())

    report = evaluate(double, strong_dataset, SumRate(), seed=7, wmmse_cfg=WCFG)
    assert report.aggregates["ratio_vs_wmmse_best"]["model"] == 1.0
    for rec in report.records:
        assert rec["utility_model"] == rec["utility_wmmse_best"]


def test_evaluate_deterministic(tiny_ckpt, strong_dataset):
    a = evaluate(tiny_ckpt, strong_dataset, SumRate(), mask_ratio=0.25, seed=3, wmmse_cfg=WCFG)
    b = evaluate(tiny_ckpt, strong_dataset, SumRate(), mask_ratio=0.25, seed=3, wmmse_cfg=WCFG)
    assert a.records == b.records
    assert a.aggregates == b.aggregates


def test_evaluate_aggregates_match_records(tiny_ckpt, strong_dataset):
    report = evaluate(tiny_ckpt, strong_dataset, QoS(), seed=1, wmmse_cfg=WCFG)
    assert report.aggregates == report.recompute_aggregates()
    mu = np.mean([r["utility_model"] for r in report.records])
    assert report.aggregates["mean_utility"]["model"] == pytest.approx(mu, rel=1e-15)


def test_evaluate_masks_exact_count(tiny_ckpt, strong_dataset):
    report = evaluate(tiny_ckpt, strong_dataset, SumRate(), mask_ratio=0.3, seed=2, wmmse_cfg=WCFG)
    expected = mask_count(4, 0.3)
    assert all(rec["n_masked"] == expected for rec in report.records)


def test_evaluate_rejects_large_mask_ratio(tiny_ckpt, strong_dataset):
    with pytest.raises(InvalidArgumentError):
        evaluate(tiny_ckpt, strong_dataset, SumRate(), mask_ratio=0.6)


def test_full_reuse_ratio_below_one_on_strong_interference(strong_dataset):
    params = M.init_params(TINY_MODEL, seed=0, parts=("backbone", "head"))
    from iwgt.netgraph import compute_norm_stats

    ckpt = Checkpoint(TINY_MODEL, compute_norm_stats(strong_dataset), params)
    report = evaluate(ckpt, strong_dataset, SumRate(), seed=0, wmmse_cfg=WmmseConfig(n_starts=16))
    assert report.aggregates["ratio_vs_wmmse_best"]["full_reuse"] < 1.0


def test_threads_env_does_not_change_results(tiny_ckpt, strong_dataset, monkeypatch):
    monkeypatch.setenv("IWGT_THREADS", "1")
    a = evaluate(tiny_ckpt, strong_dataset, SumRate(), seed=5, wmmse_cfg=WCFG)
    monkeypatch.setenv("IWGT_THREADS", "3")
    b = evaluate(tiny_ckpt, strong_dataset, SumRate(), seed=5, wmmse_cfg=WCFG)
    assert a.records == b.records


def test_result_csv_schema(tmp_path, tiny_ckpt, strong_dataset):
    report = evaluate(tiny_ckpt, strong_dataset, SumRate(), seed=0, wmmse_cfg=WCFG)
    rows = report_rows(report, "eval", param_count_value=param_count(TINY_MODEL))
    path = str(tmp_path / "r.csv")
    write_results_csv(path, rows)
    lines = open(path).read().strip().split("\n")
    assert lines[0] == ",".join(RESULT_COLUMNS)
    assert lines[0] == (
        "experiment,scenario,objective,method,n_shot,mask_ratio,param_count,"
        "seed,mean_utility,ratio_vs_wmmse_best,violated_user_rate"
    )
    assert len(lines) == 1 + 3  # model, wmmse_best, full_reuse


def test_fewshot_sweep_row_count(strong_dataset):
    ft = FinetuneConfig(warmup_epochs=1, full_epochs=1, n_shot=4, batch_size=4)
    rows = fewshot_sweep(
        None, strong_dataset, SumRate(), [4], ft, TINY_MODEL, eval_size=4, seed=0,
        wmmse_cfg=WCFG,
    )
    assert len(rows) == 1  # scratch only without an init
    assert rows[0]["method"] == "model_scratch"
    assert rows[0]["n_shot"] == 4


def test_fewshot_sweep_with_init_two_rows(strong_dataset, tiny_ckpt):
    # a backbone+head checkpoint works as an init source for the backbone
    ft = FinetuneConfig(warmup_epochs=1, full_epochs=1, n_shot=4, batch_size=4)
    rows = fewshot_sweep(
        tiny_ckpt, strong_dataset, SumRate(), [4], ft, TINY_MODEL, eval_size=4, seed=0,
        wmmse_cfg=WCFG,
    )
    assert [r["method"] for r in rows] == ["model_pretrained", "model_scratch"]


def test_scaling_sweep_sorted_rows(strong_dataset):
    cfgs = [
        ModelConfig(L=1, d_model=16, M=2, d_ffn=32, d_proj=8, d_pred_hidden=8),
        ModelConfig(L=0, d_model=8, M=1, d_ffn=16, d_proj=4, d_pred_hidden=4),
    ]
    pre = PretrainConfig(epochs=1, batch_size=8, lr=1e-3, seed=0)
    ft = FinetuneConfig(warmup_epochs=1, full_epochs=0, n_shot=4, batch_size=4)
    rows = scaling_sweep(cfgs, [strong_dataset], strong_dataset, pre, ft, eval_size=4, seed=0, wmmse_cfg=WCFG)
    counts = [r["param_count"] for r in rows]
    assert counts == sorted(counts)
    assert counts[0] == param_count(cfgs[1])


def test_mask_sweep_rows(strong_dataset, tiny_ckpt):
    rows = mask_sweep(tiny_ckpt, strong_dataset, SumRate(), ratios=(0.1, 0.3), seed=0, wmmse_cfg=WCFG)
    # first ratio carries the baselines too
    methods = [r["method"] for r in rows]
    assert methods == ["model", "wmmse_best", "full_reuse", "model"]
    assert rows[0]["mask_ratio"] == 0.1 and rows[-1]["mask_ratio"] == 0.3
    assert DEFAULT_MASK_RATIOS == (0.1, 0.3, 0.5)


# ---------------------------------------------------------------------------
# CLI surface


def test_cli_unknown_subcommand():
    assert cli_main(["frobnicate"]) == 64


def test_cli_usage_error():
    assert cli_main(["gen", "--bogus-flag"]) == 64


def test_cli_eval_missing_checkpoint(tmp_path, capsys):
    data = str(tmp_path / "d.bin")
    assert cli_main(["gen", "--scenario", "K2-strong-toy", "--n", "4", "--seed", "0", "--out", data]) == 0
    rc = cli_main(["eval", "--data", data, "--out", str(tmp_path / "r.csv")])
    assert rc == 65
    assert "--ckpt" in capsys.readouterr().err


def test_cli_gen_deterministic_bytes(tmp_path):
    a, b = str(tmp_path / "a.bin"), str(tmp_path / "b.bin")
    for out in (a, b):
        assert cli_main(["gen", "--scenario", "D1-toy", "--n", "6", "--seed", "3", "--out", out]) == 0
    assert open(a, "rb").read() == open(b, "rb").read()


def test_cli_gen_unknown_scenario(capsys):
    assert cli_main(["gen", "--scenario", "Dxx", "--n", "1", "--seed", "0", "--out", "/tmp/x.bin"]) == 65


def test_cli_gen_io_error():
    rc = cli_main(["gen", "--scenario", "D1-toy", "--n", "1", "--seed", "0", "--out", "/no-such-dir/x.bin"])
    assert rc == 74


def test_cli_pipeline_and_eval(tmp_path):
    data = str(tmp_path / "d.bin")
    assert cli_main(["gen", "--scenario", "K2-strong-toy", "--n", "12", "--seed", "1", "--out", data]) == 0
    cfg = {
        "model": {"L": 1, "d_model": 16, "M": 2, "d_ffn": 32, "d_proj": 8, "d_pred_hidden": 8},
        "pretrain": {"epochs": 1, "batch_size": 8, "lr": 0.001, "seed": 2},
        "finetune": {"warmup_epochs": 1, "full_epochs": 1, "n_shot": 8, "seed": 2, "batch_size": 8},
    }
    cfg_path = str(tmp_path / "cfg.json")
    json.dump(cfg, open(cfg_path, "w"))
    ck0, ck1 = str(tmp_path / "ck0"), str(tmp_path / "ck1")
    assert cli_main(["pretrain", "--data", data, "--out", ck0, "--config", cfg_path]) == 0
    assert cli_main(["finetune", "--data", data, "--init", ck0, "--out", ck1, "--config", cfg_path]) == 0
    out = str(tmp_path / "res.csv")
    rec = str(tmp_path / "rec.csv")
    assert cli_main(["eval", "--ckpt", ck1, "--data", data, "--out", out, "--records", rec, "--starts", "6"]) == 0
    lines = open(out).read().strip().split("\n")
    assert lines[0] == ",".join(RESULT_COLUMNS)
    assert len(open(rec).read().strip().split("\n")) == 1 + 12


def test_cli_config_rejects_unknown_fields(tmp_path):
    cfg_path = str(tmp_path / "bad.json")
    json.dump({"pretrain": {"bogus": 1}}, open(cfg_path, "w"))
    rc = cli_main(["pretrain", "--data", "x", "--out", "y", "--config", cfg_path])
    assert rc == 65


def test_cli_gradcheck_small():
    assert cli_main(["gradcheck", "--coords", "40"]) == 0


def test_cli_oracle_small(tmp_path):
    out = str(tmp_path / "oracle.csv")
    assert cli_main(["oracle", "--n", "4", "--ks", "2", "--starts", "8", "--grid", "21", "--out", out]) == 0
    lines = open(out).read().strip().split("\n")
    assert lines[0].startswith("index,K,")
    assert len(lines) == 5
