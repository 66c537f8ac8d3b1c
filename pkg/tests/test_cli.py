"""CLI surface: argument handling, exit codes, artifact paths."""

import numpy as np

from sol.cli import main
from sol.config import load_config


TRAIN_ARGS = ["--env", "treasure_dash", "--steps", "300", "--sync", "--seed", "3"]
SMALL = ["--config"]


def write_cfg(tmp_path):
    path = tmp_path / "cfg.txt"
    path.write_text(
        "env = treasure_dash\nrollout_length = 16\nbatch_size = 64\n"
        "envs_per_worker = 4\nsync = true\nhidden_size = 16\nembed_dim = 4\n"
        "metrics_interval = 200\ncheckpoint_every = 1000000\n")
    return path


def test_train_then_eval_roundtrip(tmp_path, capsys):
    cfg = write_cfg(tmp_path)
    out = tmp_path / "run"
    assert main(["train", "--config", str(cfg), "--steps", "300",
                 "--out-dir", str(out)]) == 0
    assert (out / "metrics.csv").exists()
    assert (out / "checkpoint_final.bin").exists()
    saved = load_config(out / "config.txt")
    assert saved.total_steps == 300

    code = main(["eval", str(out / "checkpoint_final.bin"), "--config",
                 str(out / "config.txt"), "--eval-episodes", "4",
                 "--greedy", "--out-dir", str(out)])
    assert code == 0
    assert (out / "eval_report.csv").exists()
    printed = capsys.readouterr().out
    assert "mean_return=" in printed
    assert "option stairs" in printed


def test_flag_overrides_win_over_config(tmp_path):
    cfg = write_cfg(tmp_path)
    out = tmp_path / "o"
    assert main(["train", "--config", str(cfg), "--steps", "128", "--seed", "9",
                 "--algo", "appo_task", "--out-dir", str(out)]) == 0
    saved = load_config(out / "config.txt")
    assert saved.seed == 9
    assert saved.algo_variant.value == "appo_task"


def test_bad_config_is_exit_code_1(tmp_path, capsys):
    bad = tmp_path / "bad.txt"
    bad.write_text("no_such_key = 1\n")
    assert main(["train", "--config", str(bad)]) == 1
    assert "error:" in capsys.readouterr().err
    assert main(["train", "--config", str(tmp_path / "missing.txt")]) == 1


def test_bench_vtrace_command(tmp_path, capsys):
    out = tmp_path / "bench"
    assert main(["bench-vtrace", "--out-dir", str(out), "--repeats", "1"]) == 0
    assert (out / "bench_vtrace.csv").exists()
    printed = capsys.readouterr().out
    assert "options=8" in printed


def test_ablate_command(tmp_path):
    cfg = write_cfg(tmp_path)
    out = tmp_path / "abl"
    code = main(["ablate", "baselines", "--config", str(cfg), "--steps", "200",
                 "--out-dir", str(out), "--seeds", "0", "--eval-episodes", "2"])
    assert code == 0
    assert (out / "summary.csv").exists()
