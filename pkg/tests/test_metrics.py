"""Metrics schema stability and interval aggregation."""

import csv

import numpy as np
import pytest

from sol.backprop import LossReport
from sol.metrics import (
    BASE_COLUMNS, IntervalAccumulator, MetricsWriter, option_columns,
)
from sol.options import OptionSet, OptionSpec, RewardKind
from sol.rollout import Segment, assemble_batch

OPTS = OptionSet(options=(OptionSpec(0, "a", RewardKind.TASK_REWARD),
                          OptionSpec(1, "b", RewardKind.TASK_REWARD)),
                 lengths=(2, 4))


def make_batch():
    t = 6
    seg = Segment(
        obs=np.zeros((t, 3)),
        policy_indices=np.array([2, 0, 0, 2, 1, 1]),
        env_actions=np.zeros(t, dtype=np.int64),
        opt_choices=np.array([0, -1, -1, 1, -1, -1]),
        len_choices=np.array([0, -1, -1, 1, -1, -1]),
        rewards=np.zeros(t),
        task_rewards=np.zeros(t),
        flags=np.array([1, 0, 0, 1, 0, 0], dtype=bool),
        dones=np.zeros(t, dtype=bool),
        behavior_logp=np.zeros(t),
        values=np.zeros(t),
        channels=np.tile([1.0, 2.0], (t, 1)),
        policy_version=3,
        episode_returns=[10.0, 20.0],
        episode_lengths=[8, 12],
    )
    return assemble_batch([seg])


def test_option_columns_unique_and_complete():
    cols = list(BASE_COLUMNS) + option_columns(OPTS)
    assert len(cols) == len(set(cols))
    assert "opt_a_call_fraction" in cols
    assert "opt_b_mean_length" in cols
    assert "opt_a_return_b" in cols
    assert len(option_columns(OPTS)) == 2 * 2 + 2 * 2


def test_accumulator_batch_stats():
    acc = IntervalAccumulator(OPTS)
    acc.add_batch(make_batch(), env_steps=4, version=5)
    row = acc.row(wall_seconds=2.0, total_env_steps=100)
    assert row["env_steps"] == 100
    assert row["samples"] == 6
    assert row["steps_per_second"] == pytest.approx(2.0)
    assert row["episodes"] == 2
    assert row["mean_episode_return"] == pytest.approx(15.0)
    assert row["mean_episode_length"] == pytest.approx(10.0)
    assert row["mean_policy_lag"] == pytest.approx(2.0)
    # one call each, lengths 2 and 4
    assert row["opt_a_call_fraction"] == pytest.approx(0.5)
    assert row["opt_b_call_fraction"] == pytest.approx(0.5)
    assert row["opt_a_mean_length"] == pytest.approx(2.0)
    assert row["opt_b_mean_length"] == pytest.approx(4.0)
    # per-step channel means over each option's executed steps
    assert row["opt_a_return_a"] == pytest.approx(1.0)
    assert row["opt_a_return_b"] == pytest.approx(2.0)


def test_call_fractions_sum_to_one():
    acc = IntervalAccumulator(OPTS)
    acc.add_batch(make_batch(), env_steps=4, version=3)
    row = acc.row(1.0, 10)
    total = row["opt_a_call_fraction"] + row["opt_b_call_fraction"]
    assert total == pytest.approx(1.0)


def test_accumulator_update_stats_and_reset():
    acc = IntervalAccumulator(None)
    rep = LossReport(policy_loss=1.0, value_loss=2.0, exploration_loss=3.0,
                     total=0.5, clip_fraction=0.25, grad_norm=4.0)
    acc.add_update(rep, mean_ratio=1.1)
    acc.add_update(rep, mean_ratio=0.9)
    row = acc.row(1.0, 10)
    assert row["updates"] == 2
    assert row["policy_loss"] == pytest.approx(1.0)
    assert row["mean_ratio"] == pytest.approx(1.0)
    fresh = acc.reset()
    assert fresh.updates == 0 and fresh.samples == 0


def test_writer_roundtrip(tmp_path):
    path = tmp_path / "metrics.csv"
    acc = IntervalAccumulator(OPTS)
    acc.add_batch(make_batch(), env_steps=4, version=0)
    with MetricsWriter(path, OPTS) as w:
        w.write(acc.row(1.0, 50))
        w.write(acc.row(2.0, 100))
    with open(path) as f:
        rows = list(csv.DictReader(f))
    assert len(rows) == 2
    assert rows[0].keys() == set(list(BASE_COLUMNS) + option_columns(OPTS))
    assert rows[1]["env_steps"] == "100"


def test_writer_without_options_has_base_columns_only(tmp_path):
    path = tmp_path / "m.csv"
    with MetricsWriter(path, None) as w:
        w.write(IntervalAccumulator(None).row(1.0, 0))
    header = path.read_text().splitlines()[0]
    assert header == ",".join(BASE_COLUMNS)
