"""Training metrics: per-interval aggregation and a stable CSV schema.

Each row summarizes one reporting interval.  Base columns are fixed; the
per-option columns (call fraction, mean chosen length, mean per-channel
return) are derived from the option set at writer construction and stay
stable for the run.  All means are per-step within the interval.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

from .backprop import LossReport
from .options import OptionSet
from .rollout import TrajectoryBatch

BASE_COLUMNS = (
    "env_steps", "samples", "updates", "wall_seconds", "steps_per_second",
    "episodes", "mean_episode_return", "mean_episode_length",
    "policy_loss", "value_loss", "exploration_loss", "total_loss",
    "grad_norm", "clip_fraction", "mean_policy_lag", "mean_ratio",
)


def option_columns(opts: OptionSet) -> list[str]:
    cols = []
    names = [o.name for o in opts.options]
    for name in names:
        cols.append(f"opt_{name}_call_fraction")
        cols.append(f"opt_{name}_mean_length")
    for name in names:
        for chan in names:
            cols.append(f"opt_{name}_return_{chan}")
    return cols


@dataclass
class IntervalAccumulator:
    """Sums over one reporting interval; reset() starts the next one."""

    opts: OptionSet | None
    env_steps: int = 0
    samples: int = 0
    updates: int = 0
    episodes: int = 0
    ep_return_sum: float = 0.0
    ep_length_sum: float = 0.0
    loss_sums: dict[str, float] = field(default_factory=dict)
    ratio_sum: float = 0.0
    lag_sum: float = 0.0
    lag_count: int = 0
    opt_steps: np.ndarray | None = None      # env steps executed per option
    opt_calls: np.ndarray | None = None      # controller launches per option
    opt_len_sum: np.ndarray | None = None    # sum of chosen lengths per option
    chan_sums: np.ndarray | None = None      # (opt, channel) reward sums

    def __post_init__(self) -> None:
        if self.opts is not None:
            n = len(self.opts.options)
            self.opt_steps = np.zeros(n)
            self.opt_calls = np.zeros(n)
            self.opt_len_sum = np.zeros(n)
            self.chan_sums = np.zeros((n, n))

    def add_batch(self, batch: TrajectoryBatch, env_steps: int, version: int) -> None:
        self.samples += batch.num_samples
        self.env_steps += env_steps
        self.episodes += len(batch.episode_returns)
        self.ep_return_sum += float(sum(batch.episode_returns))
        self.ep_length_sum += float(sum(batch.episode_lengths))
        self.lag_sum += float(np.sum(version - batch.policy_versions))
        self.lag_count += len(batch.policy_versions)
        if self.opts is None:
            return
        n = len(self.opts.options)
        pidx = batch.policy_indices
        ctrl = pidx == self.opts.controller_index
        launched = batch.opt_choices[ctrl]
        for o in range(n):
            mask = pidx == o
            self.opt_steps[o] += mask.sum()
            self.opt_calls[o] += np.sum(launched == o)
            self.chan_sums[o] += batch.channels[mask].sum(axis=0)
        lengths = np.asarray(self.opts.lengths)
        lc = batch.len_choices[ctrl]
        if np.all(lc >= 0):
            chosen = lengths[lc]
        else:  # fixed-length mode records no length choice
            chosen = np.zeros(len(launched))
        for o in range(n):
            self.opt_len_sum[o] += chosen[launched == o].sum()

    def add_update(self, report: LossReport, mean_ratio: float) -> None:
        self.updates += 1
        self.ratio_sum += mean_ratio
        for key in ("policy_loss", "value_loss", "exploration_loss",
                    "total", "grad_norm", "clip_fraction"):
            self.loss_sums[key] = self.loss_sums.get(key, 0.0) + getattr(report, key)

    def row(self, wall_seconds: float, total_env_steps: int) -> dict[str, float]:
        u = max(self.updates, 1)
        e = max(self.episodes, 1)
        out = {
            "env_steps": total_env_steps,
            "samples": self.samples,
            "updates": self.updates,
            "wall_seconds": round(wall_seconds, 3),
            "steps_per_second": round(self.env_steps / wall_seconds, 2) if wall_seconds > 0 else 0.0,
            "episodes": self.episodes,
            "mean_episode_return": self.ep_return_sum / e if self.episodes else float("nan"),
            "mean_episode_length": self.ep_length_sum / e if self.episodes else float("nan"),
            "policy_loss": self.loss_sums.get("policy_loss", 0.0) / u,
            "value_loss": self.loss_sums.get("value_loss", 0.0) / u,
            "exploration_loss": self.loss_sums.get("exploration_loss", 0.0) / u,
            "total_loss": self.loss_sums.get("total", 0.0) / u,
            "grad_norm": self.loss_sums.get("grad_norm", 0.0) / u,
            "clip_fraction": self.loss_sums.get("clip_fraction", 0.0) / u,
            "mean_policy_lag": self.lag_sum / self.lag_count if self.lag_count else 0.0,
            "mean_ratio": self.ratio_sum / u,
        }
        if self.opts is not None:
            names = [o.name for o in self.opts.options]
            total_calls = max(self.opt_calls.sum(), 1.0)
            for o, name in enumerate(names):
                out[f"opt_{name}_call_fraction"] = self.opt_calls[o] / total_calls
                out[f"opt_{name}_mean_length"] = (
                    self.opt_len_sum[o] / self.opt_calls[o] if self.opt_calls[o] else 0.0)
            for o, name in enumerate(names):
                steps = max(self.opt_steps[o], 1.0)
                for c, chan in enumerate(names):
                    out[f"opt_{name}_return_{chan}"] = self.chan_sums[o, c] / steps
        return out

    def reset(self) -> IntervalAccumulator:
        return IntervalAccumulator(self.opts)


class MetricsWriter:
    """Appends interval rows to a CSV file with a header written once."""

    def __init__(self, path, opts: OptionSet | None):
        self.path = path
        self.columns = list(BASE_COLUMNS)
        if opts is not None:
            self.columns += option_columns(opts)
        self._file = open(path, "w", encoding="utf-8", newline="")
        self._writer = csv.DictWriter(self._file, fieldnames=self.columns)
        self._writer.writeheader()
        self._file.flush()

    def write(self, row: dict[str, float]) -> None:
        self._writer.writerow({k: row.get(k, "") for k in self.columns})
        self._file.flush()

    def close(self) -> None:
        self._file.close()

    def __enter__(self) -> MetricsWriter:
        return self

    def __exit__(self, *exc) -> None:
        self.close()
