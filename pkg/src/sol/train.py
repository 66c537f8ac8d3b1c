"""End-to-end training driver: actors, learner, metrics, checkpoints.

Two execution modes share all collection and update code:

* async (default): one actor thread per env worker feeds segments through a
  bounded queue while the learner consumes, updates, and publishes snapshots.
* ``--sync``: the same runners are stepped inline on the learner thread in a
  strict collect/update alternation, which makes runs bit-reproducible for a
  fixed seed.

A training step count always means *environment* steps; controller decisions
re-use an observation without advancing the env and are excluded.  If an
update produces non-finite numbers the run aborts and the last good parameters
are kept as the final checkpoint.
"""

from __future__ import annotations

import logging
import queue
import threading
import time
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .checkpoint import save_checkpoint
from .config import TrainConfig, build_option_set, save_config, validate_config
from .envs import make_env
from .learner import Learner
from .metrics import IntervalAccumulator, MetricsWriter
from .network import NetSpec, init_params
from .options import OptionSet
from .rng import make_rng
from .rollout import (
    ActorWorker, Segment, SnapshotSlot, assemble_batch, make_runners,
    step_runners,
)

log = logging.getLogger("sol")


def build_net_spec(cfg: TrainConfig, opts: OptionSet) -> NetSpec:
    """Network shapes implied by env and variant.

    Flat variants still use the shared architecture, with a single policy
    index and degenerate controller heads that are never queried.
    """
    env = make_env(cfg.env)
    if cfg.algo_variant.hierarchical:
        num_options = opts.num_options
        num_lengths = len(opts.lengths)
    else:
        num_options = 1
        num_lengths = 1
    return NetSpec(
        obs_dim=env.obs_dim, action_kind=env.action_kind, action_dim=env.action_dim,
        num_options=num_options, num_lengths=num_lengths,
        hidden_size=cfg.hidden_size, embed_dim=cfg.embed_dim,
    )


def setup(cfg: TrainConfig, opts_override: OptionSet | None = None,
          ) -> tuple[TrainConfig, OptionSet, NetSpec, dict[str, np.ndarray]]:
    """Validate the config, resolve the option set, and init parameters."""
    env = make_env(cfg.env)
    opts = opts_override if opts_override is not None else \
        build_option_set(cfg, env.default_options())
    cfg, opts = validate_config(cfg, opts)
    spec = build_net_spec(cfg, opts)
    params = init_params(spec, make_rng(cfg.seed))
    return cfg, opts, spec, params


@dataclass
class TrainResult:
    env_steps: int
    updates: int
    params: dict[str, np.ndarray]
    opts: OptionSet
    spec: NetSpec
    metrics_path: Path
    final_checkpoint: Path
    aborted_nan: bool = False


class _SyncCollector:
    """Inline, deterministic stand-in for the actor threads."""

    def __init__(self, cfg: TrainConfig, opts: OptionSet, spec: NetSpec,
                 use_length_head: bool):
        self.cfg = cfg
        self.spec = spec
        self.use_length_head = use_length_head
        self.worker_runners = [
            make_runners(cfg, opts, w, cfg.envs_per_worker)
            for w in range(cfg.num_env_workers)
        ]

    def collect(self, params: dict[str, np.ndarray], version: int) -> list[Segment]:
        segs: list[Segment] = []
        for runners in self.worker_runners:
            for _ in range(self.cfg.rollout_length):
                step_runners(runners, params, self.spec, self.cfg, self.use_length_head)
            for r in runners:
                seg = r.pop_segment(self.cfg.rollout_length, version, self.spec)
                if seg is not None:
                    segs.append(seg)
        return segs


def train(cfg: TrainConfig, out_dir, opts_override: OptionSet | None = None) -> TrainResult:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    cfg, opts, spec, params = setup(cfg, opts_override)
    save_config(cfg, out / "config.txt")

    learner = Learner(params, spec, cfg, opts)
    metrics_opts = opts if cfg.algo_variant.hierarchical else None
    writer = MetricsWriter(out / "metrics.csv", metrics_opts)
    acc = IntervalAccumulator(metrics_opts)

    segments_per_batch = cfg.batch_size // cfg.rollout_length
    env_steps = 0
    updates = 0
    next_metric = cfg.metrics_interval
    next_ckpt = cfg.checkpoint_every
    aborted = False
    t0 = time.monotonic()

    pending: list[Segment] = []
    snapshot = SnapshotSlot(learner.snapshot_params(), learner.version)
    stop = threading.Event()
    workers: list[ActorWorker] = []
    seg_queue: queue.Queue = queue.Queue(maxsize=cfg.queue_depth * segments_per_batch)
    collector: _SyncCollector | None = None
    if cfg.sync:
        collector = _SyncCollector(cfg, opts, spec, learner.use_length_head)
    else:
        workers = [
            ActorWorker(w, cfg, opts, spec, snapshot, seg_queue, stop,
                        learner.use_length_head)
            for w in range(cfg.num_env_workers)
        ]
        for w in workers:
            w.start()

    def next_batch() -> list[Segment]:
        while len(pending) < segments_per_batch:
            if collector is not None:
                pending.extend(collector.collect(learner.params, learner.version))
            else:
                pending.append(seg_queue.get())
        batch, rest = pending[:segments_per_batch], pending[segments_per_batch:]
        pending.clear()
        pending.extend(rest)
        return batch

    final_ckpt = out / "checkpoint_final.bin"
    try:
        while env_steps < cfg.total_steps:
            batch = assemble_batch(next_batch())
            batch_env_steps = int((~batch.flags).sum())
            env_steps += batch_env_steps
            learner.progress = env_steps / cfg.total_steps

            try:
                result = learner.update(batch)
            except FloatingPointError as e:
                log.error("non-finite update at %d env steps, aborting: %s", env_steps, e)
                aborted = True
                break
            updates += 1
            snapshot.publish(learner.snapshot_params(), learner.version)

            acc.add_batch(batch, batch_env_steps, learner.version)
            acc.add_update(result.report, result.mean_ratio)
            if env_steps >= next_metric or env_steps >= cfg.total_steps:
                row = acc.row(time.monotonic() - t0, env_steps)
                writer.write(row)
                log.info(
                    "steps=%d updates=%d return=%.3f eps=%d sps=%.0f loss=%.4f",
                    env_steps, updates, row["mean_episode_return"],
                    row["episodes"], row["steps_per_second"], row["total_loss"])
                acc = acc.reset()
                while next_metric <= env_steps:
                    next_metric += cfg.metrics_interval
            if env_steps >= next_ckpt:
                save_checkpoint(out / f"checkpoint_{env_steps}.bin", learner.params, cfg)
                while next_ckpt <= env_steps:
                    next_ckpt += cfg.checkpoint_every
    finally:
        stop.set()
        # drain so producers blocked on a full queue can observe the stop flag
        for w in workers:
            while w.is_alive():
                try:
                    seg_queue.get_nowait()
                except queue.Empty:
                    w.join(timeout=0.1)
        writer.close()
        save_checkpoint(final_ckpt, learner.params, cfg)

    return TrainResult(
        env_steps=env_steps, updates=updates, params=learner.params,
        opts=opts, spec=spec, metrics_path=out / "metrics.csv",
        final_checkpoint=final_ckpt, aborted_nan=aborted,
    )
