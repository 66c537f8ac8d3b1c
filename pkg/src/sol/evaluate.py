"""Policy evaluation: episode statistics, option usage, length histograms.

Runs a frozen parameter set for a number of complete episodes (sampled
actions by default, greedy on request) and reports mean return with a
two-standard-error band, success rate where the env defines success,
per-option call fractions and chosen-length histograms, and per-option mean
return in every reward channel normalized by execution steps.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np

from .checkpoint import load_checkpoint
from .config import TrainConfig
from .envs import Env, make_env
from .network import (
    NetSpec, categorical_log_prob, forward, sample_categorical,
)
from .options import OptionSet
from .rng import spawn_rngs
from .rollout import channel_signals
from .train import setup
from .wrapper import HierAction, HierarchicalWrapper

EVAL_PARALLEL_ENVS = 16


@dataclass
class EvalReport:
    episodes: int
    episode_returns: list[float]
    episode_lengths: list[int]
    mean_return: float
    two_se: float                        # two standard errors over episodes
    success_rate: float | None           # None when the env has no success signal
    greedy: bool
    option_names: list[str] = field(default_factory=list)
    lengths_menu: list[int] = field(default_factory=list)
    option_calls: np.ndarray | None = None          # (opts,)
    length_hist: np.ndarray | None = None           # (opts, lengths) counts
    option_steps: np.ndarray | None = None          # (opts,) env steps executed
    channel_returns: np.ndarray | None = None       # (opts, channels) per-step means
    extras: dict = field(default_factory=dict)

    @property
    def call_fractions(self) -> np.ndarray | None:
        if self.option_calls is None:
            return None
        total = max(self.option_calls.sum(), 1.0)
        return self.option_calls / total

    def modal_length(self, option_index: int) -> int | None:
        """Most frequently chosen length for one option, None if never called."""
        if self.length_hist is None or self.length_hist[option_index].sum() == 0:
            return None
        return int(self.lengths_menu[int(np.argmax(self.length_hist[option_index]))])


def two_standard_errors(values) -> float:
    v = np.asarray(values, dtype=float)
    if len(v) < 2:
        return float("nan")
    return float(2.0 * v.std(ddof=1) / math.sqrt(len(v)))


class _EvalEnv:
    """One env instance plus per-episode accumulators."""

    def __init__(self, env: Env, opts: OptionSet | None, cfg: TrainConfig,
                 env_rng, sample_rng):
        self.env = env
        self.opts = opts
        self.cfg = cfg
        self.env_rng = env_rng
        self.sample_rng = sample_rng
        if opts is not None:
            self.wrapper = HierarchicalWrapper(
                env, opts, reward_scaling=cfg.reward_scaling,
                fixed_length=cfg.fixed_option_length)
            self.obs, self.pidx = self.wrapper.hreset(env_rng)
        else:
            self.wrapper = None
            self.obs = env.reset(env_rng)
            self.pidx = 0
        self.ep_return = 0.0
        self.ep_len = 0
        self.ep_success = 0.0


def _greedy_or_sample(logits: np.ndarray, rng, greedy: bool) -> int:
    if greedy:
        return int(np.argmax(logits))
    return int(sample_categorical(logits[None, :], rng)[0])


def evaluate_params(params: dict[str, np.ndarray], spec: NetSpec,
                    cfg: TrainConfig, opts: OptionSet, episodes: int,
                    seed: int, greedy: bool = False) -> EvalReport:
    if episodes <= 0:
        raise ValueError(f"episodes must be positive, got {episodes}")
    hierarchical = cfg.algo_variant.hierarchical
    hopts = opts if hierarchical else None
    n_par = min(episodes, EVAL_PARALLEL_ENVS)
    env_rngs = spawn_rngs(seed, n_par, "eval_env")
    samp_rngs = spawn_rngs(seed, n_par, "eval_sample")
    envs = [_EvalEnv(make_env(cfg.env), hopts, cfg, env_rngs[i], samp_rngs[i])
            for i in range(n_par)]

    n_opt = opts.num_options
    n_len = len(opts.lengths)
    option_calls = np.zeros(n_opt)
    length_hist = np.zeros((n_opt, n_len))
    option_steps = np.zeros(n_opt)
    channel_sums = np.zeros((n_opt, n_opt))
    returns: list[float] = []
    lengths: list[int] = []
    successes: list[float] = []
    has_success = False
    ctrl = spec.num_options
    use_length_head = cfg.fixed_option_length is None

    active = list(envs)
    while len(returns) < episodes:
        obs_mat = np.stack([e.obs for e in active])
        pidx = np.array([e.pidx for e in active], dtype=np.int64)
        cache = forward(params, spec, obs_mat, pidx)
        finished: list[_EvalEnv] = []
        for i, e in enumerate(active):
            if hierarchical and e.pidx == ctrl:
                opt = _greedy_or_sample(cache.opt_logits[i], e.sample_rng, greedy)
                if use_length_head:
                    ln = _greedy_or_sample(cache.len_logits[i], e.sample_rng, greedy)
                else:
                    ln = -1
                option_calls[opt] += 1
                if use_length_head:
                    length_hist[opt, ln] += 1
                step = e.wrapper.hstep(HierAction(option_index=opt, length_index=ln))
                e.obs, e.pidx = step.next_obs, step.next_policy
                continue
            if spec.action_kind == "discrete":
                act = _greedy_or_sample(cache.action_out[i], e.sample_rng, greedy)
            elif greedy:
                act = cache.action_out[i]
            else:
                act = cache.action_out[i] + np.exp(cache.log_std) * \
                    e.sample_rng.standard_normal(spec.action_dim)
            if hierarchical:
                step = e.wrapper.hstep(HierAction(env_action=act))
                raw, done, info = step.raw_task_reward, step.done, step.info
                next_obs, next_pidx = step.next_obs, step.next_policy
                option_steps[e.pidx] += 1
                channel_sums[e.pidx] += channel_signals(opts, info, raw)
            else:
                res = e.env.step(act)
                raw, done, info = res.task_reward, res.done, res.info
                next_obs, next_pidx = res.obs, 0
            e.ep_return += raw
            e.ep_len += 1
            if "success" in info:
                has_success = True
                e.ep_success = max(e.ep_success, info["success"])
            if done:
                returns.append(e.ep_return)
                lengths.append(e.ep_len)
                successes.append(e.ep_success)
                if len(returns) >= episodes:
                    finished.append(e)   # quota reached; retire this instance
                else:
                    e.ep_return, e.ep_len, e.ep_success = 0.0, 0, 0.0
                    if hierarchical:
                        e.obs, e.pidx = e.wrapper.hreset(e.env_rng)
                    else:
                        e.obs = e.env.reset(e.env_rng)
                        e.pidx = 0
            else:
                e.obs, e.pidx = next_obs, next_pidx
        for e in finished:
            active.remove(e)
        if not active:
            break

    returns = returns[:episodes]
    lengths = lengths[:episodes]
    successes = successes[:episodes]
    steps_norm = np.maximum(option_steps, 1.0)
    return EvalReport(
        episodes=len(returns),
        episode_returns=returns,
        episode_lengths=lengths,
        mean_return=float(np.mean(returns)),
        two_se=two_standard_errors(returns),
        success_rate=float(np.mean(successes)) if has_success else None,
        greedy=greedy,
        option_names=[o.name for o in opts.options],
        lengths_menu=list(opts.lengths),
        option_calls=option_calls if hierarchical else None,
        length_hist=length_hist if hierarchical else None,
        option_steps=option_steps if hierarchical else None,
        channel_returns=(channel_sums / steps_norm[:, None]) if hierarchical else None,
    )


def evaluate_checkpoint(ckpt_path, cfg: TrainConfig, episodes: int, seed: int,
                        greedy: bool = False) -> EvalReport:
    cfg, opts, spec, params = setup(cfg)
    expected = {k: v.shape for k, v in params.items()}
    loaded = load_checkpoint(ckpt_path, expected_shapes=expected)
    return evaluate_params(loaded, spec, cfg, opts, episodes, seed, greedy)


def dump_eval_csv(report: EvalReport, path) -> None:
    """Flat CSV: summary block, then per-option rows, then length histogram."""
    with open(path, "w", encoding="utf-8", newline="") as f:
        w = csv.writer(f)
        w.writerow(["section", "key", "value"])
        w.writerow(["summary", "episodes", report.episodes])
        w.writerow(["summary", "mean_return", report.mean_return])
        w.writerow(["summary", "two_se", report.two_se])
        w.writerow(["summary", "greedy", int(report.greedy)])
        if report.success_rate is not None:
            w.writerow(["summary", "success_rate", report.success_rate])
        if report.option_calls is None:
            return
        fr = report.call_fractions
        for o, name in enumerate(report.option_names):
            w.writerow(["call_fraction", name, fr[o]])
        for o, name in enumerate(report.option_names):
            for li, length in enumerate(report.lengths_menu):
                w.writerow(["length_hist", f"{name}:{length}", report.length_hist[o, li]])
        for o, name in enumerate(report.option_names):
            for c, chan in enumerate(report.option_names):
                w.writerow(["channel_return", f"{name}:{chan}",
                            report.channel_returns[o, c]])


def aggregate_seed_returns(per_seed_means: list[float]) -> tuple[float, float]:
    """Mean and two standard errors across training seeds."""
    return float(np.mean(per_seed_means)), two_standard_errors(per_seed_means)
