"""Experience collection: actor workers, trajectory segments, batch assembly.

Actors drive many wrapped env instances with immutable policy snapshots and
emit fixed-length segments of T consecutive steps per env; segment boundaries
ignore episode boundaries (dones mark them inside).  The only shared channels
are a bounded multi-producer single-consumer segment queue and an atomic
latest-wins snapshot slot.  In sync mode the same collection code runs inline
on the learner thread, which makes end-to-end training bit-reproducible.

Each env instance gets its own pair of random streams (env dynamics, action
sampling) keyed by its *global* index, so the union of transitions collected
is independent of how envs are split across workers.
"""

from __future__ import annotations

import queue
import threading
import time
from dataclasses import dataclass, field

import numpy as np

from .config import AlgoVariant, TrainConfig
from .envs import INFO_KINDS, Env, make_env, option_reward
from .network import NetSpec, forward, log_softmax
from .options import OptionSet, RewardKind
from .rng import spawn_rngs
from .wrapper import HierAction, HierarchicalWrapper


@dataclass
class Segment:
    """T consecutive steps from one env, ready for batching."""

    obs: np.ndarray                # (T, d)
    policy_indices: np.ndarray     # (T,)
    env_actions: np.ndarray        # (T,) int or (T, da) float
    opt_choices: np.ndarray        # (T,), -1 on option steps
    len_choices: np.ndarray        # (T,), -1 on option steps / fixed mode
    rewards: np.ndarray            # (T,) policy-typed, controller slots 0+flag
    task_rewards: np.ndarray       # (T,) scaled
    flags: np.ndarray              # (T,) bool
    dones: np.ndarray              # (T,) bool
    behavior_logp: np.ndarray      # (T,)
    values: np.ndarray             # (T,)
    channels: np.ndarray           # (T, num_options) raw per-option signals
    policy_version: int
    episode_returns: list[float] = field(default_factory=list)
    episode_lengths: list[int] = field(default_factory=list)
    extras: dict = field(default_factory=dict)


@dataclass
class TrajectoryBatch:
    obs: np.ndarray                # (B, T, d)
    policy_indices: np.ndarray     # (B, T)
    env_actions: np.ndarray
    opt_choices: np.ndarray
    len_choices: np.ndarray
    rewards: np.ndarray
    task_rewards: np.ndarray
    flags: np.ndarray
    dones: np.ndarray
    behavior_logp: np.ndarray
    values: np.ndarray
    channels: np.ndarray           # (B, T, num_options)
    policy_versions: np.ndarray    # (B,)
    episode_returns: list[float]
    episode_lengths: list[int]

    @property
    def num_samples(self) -> int:
        return self.obs.shape[0] * self.obs.shape[1]


def assemble_batch(segments: list[Segment]) -> TrajectoryBatch:
    """Stack segments into dense (B, T) tensors, row-major by trajectory."""
    if not segments:
        raise ValueError("no segments to assemble")
    t = len(segments[0].policy_indices)
    if any(len(s.policy_indices) != t for s in segments):
        raise ValueError("ragged segments: all segments must have the same length")
    ep_ret: list[float] = []
    ep_len: list[int] = []
    for s in segments:
        ep_ret.extend(s.episode_returns)
        ep_len.extend(s.episode_lengths)
    return TrajectoryBatch(
        obs=np.stack([s.obs for s in segments]),
        policy_indices=np.stack([s.policy_indices for s in segments]),
        env_actions=np.stack([s.env_actions for s in segments]),
        opt_choices=np.stack([s.opt_choices for s in segments]),
        len_choices=np.stack([s.len_choices for s in segments]),
        rewards=np.stack([s.rewards for s in segments]),
        task_rewards=np.stack([s.task_rewards for s in segments]),
        flags=np.stack([s.flags for s in segments]),
        dones=np.stack([s.dones for s in segments]),
        behavior_logp=np.stack([s.behavior_logp for s in segments]),
        values=np.stack([s.values for s in segments]),
        channels=np.stack([s.channels for s in segments]),
        policy_versions=np.array([s.policy_version for s in segments]),
        episode_returns=ep_ret,
        episode_lengths=ep_len,
    )


class SnapshotSlot:
    """Single-producer multi-consumer latest-wins parameter slot."""

    def __init__(self, params: dict[str, np.ndarray], version: int = 0):
        self._lock = threading.Lock()
        self._params = params
        self._version = version

    def publish(self, params: dict[str, np.ndarray], version: int) -> None:
        with self._lock:
            self._params = params
            self._version = version

    def get(self) -> tuple[dict[str, np.ndarray], int]:
        with self._lock:
            return self._params, self._version


class EnvRunner:
    """One env instance plus its wrapper, streams, and in-progress segment."""

    def __init__(self, env: Env, opts: OptionSet, cfg: TrainConfig,
                 env_rng: np.random.Generator, sample_rng: np.random.Generator,
                 hierarchical: bool):
        self.env = env
        self.opts = opts
        self.cfg = cfg
        self.env_rng = env_rng
        self.sample_rng = sample_rng
        self.hierarchical = hierarchical
        if hierarchical:
            self.wrapper = HierarchicalWrapper(
                env, opts, reward_scaling=cfg.reward_scaling,
                fixed_length=cfg.fixed_option_length)
            self.obs, self.pidx = self.wrapper.hreset(env_rng)
        else:
            self.obs = env.reset(env_rng)
            self.pidx = 0
        self.ep_return = 0.0
        self.ep_length = 0
        self.buffer: list[dict] = []
        self.done_episodes: list[tuple[float, int]] = []

    def record_and_advance(self, rec: dict, done: bool, raw_task: float) -> None:
        self.buffer.append(rec)
        self.ep_return += raw_task
        self.ep_length += 0 if rec["is_ctrl"] else 1
        if done:
            self.done_episodes.append((self.ep_return, self.ep_length))
            self.ep_return = 0.0
            self.ep_length = 0
            if self.hierarchical:
                self.obs, self.pidx = self.wrapper.hreset(self.env_rng)
            else:
                self.obs = self.env.reset(self.env_rng)
                self.pidx = 0

    def flat_mix_reward(self, task_reward: float, info: dict) -> float:
        """Reward used by the flat agent: scaled task, plus scaled option
        signals for the task+options variant."""
        r = task_reward * self.cfg.reward_scaling
        if self.cfg.algo_variant is AlgoVariant.APPO_TASK_PLUS_OPTIONS:
            for spec in self.opts.options:
                r += option_reward(spec, info, task_reward, self.cfg.reward_scaling)
        return r

    def pop_segment(self, t: int, version: int, spec: NetSpec) -> Segment | None:
        if len(self.buffer) < t:
            return None
        rows, self.buffer = self.buffer[:t], self.buffer[t:]
        if spec.action_kind == "discrete":
            env_actions = np.array([r["env_action"] for r in rows], dtype=np.int64)
        else:
            env_actions = np.stack([np.asarray(r["env_action"], dtype=float).reshape(spec.action_dim)
                                    for r in rows])
        seg = Segment(
            obs=np.stack([r["obs"] for r in rows]),
            policy_indices=np.array([r["pidx"] for r in rows], dtype=np.int64),
            env_actions=env_actions,
            opt_choices=np.array([r["opt_choice"] for r in rows], dtype=np.int64),
            len_choices=np.array([r["len_choice"] for r in rows], dtype=np.int64),
            rewards=np.array([r["reward"] for r in rows]),
            task_rewards=np.array([r["task_reward"] for r in rows]),
            flags=np.array([r["flag"] for r in rows], dtype=bool),
            dones=np.array([r["done"] for r in rows], dtype=bool),
            behavior_logp=np.array([r["logp"] for r in rows]),
            values=np.array([r["value"] for r in rows]),
            channels=np.stack([r["channels"] for r in rows]),
            policy_version=version,
            episode_returns=[er for er, _ in self.done_episodes],
            episode_lengths=[el for _, el in self.done_episodes],
        )
        self.done_episodes = []
        return seg


def make_runners(cfg: TrainConfig, opts: OptionSet, worker_id: int,
                 count_per_worker: int) -> list[EnvRunner]:
    hierarchical = cfg.algo_variant.hierarchical
    runners = []
    total = cfg.num_env_workers * count_per_worker
    env_rngs = spawn_rngs(cfg.seed, total, "env")
    samp_rngs = spawn_rngs(cfg.seed, total, "sample")
    for k in range(count_per_worker):
        gid = worker_id * count_per_worker + k
        runners.append(EnvRunner(make_env(cfg.env), opts, cfg,
                                 env_rngs[gid], samp_rngs[gid], hierarchical))
    return runners


def step_runners(runners: list[EnvRunner], params: dict[str, np.ndarray],
                 spec: NetSpec, cfg: TrainConfig, use_length_head: bool) -> None:
    """Advance every runner by one hierarchical step with one batched forward."""
    obs_mat = np.stack([r.obs for r in runners])
    pidx = np.array([r.pidx for r in runners], dtype=np.int64)
    cache = forward(params, spec, obs_mat, pidx)
    ctrl = spec.num_options

    # log-softmax once for the whole batch; per-env work is indexing + rng draws
    hierarchical = runners[0].hierarchical
    if hierarchical:
        opt_logp = log_softmax(cache.opt_logits)
        len_logp = log_softmax(cache.len_logits) if use_length_head else None
    if spec.action_kind == "discrete":
        act_logp = log_softmax(cache.action_out)
    else:
        # shared across rows: log_std is state-independent
        sigma = np.exp(cache.log_std)
        logp_const = -float(np.sum(cache.log_std)) \
            - 0.5 * spec.action_dim * np.log(2.0 * np.pi)

    for i, r in enumerate(runners):
        value = float(cache.value[i])
        if r.hierarchical and r.pidx == ctrl:
            opt = _gumbel_pick(opt_logp[i], r.sample_rng)
            logp = float(opt_logp[i, opt])
            if use_length_head:
                ln = _gumbel_pick(len_logp[i], r.sample_rng)
                logp += float(len_logp[i, ln])
            else:
                ln = -1
            step = r.wrapper.hstep(HierAction(option_index=opt, length_index=ln))
            rec = {
                "obs": step.obs, "pidx": ctrl, "env_action": _null_action(spec),
                "opt_choice": opt, "len_choice": ln, "reward": 0.0,
                "task_reward": 0.0, "flag": True, "done": False,
                "logp": logp, "value": value, "is_ctrl": True,
                "channels": np.zeros(len(r.opts.options)),
            }
            r.obs, r.pidx = step.next_obs, step.next_policy
            r.record_and_advance(rec, done=False, raw_task=0.0)
            continue

        if spec.action_kind == "discrete":
            act = _gumbel_pick(act_logp[i], r.sample_rng)
            logp = float(act_logp[i, act])
        else:
            noise = r.sample_rng.standard_normal(spec.action_dim)
            act = cache.action_out[i] + sigma * noise
            # act standardizes back to exactly `noise`, so the density is direct
            logp = logp_const - 0.5 * float(noise @ noise)

        if r.hierarchical:
            step = r.wrapper.hstep(HierAction(env_action=act))
            rec = {
                "obs": step.obs, "pidx": step.policy_index, "env_action": act,
                "opt_choice": -1, "len_choice": -1, "reward": step.policy_reward,
                "task_reward": step.task_reward, "flag": False, "done": step.done,
                "logp": logp, "value": value, "is_ctrl": False,
                "channels": channel_signals(r.opts, step.info, step.raw_task_reward),
            }
            raw = step.raw_task_reward
            done = step.done
            if not done:
                r.obs, r.pidx = step.next_obs, step.next_policy
            r.record_and_advance(rec, done=done, raw_task=raw)
        else:
            res = r.env.step(act)
            reward = r.flat_mix_reward(res.task_reward, res.info)
            rec = {
                "obs": r.obs, "pidx": 0, "env_action": act,
                "opt_choice": -1, "len_choice": -1, "reward": reward,
                "task_reward": res.task_reward * cfg.reward_scaling,
                "flag": False, "done": res.done,
                "logp": logp, "value": value, "is_ctrl": False,
                "channels": channel_signals(r.opts, res.info, res.task_reward),
            }
            if not res.done:
                r.obs = res.obs
            r.record_and_advance(rec, done=res.done, raw_task=res.task_reward)


def _gumbel_pick(log_probs: np.ndarray, rng: np.random.Generator) -> int:
    """Draw one categorical sample via the Gumbel-max trick."""
    u = rng.random(log_probs.shape[-1])
    return int(np.argmax(log_probs - np.log(-np.log(u))))


_CHANNEL_PLANS: dict[int, tuple[OptionSet, list]] = {}


def channel_signals(opts: OptionSet, info: dict, raw_task: float) -> np.ndarray:
    """Per-option raw reward signal at one env step, for diagnostics.

    Unlike the reward actually paid to the executing option, every channel is
    evaluated at every step so per-option returns across channels can be
    compared.  Signals an env does not expose read as zero here.  A per-step
    hot path, so the dispatch per option is precompiled once per option set.
    """
    cached = _CHANNEL_PLANS.get(id(opts))
    if cached is None:
        plan = [_compile_channel(spec) for spec in opts.options]
        # keep the option set alive so its id stays valid for the cache key
        _CHANNEL_PLANS[id(opts)] = (opts, plan)
    else:
        plan = cached[1]
    out = np.empty(len(plan))
    for j, fn in enumerate(plan):
        out[j] = fn(info, raw_task)
    return out


_VELOCITY_AXES = {
    RewardKind.VELOCITY_POS_X: ("vx", 1.0),
    RewardKind.VELOCITY_NEG_X: ("vx", -1.0),
    RewardKind.VELOCITY_POS_Y: ("vy", 1.0),
    RewardKind.VELOCITY_NEG_Y: ("vy", -1.0),
}


def _compile_channel(spec):
    kind, scale = spec.reward_kind, spec.reward_scale
    if kind is RewardKind.ZERO:
        return lambda info, raw: 0.0
    if kind is RewardKind.TASK_REWARD:
        return lambda info, raw, s=scale: raw * s
    if kind in INFO_KINDS:
        return lambda info, raw, k=INFO_KINDS[kind], s=scale: info.get(k, 0.0) * s
    key, sign = _VELOCITY_AXES[kind]
    return lambda info, raw, k=key, sg=sign, s=scale: max(0.0, sg * info.get(k, 0.0)) * s


def _null_action(spec: NetSpec):
    return 0 if spec.action_kind == "discrete" else np.zeros(spec.action_dim)


class ActorWorker(threading.Thread):
    """Collects segments from a slice of envs and feeds the shared queue."""

    def __init__(self, worker_id: int, cfg: TrainConfig, opts: OptionSet,
                 spec: NetSpec, snapshot: SnapshotSlot, out: queue.Queue,
                 stop: threading.Event, use_length_head: bool):
        super().__init__(name=f"actor-{worker_id}", daemon=True)
        self.worker_id = worker_id
        self.cfg = cfg
        self.spec = spec
        self.snapshot = snapshot
        self.out = out
        self.stop_event = stop
        self.use_length_head = use_length_head
        self.runners = make_runners(cfg, opts, worker_id, cfg.envs_per_worker)
        self.steps_collected = 0

    def run(self) -> None:
        t = self.cfg.rollout_length
        while not self.stop_event.is_set():
            params, version = self.snapshot.get()
            for _ in range(t):
                if self.stop_event.is_set():
                    return
                step_runners(self.runners, params, self.spec, self.cfg, self.use_length_head)
                self.steps_collected += len(self.runners)
            for r in self.runners:
                seg = r.pop_segment(t, version, self.spec)
                if seg is None:
                    continue
                while not self.stop_event.is_set():
                    try:
                        self.out.put(seg, timeout=0.2)
                        break
                    except queue.Full:
                        continue


@dataclass
class ThroughputStats:
    env_steps: int = 0
    wall_seconds: float = 0.0
    policy_lags: list[int] = field(default_factory=list)
    _start: float = field(default_factory=time.monotonic)

    @property
    def env_steps_per_second(self) -> float:
        return self.env_steps / self.wall_seconds if self.wall_seconds > 0 else 0.0

    def tick(self) -> None:
        self.wall_seconds = time.monotonic() - self._start
