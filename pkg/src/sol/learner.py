"""Batch updates: reward fill, V-trace targets, clipped-surrogate epochs.

Per batch the pipeline is: resolve flagged controller rewards, compute
current/behavior probability ratios once, run the single-pass V-trace kernel,
then run ``ppo_epochs`` gradient steps against those *fixed* advantage and
value targets (one-pass V-trace usage; recomputing targets between epochs
would chase a moving target).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .adam import AdamState, adam_step, clip_grads_
from .backprop import LossReport, ppo_loss_and_grads
from .config import TrainConfig
from .network import NetSpec, copy_params, forward, policy_log_probs
from .options import OptionSet
from .rollout import TrajectoryBatch
from .vtrace import VtraceInputs, fill_controller_rewards, vtrace_parallel

ADV_NORM_EPS = 1e-8


def normalize_advantages(adv: np.ndarray, pidx: np.ndarray, num_policies: int) -> np.ndarray:
    """Standardize advantages per policy index (mean 0, std 1) within a batch."""
    out = adv.copy()
    for p in range(num_policies):
        mask = pidx == p
        if mask.sum() < 2:
            continue
        vals = adv[mask]
        out[mask] = (vals - vals.mean()) / (vals.std() + ADV_NORM_EPS)
    return out


def flat_log_probs(params, spec: NetSpec, batch: TrajectoryBatch,
                   use_length_head: bool) -> np.ndarray:
    """Per-step log-probs of the recorded actions under `params`, flattened."""
    b, t = batch.policy_indices.shape
    obs = batch.obs.reshape(b * t, -1)
    pidx = batch.policy_indices.reshape(b * t)
    env_actions = batch.env_actions.reshape(b * t, -1) if batch.env_actions.ndim == 3 \
        else batch.env_actions.reshape(b * t)
    cache = forward(params, spec, obs, pidx)
    return policy_log_probs(cache, spec, env_actions,
                            batch.opt_choices.reshape(b * t),
                            batch.len_choices.reshape(b * t),
                            use_length_head=use_length_head)


@dataclass
class UpdateResult:
    report: LossReport
    adv: np.ndarray
    vs: np.ndarray
    mean_ratio: float


class Learner:
    """Owns the master parameters and optimizer state; single-threaded."""

    def __init__(self, params: dict[str, np.ndarray], spec: NetSpec,
                 cfg: TrainConfig, opts: OptionSet | None):
        self.params = params
        self.spec = spec
        self.cfg = cfg
        self.opts = opts
        self.adam = AdamState.init(params)
        self.version = 0
        self.num_policies = opts.num_policies if cfg.algo_variant.hierarchical else 1
        self.use_length_head = cfg.fixed_option_length is None
        self.progress = 0.0          # training fraction, drives entropy annealing

    def compute_targets(self, batch: TrajectoryBatch) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Fill + V-trace: returns (rewards_filled, adv, vs), all (B, T)."""
        cfg = self.cfg
        if cfg.algo_variant.hierarchical:
            rewards = fill_controller_rewards(
                batch.rewards, batch.task_rewards, batch.policy_indices,
                batch.dones, self.num_policies, self.opts.controller_reward_scale)
        else:
            rewards = batch.rewards
        logp = flat_log_probs(self.params, self.spec, batch, self.use_length_head)
        b, t = batch.policy_indices.shape
        ratios = np.exp(logp - batch.behavior_logp.reshape(b * t)).reshape(b, t)
        out = vtrace_parallel(VtraceInputs(
            ratios=ratios, values=batch.values, dones=batch.dones.astype(float),
            rewards=rewards, policy_indices=batch.policy_indices,
            num_policies=self.num_policies, gamma=cfg.gamma,
            rho_hat=cfg.vtrace_rho, c_hat=cfg.vtrace_c))
        return rewards, out.adv, out.vs

    def update(self, batch: TrajectoryBatch) -> UpdateResult:
        cfg = self.cfg
        b, t = batch.policy_indices.shape
        n = b * t
        _, adv, vs = self.compute_targets(batch)

        pidx = batch.policy_indices.reshape(n)
        adv_flat = adv.reshape(n)
        if cfg.normalize_advantage:
            adv_flat = normalize_advantages(adv_flat, pidx, self.num_policies)

        obs = batch.obs.reshape(n, -1)
        env_actions = batch.env_actions.reshape(n, -1) if batch.env_actions.ndim == 3 \
            else batch.env_actions.reshape(n)
        opt_choices = np.maximum(batch.opt_choices.reshape(n), 0)
        len_choices = np.maximum(batch.len_choices.reshape(n), 0)
        extra = self.opts.controller_entropy_scale_extra if cfg.algo_variant.hierarchical else 1.0

        report = None
        mean_ratio = 1.0
        before = self.params
        try:
            for _ in range(cfg.ppo_epochs):
                report, grads = self._epoch_step(
                    obs, pidx, env_actions, opt_choices, len_choices, batch,
                    adv_flat, vs, n, extra)
        except FloatingPointError:
            # keep the params from before the failing batch, not a half-update
            self.params = before
            raise
        self.version += 1

        logp_after = flat_log_probs(self.params, self.spec, batch, self.use_length_head)
        mean_ratio = float(np.exp(logp_after - batch.behavior_logp.reshape(n)).mean())
        return UpdateResult(report=report, adv=adv_flat, vs=vs.reshape(n),
                            mean_ratio=mean_ratio)

    def _epoch_step(self, obs, pidx, env_actions, opt_choices, len_choices,
                    batch, adv_flat, vs, n, extra):
        cfg = self.cfg
        report, grads = ppo_loss_and_grads(
            self.params, self.spec,
            obs=obs, pidx=pidx, env_actions=env_actions,
            opt_choices=opt_choices, len_choices=len_choices,
            behavior_logp=batch.behavior_logp.reshape(n),
            adv=adv_flat, vs_target=vs.reshape(n), v_old=batch.values.reshape(n),
            clip_ratio=cfg.ppo_clip_ratio, clip_value=cfg.ppo_clip_value,
            value_coeff=cfg.value_loss_coeff,
            entropy_coeff=cfg.entropy_coeff_at(self.progress),
            ctrl_entropy_extra=extra, use_length_head=self.use_length_head)
        report.grad_norm = clip_grads_(grads, cfg.max_grad_norm)
        self.params = adam_step(self.params, grads, self.adam, cfg.learning_rate)
        return report, grads

    def snapshot_params(self) -> dict[str, np.ndarray]:
        return copy_params(self.params)
