"""Exact reverse-mode gradients of the clipped-surrogate training loss.

The scalar loss over a minibatch of mixed-policy steps is

    total = policy + value_coeff * value - entropy_coeff * exploration

where each step contributes only through the head its policy index selects:
option steps through the environment-action head, controller steps through the
option head plus the length head (their joint log-prob is the sum).  The value
head is conditioned on the policy index, so the same sum covers both the task
value and every option value.  Gradients are hand-derived and checked against
central finite differences in the test suite.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .network import (
    ForwardCache, NetSpec, forward, log_softmax,
    LOG_STD_MIN, LOG_STD_MAX,
)


@dataclass
class LossReport:
    """Loss components, overall and split per policy index."""

    policy_loss: float
    value_loss: float
    exploration_loss: float
    total: float
    clip_fraction: float
    grad_norm: float = 0.0
    per_policy: dict[str, np.ndarray] = field(default_factory=dict)


def _categorical_grad(logits: np.ndarray, samples: np.ndarray,
                      g_logp: np.ndarray, g_entropy: np.ndarray) -> np.ndarray:
    """d(g_logp * logp(sample) + g_entropy * H) / d logits, rowwise."""
    lp = log_softmax(logits)
    p = np.exp(lp)
    h = -(p * lp).sum(axis=-1)
    grad = -g_logp[:, None] * p
    grad[np.arange(len(samples)), samples] += g_logp
    grad += g_entropy[:, None] * (-p * (lp + h[:, None]))
    return grad


def ppo_loss_and_grads(
    params: dict[str, np.ndarray],
    spec: NetSpec,
    *,
    obs: np.ndarray,
    pidx: np.ndarray,
    env_actions: np.ndarray,
    opt_choices: np.ndarray,
    len_choices: np.ndarray,
    behavior_logp: np.ndarray,
    adv: np.ndarray,
    vs_target: np.ndarray,
    v_old: np.ndarray,
    clip_ratio: float,
    clip_value: float,
    value_coeff: float,
    entropy_coeff: float,
    ctrl_entropy_extra: float = 1.0,
    use_length_head: bool = True,
) -> tuple[LossReport, dict[str, np.ndarray]]:
    cache = forward(params, spec, obs, pidx)
    n = len(cache.pidx)
    is_ctrl = cache.pidx == spec.num_options
    ctrl_rows = np.flatnonzero(is_ctrl)
    opt_rows = np.flatnonzero(~is_ctrl)

    # --- forward: per-step log-probs, entropies, value ---
    logp = np.zeros(n)
    entropy = np.zeros(n)
    lp_opt = lp_len = None
    if ctrl_rows.size:
        lp_opt = log_softmax(cache.opt_logits[ctrl_rows])
        logp[ctrl_rows] = lp_opt[np.arange(len(ctrl_rows)), opt_choices[ctrl_rows]]
        entropy[ctrl_rows] = -(np.exp(lp_opt) * lp_opt).sum(axis=-1)
        if use_length_head:
            lp_len = log_softmax(cache.len_logits[ctrl_rows])
            logp[ctrl_rows] += lp_len[np.arange(len(ctrl_rows)), len_choices[ctrl_rows]]
            entropy[ctrl_rows] += -(np.exp(lp_len) * lp_len).sum(axis=-1)
        entropy[ctrl_rows] *= ctrl_entropy_extra
    if opt_rows.size:
        if spec.action_kind == "discrete":
            lp_act = log_softmax(cache.action_out[opt_rows])
            acts = np.asarray(env_actions, dtype=np.int64)[opt_rows]
            logp[opt_rows] = lp_act[np.arange(len(opt_rows)), acts]
            entropy[opt_rows] = -(np.exp(lp_act) * lp_act).sum(axis=-1)
        else:
            a = np.asarray(env_actions)[opt_rows]
            mu = cache.action_out[opt_rows]
            var = np.exp(2.0 * cache.log_std)
            logp[opt_rows] = (
                -0.5 * ((a - mu) ** 2 / var + 2.0 * cache.log_std + np.log(2.0 * np.pi))
            ).sum(axis=-1)
            entropy[opt_rows] = (cache.log_std + 0.5 * np.log(2.0 * np.pi * np.e)).sum()

    ratio = np.exp(logp - behavior_logp)
    clipped_ratio = np.clip(ratio, 1.0 - clip_ratio, 1.0 + clip_ratio)
    unclipped = ratio * adv
    clipped = clipped_ratio * adv
    use_unclipped = unclipped <= clipped
    policy_terms = -np.minimum(unclipped, clipped)

    v = cache.value
    v_clip = v_old + np.clip(v - v_old, -clip_value, clip_value)
    err_raw = (v - vs_target) ** 2
    err_clip = (v_clip - vs_target) ** 2
    use_raw = err_raw >= err_clip
    value_terms = np.maximum(err_raw, err_clip)

    policy_loss = policy_terms.mean()
    value_loss = value_terms.mean()
    exploration = entropy.mean()
    total = policy_loss + value_coeff * value_loss - entropy_coeff * exploration
    if not np.isfinite(total):
        raise FloatingPointError(
            f"non-finite loss: policy={policy_loss} value={value_loss} entropy={exploration}"
        )

    # --- backward ---
    g_logp = np.where(use_unclipped, -ratio * adv, 0.0) / n
    g_ent = np.full(n, -entropy_coeff / n)
    g_ent[ctrl_rows] *= ctrl_entropy_extra

    grads = {k: np.zeros_like(p) for k, p in params.items()}
    d_h2 = np.zeros_like(cache.h2)

    # value head
    dv = np.where(use_raw, 2.0 * (v - vs_target),
                  2.0 * (v_clip - vs_target) * (np.abs(v - v_old) < clip_value))
    dv = value_coeff * dv / n
    grads["w_val"] = cache.h2.T @ dv[:, None]
    grads["b_val"] = np.array([dv.sum()])
    d_h2 += dv[:, None] * params["w_val"].T

    # controller heads
    if ctrl_rows.size:
        d_opt = _categorical_grad(cache.opt_logits[ctrl_rows], opt_choices[ctrl_rows],
                                  g_logp[ctrl_rows], g_ent[ctrl_rows])
        grads["w_opt"] = cache.h2[ctrl_rows].T @ d_opt
        grads["b_opt"] = d_opt.sum(axis=0)
        d_h2[ctrl_rows] += d_opt @ params["w_opt"].T
        if use_length_head:
            d_len = _categorical_grad(cache.len_logits[ctrl_rows], len_choices[ctrl_rows],
                                      g_logp[ctrl_rows], g_ent[ctrl_rows])
            grads["w_len"] = cache.h2[ctrl_rows].T @ d_len
            grads["b_len"] = d_len.sum(axis=0)
            d_h2[ctrl_rows] += d_len @ params["w_len"].T

    # action head
    if opt_rows.size:
        if spec.action_kind == "discrete":
            acts = np.asarray(env_actions, dtype=np.int64)[opt_rows]
            d_act = _categorical_grad(cache.action_out[opt_rows], acts,
                                      g_logp[opt_rows], g_ent[opt_rows])
            grads["w_act"] = cache.h2[opt_rows].T @ d_act
            grads["b_act"] = d_act.sum(axis=0)
            d_h2[opt_rows] += d_act @ params["w_act"].T
        else:
            a = np.asarray(env_actions)[opt_rows]
            mu = cache.action_out[opt_rows]
            var = np.exp(2.0 * cache.log_std)
            d_mu = g_logp[opt_rows][:, None] * (a - mu) / var
            grads["w_act"] = cache.h2[opt_rows].T @ d_mu
            grads["b_act"] = d_mu.sum(axis=0)
            d_h2[opt_rows] += d_mu @ params["w_act"].T
            d_ls = (g_logp[opt_rows][:, None] * ((a - mu) ** 2 / var - 1.0)).sum(axis=0)
            d_ls += g_ent[opt_rows].sum()
            # the clamp stops gradients outside the allowed range
            live = (params["log_std"] > LOG_STD_MIN) & (params["log_std"] < LOG_STD_MAX)
            grads["log_std"] = np.where(live, d_ls, 0.0)

    # trunk
    d_pre2 = d_h2 * (1.0 - cache.h2 ** 2)
    grads["w2"] = cache.h1.T @ d_pre2
    grads["b2"] = d_pre2.sum(axis=0)
    d_h1 = d_pre2 @ params["w2"].T
    d_pre1 = d_h1 * (1.0 - cache.h1 ** 2)
    grads["w1"] = cache.x.T @ d_pre1
    grads["b1"] = d_pre1.sum(axis=0)
    d_x = d_pre1 @ params["w1"].T
    d_embed = d_x[:, spec.obs_dim:]
    np.add.at(grads["embed"], cache.pidx, d_embed)

    per_policy = {}
    for name, terms in (("policy_loss", policy_terms),
                        ("value_loss", value_terms),
                        ("exploration_loss", entropy),
                        ("clip_fraction", (np.abs(ratio - 1.0) > clip_ratio).astype(float))):
        vals = np.zeros(spec.num_policies)
        for p in range(spec.num_policies):
            mask = cache.pidx == p
            vals[p] = terms[mask].mean() if mask.any() else 0.0
        per_policy[name] = vals

    report = LossReport(
        policy_loss=float(policy_loss),
        value_loss=float(value_loss),
        exploration_loss=float(exploration),
        total=float(total),
        clip_fraction=float((np.abs(ratio - 1.0) > clip_ratio).mean()),
        per_policy=per_policy,
    )
    return report, grads
