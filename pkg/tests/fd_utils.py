"""Shared finite-difference harness for checking the hand-written gradients.

Used by both the unit tests and the acceptance suite: builds random small
training minibatches covering every head and masking pattern, and compares
the analytic gradients against central finite differences of the scalar loss.
"""

import numpy as np

from sol.backprop import ppo_loss_and_grads
from sol.network import LOG_STD_MAX, LOG_STD_MIN, NetSpec, init_params


def make_case(rng, *, action_kind, n=6, num_options=2, num_lengths=3,
              row_mix="mixed", use_length_head=True, log_std_at_clamp=False):
    """One random loss evaluation: (kwargs for ppo_loss_and_grads, params, spec)."""
    spec = NetSpec(obs_dim=4, action_kind=action_kind,
                   action_dim=3 if action_kind == "discrete" else 2,
                   num_options=num_options, num_lengths=num_lengths,
                   hidden_size=8, embed_dim=4)
    params = init_params(spec, rng)
    # init uses small head scales; roughen everything so gradients are generic
    for k in params:
        params[k] = params[k] + 0.3 * rng.standard_normal(params[k].shape)
    if action_kind == "continuous":
        if log_std_at_clamp:
            # strictly outside the clamp range, so the loss is locally flat in
            # log_std and finite differences agree with the zeroed gradient
            params["log_std"] = np.array([LOG_STD_MIN - 0.5,
                                          LOG_STD_MAX + 0.5])[:spec.action_dim]
        else:
            params["log_std"] = rng.uniform(-1.0, 0.5, size=spec.action_dim)

    if row_mix == "mixed":
        pidx = rng.integers(0, spec.num_policies, size=n)
        pidx[0] = spec.num_options   # guarantee both kinds appear
        pidx[1] = 0
    elif row_mix == "all_ctrl":
        pidx = np.full(n, spec.num_options)
    else:
        pidx = rng.integers(0, spec.num_options, size=n)

    if action_kind == "discrete":
        env_actions = rng.integers(0, spec.action_dim, size=n)
    else:
        env_actions = rng.standard_normal((n, spec.action_dim))
    kwargs = dict(
        obs=rng.standard_normal((n, spec.obs_dim)),
        pidx=pidx,
        env_actions=env_actions,
        opt_choices=rng.integers(0, spec.num_options, size=n),
        len_choices=rng.integers(0, spec.num_lengths, size=n),
        behavior_logp=rng.normal(-1.0, 0.5, size=n),
        adv=rng.standard_normal(n),
        vs_target=rng.standard_normal(n),
        v_old=rng.standard_normal(n),
        clip_ratio=0.2,
        clip_value=1.0,
        value_coeff=0.5,
        entropy_coeff=0.01,
        use_length_head=use_length_head,
    )
    return kwargs, params, spec


def fd_grads(params, spec, kwargs, eps=1e-6):
    """Central finite differences of the total loss over every parameter."""
    out = {}
    for name, p in params.items():
        g = np.zeros_like(p)
        flat = p.reshape(-1)
        gf = g.reshape(-1)
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + eps
            hi, _ = ppo_loss_and_grads(params, spec, **kwargs)
            flat[i] = orig - eps
            lo, _ = ppo_loss_and_grads(params, spec, **kwargs)
            flat[i] = orig
            gf[i] = (hi.total - lo.total) / (2.0 * eps)
        out[name] = g
    return out


def max_relative_error(analytic, numeric):
    """Worst per-tensor relative gradient error across all parameters."""
    worst = 0.0
    for name in numeric:
        a, f = analytic[name], numeric[name]
        denom = max(np.linalg.norm(f), 1e-8)
        err = np.linalg.norm(a - f) / denom if np.linalg.norm(f) > 1e-10 \
            else np.abs(a - f).max()
        worst = max(worst, err)
    return worst


def case_grid(seed=0, count=120):
    """Deterministic stream of >= ``count`` cases covering every head/mask mode."""
    rng = np.random.default_rng(seed)
    modes = [
        dict(action_kind="discrete", row_mix="mixed"),
        dict(action_kind="discrete", row_mix="all_ctrl"),
        dict(action_kind="discrete", row_mix="all_opt"),
        dict(action_kind="discrete", row_mix="mixed", use_length_head=False),
        dict(action_kind="continuous", row_mix="mixed"),
        dict(action_kind="continuous", row_mix="all_opt"),
        dict(action_kind="continuous", row_mix="mixed", use_length_head=False),
        dict(action_kind="continuous", row_mix="all_opt", log_std_at_clamp=True),
    ]
    cases = []
    i = 0
    while len(cases) < count:
        cases.append(make_case(rng, **modes[i % len(modes)]))
        i += 1
    return cases
