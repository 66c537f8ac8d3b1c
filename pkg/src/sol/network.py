"""The single shared policy/value network and its distribution heads.

One MLP trunk represents every option policy and the controller.  The input is
the observation concatenated with a learned embedding of the policy index; the
outputs are three heads (environment-action distribution, option distribution,
option-length distribution) plus a scalar value conditioned on the policy
index.  Which head is *used* at a given step is decided downstream by that
step's policy index.

Parameters live in a flat ``dict[str, np.ndarray]`` so the optimizer and the
checkpoint format can treat them uniformly.  Everything is float64 numpy; the
exact reverse-mode gradients live in :mod:`sol.backprop`.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

LOG_STD_MIN = -5.0
LOG_STD_MAX = 2.0


@dataclass(frozen=True)
class NetSpec:
    """Shapes the network is built for."""

    obs_dim: int
    action_kind: str            # "discrete" | "continuous"
    action_dim: int             # number of actions, or action-vector dimension
    num_options: int
    num_lengths: int
    hidden_size: int = 64
    embed_dim: int = 16

    def __post_init__(self):
        if self.action_kind not in ("discrete", "continuous"):
            raise ValueError(f"unknown action kind {self.action_kind!r}")

    @property
    def num_policies(self) -> int:
        return self.num_options + 1


def init_params(spec: NetSpec, rng: np.random.Generator) -> dict[str, np.ndarray]:
    h = spec.hidden_size
    d_in = spec.obs_dim + spec.embed_dim

    def dense(fan_in, fan_out, scale):
        return rng.normal(0.0, scale / np.sqrt(fan_in), size=(fan_in, fan_out))

    params = {
        "embed": rng.normal(0.0, 1.0 / np.sqrt(spec.embed_dim), size=(spec.num_policies, spec.embed_dim)),
        "w1": dense(d_in, h, 1.0),
        "b1": np.zeros(h),
        "w2": dense(h, h, 1.0),
        "b2": np.zeros(h),
        "w_opt": dense(h, spec.num_options, 0.01),
        "b_opt": np.zeros(spec.num_options),
        "w_len": dense(h, spec.num_lengths, 0.01),
        "b_len": np.zeros(spec.num_lengths),
        "w_val": dense(h, 1, 1.0),
        "b_val": np.zeros(1),
    }
    if spec.action_kind == "discrete":
        params["w_act"] = dense(h, spec.action_dim, 0.01)
        params["b_act"] = np.zeros(spec.action_dim)
    else:
        params["w_act"] = dense(h, spec.action_dim, 0.01)
        params["b_act"] = np.zeros(spec.action_dim)
        params["log_std"] = np.zeros(spec.action_dim)
    return params


def zeros_like_params(params: dict[str, np.ndarray]) -> dict[str, np.ndarray]:
    return {k: np.zeros_like(v) for k, v in params.items()}


def copy_params(params: dict[str, np.ndarray]) -> dict[str, np.ndarray]:
    return {k: v.copy() for k, v in params.items()}


@dataclass
class ForwardCache:
    """Activations kept for the backward pass, plus all head outputs."""

    obs: np.ndarray
    pidx: np.ndarray
    x: np.ndarray               # trunk input (obs ++ policy embedding)
    h1: np.ndarray              # tanh(x w1 + b1)
    h2: np.ndarray              # tanh(h1 w2 + b2)
    action_out: np.ndarray      # logits (discrete) or means (continuous)
    log_std: np.ndarray | None  # clamped, continuous only
    opt_logits: np.ndarray
    len_logits: np.ndarray
    value: np.ndarray


def forward(params: dict[str, np.ndarray], spec: NetSpec,
            obs: np.ndarray, pidx: np.ndarray) -> ForwardCache:
    """Batched forward pass; ``obs`` is (N, obs_dim), ``pidx`` is (N,) ints."""
    obs = np.atleast_2d(obs)
    if obs.shape[1] != spec.obs_dim:
        raise ValueError(f"observation dim {obs.shape[1]}, expected {spec.obs_dim}")
    pidx = np.asarray(pidx, dtype=np.int64)
    if np.any(pidx < 0) or np.any(pidx >= spec.num_policies):
        raise ValueError("policy index out of range")

    x = np.concatenate([obs, params["embed"][pidx]], axis=1)
    h1 = np.tanh(x @ params["w1"] + params["b1"])
    h2 = np.tanh(h1 @ params["w2"] + params["b2"])

    action_out = h2 @ params["w_act"] + params["b_act"]
    log_std = None
    if spec.action_kind == "continuous":
        log_std = np.clip(params["log_std"], LOG_STD_MIN, LOG_STD_MAX)
    return ForwardCache(
        obs=obs, pidx=pidx, x=x, h1=h1, h2=h2,
        action_out=action_out,
        log_std=log_std,
        opt_logits=h2 @ params["w_opt"] + params["b_opt"],
        len_logits=h2 @ params["w_len"] + params["b_len"],
        value=(h2 @ params["w_val"] + params["b_val"])[:, 0],
    )


# --- categorical head ---

def log_softmax(logits: np.ndarray) -> np.ndarray:
    z = logits - logits.max(axis=-1, keepdims=True)
    return z - np.log(np.exp(z).sum(axis=-1, keepdims=True))


def softmax(logits: np.ndarray) -> np.ndarray:
    return np.exp(log_softmax(logits))


def categorical_log_prob(logits: np.ndarray, samples: np.ndarray) -> np.ndarray:
    samples = np.asarray(samples, dtype=np.int64)
    if np.any(samples < 0) or np.any(samples >= logits.shape[-1]):
        raise ValueError("sample outside categorical support")
    lp = log_softmax(logits)
    return lp[np.arange(len(samples)), samples]


def categorical_entropy(logits: np.ndarray) -> np.ndarray:
    lp = log_softmax(logits)
    return -(np.exp(lp) * lp).sum(axis=-1)


def sample_categorical(logits: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    # Gumbel-max keeps a single rng draw per row regardless of class count.
    g = rng.gumbel(size=logits.shape)
    return np.argmax(logits + g, axis=-1)


# --- diagonal Gaussian head ---

def gaussian_log_prob(mean: np.ndarray, log_std: np.ndarray, actions: np.ndarray) -> np.ndarray:
    var = np.exp(2.0 * log_std)
    return (-0.5 * ((actions - mean) ** 2 / var + 2.0 * log_std + np.log(2.0 * np.pi))).sum(axis=-1)


def gaussian_entropy(log_std: np.ndarray) -> float:
    return float((log_std + 0.5 * np.log(2.0 * np.pi * np.e)).sum())


def sample_gaussian(mean: np.ndarray, log_std: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    return mean + np.exp(log_std) * rng.standard_normal(mean.shape)


def policy_log_probs(cache: ForwardCache, spec: NetSpec,
                     env_actions: np.ndarray,
                     opt_choices: np.ndarray,
                     len_choices: np.ndarray,
                     use_length_head: bool = True) -> np.ndarray:
    """Per-step log-probability of the recorded composite action under the
    head selected by the step's policy index.

    Controller steps use the option head (plus the length head unless a fixed
    option length disables it); option steps use the environment-action head.
    Entries of ``opt_choices``/``len_choices`` (or ``env_actions``) at steps of
    the other kind are ignored.
    """
    is_ctrl = cache.pidx == spec.num_options
    n = len(cache.pidx)
    out = np.zeros(n)
    if is_ctrl.any():
        rows = np.flatnonzero(is_ctrl)
        out[rows] = categorical_log_prob(cache.opt_logits[rows], opt_choices[rows])
        if use_length_head:
            out[rows] += categorical_log_prob(cache.len_logits[rows], len_choices[rows])
    opt_rows = np.flatnonzero(~is_ctrl)
    if opt_rows.size:
        if spec.action_kind == "discrete":
            out[opt_rows] = categorical_log_prob(
                cache.action_out[opt_rows], np.asarray(env_actions)[opt_rows])
        else:
            out[opt_rows] = gaussian_log_prob(
                cache.action_out[opt_rows], cache.log_std, np.asarray(env_actions)[opt_rows])
    return out
