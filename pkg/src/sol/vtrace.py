"""Single-pass mixed-policy V-trace advantages and value targets.

A trajectory batch interleaves steps of several policies (options plus the
controller).  ``vtrace_parallel`` computes truncated-importance-sampling value
targets and advantages for *all* policies in one reverse loop over time,
vectorized over trajectories.  Per-policy state is carried in (B, P) buffers:

- base-case anchoring: the last batch occurrence of each policy bootstraps on
  itself via the substitution next_value = (value - reward) / gamma, which
  makes that step's delta vanish (adv = 0, vs = value) whenever the step is
  not terminal for its policy;
- episode termination masking: a done marks every policy, and each policy's
  last step at-or-before the done gets its bootstrap zeroed, so nothing from
  a later episode leaks backwards;
- option-switch re-anchoring: when an option's invocation ends and the
  controller picks a *different* option next, the earlier invocation's last
  step re-anchors instead of chaining into the option's later occurrences.
  Detecting a switch needs a two-step lookahead, so switches within the last
  three steps of a segment are not re-anchored; the reference implementation
  reproduces the same boundary behavior.

Discounting is per occurrence-step of a policy: a controller decision costs a
single gamma regardless of how long the chosen option runs (semi-MDP style),
and an option re-invoked back-to-back chains across the controller step with
one gamma.

``vtrace_reference`` is the independent check: it splits each trajectory into
per-policy sub-sequences and runs textbook scalar V-trace on each with the
matching bootstrap, one policy at a time.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class VtraceInputs:
    """Everything the kernel consumes, all arrays shaped (B, T)."""

    ratios: np.ndarray
    values: np.ndarray
    dones: np.ndarray
    rewards: np.ndarray
    policy_indices: np.ndarray
    num_policies: int
    gamma: float
    rho_hat: float = 1.0
    c_hat: float = 1.0

    def __post_init__(self):
        b, t = self.ratios.shape
        for name in ("values", "dones", "rewards", "policy_indices"):
            arr = getattr(self, name)
            if arr.shape != (b, t):
                raise ValueError(f"{name} has shape {arr.shape}, expected {(b, t)}")
        if np.any(self.ratios <= 0):
            raise ValueError("ratios must be strictly positive")
        if not np.all(np.isfinite(self.rewards)):
            raise ValueError("rewards must be finite")
        if np.any(self.policy_indices < 0) or np.any(self.policy_indices >= self.num_policies):
            raise ValueError("policy index out of range")


@dataclass(frozen=True)
class VtraceOutputs:
    adv: np.ndarray
    vs: np.ndarray


def vtrace_parallel(inp: VtraceInputs) -> VtraceOutputs:
    """Advantages and value targets for every policy, one backward pass over T."""
    ratios = inp.ratios
    values = inp.values
    rewards = inp.rewards
    dones = inp.dones.astype(bool)
    pidx = inp.policy_indices
    b, t = ratios.shape
    p = inp.num_policies
    gamma = inp.gamma
    controller = p - 1

    rho = np.minimum(inp.rho_hat, ratios)
    c = np.minimum(inp.c_hat, ratios)

    adv = np.zeros((b, t))
    vs = np.zeros((b, t))

    next_values = np.zeros((b, p))
    next_vs = np.zeros((b, p))
    base_handled = np.zeros((b, p), dtype=bool)
    # A done marks every policy, and each policy consumes its own mark at its
    # next-earlier step.  Tracked in O(B) per step instead of (B, P) flags:
    # "marked" == the nearest done at-or-after i falls before the policy's
    # next occurrence (i.e. it has not been consumed yet).
    last_done = np.full(b, t + 1)       # smallest done index >= i seen so far
    next_visit = np.full((b, p), t)     # policy's next occurrence after i
    rows = np.arange(b)

    for i in reversed(range(t)):
        cur = pidx[:, i]

        last_done = np.where(dones[:, i], i, last_done)
        not_done_gamma = np.where(last_done < next_visit[rows, cur], 0.0, gamma)

        if i < t - 3:
            switched = (pidx[:, i + 1] == controller) & (pidx[:, i] != pidx[:, i + 2])
            base_handled[rows, cur] &= ~switched

        # Fresh base case: anchor on the step's own value prediction.
        fresh = ~base_handled[rows, cur]
        nv = np.where(fresh, (values[:, i] - rewards[:, i]) / gamma, next_values[rows, cur])
        nvs = np.where(fresh, nv, next_vs[rows, cur])
        base_handled[rows, cur] = True

        delta = rho[:, i] * (rewards[:, i] + not_done_gamma * nv - values[:, i])
        adv[:, i] = rho[:, i] * (rewards[:, i] + not_done_gamma * nvs - values[:, i])
        vs[:, i] = values[:, i] + delta + not_done_gamma * c[:, i] * (nvs - nv)

        next_vs[rows, cur] = vs[:, i]
        next_values[rows, cur] = values[:, i]
        next_visit[rows, cur] = i

    return VtraceOutputs(adv=adv, vs=vs)


def anchored_steps(policy_indices: np.ndarray, dones: np.ndarray, num_policies: int) -> np.ndarray:
    """(B, T) bool mask of steps where the kernel anchors a fresh base case
    with a live (non-terminal) bootstrap substitution.

    These are exactly the steps forced to adv = 0, vs = value.
    """
    b, t = policy_indices.shape
    controller = num_policies - 1
    mask = np.zeros((b, t), dtype=bool)
    for bi in range(b):
        handled = np.zeros(num_policies, dtype=bool)
        ep_done = np.zeros(num_policies, dtype=bool)
        for i in reversed(range(t)):
            cur = policy_indices[bi, i]
            if dones[bi, i]:
                ep_done[:] = True
            terminal = ep_done[cur]
            ep_done[cur] = False
            if i < t - 3 and policy_indices[bi, i + 1] == controller \
                    and policy_indices[bi, i] != policy_indices[bi, i + 2]:
                handled[cur] = False
            if not handled[cur] and not terminal:
                mask[bi, i] = True
            handled[cur] = True
    return mask


def vtrace_reference(inp: VtraceInputs) -> VtraceOutputs:
    """Per-policy sequential reference for ``vtrace_parallel``.

    For each trajectory and each policy, collect that policy's occurrence
    steps, decide per occurrence whether it is episode-terminal (a done falls
    between it and the policy's next occurrence) or an anchor (last occurrence,
    or the invocation ended with a switch to a different option, two-step
    lookahead permitting), then run the scalar V-trace recursion backwards.
    """
    b, t = inp.ratios.shape
    controller = inp.num_policies - 1
    gamma = inp.gamma
    adv = np.zeros((b, t))
    vs = np.zeros((b, t))

    for bi in range(b):
        pidx = inp.policy_indices[bi]
        done_steps = np.flatnonzero(inp.dones[bi])
        for pol in range(inp.num_policies):
            ts = np.flatnonzero(pidx == pol)
            if ts.size == 0:
                continue
            n = ts.size
            terminal = np.zeros(n, dtype=bool)
            anchor = np.zeros(n, dtype=bool)
            for j in range(n):
                lo = ts[j]
                hi = ts[j + 1] if j + 1 < n else t
                terminal[j] = any(lo <= d < hi for d in done_steps)
                if j == n - 1:
                    anchor[j] = True
                elif ts[j] < t - 3 and pidx[ts[j] + 1] == controller \
                        and pidx[ts[j] + 2] != pol:
                    anchor[j] = True

            next_value = 0.0
            next_vs_val = 0.0
            for j in reversed(range(n)):
                i = ts[j]
                r = inp.rewards[bi, i]
                v = inp.values[bi, i]
                rho = min(inp.rho_hat, inp.ratios[bi, i])
                cc = min(inp.c_hat, inp.ratios[bi, i])
                if anchor[j]:
                    nv = (v - r) / gamma
                    nvs = nv
                else:
                    nv = next_value
                    nvs = next_vs_val
                g = 0.0 if terminal[j] else gamma
                delta = rho * (r + g * nv - v)
                adv[bi, i] = rho * (r + g * nvs - v)
                vs[bi, i] = v + delta + g * cc * (nvs - nv)
                next_value = v
                next_vs_val = vs[bi, i]

    return VtraceOutputs(adv=adv, vs=vs)


def fill_controller_rewards(
    rewards: np.ndarray,
    task_rewards: np.ndarray,
    policy_indices: np.ndarray,
    dones: np.ndarray,
    num_policies: int,
    controller_reward_scale: float,
) -> np.ndarray:
    """Resolve flagged controller rewards in a (B, T) reward tensor.

    Each controller step receives the sum of task rewards over the option
    invocation it launched: the steps strictly after it, up to and including
    the invocation's last executed step (next controller step, episode end, or
    segment end, whichever comes first), times ``controller_reward_scale``.
    A controller step with no following steps in the segment gets 0 and relies
    purely on the bootstrap.

    Returns a new array; the input is not modified.
    """
    out = rewards.copy()
    b, t = rewards.shape
    controller = num_policies - 1
    for bi in range(b):
        ctrl_steps = np.flatnonzero(policy_indices[bi] == controller)
        for k, s in enumerate(ctrl_steps):
            end = ctrl_steps[k + 1] if k + 1 < ctrl_steps.size else t
            total = 0.0
            for i in range(s + 1, end):
                total += task_rewards[bi, i]
                if dones[bi, i]:
                    break
            out[bi, s] = total * controller_reward_scale
    return out
