"""Call-and-return execution layer over an environment.

The wrapper tracks which policy is active.  A controller step consumes a
(option, length) decision, switches the active policy, and re-emits the same
observation without touching the environment; its reward depends on the
future, so it is flagged for learner-side fill (a boolean flag rather than a
magic sentinel value, since any real number is a legitimate reward).  An
option step routes the low-level action to the environment, earns that
option's intrinsic reward, and hands control back to the controller when the
chosen length expires or the episode ends.

Every option can be started everywhere and the only termination condition is
length expiry; there are no hardcoded initiation sets or learned termination
functions.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

from .envs import Env, option_reward
from .options import OptionSet


@dataclass(frozen=True)
class HierAction:
    """Composite action; the branch implied by the active policy picks fields."""

    env_action: object = None
    option_index: int = -1
    length_index: int = -1


@dataclass
class HierStep:
    """One recorded step: the acting policy, its action, and its typed reward."""

    obs: np.ndarray                 # observation the action was computed from
    policy_index: int
    action: HierAction
    chosen_length: int              # resolved length, controller steps only
    policy_reward: float            # option reward (scaled); 0 + flag on controller steps
    task_reward: float              # scaled task reward (0 on controller steps)
    raw_task_reward: float          # unscaled, for episode-return accounting
    flagged: bool
    done: bool
    next_obs: np.ndarray | None = None
    next_policy: int = -1
    info: dict = field(default_factory=dict)


class HierarchicalWrapper:
    def __init__(self, env: Env, opts: OptionSet, reward_scaling: float = 1.0,
                 fixed_length: int | None = None):
        self.env = env
        self.opts = opts
        self.reward_scaling = reward_scaling
        self.fixed_length = fixed_length
        self.current_policy = opts.controller_index
        self.option_length = 0
        self.option_steps = 0
        self.pending_obs: np.ndarray | None = None
        self._episode_over = True

    def hreset(self, rng: np.random.Generator) -> tuple[np.ndarray, int]:
        """Reset the inner env; the first action must be a controller action."""
        obs = self.env.reset(rng)
        self.current_policy = self.opts.controller_index
        self.option_length = 0
        self.option_steps = 0
        self.pending_obs = obs
        self._episode_over = False
        return obs, self.current_policy

    def hstep(self, action: HierAction) -> HierStep:
        if self._episode_over:
            raise RuntimeError("hstep() after episode end; call hreset()")
        acting = self.current_policy

        if acting == self.opts.controller_index:
            if not 0 <= action.option_index < self.opts.num_options:
                raise ValueError(f"option index {action.option_index} out of range")
            if self.fixed_length is not None:
                length = self.fixed_length
            else:
                length = self.opts.lengths[action.length_index]
            obs = self.pending_obs
            self.current_policy = action.option_index
            self.option_length = length
            self.option_steps = 0
            # no env transition: the chosen option acts on this same observation
            return HierStep(
                obs=obs, policy_index=acting, action=action, chosen_length=length,
                policy_reward=0.0, task_reward=0.0, raw_task_reward=0.0,
                flagged=True, done=False,
                next_obs=obs, next_policy=self.current_policy,
            )

        res = self.env.step(action.env_action)
        spec = self.opts.options[acting]
        reward = option_reward(spec, res.info, res.task_reward, self.reward_scaling)
        self.option_steps += 1
        obs = self.pending_obs
        self.pending_obs = res.obs
        if res.done:
            self._episode_over = True
            self.current_policy = self.opts.controller_index
        elif self.option_steps >= self.option_length:
            self.current_policy = self.opts.controller_index
        return HierStep(
            obs=obs, policy_index=acting, action=action, chosen_length=0,
            policy_reward=reward, task_reward=res.task_reward * self.reward_scaling,
            raw_task_reward=res.task_reward,
            flagged=False, done=res.done,
            next_obs=res.obs, next_policy=self.current_policy,
            info=res.info,
        )


@dataclass
class ConformanceReport:
    ok: bool
    violations: list[str]


def trace_conformance(trace: list[HierStep], opts: OptionSet,
                      fixed_length: int | None = None) -> ConformanceReport:
    """Validate a recorded rollout against the trajectory schema.

    Checks observation duplication at controller steps, policy-index
    continuity (each controller decision is followed by exactly
    min(length, steps-until-done) steps of the chosen option), option-length
    bookkeeping, and reward flagging.
    """
    v: list[str] = []
    ctrl = opts.controller_index
    n = len(trace)
    i = 0
    expect_controller = True
    while i < n:
        row = trace[i]
        if expect_controller and row.policy_index != ctrl:
            v.append(f"step {i}: expected a controller step, got policy {row.policy_index}")
            break
        if row.policy_index == ctrl:
            if not row.flagged:
                v.append(f"step {i}: controller step not flagged for reward fill")
            if row.done:
                v.append(f"step {i}: controller step marked done")
            if row.task_reward != 0.0:
                v.append(f"step {i}: controller step carries a task reward")
            if not 0 <= row.action.option_index < opts.num_options:
                v.append(f"step {i}: controller chose invalid option {row.action.option_index}")
                break
            length = row.chosen_length
            if fixed_length is not None:
                if length != fixed_length:
                    v.append(f"step {i}: chosen length {length} != fixed length {fixed_length}")
            elif length not in opts.lengths:
                v.append(f"step {i}: chosen length {length} not in the menu {opts.lengths}")
            if i + 1 < n and not np.array_equal(row.obs, trace[i + 1].obs):
                v.append(f"step {i}: observation not duplicated at controller step")
            # walk the option span
            option = row.action.option_index
            span = 0
            j = i + 1
            ended_by_done = False
            while j < n and trace[j].policy_index == option and span < length:
                if trace[j].flagged:
                    v.append(f"step {j}: option step carries a flagged reward")
                span += 1
                if trace[j].done:
                    ended_by_done = True
                    j += 1
                    break
                j += 1
            if j < n and not ended_by_done and span < length and trace[j].policy_index != option:
                v.append(f"step {i}: option {option} ran {span} of {length} steps without a done")
            if j < n and span == length and trace[j].policy_index == option:
                v.append(f"step {i}: option {option} ran longer than its length {length}")
            if j <= i + 1 and j < n:
                v.append(f"step {i}: controller step not followed by an option step")
                break
            i = j
            expect_controller = True
            continue
        # option step outside any controller span
        v.append(f"step {i}: option step without a preceding controller decision")
        break
    return ConformanceReport(ok=not v, violations=v)


def dump_trace_csv(trace: list[HierStep], path) -> None:
    """CSV with one row per step: the trajectory-schema columns."""
    with open(path, "w", encoding="utf-8", newline="") as f:
        w = csv.writer(f)
        w.writerow(["step", "policy_index", "action", "task_reward",
                    "policy_reward", "flagged", "done"])
        for i, row in enumerate(trace):
            if row.flagged:
                action = f"option{row.action.option_index}:len{row.chosen_length}"
            else:
                action = str(row.action.env_action)
            w.writerow([i, row.policy_index, action, row.task_reward,
                        row.policy_reward, int(row.flagged), int(row.done)])
