"""Gold-or-stairs hallway with a hard reward trade-off.

The agent starts between a staircase on the left and a line of gold piles on
alternating tiles to the right.  Each gold pile entered is worth 1 point; the
stairs are worth 20 and end the episode.  The time limit is 40 steps.  Going
right the whole time collects 20 gold; exiting immediately is also worth 20;
the optimum is 8 gold (16 steps right) followed by 24 steps left to the
stairs, for 28.
"""

from __future__ import annotations

import numpy as np

from ..options import OptionSpec, RewardKind
from .base import Env, GRID_DELTAS, StepResult, load_asset

TIME_LIMIT = 40
STAIRS_REWARD = 20.0


class TreasureDashEnv(Env):
    env_id = "treasure_dash"
    action_kind = "discrete"
    action_dim = len(GRID_DELTAS)

    def __init__(self):
        self.map = load_asset("treasure_dash.txt")
        self.h, self.w = self.map.height, self.map.width
        self._walls = [[bool(w) for w in row] for row in self.map.walls]
        # planes: agent, gold, stairs; scalars: gold collected, time remaining
        self._hw = self.h * self.w
        self.obs_dim = 3 * self._hw + 2
        self.total_gold = len(self.map.gold)
        self._pos = self.map.agent
        self._gold = set(self.map.gold)
        self._t = 0
        self._score = 0.0
        self._visited: set[tuple[int, int]] = set()
        self._done = True

    def default_options(self) -> tuple[OptionSpec, ...]:
        return (
            OptionSpec(0, "stairs", RewardKind.AT_STAIRS, 1.0),
            OptionSpec(1, "gold", RewardKind.DELTA_GOLD, 1.0),
        )

    def _flat(self, cell: tuple[int, int]) -> int:
        return cell[0] * self.w + cell[1]

    def _obs(self) -> np.ndarray:
        # incrementally maintained flat buffer; only scalars refresh each step
        buf = self._buf
        buf[3 * self._hw] = len(self._gold) / self.total_gold
        buf[3 * self._hw + 1] = (TIME_LIMIT - self._t) / TIME_LIMIT
        return buf.copy()

    def reset(self, rng: np.random.Generator) -> np.ndarray:
        self._pos = self.map.agent
        self._gold = set(self.map.gold)
        self._t = 0
        self._score = 0.0
        self._visited = {self._pos}
        self._done = False
        self._buf = np.zeros(3 * self._hw + 2)
        self._buf[self._flat(self._pos)] = 1.0
        for g in self._gold:
            self._buf[self._hw + self._flat(g)] = 1.0
        self._buf[2 * self._hw + self._flat(self.map.stairs)] = 1.0
        return self._obs()

    def step(self, action: int) -> StepResult:
        if self._done:
            raise RuntimeError("step() after episode end; call reset()")
        if not 0 <= int(action) < self.action_dim:
            raise ValueError(f"action {action} out of range")
        self._t += 1
        dr, dc = GRID_DELTAS[int(action)]
        r, c = self._pos[0] + dr, self._pos[1] + dc
        if not self._walls[r][c]:
            self._buf[self._flat(self._pos)] = 0.0
            self._pos = (r, c)
            self._buf[self._flat(self._pos)] = 1.0

        reward = 0.0
        delta_gold = 0.0
        at_stairs = 0.0
        done = False
        if self._pos in self._gold:
            self._gold.discard(self._pos)
            self._buf[self._hw + self._flat(self._pos)] = 0.0
            reward += 1.0
            delta_gold = 1.0
        if self._pos == self.map.stairs:
            reward += STAIRS_REWARD
            at_stairs = 1.0
            done = True
        if self._t >= TIME_LIMIT:
            done = True
        new_cell = 0.0 if self._pos in self._visited else 1.0
        self._visited.add(self._pos)
        self._score += reward
        self._done = done
        # delta_health is always 0 here but stays in the signal set so
        # health-reward options remain runnable (option-quality ablations).
        info = {
            "delta_score": reward,
            "delta_health": 0.0,
            "delta_gold": delta_gold,
            "at_stairs": at_stairs,
            "new_cell": new_cell,
        }
        return StepResult(obs=self._obs(), task_reward=reward, done=done, info=info)
