"""Fight-retreat-heal arena.

A horde of zombies fills the room; a temple area in one corner is off limits
to them.  Destroying a zombie gives 20 score, the agent heals 1 hit point per
10 timesteps, and zombies adjacent to the agent bite for 1 damage with
probability 1/2 each step.  The horde is too strong to fight head-on, so the
winning pattern is to trade a few hits, retreat to the temple to heal, and
come back out.  Time limit 1500 steps.

Combat rules (the credit-assignment structure matters, not the exact numbers):
moving onto a zombie attacks it for 1 damage instead of moving; zombies have
2 hit points; the agent has 14; zombies step greedily toward the agent,
preferring the axis with the larger gap, and never enter walls, the temple,
or occupied tiles.
"""

from __future__ import annotations

import numpy as np

from ..options import OptionSpec, RewardKind
from .base import Env, GRID_DELTAS, StepResult, load_asset

TIME_LIMIT = 1500
MAX_HEALTH = 14
ZOMBIE_HP = 2
KILL_SCORE = 20.0
HEAL_PERIOD = 10
BITE_PROB = 0.5


class ZombieHordeEnv(Env):
    env_id = "zombie_horde"
    action_kind = "discrete"
    action_dim = len(GRID_DELTAS)

    def __init__(self):
        self.map = load_asset("zombie_horde.txt")
        self.h, self.w = self.map.height, self.map.width
        self.temple = set(self.map.temple)
        self._walls = [[bool(w) for w in row] for row in self.map.walls]
        # planes: agent, zombies, temple; scalars: health, score, time left
        self._hw = self.h * self.w
        self.obs_dim = 3 * self._hw + 3
        self._max_score = KILL_SCORE * len(self.map.zombies)
        self._done = True
        self._rng: np.random.Generator | None = None

    def default_options(self) -> tuple[OptionSpec, ...]:
        return (
            OptionSpec(0, "score", RewardKind.DELTA_SCORE, 1.0),
            OptionSpec(1, "health", RewardKind.DELTA_HEALTH, 1.0),
        )

    def _flat(self, cell: tuple[int, int]) -> int:
        return cell[0] * self.w + cell[1]

    def _obs(self) -> np.ndarray:
        # incrementally maintained flat buffer; only scalars refresh each step
        buf = self._buf
        buf[3 * self._hw] = self._health / MAX_HEALTH
        buf[3 * self._hw + 1] = self._score / self._max_score
        buf[3 * self._hw + 2] = (TIME_LIMIT - self._t) / TIME_LIMIT
        return buf.copy()

    def reset(self, rng: np.random.Generator) -> np.ndarray:
        self._rng = rng
        self._pos = self.map.agent
        self._zombies = {pos: ZOMBIE_HP for pos in self.map.zombies}
        self._health = MAX_HEALTH
        self._score = 0.0
        self._t = 0
        self._visited = {self._pos}
        self._done = False
        self._buf = np.zeros(3 * self._hw + 3)
        self._buf[self._flat(self._pos)] = 1.0
        for z in self._zombies:
            self._buf[self._hw + self._flat(z)] = 1.0
        for t in self.temple:
            self._buf[2 * self._hw + self._flat(t)] = 1.0
        return self._obs()

    def _blocked(self, cell: tuple[int, int]) -> bool:
        return (self._walls[cell[0]][cell[1]] or cell in self.temple
                or cell in self._zombies or cell == self._pos)

    def _move_zombies(self) -> None:
        for pos in sorted(self._zombies):
            hp = self._zombies[pos]
            dr = self._pos[0] - pos[0]
            dc = self._pos[1] - pos[1]
            if abs(dr) + abs(dc) <= 1:
                continue  # already adjacent; stay and bite
            vertical = (pos[0] + (1 if dr > 0 else -1), pos[1]) if dr else None
            horizontal = (pos[0], pos[1] + (1 if dc > 0 else -1)) if dc else None
            if abs(dr) >= abs(dc):
                steps = (vertical, horizontal)
            else:
                steps = (horizontal, vertical)
            for cand in steps:
                if cand is not None and not self._blocked(cand):
                    del self._zombies[pos]
                    self._zombies[cand] = hp
                    self._buf[self._hw + self._flat(pos)] = 0.0
                    self._buf[self._hw + self._flat(cand)] = 1.0
                    break

    def step(self, action: int) -> StepResult:
        if self._done:
            raise RuntimeError("step() after episode end; call reset()")
        if not 0 <= int(action) < self.action_dim:
            raise ValueError(f"action {action} out of range")
        self._t += 1
        health_before = self._health
        delta_score = 0.0

        dr, dc = GRID_DELTAS[int(action)]
        target = (self._pos[0] + dr, self._pos[1] + dc)
        if target in self._zombies:
            self._zombies[target] -= 1
            if self._zombies[target] <= 0:
                del self._zombies[target]
                self._buf[self._hw + self._flat(target)] = 0.0
                self._score += KILL_SCORE
                delta_score = KILL_SCORE
        elif not self._walls[target[0]][target[1]]:
            self._buf[self._flat(self._pos)] = 0.0
            self._pos = target
            self._buf[self._flat(target)] = 1.0

        self._move_zombies()
        for npos in ((self._pos[0] - 1, self._pos[1]), (self._pos[0] + 1, self._pos[1]),
                     (self._pos[0], self._pos[1] - 1), (self._pos[0], self._pos[1] + 1)):
            if npos in self._zombies and self._rng.random() < BITE_PROB:
                self._health -= 1

        if self._t % HEAL_PERIOD == 0 and 0 < self._health < MAX_HEALTH:
            self._health += 1

        new_cell = 0.0 if self._pos in self._visited else 1.0
        self._visited.add(self._pos)
        done = self._health <= 0 or not self._zombies or self._t >= TIME_LIMIT
        self._done = done
        info = {
            "delta_score": delta_score,
            "delta_health": float(self._health - health_before),
            "delta_gold": 0.0,
            "at_stairs": 0.0,
            "new_cell": new_cell,
        }
        return StepResult(obs=self._obs(), task_reward=delta_score, done=done, info=info)

    @property
    def zombies_destroyed(self) -> float:
        return self._score / KILL_SCORE
