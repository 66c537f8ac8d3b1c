"""Point-mass mazes with dense distance-delta reward.

Double-integrator dynamics on a cell grid: the action is a 2-D force in
[-1, 1]^2, dt = 0.1, per-axis velocity clamp |v| <= 1, inelastic wall
collisions (the offending velocity component is zeroed).  The task reward is
the previous distance to the goal minus the current one, so episode return
telescopes to initial distance minus final distance.  Reaching the goal radius
(0.45 cells) ends the episode.

Two layouts ship as assets: the standard three-armed U maze, and a "G" maze
where the agent starts wall-adjacent to the goal but the only path first leads
away from it, creating a local optimum in the dense reward.
"""

from __future__ import annotations

import math

import numpy as np

from ..options import OptionSpec, RewardKind
from .base import Env, StepResult, load_asset

DT = 0.1
FORCE_SCALE = 1.0
V_MAX = 1.0
GOAL_RADIUS = 0.45
TIME_LIMIT = 1000
WALL_MARGIN = 1e-3


class PointMazeEnv(Env):
    action_kind = "continuous"
    action_dim = 2
    obs_dim = 6

    def __init__(self, asset: str, env_id: str):
        self.env_id = env_id
        self.map = load_asset(asset)
        if self.map.goal is None:
            raise ValueError(f"{asset}: point maze needs a goal cell")
        self.h, self.w = self.map.height, self.map.width
        # x runs along columns, y along rows; cell (r, c) spans [c, c+1) x [r, r+1)
        self.start = np.array([self.map.agent[1] + 0.5, self.map.agent[0] + 0.5])
        self.goal = np.array([self.map.goal[1] + 0.5, self.map.goal[0] + 0.5])
        self._wall_rows = [[bool(w) for w in row] for row in self.map.walls]
        self._done = True

    def default_options(self) -> tuple[OptionSpec, ...]:
        return (
            OptionSpec(0, "vel+x", RewardKind.VELOCITY_POS_X, 1.0),
            OptionSpec(1, "vel-x", RewardKind.VELOCITY_NEG_X, 1.0),
            OptionSpec(2, "vel+y", RewardKind.VELOCITY_POS_Y, 1.0),
            OptionSpec(3, "vel-y", RewardKind.VELOCITY_NEG_Y, 1.0),
            OptionSpec(4, "goal", RewardKind.TASK_REWARD, 1.0),
        )

    def _wall_at(self, x: float, y: float) -> bool:
        c = int(x)
        r = int(y)
        if x < 0 or y < 0 or r >= self.h or c >= self.w:
            return True
        return self._wall_rows[r][c]

    def _obs(self) -> np.ndarray:
        return np.array([
            self._px / self.w, self._py / self.h,
            self._vx, self._vy,
            self.goal[0] / self.w, self.goal[1] / self.h,
        ])

    def reset(self, rng: np.random.Generator) -> np.ndarray:
        self._px, self._py = float(self.start[0]), float(self.start[1])
        self._vx = self._vy = 0.0
        self._t = 0
        self._done = False
        return self._obs()

    def distance_to_goal(self) -> float:
        return math.hypot(self._px - self.goal[0], self._py - self.goal[1])

    def step(self, action) -> StepResult:
        # scalar-float hot path: this runs tens of millions of times per run
        if self._done:
            raise RuntimeError("step() after episode end; call reset()")
        fx = min(1.0, max(-1.0, float(action[0])))
        fy = min(1.0, max(-1.0, float(action[1])))
        self._t += 1
        prev_dist = self.distance_to_goal()

        self._vx = min(V_MAX, max(-V_MAX, self._vx + fx * FORCE_SCALE * DT))
        self._vy = min(V_MAX, max(-V_MAX, self._vy + fy * FORCE_SCALE * DT))
        # axis-by-axis move with inelastic wall collision
        nx = self._px + self._vx * DT
        if self._wall_at(nx, self._py):
            self._px = math.floor(self._px) + (1.0 - WALL_MARGIN if self._vx > 0 else WALL_MARGIN)
            self._vx = 0.0
        else:
            self._px = nx
        ny = self._py + self._vy * DT
        if self._wall_at(self._px, ny):
            self._py = math.floor(self._py) + (1.0 - WALL_MARGIN if self._vy > 0 else WALL_MARGIN)
            self._vy = 0.0
        else:
            self._py = ny

        dist = self.distance_to_goal()
        reward = prev_dist - dist
        success = dist <= GOAL_RADIUS
        done = success or self._t >= TIME_LIMIT
        self._done = done
        info = {
            "vx": self._vx,
            "vy": self._vy,
            "success": 1.0 if success else 0.0,
        }
        return StepResult(obs=self._obs(), task_reward=reward, done=done, info=info)
