"""Common environment interface and ASCII map loading.

Maps use '#' wall, '.' floor, 'A' agent start, 'G' goal, '$' gold, '>' stairs,
'T' temple, 'Z' zombie.  The canonical layouts ship as package assets.
"""

from __future__ import annotations

import importlib.resources
from dataclasses import dataclass, field

import numpy as np

from ..options import OptionSpec

GRID_ACTIONS = ("north", "south", "east", "west", "eat")
GRID_DELTAS = ((-1, 0), (1, 0), (0, 1), (0, -1), (0, 0))  # eat is a no-op


@dataclass
class StepResult:
    obs: np.ndarray
    task_reward: float
    done: bool
    info: dict[str, float] = field(default_factory=dict)


@dataclass
class AsciiMap:
    rows: list[str]
    walls: np.ndarray                 # (H, W) bool
    agent: tuple[int, int]
    goal: tuple[int, int] | None
    stairs: tuple[int, int] | None
    gold: list[tuple[int, int]]
    temple: list[tuple[int, int]]
    zombies: list[tuple[int, int]]

    @property
    def height(self) -> int:
        return len(self.rows)

    @property
    def width(self) -> int:
        return len(self.rows[0])


def parse_map(text: str) -> AsciiMap:
    rows = [r for r in text.splitlines() if r]
    if not rows or len({len(r) for r in rows}) != 1:
        raise ValueError("map rows must be non-empty and equal length")
    h, w = len(rows), len(rows[0])
    walls = np.zeros((h, w), dtype=bool)
    agent = goal = stairs = None
    gold, temple, zombies = [], [], []
    for r, line in enumerate(rows):
        for c, ch in enumerate(line):
            if ch == "#":
                walls[r, c] = True
            elif ch == "A":
                agent = (r, c)
            elif ch == "G":
                goal = (r, c)
            elif ch == ">":
                stairs = (r, c)
            elif ch == "$":
                gold.append((r, c))
            elif ch == "T":
                temple.append((r, c))
            elif ch == "Z":
                zombies.append((r, c))
            elif ch != ".":
                raise ValueError(f"unknown map character {ch!r} at ({r}, {c})")
    if agent is None:
        raise ValueError("map has no agent start 'A'")
    return AsciiMap(rows=rows, walls=walls, agent=agent, goal=goal, stairs=stairs,
                    gold=gold, temple=temple, zombies=zombies)


def load_asset(name: str) -> AsciiMap:
    text = importlib.resources.files("sol.envs").joinpath("assets", name).read_text("utf-8")
    return parse_map(text)


class Env:
    """Uniform reset/step interface all environments implement."""

    env_id: str
    obs_dim: int
    action_kind: str
    action_dim: int

    def default_options(self) -> tuple[OptionSpec, ...]:
        raise NotImplementedError

    def reset(self, rng: np.random.Generator) -> np.ndarray:
        raise NotImplementedError

    def step(self, action) -> StepResult:
        raise NotImplementedError
