"""Environment suite: registry plus per-option intrinsic reward extraction."""

from __future__ import annotations

from ..options import OptionSpec, RewardKind
from .base import Env, StepResult, GRID_ACTIONS, parse_map, load_asset
from .treasure_dash import TreasureDashEnv
from .zombie_horde import ZombieHordeEnv
from .point_maze import PointMazeEnv

ENV_IDS = ("treasure_dash", "zombie_horde", "point_umaze", "point_gmaze")


def make_env(env_id: str) -> Env:
    if env_id == "treasure_dash":
        return TreasureDashEnv()
    if env_id == "zombie_horde":
        return ZombieHordeEnv()
    if env_id == "point_umaze":
        return PointMazeEnv("point_umaze.txt", "point_umaze")
    if env_id == "point_gmaze":
        return PointMazeEnv("point_gmaze.txt", "point_gmaze")
    raise ValueError(f"unknown env id {env_id!r}; choose one of {ENV_IDS}")


INFO_KINDS = {
    RewardKind.DELTA_SCORE: "delta_score",
    RewardKind.DELTA_HEALTH: "delta_health",
    RewardKind.DELTA_GOLD: "delta_gold",
    RewardKind.AT_STAIRS: "at_stairs",
    RewardKind.SCOUT: "new_cell",
}


def option_reward(spec: OptionSpec, info: dict[str, float], task_reward: float,
                  reward_scaling: float = 1.0) -> float:
    """Scaled intrinsic reward for one option at one step.

    Raw signal times the option's reward_scale times the global reward scaling.
    Velocity options reward only the matching sign: max(0, +/-v_axis).
    """
    kind = spec.reward_kind
    if kind is RewardKind.ZERO:
        raw = 0.0
    elif kind is RewardKind.TASK_REWARD:
        raw = task_reward
    elif kind in INFO_KINDS:
        key = INFO_KINDS[kind]
        if key not in info:
            raise ValueError(f"reward kind {kind.value} unsupported by this env")
        raw = info[key]
    elif kind is RewardKind.VELOCITY_POS_X:
        raw = max(0.0, _vel(info, "vx"))
    elif kind is RewardKind.VELOCITY_NEG_X:
        raw = max(0.0, -_vel(info, "vx"))
    elif kind is RewardKind.VELOCITY_POS_Y:
        raw = max(0.0, _vel(info, "vy"))
    elif kind is RewardKind.VELOCITY_NEG_Y:
        raw = max(0.0, -_vel(info, "vy"))
    else:  # pragma: no cover - RewardKind is a closed enum
        raise ValueError(f"unhandled reward kind {kind}")
    return raw * spec.reward_scale * reward_scaling


def _vel(info: dict[str, float], key: str) -> float:
    if key not in info:
        raise ValueError(f"velocity reward unsupported by this env (no {key!r} signal)")
    return info[key]
