"""Option definitions: intrinsic reward menus, execution-length menus, policy indices.

The hierarchy is described by an :class:`OptionSet`: an ordered list of options,
each with an intrinsic reward signal, plus the menu of execution lengths the
controller can pick from.  The controller itself always occupies the *last*
policy index, ``num_options``; all downstream code (wrapper, batch layout,
return kernel) shares this convention.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field, replace

import numpy as np

DEFAULT_LENGTHS = (1, 2, 4, 8, 16, 32, 64, 128)


class RewardKind(enum.Enum):
    """Closed enumeration of intrinsic reward signals an option can optimize."""

    DELTA_SCORE = "delta_score"
    DELTA_HEALTH = "delta_health"
    DELTA_GOLD = "delta_gold"
    AT_STAIRS = "at_stairs"
    VELOCITY_POS_X = "velocity_pos_x"
    VELOCITY_NEG_X = "velocity_neg_x"
    VELOCITY_POS_Y = "velocity_pos_y"
    VELOCITY_NEG_Y = "velocity_neg_y"
    TASK_REWARD = "task_reward"
    SCOUT = "scout"
    ZERO = "zero"


@dataclass(frozen=True)
class OptionSpec:
    """One option: an index, a label, and a scaled intrinsic reward signal."""

    id: int
    name: str
    reward_kind: RewardKind
    reward_scale: float = 1.0

    def __post_init__(self):
        if self.id < 0:
            raise ValueError(f"option id must be non-negative, got {self.id}")
        if not np.isfinite(self.reward_scale):
            raise ValueError(f"reward_scale must be finite, got {self.reward_scale}")
        if not isinstance(self.reward_kind, RewardKind):
            raise TypeError(f"reward_kind must be a RewardKind, got {self.reward_kind!r}")


@dataclass(frozen=True)
class OptionSet:
    """The full hierarchy description shared by wrapper, network and learner."""

    options: tuple[OptionSpec, ...]
    lengths: tuple[int, ...] = DEFAULT_LENGTHS
    controller_reward_scale: float = 1.0
    controller_entropy_scale_extra: float = 1.0

    def __post_init__(self):
        if len(self.options) < 1:
            raise ValueError("an OptionSet needs at least one option")
        ids = [o.id for o in self.options]
        if ids != list(range(len(self.options))):
            raise ValueError(f"option ids must be 0..{len(self.options) - 1} in order, got {ids}")
        if len(self.lengths) < 1:
            raise ValueError("length menu must not be empty")
        if any(l <= 0 for l in self.lengths):
            raise ValueError(f"lengths must be positive, got {self.lengths}")
        if any(b <= a for a, b in zip(self.lengths, self.lengths[1:])):
            raise ValueError(f"lengths must be strictly increasing, got {self.lengths}")
        if self.controller_entropy_scale_extra < 1.0:
            raise ValueError("controller_entropy_scale_extra must be >= 1")

    @property
    def num_options(self) -> int:
        return len(self.options)

    @property
    def num_policies(self) -> int:
        """Options plus the controller."""
        return len(self.options) + 1

    @property
    def controller_index(self) -> int:
        """The controller is always the last policy index."""
        return len(self.options)

    def names(self) -> list[str]:
        return [o.name for o in self.options]


@dataclass(frozen=True)
class PolicyIndex:
    """Which of the ``num_options + 1`` policies a timestep belongs to."""

    value: int
    num_options: int

    def __post_init__(self):
        if not 0 <= self.value <= self.num_options:
            raise ValueError(
                f"policy index {self.value} out of range for {self.num_options} options"
            )

    @property
    def is_controller(self) -> bool:
        return self.value == self.num_options


def one_hot(index: int, n: int) -> np.ndarray:
    """Unit vector of length ``n`` with a 1 at ``index``."""
    if not 0 <= index < n:
        raise IndexError(f"index {index} out of range for one-hot of size {n}")
    v = np.zeros(n, dtype=np.float64)
    v[index] = 1.0
    return v


def with_duplicate_options(opts: OptionSet, copies: int) -> OptionSet:
    """Duplicate every option ``copies`` extra times each (option-quality ablation)."""
    new: list[OptionSpec] = []
    for o in opts.options:
        new.append(o)
        for k in range(copies):
            new.append(replace(o, id=0, name=f"{o.name}{k + 2}"))
    new = [replace(o, id=i) for i, o in enumerate(new)]
    return replace(opts, options=tuple(new))


def with_useless_options(opts: OptionSet, extra: tuple[OptionSpec, ...]) -> OptionSet:
    """Append task-unrelated options (option-quality ablation)."""
    base = list(opts.options)
    for o in extra:
        base.append(replace(o, id=len(base)))
    return replace(opts, options=tuple(base))
