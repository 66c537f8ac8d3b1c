"""Experiment configuration: schema, flat-text config files, validation.

Config files are UTF-8 text, one ``key = value`` pair per line, one experiment
per file.  ``#`` starts a comment.  Unknown keys are errors.  Keys not present
fall back to the defaults below.  Serialization is canonical (fixed key order,
``repr`` for floats) so serialize -> parse -> serialize is byte-identical.
"""

from __future__ import annotations

import enum
import dataclasses
import logging
from dataclasses import dataclass

from .options import OptionSet, OptionSpec, RewardKind, DEFAULT_LENGTHS

log = logging.getLogger("sol")


class ConfigError(ValueError):
    """Raised with the full list of violated constraints, one message per line."""

    def __init__(self, errors: list[str]):
        self.errors = list(errors)
        super().__init__("\n".join(self.errors))


class AlgoVariant(enum.Enum):
    SOL = "sol"
    APPO_TASK = "appo_task"
    APPO_TASK_PLUS_OPTIONS = "appo_task_plus_options"
    SOL_HIPPO = "sol_hippo"

    @property
    def hierarchical(self) -> bool:
        return self in (AlgoVariant.SOL, AlgoVariant.SOL_HIPPO)


@dataclass
class TrainConfig:
    env: str = "treasure_dash"
    algo_variant: AlgoVariant = AlgoVariant.SOL
    total_steps: int = 2_000_000

    gamma: float = 0.99
    vtrace_rho: float = 1.0
    vtrace_c: float = 1.0
    ppo_clip_ratio: float = 0.1
    ppo_clip_value: float = 1.0
    ppo_epochs: int = 1
    rollout_length: int = 64
    batch_size: int = 4096
    learning_rate: float = 1e-4
    entropy_coeff: float = 0.003
    # when non-negative, the exploration coefficient anneals linearly from
    # entropy_coeff to this value over total_steps; negative keeps it constant
    entropy_coeff_final: float = -1.0
    # fraction of training to hold entropy_coeff before annealing begins
    entropy_anneal_start: float = 0.0
    value_loss_coeff: float = 0.5
    max_grad_norm: float = 4.0
    reward_scaling: float = 0.01
    normalize_advantage: bool = True

    num_env_workers: int = 4
    envs_per_worker: int = 16
    queue_depth: int = 2
    sync: bool = False
    seed: int = 0

    hidden_size: int = 64
    embed_dim: int = 16

    # "adaptive" or "fixed:<n>"
    option_length_mode: str = "adaptive"
    option_lengths: str = ",".join(str(l) for l in DEFAULT_LENGTHS)
    # "" means the env's default option menu; otherwise "kind:scale,kind:scale,..."
    option_rewards: str = ""
    controller_reward_scale: float = 1.0
    controller_entropy_scale_extra: float = 1.0

    metrics_interval: int = 50_000
    checkpoint_every: int = 500_000

    def entropy_coeff_at(self, progress: float) -> float:
        """Exploration coefficient at a training progress fraction in [0, 1]."""
        if self.entropy_coeff_final < 0.0:
            return self.entropy_coeff
        start = self.entropy_anneal_start
        frac = min(max(progress, 0.0), 1.0)
        if frac <= start:
            return self.entropy_coeff
        ramp = (frac - start) / (1.0 - start) if start < 1.0 else 1.0
        return self.entropy_coeff + (self.entropy_coeff_final - self.entropy_coeff) * ramp

    @property
    def fixed_option_length(self) -> int | None:
        """Parsed fixed length, or None when adaptive."""
        if self.option_length_mode == "adaptive":
            return None
        return int(self.option_length_mode.split(":", 1)[1])


_FIELDS = {f.name: f for f in dataclasses.fields(TrainConfig)}


def _format_value(v) -> str:
    if isinstance(v, AlgoVariant):
        return v.value
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return repr(v)
    return str(v)


def _parse_value(name: str, text: str):
    ftype = _FIELDS[name].type
    text = text.strip()
    if ftype == "AlgoVariant":
        try:
            return AlgoVariant(text)
        except ValueError:
            raise ConfigError([f"{name}: unknown algorithm variant {text!r}"])
    if ftype == "bool":
        if text not in ("true", "false"):
            raise ConfigError([f"{name}: expected true/false, got {text!r}"])
        return text == "true"
    if ftype == "int":
        return int(text)
    if ftype == "float":
        return float(text)
    return text


def serialize_config(cfg: TrainConfig) -> str:
    lines = [f"{f.name} = {_format_value(getattr(cfg, f.name))}" for f in dataclasses.fields(TrainConfig)]
    return "\n".join(lines) + "\n"


def parse_config_text(text: str) -> TrainConfig:
    values = {}
    errors = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            errors.append(f"line {lineno}: expected 'key = value', got {raw!r}")
            continue
        key, _, val = line.partition("=")
        key = key.strip()
        if key not in _FIELDS:
            errors.append(f"line {lineno}: unknown key {key!r}")
            continue
        if key in values:
            errors.append(f"line {lineno}: duplicate key {key!r}")
            continue
        try:
            values[key] = _parse_value(key, val)
        except ConfigError as e:
            errors.extend(e.errors)
        except ValueError:
            errors.append(f"line {lineno}: bad value for {key!r}: {val.strip()!r}")
    if errors:
        raise ConfigError(errors)
    return TrainConfig(**values)


def load_config(path) -> TrainConfig:
    with open(path, "r", encoding="utf-8") as f:
        return parse_config_text(f.read())


def save_config(cfg: TrainConfig, path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as f:
        f.write(serialize_config(cfg))


def parse_option_rewards(text: str) -> tuple[OptionSpec, ...]:
    """Parse ``kind:scale,kind:scale`` into option specs."""
    out = []
    errors = []
    seen: dict[str, int] = {}
    for i, part in enumerate(p for p in text.split(",") if p.strip()):
        kind_name, _, scale = part.strip().partition(":")
        try:
            kind = RewardKind(kind_name.strip())
        except ValueError:
            errors.append(f"option_rewards: unknown reward kind {kind_name.strip()!r}")
            continue
        seen[kind.value] = seen.get(kind.value, 0) + 1
        name = kind.value if seen[kind.value] == 1 else f"{kind.value}{seen[kind.value]}"
        out.append(OptionSpec(id=i, name=name, reward_kind=kind,
                              reward_scale=float(scale) if scale else 1.0))
    if errors:
        raise ConfigError(errors)
    return tuple(out)


def build_option_set(cfg: TrainConfig, default_options: tuple[OptionSpec, ...]) -> OptionSet:
    """Assemble the OptionSet a config describes, given the env's default menu."""
    options = parse_option_rewards(cfg.option_rewards) if cfg.option_rewards else default_options
    lengths = tuple(int(x) for x in cfg.option_lengths.split(","))
    return OptionSet(
        options=options,
        lengths=lengths,
        controller_reward_scale=cfg.controller_reward_scale,
        controller_entropy_scale_extra=cfg.controller_entropy_scale_extra,
    )


def validate_config(cfg: TrainConfig, opts: OptionSet) -> tuple[TrainConfig, OptionSet]:
    """Check every cross-field constraint; normalize variant-implied settings.

    Returns a (config, option set) pair with normalizations applied, or raises
    ConfigError listing every violated constraint.  No partial normalization
    happens on error.
    """
    errors = []
    if not 0.0 < cfg.gamma < 1.0:
        errors.append(f"gamma out of range (0, 1): {cfg.gamma}")
    for name in ("vtrace_rho", "vtrace_c", "ppo_clip_ratio", "ppo_clip_value",
                 "learning_rate", "value_loss_coeff", "max_grad_norm", "reward_scaling"):
        v = getattr(cfg, name)
        if not v > 0:
            errors.append(f"{name} must be positive: {v}")
    if cfg.entropy_coeff < 0:
        errors.append(f"entropy_coeff must be non-negative: {cfg.entropy_coeff}")
    if not 0.0 <= cfg.entropy_anneal_start <= 1.0:
        errors.append(
            f"entropy_anneal_start must be in [0, 1]: {cfg.entropy_anneal_start}")
    for name in ("ppo_epochs", "rollout_length", "batch_size", "total_steps",
                 "num_env_workers", "envs_per_worker", "queue_depth",
                 "hidden_size", "embed_dim", "metrics_interval", "checkpoint_every"):
        v = getattr(cfg, name)
        if v <= 0:
            errors.append(f"{name} must be a positive integer: {v}")
    if cfg.batch_size % cfg.rollout_length != 0:
        errors.append(
            f"batch_size ({cfg.batch_size}) must be a multiple of rollout_length ({cfg.rollout_length})"
        )
    if cfg.option_length_mode != "adaptive":
        head, _, tail = cfg.option_length_mode.partition(":")
        if head != "fixed" or not tail.isdigit() or int(tail) <= 0:
            errors.append(
                f"option_length_mode must be 'adaptive' or 'fixed:<n>': {cfg.option_length_mode!r}"
            )
    if errors:
        raise ConfigError(errors)

    if cfg.algo_variant is AlgoVariant.SOL_HIPPO:
        # The hierarchy-without-intrinsic-rewards variant trains every option on
        # the task reward; silently repurposing mismatched reward kinds would be
        # surprising, so warn when we normalize them.
        changed = [o.name for o in opts.options if o.reward_kind is not RewardKind.TASK_REWARD]
        if changed:
            log.warning(
                "sol_hippo forces task-reward options; overriding reward kinds for: %s",
                ", ".join(changed),
            )
            opts = dataclasses.replace(
                opts,
                options=tuple(
                    dataclasses.replace(o, reward_kind=RewardKind.TASK_REWARD, reward_scale=1.0)
                    for o in opts.options
                ),
            )
    return cfg, opts
