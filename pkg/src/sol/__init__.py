"""Hierarchical option learning with a shared network and a single-pass
mixed-policy advantage kernel."""

from .config import AlgoVariant, ConfigError, TrainConfig
from .options import OptionSet, OptionSpec, RewardKind
from .vtrace import VtraceInputs, VtraceOutputs, vtrace_parallel, vtrace_reference

__all__ = [
    "AlgoVariant", "ConfigError", "TrainConfig",
    "OptionSet", "OptionSpec", "RewardKind",
    "VtraceInputs", "VtraceOutputs", "vtrace_parallel", "vtrace_reference",
]

__version__ = "0.1.0"
