"""Ablation suites: fixed vs adaptive lengths, option quality, baselines.

Each suite expands a base config into a list of named variants, trains them
sequentially (several seeds each), evaluates the final parameters, and writes
a summary CSV.  A variant that crashes is flagged in the summary and the
suite continues.
"""

from __future__ import annotations

import csv
import dataclasses
import logging
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .config import AlgoVariant, TrainConfig, build_option_set
from .envs import make_env
from .evaluate import evaluate_params, two_standard_errors
from .options import OptionSet, OptionSpec, RewardKind, with_duplicate_options, with_useless_options
from .train import train

log = logging.getLogger("sol")

SUITES = ("lengths", "option_quality", "baselines")
FIXED_LENGTH_GRID = (2, 4, 8, 16, 32, 64)


@dataclass
class Variant:
    name: str
    cfg: TrainConfig
    opts: OptionSet | None = None      # None: derive from cfg + env defaults


@dataclass
class VariantResult:
    name: str
    seed: int
    ok: bool
    mean_return: float = float("nan")
    two_se: float = float("nan")
    success_rate: float | None = None
    error: str = ""


def _useless_extras(env_id: str) -> tuple[OptionSpec, ...]:
    """Two task-unrelated options: a novelty 'scout' where the env reports
    cell visits, otherwise a second motionless option."""
    motionless = OptionSpec(0, "motionless", RewardKind.ZERO, 1.0)
    if env_id.startswith("point_"):
        return (motionless, OptionSpec(0, "motionless2", RewardKind.ZERO, 1.0))
    return (OptionSpec(0, "scout", RewardKind.SCOUT, 1.0), motionless)


def expand_suite(suite: str, base: TrainConfig) -> list[Variant]:
    if suite not in SUITES:
        raise ValueError(f"unknown suite {suite!r}; choose one of {SUITES}")
    if suite == "lengths":
        variants = [Variant("adaptive", dataclasses.replace(base, option_length_mode="adaptive"))]
        for n in FIXED_LENGTH_GRID:
            variants.append(Variant(
                f"fixed_{n}", dataclasses.replace(base, option_length_mode=f"fixed:{n}")))
        return variants
    if suite == "baselines":
        return [Variant(v.value, dataclasses.replace(base, algo_variant=v))
                for v in AlgoVariant]
    # option quality: grow the menu with duplicates or useless options
    sol = dataclasses.replace(base, algo_variant=AlgoVariant.SOL)
    defaults = make_env(base.env).default_options()
    opts = build_option_set(sol, defaults)
    n = opts.num_options
    return [
        Variant("default", sol, opts),
        Variant("plus_2_duplicates", sol, with_duplicate_options(opts, max(1, 2 // n))),
        Variant("plus_8_duplicates", sol, with_duplicate_options(opts, max(1, 8 // n))),
        Variant("plus_2_useless", sol, with_useless_options(opts, _useless_extras(base.env))),
    ]


def run_suite(suite: str, base: TrainConfig, out_dir, seeds: tuple[int, ...] = (0, 1, 2),
              eval_episodes: int = 100) -> list[VariantResult]:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    results: list[VariantResult] = []
    for variant in expand_suite(suite, base):
        for seed in seeds:
            cfg = dataclasses.replace(variant.cfg, seed=seed)
            run_dir = out / f"{variant.name}_seed{seed}"
            log.info("suite %s: running %s seed %d", suite, variant.name, seed)
            try:
                tr = train(cfg, run_dir, opts_override=variant.opts)
                report = evaluate_params(tr.params, tr.spec, cfg, tr.opts,
                                         eval_episodes, seed=seed + 10_000)
                results.append(VariantResult(
                    name=variant.name, seed=seed, ok=not tr.aborted_nan,
                    mean_return=report.mean_return, two_se=report.two_se,
                    success_rate=report.success_rate,
                    error="nan_abort" if tr.aborted_nan else ""))
            except Exception as e:  # flag and continue with the rest of the grid
                log.exception("suite %s: %s seed %d failed", suite, variant.name, seed)
                results.append(VariantResult(name=variant.name, seed=seed,
                                             ok=False, error=str(e)))
    write_suite_summary(results, out / "summary.csv")
    return results


def write_suite_summary(results: list[VariantResult], path) -> None:
    """Per-seed rows followed by per-variant aggregate rows."""
    by_name: dict[str, list[VariantResult]] = {}
    for r in results:
        by_name.setdefault(r.name, []).append(r)
    with open(path, "w", encoding="utf-8", newline="") as f:
        w = csv.writer(f)
        w.writerow(["variant", "seed", "ok", "mean_return", "two_se",
                    "success_rate", "error"])
        for r in results:
            w.writerow([r.name, r.seed, int(r.ok), r.mean_return, r.two_se,
                        "" if r.success_rate is None else r.success_rate, r.error])
        w.writerow([])
        w.writerow(["variant", "seeds_ok", "mean_over_seeds", "two_se_over_seeds",
                    "success_over_seeds", ""])
        for name, rs in by_name.items():
            good = [r for r in rs if r.ok]
            means = [r.mean_return for r in good]
            succ = [r.success_rate for r in good if r.success_rate is not None]
            w.writerow([
                name, f"{len(good)}/{len(rs)}",
                np.mean(means) if means else "",
                two_standard_errors(means) if len(means) > 1 else "",
                np.mean(succ) if succ else "", "",
            ])
