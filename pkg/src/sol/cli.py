"""Command-line entry point: train, eval, ablate, bench-vtrace."""

from __future__ import annotations

import argparse
import dataclasses
import logging
import os
import sys
from pathlib import Path

from .ablate import SUITES, run_suite
from .bench import DEFAULT_CELLS, bench_vtrace, dump_bench_csv
from .config import AlgoVariant, ConfigError, TrainConfig, load_config
from .envs import ENV_IDS
from .evaluate import dump_eval_csv, evaluate_checkpoint
from .train import train

log = logging.getLogger("sol")


def _add_config_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", type=Path, help="config file (key = value lines)")
    p.add_argument("--env", choices=ENV_IDS, help="environment id")
    p.add_argument("--algo", choices=[v.value for v in AlgoVariant],
                   help="algorithm variant")
    p.add_argument("--steps", type=int, help="total env steps to train")
    p.add_argument("--seed", type=int, help="training seed")
    p.add_argument("--option-lengths", metavar="adaptive|fixed:N",
                   help="length selection mode")
    p.add_argument("--sync", action="store_true", default=None,
                   help="deterministic single-thread collection")
    p.add_argument("--checkpoint-every", type=int, help="env steps between checkpoints")


def _resolve_config(args: argparse.Namespace) -> TrainConfig:
    cfg = load_config(args.config) if args.config else TrainConfig()
    overrides = {}
    if args.env is not None:
        overrides["env"] = args.env
    if args.algo is not None:
        overrides["algo_variant"] = AlgoVariant(args.algo)
    if args.steps is not None:
        overrides["total_steps"] = args.steps
    if args.seed is not None:
        overrides["seed"] = args.seed
    if args.option_lengths is not None:
        overrides["option_length_mode"] = args.option_lengths
    if args.sync:
        overrides["sync"] = True
    if args.checkpoint_every is not None:
        overrides["checkpoint_every"] = args.checkpoint_every
    return dataclasses.replace(cfg, **overrides)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="sol",
        description="Hierarchical option learning: training, evaluation, benchmarks.")
    sub = parser.add_subparsers(dest="command", required=True)

    p_train = sub.add_parser("train", help="run the actor-learner training loop")
    _add_config_flags(p_train)
    p_train.add_argument("--out-dir", type=Path, default=Path("runs/default"),
                         help="directory for metrics, checkpoints, config")

    p_eval = sub.add_parser("eval", help="evaluate a checkpoint")
    _add_config_flags(p_eval)
    p_eval.add_argument("checkpoint", type=Path)
    p_eval.add_argument("--eval-episodes", type=int, default=500)
    p_eval.add_argument("--greedy", action="store_true",
                        help="argmax actions instead of sampling")
    p_eval.add_argument("--out-dir", type=Path, help="also write the report CSV here")

    p_abl = sub.add_parser("ablate", help="run an ablation suite")
    _add_config_flags(p_abl)
    p_abl.add_argument("suite", choices=SUITES)
    p_abl.add_argument("--out-dir", type=Path, default=Path("runs/ablate"))
    p_abl.add_argument("--seeds", type=str, default="0,1,2",
                       help="comma-separated training seeds")
    p_abl.add_argument("--eval-episodes", type=int, default=100)

    p_bench = sub.add_parser("bench-vtrace",
                             help="time the advantage kernel on synthetic batches")
    p_bench.add_argument("--out-dir", type=Path, default=Path("runs/bench"))
    p_bench.add_argument("--repeats", type=int, default=5)
    p_bench.add_argument("--seed", type=int, default=0)
    return parser


def main(argv: list[str] | None = None) -> int:
    logging.basicConfig(
        level=os.environ.get("SOL_LOG_LEVEL", "INFO").upper(),
        format="%(asctime)s %(name)s %(levelname)s %(message)s")
    args = build_parser().parse_args(argv)
    try:
        return _dispatch(args)
    except (ConfigError, OSError, ValueError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 1


def _dispatch(args: argparse.Namespace) -> int:
    if args.command == "train":
        cfg = _resolve_config(args)
        result = train(cfg, args.out_dir)
        if result.aborted_nan:
            print("training aborted on non-finite update; "
                  f"last good parameters kept in {result.final_checkpoint}",
                  file=sys.stderr)
            return 2
        print(f"trained {result.env_steps} env steps, {result.updates} updates; "
              f"metrics: {result.metrics_path}; checkpoint: {result.final_checkpoint}")
        return 0

    if args.command == "eval":
        cfg = _resolve_config(args)
        report = evaluate_checkpoint(args.checkpoint, cfg, args.eval_episodes,
                                     seed=cfg.seed, greedy=args.greedy)
        print(f"episodes={report.episodes} mean_return={report.mean_return:.4f} "
              f"+-{report.two_se:.4f} (two standard errors)")
        if report.success_rate is not None:
            print(f"success_rate={report.success_rate:.3f}")
        if report.option_calls is not None:
            fr = report.call_fractions
            for o, name in enumerate(report.option_names):
                modal = report.modal_length(o)
                print(f"option {name}: call_fraction={fr[o]:.3f} "
                      f"modal_length={modal if modal is not None else '-'}")
        if args.out_dir:
            args.out_dir.mkdir(parents=True, exist_ok=True)
            path = args.out_dir / "eval_report.csv"
            dump_eval_csv(report, path)
            print(f"report written to {path}")
        return 0

    if args.command == "ablate":
        cfg = _resolve_config(args)
        seeds = tuple(int(s) for s in args.seeds.split(","))
        results = run_suite(args.suite, cfg, args.out_dir, seeds=seeds,
                            eval_episodes=args.eval_episodes)
        failed = [r for r in results if not r.ok]
        print(f"suite {args.suite}: {len(results) - len(failed)}/{len(results)} runs ok; "
              f"summary: {Path(args.out_dir) / 'summary.csv'}")
        return 0 if not failed else 2

    if args.command == "bench-vtrace":
        rows = bench_vtrace(DEFAULT_CELLS, repeats=args.repeats, seed=args.seed)
        args.out_dir.mkdir(parents=True, exist_ok=True)
        path = args.out_dir / "bench_vtrace.csv"
        dump_bench_csv(rows, path)
        for r in rows:
            print(f"B={r.batch:5d} T={r.horizon:4d} options={r.num_options} "
                  f"time={r.seconds_per_pass * 1e3:8.3f} ms "
                  f"max_err={r.max_abs_error:.2e}")
        print(f"csv written to {path}")
        return 0

    raise ValueError(f"unknown command {args.command!r}")


if __name__ == "__main__":
    sys.exit(main())
