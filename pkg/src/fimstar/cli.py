"""Command-line entry point: train, sweep, eval, validate-config."""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np

from .drl import load_checkpoint
from .env import FimStarEnv
from .harness import (
    EVAL_STREAM_LABEL,
    ConfigError,
    config_hash,
    desk_overrides,
    env_config_from,
    evaluate_policy,
    load_config,
    parse_config_text,
    resolve_output_dir,
    run_convergence,
    run_sweep,
)
from .numerics import PrngStream


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="fimstar",
        description="Train and evaluate joint array-morph/beamforming/surface "
                    "configuration agents; reproduce the experiment sweeps.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", type=Path, default=None,
                       help="config file (section.key = value); defaults apply if omitted")
        p.add_argument("--seed", type=int, default=None,
                       help="override run.seeds with a single seed")
        p.add_argument("--out", type=Path, default=None,
                       help="output directory (beats run.output_dir and FIMSTAR_OUT)")
        p.add_argument("--desk", action="store_true",
                       help="start from the desk-scale preset instead of the full reference scale")

    p_train = sub.add_parser("train", help="convergence run: train agents, emit reward CSV")
    common(p_train)
    p_sweep = sub.add_parser("sweep", help="grid sweep: retrain per point, emit sum-rate CSV")
    common(p_sweep)
    p_eval = sub.add_parser("eval", help="evaluate a checkpointed policy on fresh channels")
    common(p_eval)
    p_eval.add_argument("--checkpoint", type=Path, required=True)
    p_val = sub.add_parser("validate-config", help="check a config file and exit")
    common(p_val)
    return parser


def _load(args) -> "ExperimentConfig":
    overrides = desk_overrides() if args.desk else None
    if args.config is None:
        cfg = parse_config_text("", overrides=overrides)
    else:
        cfg = load_config(args.config, desk=args.desk)
    if args.seed is not None:
        cfg = cfg.with_overrides(**{"run.seeds": (args.seed,)})
    return cfg


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = _load(args)
        if args.command == "validate-config":
            return 0
        if args.command == "train":
            path, _ = run_convergence(cfg, out_dir=args.out)
            print(f"wrote {path} (config {config_hash(cfg)})")
            return 0
        if args.command == "sweep":
            path, _ = run_sweep(cfg, out_dir=args.out)
            print(f"wrote {path} (config {config_hash(cfg)})")
            return 0
        if args.command == "eval":
            env_cfg = env_config_from(cfg)
            seed = cfg["run.seeds"][0]
            result = load_checkpoint(args.checkpoint, FimStarEnv(env_cfg, PrngStream(seed)))
            rates = evaluate_policy(result.agent, env_cfg,
                                    PrngStream(seed).substream(EVAL_STREAM_LABEL),
                                    cfg["run.eval_draws"])
            se = rates.std(ddof=1) / np.sqrt(len(rates)) if len(rates) > 1 else 0.0
            print(f"mean_sum_rate {rates.mean():.6g} +- {se:.3g} "
                  f"over {len(rates)} draws ({result.agent_kind})")
            return 0
        parser.error(f"unknown command {args.command}")
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1
    except (OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
